//! Off-resonant photon scattering rates.
//!
//! `pt_*` evaluate the second-order (Kramers-Heisenberg) amplitude
//!
//! ```text
//! Γ_{i→f} = ℰ₀²/(4ħ²) · ω_sc³ Θ(ω_sc)/(3π ε₀ ħ c³)
//!           · Σ_q | Σ_k ⟨f|d_q|k⟩⟨k|d_ℓ|i⟩ / (ω_k − ω_i − ω_ℓ) |²
//! ```
//!
//! over every sublevel `k` of both P manifolds, with `ω_sc = ω_ℓ − (ω_f − ω_i)`.
//! `cda_rates` and `w3_rates` are the closed-form models for the clock state
//! under σ⁺ light, written in terms of the coupling `g` of
//! [`crate::lightshift::coupling_g`].

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::angmom::AtomState;
use crate::atomdata::{IonModel, ManifoldLabel};
use crate::error::{Error, Result};
use crate::lightshift;
use crate::units;

/// Default half-width of the window around each P resonance in which the
/// perturbative engines refuse to evaluate.
pub const DEFAULT_GUARD: f64 = 2.0 * PI * 10e9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum ScatterModel {
    #[serde(rename = "cda")]
    Cda,
    #[serde(rename = "w3")]
    W3,
    #[serde(rename = "pt")]
    Pt,
}

impl ScatterModel {
    pub fn as_str(self) -> &'static str {
        match self {
            ScatterModel::Cda => "cda",
            ScatterModel::W3 => "w3",
            ScatterModel::Pt => "pt",
        }
    }
}

impl std::str::FromStr for ScatterModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cda" => Ok(ScatterModel::Cda),
            "w3" | "omega3" => Ok(ScatterModel::W3),
            "pt" => Ok(ScatterModel::Pt),
            _ => Err(Error::InvalidInput(format!("unknown model {s:?}"))),
        }
    }
}

/// A monochromatic beam. `polarization[q + 1]` is the weight of `d_q` in the
/// coupling operator `d_ℓ = Σ_q ε_q d_q`, so pure σ⁺ light drives `Δm = +1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaserField {
    pub omega: f64,
    /// W/m²
    pub intensity: f64,
    pub polarization: [Complex64; 3],
}

impl LaserField {
    pub fn new(omega: f64, intensity: f64, polarization: [Complex64; 3]) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::InvalidInput(format!("laser frequency must be positive, got {omega}")));
        }
        if !(intensity >= 0.0 && intensity.is_finite()) {
            return Err(Error::InvalidInput(format!("intensity must be >= 0, got {intensity}")));
        }
        let norm: f64 = polarization.iter().map(|c| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("polarization not normalised (|ε|² = {norm})")));
        }
        Ok(LaserField {
            omega,
            intensity,
            polarization,
        })
    }

    fn pure(omega: f64, intensity: f64, q: i32) -> Result<Self> {
        let mut p = [Complex64::new(0.0, 0.0); 3];
        p[(q + 1) as usize] = Complex64::new(1.0, 0.0);
        Self::new(omega, intensity, p)
    }

    pub fn sigma_plus(omega: f64, intensity: f64) -> Result<Self> {
        Self::pure(omega, intensity, 1)
    }

    pub fn sigma_minus(omega: f64, intensity: f64) -> Result<Self> {
        Self::pure(omega, intensity, -1)
    }

    pub fn pi(omega: f64, intensity: f64) -> Result<Self> {
        Self::pure(omega, intensity, 0)
    }

    pub fn with_intensity(&self, intensity: f64) -> Result<Self> {
        Self::new(self.omega, intensity, self.polarization)
    }

    /// `ℰ₀²`
    pub fn field_sq(&self) -> f64 {
        units::field_amplitude_sq(self.intensity)
    }

    #[inline]
    pub(crate) fn eps(&self, q: i32) -> Complex64 {
        self.polarization[(q + 1) as usize]
    }
}

/// Options for the perturbative engines.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PtOptions {
    /// Half-width (rad/s) of the excluded window around each resonance.
    pub guard: f64,
}

impl Default for PtOptions {
    fn default() -> Self {
        PtOptions { guard: DEFAULT_GUARD }
    }
}

/// Rates into each long-lived final manifold, s⁻¹.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PerManifold {
    #[serde(rename = "g")]
    pub s: f64,
    #[serde(rename = "g'")]
    pub d32: f64,
    #[serde(rename = "g''")]
    pub d52: f64,
}

impl PerManifold {
    pub fn get(&self, label: ManifoldLabel) -> f64 {
        match label {
            ManifoldLabel::G => self.s,
            ManifoldLabel::GPrime => self.d32,
            ManifoldLabel::GDoublePrime => self.d52,
            _ => 0.0,
        }
    }

    pub fn sum(&self) -> f64 {
        self.s + self.d32 + self.d52
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScatterBreakdown {
    pub model: ScatterModel,
    /// Includes Rayleigh scattering.
    pub per_manifold: PerManifold,
    pub total: f64,
    pub rayleigh: f64,
    pub raman: f64,
    /// Fraction of Raman events ending in D5/2.
    pub eta_d52: f64,
}

impl ScatterBreakdown {
    fn assemble(model: ScatterModel, per_manifold: PerManifold, rayleigh: f64) -> Self {
        let total = per_manifold.sum();
        let mut raman = total - rayleigh;
        // cancellation noise when Rayleigh dominates
        if raman < 0.0 && raman > -1e-12 * total {
            raman = 0.0;
        }
        let eta_d52 = if raman > 0.0 { per_manifold.d52 / raman } else { 0.0 };
        ScatterBreakdown {
            model,
            per_manifold,
            total,
            rayleigh,
            raman,
            eta_d52,
        }
    }
}

pub(crate) fn check_guard(ion: &IonModel, omega_l: f64, initial: ManifoldLabel, guard: f64) -> Result<()> {
    if !(guard >= 0.0) {
        return Err(Error::InvalidInput(format!("guard band must be >= 0, got {guard}")));
    }
    for k in ManifoldLabel::UPPER {
        let det = ion.transition_omega(k, initial) - omega_l;
        if det.abs() < guard || det == 0.0 {
            return Err(Error::ResonanceProximity {
                omega_l,
                upper: k.to_string(),
                lower: initial.to_string(),
                detuning: -det,
                guard,
            });
        }
    }
    Ok(())
}

fn check_lower(state: &AtomState, what: &str) -> Result<()> {
    if state.manifold.is_upper() {
        return Err(Error::InvalidInput(format!(
            "{what} state must lie in g, g' or g'', found {}",
            state.manifold
        )));
    }
    Ok(())
}

/// `ℰ₀²/(4ħ²) · ω_sc³/(3π ε₀ ħ c³)`, zero when `ω_sc <= 0`.
fn rate_prefactor(laser: &LaserField, omega_sc: f64) -> f64 {
    if omega_sc <= 0.0 {
        return 0.0;
    }
    laser.field_sq() / (4.0 * units::HBAR * units::HBAR) * omega_sc.powi(3) / units::emission_denominator()
}

/// Second-order amplitudes `Σ_k ⟨b|d_q|k⟩⟨k|d_ℓ|i⟩/(ω_k − ω_i − ω_ℓ)` for every
/// lower-manifold basis state `b`, indexed `[basis index][q + 1]`.
fn amplitudes(ion: &IonModel, laser: &LaserField, initial: &AtomState) -> Vec<[Complex64; 3]> {
    let ops = ion.dipoles();
    let n = ops.dim();
    let omega_i = ion.energy(initial.manifold);
    let mut absorbed = vec![Complex64::new(0.0, 0.0); n];
    for k_label in ManifoldLabel::UPPER {
        let den = ion.energy(k_label) - omega_i - laser.omega;
        for k in ops.indices_of(k_label) {
            let mut v = Complex64::new(0.0, 0.0);
            for q in -1..=1 {
                let e = laser.eps(q);
                if e != Complex64::new(0.0, 0.0) {
                    v += e * ops.bra_basis(q, k, initial);
                }
            }
            absorbed[k] = v / den;
        }
    }
    let mut out = vec![[Complex64::new(0.0, 0.0); 3]; n];
    for (b, slot) in ops.basis().iter().enumerate() {
        if slot.manifold.is_upper() {
            continue;
        }
        for q in -1..=1 {
            let mut a = Complex64::new(0.0, 0.0);
            for (k, &v) in absorbed.iter().enumerate() {
                if v != Complex64::new(0.0, 0.0) {
                    a += ops.get(q, b, k) * v;
                }
            }
            out[b][(q + 1) as usize] = a;
        }
    }
    out
}

/// Scattering rate from `initial` to `final_state`, s⁻¹.
pub fn pt_rate(
    ion: &IonModel,
    laser: &LaserField,
    initial: &AtomState,
    final_state: &AtomState,
    opts: &PtOptions,
) -> Result<f64> {
    check_lower(initial, "initial")?;
    check_lower(final_state, "final")?;
    check_guard(ion, laser.omega, initial.manifold, opts.guard)?;
    let omega_sc = laser.omega - ion.transition_omega(final_state.manifold, initial.manifold);
    let pre = rate_prefactor(laser, omega_sc);
    if pre == 0.0 {
        return Ok(0.0);
    }
    let amps = amplitudes(ion, laser, initial);
    let s: f64 = (0..3)
        .map(|q| final_state.components.iter().map(|&(b, c)| amps[b][q] * c).sum::<Complex64>().norm_sqr())
        .sum();
    Ok(pre * s)
}

/// Rates from `initial` summed over every final sublevel of each lower manifold.
pub fn pt_breakdown(ion: &IonModel, laser: &LaserField, initial: &AtomState, opts: &PtOptions) -> Result<ScatterBreakdown> {
    check_lower(initial, "initial")?;
    check_guard(ion, laser.omega, initial.manifold, opts.guard)?;
    let ops = ion.dipoles();
    let amps = amplitudes(ion, laser, initial);
    let mut per = PerManifold::default();
    for label in ManifoldLabel::LOWER {
        let omega_sc = laser.omega - ion.transition_omega(label, initial.manifold);
        let pre = rate_prefactor(laser, omega_sc);
        if pre == 0.0 {
            continue;
        }
        let s: f64 = ops
            .indices_of(label)
            .map(|b| amps[b].iter().map(|a| a.norm_sqr()).sum::<f64>())
            .sum();
        match label {
            ManifoldLabel::G => per.s = pre * s,
            ManifoldLabel::GPrime => per.d32 = pre * s,
            _ => per.d52 = pre * s,
        }
    }
    let pre = rate_prefactor(laser, laser.omega);
    let elastic: f64 = (0..3)
        .map(|q| initial.components.iter().map(|&(b, c)| amps[b][q] * c).sum::<Complex64>().norm_sqr())
        .sum();
    Ok(ScatterBreakdown::assemble(ScatterModel::Pt, per, pre * elastic))
}

struct ClosedFormInputs {
    c: f64,
    delta: f64,
    fs: f64,
    a_eg: f64,
    a_egp: f64,
    a_epg: f64,
    a_epgp: f64,
    a_epgpp: f64,
}

fn closed_form_inputs(ion: &IonModel, g: f64, omega_l: f64) -> Result<ClosedFormInputs> {
    use ManifoldLabel::*;
    if !(g >= 0.0 && g.is_finite()) {
        return Err(Error::InvalidInput(format!("coupling g must be >= 0, got {g}")));
    }
    if !(omega_l > 0.0 && omega_l.is_finite()) {
        return Err(Error::InvalidInput(format!("laser frequency must be positive, got {omega_l}")));
    }
    let delta = omega_l - ion.energy(E);
    let fs = ion.fine_structure();
    for (k, det) in [(E, delta), (EPrime, delta - fs)] {
        if det == 0.0 {
            return Err(Error::ResonanceProximity {
                omega_l,
                upper: k.to_string(),
                lower: G.to_string(),
                detuning: 0.0,
                guard: 0.0,
            });
        }
    }
    Ok(ClosedFormInputs {
        c: g * g / 3.0,
        delta,
        fs,
        a_eg: ion.einstein_a(E, G),
        a_egp: ion.einstein_a(E, GPrime),
        a_epg: ion.einstein_a(EPrime, G),
        a_epgp: ion.einstein_a(EPrime, GPrime),
        a_epgpp: ion.einstein_a(EPrime, GDoublePrime),
    })
}

fn cda_rayleigh(p: &ClosedFormInputs) -> f64 {
    let (d, f) = (p.delta, p.fs);
    p.a_epg * p.c * (3.0 * d * d - 2.0 * d * f + f * f / 3.0) / (d * d * (d - f) * (d - f))
}

/// Constant-density-of-states model for the clock state under σ⁺ light.
pub fn cda_rates(ion: &IonModel, g: f64, omega_l: f64) -> Result<ScatterBreakdown> {
    let p = closed_form_inputs(ion, g, omega_l)?;
    let d2 = p.delta * p.delta;
    let dfs2 = (p.delta - p.fs) * (p.delta - p.fs);
    let per = PerManifold {
        s: p.c * (p.a_eg / d2 + 2.0 * p.a_epg / dfs2),
        d32: p.c * (p.a_egp / d2 + 2.0 * p.a_epgp / dfs2),
        d52: p.c * 2.0 * p.a_epgpp / dfs2,
    };
    Ok(ScatterBreakdown::assemble(ScatterModel::Cda, per, cda_rayleigh(&p)))
}

/// `(ω_sc/ω_line)³ Θ(ω_sc)`
fn dos(omega_sc: f64, omega_line: f64) -> f64 {
    if omega_sc <= 0.0 {
        0.0
    } else {
        (omega_sc / omega_line).powi(3)
    }
}

/// Closed-form model with the ω_sc³ density of final photon states.
pub fn w3_rates(ion: &IonModel, g: f64, omega_l: f64) -> Result<ScatterBreakdown> {
    use ManifoldLabel::*;
    let p = closed_form_inputs(ion, g, omega_l)?;
    let d2 = p.delta * p.delta;
    let dfs2 = (p.delta - p.fs) * (p.delta - p.fs);
    let (w_eg, w_epg) = (ion.energy(E), ion.energy(EPrime));
    let (w_ggp, w_ggpp) = (ion.energy(GPrime), ion.energy(GDoublePrime));
    let per = PerManifold {
        s: p.c * (dos(omega_l, w_eg) * p.a_eg / d2 + dos(omega_l, w_epg) * 2.0 * p.a_epg / dfs2),
        d32: p.c
            * (dos(omega_l - w_ggp, w_eg - w_ggp) * p.a_egp / d2
                + dos(omega_l - w_ggp, w_epg - w_ggp) * 2.0 * p.a_epgp / dfs2),
        d52: p.c * dos(omega_l - w_ggpp, w_epg - w_ggpp) * 2.0 * p.a_epgpp / dfs2,
    };
    let rayleigh = dos(omega_l, w_epg) * cda_rayleigh(&p);
    Ok(ScatterBreakdown::assemble(ScatterModel::W3, per, rayleigh))
}

/// Evaluates one model for the clock state `|g, F=I−1/2, m_F=0⟩` under a σ⁺
/// beam.
pub fn clock_rates(ion: &IonModel, model: ScatterModel, omega_l: f64, intensity: f64, opts: &PtOptions) -> Result<ScatterBreakdown> {
    let laser = LaserField::sigma_plus(omega_l, intensity)?;
    check_guard(ion, omega_l, ManifoldLabel::G, opts.guard)?;
    match model {
        ScatterModel::Cda => cda_rates(ion, lightshift::coupling_g(ion, &laser).value, omega_l),
        ScatterModel::W3 => w3_rates(ion, lightshift::coupling_g(ion, &laser).value, omega_l),
        ScatterModel::Pt => pt_breakdown(ion, &laser, &AtomState::clock_lower(ion)?, opts),
    }
}

/// Uniform grid of `n` points from `lo` to `hi` inclusive.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidInput("grid needs at least one point".into()));
    }
    if !(lo > 0.0 && lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::InvalidInput(format!("invalid frequency range [{lo}, {hi}]")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    if lo == hi {
        return Err(Error::InvalidInput("empty frequency range for a multi-point grid".into()));
    }
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n)
        .map(|k| if k == n - 1 { hi } else { lo + step * k as f64 })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub omega_l: f64,
    pub cda: ScatterBreakdown,
    pub w3: ScatterBreakdown,
    pub pt: ScatterBreakdown,
}

impl SweepRow {
    pub fn models(&self) -> [&ScatterBreakdown; 3] {
        [&self.cda, &self.w3, &self.pt]
    }
}

pub const SWEEP_CSV_HEADER: [&str; 10] = [
    "omega_l_rad_s",
    "lambda_nm",
    "model",
    "gamma_total",
    "gamma_rayleigh",
    "gamma_raman",
    "gamma_S",
    "gamma_D32",
    "gamma_D52",
    "eta_D52",
];

/// Scientific notation with nine significant digits.
pub fn fmt9(x: f64) -> String {
    format!("{x:.8e}")
}

/// Evaluates all three models for the clock state on a uniform grid.
/// Rows come back in grid order whatever the thread count.
pub fn sweep_models(ion: &IonModel, intensity: f64, lo: f64, hi: f64, n: usize, opts: &PtOptions) -> Result<Vec<SweepRow>> {
    let grid = uniform_grid(lo, hi, n)?;
    ion.dipoles();
    grid.par_iter()
        .map(|&w| {
            Ok(SweepRow {
                omega_l: w,
                cda: clock_rates(ion, ScatterModel::Cda, w, intensity, opts)?,
                w3: clock_rates(ion, ScatterModel::W3, w, intensity, opts)?,
                pt: clock_rates(ion, ScatterModel::Pt, w, intensity, opts)?,
            })
        })
        .collect()
}

/// Writes sweep rows, one line per grid point per model.
pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidInput(format!("CSV write failed: {e}"));
    w.write_record(SWEEP_CSV_HEADER).map_err(io)?;
    for row in rows {
        let lambda_nm = units::omega_to_wavelength(row.omega_l)? * 1e9;
        for b in row.models() {
            w.write_record([
                fmt9(row.omega_l),
                fmt9(lambda_nm),
                b.model.as_str().to_string(),
                fmt9(b.total),
                fmt9(b.rayleigh),
                fmt9(b.raman),
                fmt9(b.per_manifold.s),
                fmt9(b.per_manifold.d32),
                fmt9(b.per_manifold.d52),
                fmt9(b.eta_d52),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::InvalidInput(format!("CSV write failed: {e}")))?;
    Ok(())
}
