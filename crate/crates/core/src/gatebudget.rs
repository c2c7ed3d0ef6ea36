//! Gate times and scattering-limited gate errors.
//!
//! ```text
//! ε_1q ≈ 2 τ_1q Γ   = π Γ / Ω_R               τ_1q = π / (2 Ω_R)
//! ε_2q ≈ n τ_2q Γ̃·2 = n π √K Γ̃ / (η Ω_R')    τ_2q = π √K / (2 η Ω_R')
//! ```
//!
//! with `n` the number of beams. Only Raman scattering enters the budget.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::atomdata::{IonModel, ManifoldLabel};
use crate::error::{Error, Result};
use crate::lightshift::{self, QubitPair, StarkOptions};
use crate::scatter::{self, LaserField, PtOptions, ScatterModel};
use crate::units;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BeamConfig {
    /// Two beams of intensity I.
    #[serde(rename = "one_qubit_two_beam")]
    OneQubitTwoBeam,
    /// Beams of intensity I and I, plus one of 2I counter-propagating.
    #[serde(rename = "two_qubit_three_beam")]
    TwoQubitThreeBeam,
    /// Four balanced beams of intensity I.
    #[serde(rename = "two_qubit_four_beam")]
    TwoQubitFourBeam,
}

impl BeamConfig {
    pub fn beam_count(self) -> u32 {
        match self {
            BeamConfig::OneQubitTwoBeam => 2,
            BeamConfig::TwoQubitThreeBeam => 3,
            BeamConfig::TwoQubitFourBeam => 4,
        }
    }

    /// Mean beam intensity in units of I.
    pub fn mean_intensity(self) -> f64 {
        match self {
            BeamConfig::TwoQubitThreeBeam => 4.0 / 3.0,
            _ => 1.0,
        }
    }

    /// Effective Rabi frequency in units of the Rabi frequency of one pair of
    /// beams of intensity I.
    pub fn rabi_enhancement(self) -> f64 {
        match self {
            BeamConfig::TwoQubitThreeBeam => std::f64::consts::SQRT_2,
            _ => 1.0,
        }
    }

    pub fn is_two_qubit(self) -> bool {
        self != BeamConfig::OneQubitTwoBeam
    }
}

impl std::str::FromStr for BeamConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "2" | "one_qubit_two_beam" => Ok(BeamConfig::OneQubitTwoBeam),
            "3" | "two_qubit_three_beam" => Ok(BeamConfig::TwoQubitThreeBeam),
            "4" | "two_qubit_four_beam" => Ok(BeamConfig::TwoQubitFourBeam),
            _ => Err(Error::InvalidInput(format!("unknown beam configuration {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Geometry {
    #[serde(rename = "counter_propagating")]
    CounterPropagating,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GateConfig {
    pub kind: BeamConfig,
    /// Number of phase-space loops.
    pub loops: u32,
    /// Motional mode angular frequency, rad/s.
    pub mode_omega: f64,
    pub geometry: Geometry,
    /// kg
    pub ion_mass: f64,
    /// Use `1 − exp(−Σ τΓ)` instead of its linearization.
    pub exponential: bool,
}

impl GateConfig {
    pub fn new(kind: BeamConfig, loops: u32, mode_omega: f64, ion_mass: f64) -> Result<Self> {
        if loops < 1 {
            return Err(Error::InvalidInput("loop count K must be >= 1".into()));
        }
        if !(mode_omega > 0.0 && mode_omega.is_finite()) {
            return Err(Error::InvalidInput(format!("mode frequency must be positive, got {mode_omega}")));
        }
        if !(ion_mass > 0.0 && ion_mass.is_finite()) {
            return Err(Error::InvalidInput(format!("ion mass must be positive, got {ion_mass}")));
        }
        Ok(GateConfig {
            kind,
            loops,
            mode_omega,
            geometry: Geometry::CounterPropagating,
            ion_mass,
            exponential: false,
        })
    }

    /// Three-beam gate on `ion` with K=1 and a 2π×5 MHz mode.
    pub fn default_for(ion: &IonModel) -> Self {
        Self::new(BeamConfig::TwoQubitThreeBeam, 1, 2.0 * PI * 5e6, ion.mass()).expect("valid defaults")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorBudget {
    pub model: ScatterModel,
    pub epsilon_1q: f64,
    pub epsilon_2q: f64,
    /// Duration of the gate in `config.kind`, s.
    pub gate_time: f64,
    /// Raman rate at the mean beam intensity, s⁻¹.
    pub scattering_rate_used: f64,
}

/// `η = Δk √(ħ / (2 m ω_mode))` with `Δk = 2ω_ℓ/c`.
pub fn lamb_dicke(config: &GateConfig, omega_l: f64) -> f64 {
    let dk = match config.geometry {
        Geometry::CounterPropagating => 2.0 * omega_l / units::C,
    };
    dk * (units::HBAR / (2.0 * config.ion_mass * config.mode_omega)).sqrt()
}

fn linear_or_exp(x: f64, exponential: bool) -> f64 {
    if exponential {
        -(-x).exp_m1()
    } else {
        x
    }
}

/// `π Γ / Ω_R`
pub fn one_qubit_error(rate: f64, rabi: f64) -> Result<f64> {
    one_qubit_error_with(rate, rabi, false)
}

pub fn one_qubit_error_with(rate: f64, rabi: f64, exponential: bool) -> Result<f64> {
    if !(rabi > 0.0) {
        return Err(Error::InvalidInput(format!("Rabi frequency must be positive, got {rabi}")));
    }
    if !(rate >= 0.0) {
        return Err(Error::InvalidInput(format!("rate must be >= 0, got {rate}")));
    }
    Ok(linear_or_exp(PI * rate / rabi, exponential))
}

/// `n π √K Γ̃ / (η Ω_R')` for the beam count `n` of `config`.
pub fn two_qubit_error(rate_avg: f64, rabi_prime: f64, eta: f64, config: &GateConfig) -> Result<f64> {
    if !(rabi_prime > 0.0) {
        return Err(Error::InvalidInput(format!("Rabi frequency must be positive, got {rabi_prime}")));
    }
    if !(eta > 0.0) {
        return Err(Error::InvalidInput(format!("Lamb-Dicke parameter must be positive, got {eta}")));
    }
    if !(rate_avg >= 0.0) {
        return Err(Error::InvalidInput(format!("rate must be >= 0, got {rate_avg}")));
    }
    let n = f64::from(config.kind.beam_count());
    let x = n * PI * f64::from(config.loops).sqrt() * rate_avg / (eta * rabi_prime);
    Ok(linear_or_exp(x, config.exponential))
}

/// Raman rate and Rabi frequency of a σ⁺σ⁺ beam pair at intensity `intensity`
/// under a closed-form model.
fn rate_and_rabi(ion: &IonModel, model: ScatterModel, omega_l: f64, intensity: f64) -> Result<(f64, f64)> {
    let laser = LaserField::sigma_plus(omega_l, intensity)?;
    let g = lightshift::coupling_g(ion, &laser).value;
    let rate = match model {
        ScatterModel::Cda => scatter::cda_rates(ion, g, omega_l)?.raman,
        ScatterModel::W3 => scatter::w3_rates(ion, g, omega_l)?.raman,
        ScatterModel::Pt => {
            return Err(Error::InvalidInput("gate-error curves use the cda or w3 model".into()));
        }
    };
    Ok((rate, lightshift::closed_form_rabi(ion, g, omega_l)?))
}

/// Intensity-independent `Γ_Raman / Ω_R` for one beam pair.
pub fn rate_to_rabi(ion: &IonModel, model: ScatterModel, omega_l: f64) -> Result<f64> {
    let (r1, o1) = rate_and_rabi(ion, model, omega_l, 1.0)?;
    let (r2, o2) = rate_and_rabi(ion, model, omega_l, 1e3)?;
    let (a, b) = (r1 / o1, r2 / o2);
    if (a - b).abs() > 1e-9 * a.abs().max(b.abs()) {
        return Err(Error::InvalidInput(format!(
            "Γ/Ω depends on intensity ({a:e} vs {b:e})"
        )));
    }
    Ok(a)
}

/// Errors of the gate in `config` for a closed-form model.
pub fn budget(ion: &IonModel, model: ScatterModel, omega_l: f64, intensity: f64, config: &GateConfig) -> Result<ErrorBudget> {
    let (rate_i, rabi_i) = rate_and_rabi(ion, model, omega_l, intensity)?;
    let eta = lamb_dicke(config, omega_l);
    let rate_avg = rate_i * config.kind.mean_intensity();
    let rabi_prime = rabi_i * config.kind.rabi_enhancement();
    let epsilon_1q = one_qubit_error_with(rate_i, rabi_i, config.exponential)?;
    let (epsilon_2q, gate_time) = if config.kind.is_two_qubit() {
        (
            two_qubit_error(rate_avg, rabi_prime, eta, config)?,
            PI * f64::from(config.loops).sqrt() / (2.0 * eta * rabi_prime),
        )
    } else {
        (0.0, PI / (2.0 * rabi_i))
    };
    Ok(ErrorBudget {
        model,
        epsilon_1q,
        epsilon_2q,
        gate_time,
        scattering_rate_used: rate_avg,
    })
}

/// Two-qubit error at `omega_l`, independent of intensity.
pub fn two_qubit_error_at(ion: &IonModel, model: ScatterModel, omega_l: f64, config: &GateConfig) -> Result<f64> {
    let ratio = rate_to_rabi(ion, model, omega_l)?;
    let eta = lamb_dicke(config, omega_l);
    let scale = config.kind.mean_intensity() / config.kind.rabi_enhancement();
    two_qubit_error(ratio * scale, 1.0, eta, config)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ErrorRow {
    pub omega_l: f64,
    pub lambda_nm: f64,
    pub model: ScatterModel,
    pub eta: f64,
    pub epsilon_2q: f64,
}

pub const ERROR_CSV_HEADER: [&str; 5] = ["omega_l_rad_s", "lambda_nm", "model", "eta_lamb_dicke", "epsilon_2q"];

/// Two-qubit error curves on a uniform grid, grid-point-major, one row per model.
pub fn error_sweep(
    ion: &IonModel,
    config: &GateConfig,
    lo: f64,
    hi: f64,
    n: usize,
    models: &[ScatterModel],
) -> Result<Vec<ErrorRow>> {
    if !config.kind.is_two_qubit() {
        return Err(Error::InvalidInput("error sweeps need a two-qubit configuration".into()));
    }
    let grid = scatter::uniform_grid(lo, hi, n)?;
    let rows: Result<Vec<Vec<ErrorRow>>> = grid
        .par_iter()
        .map(|&w| {
            let lambda_nm = units::omega_to_wavelength(w)? * 1e9;
            let eta = lamb_dicke(config, w);
            models
                .iter()
                .map(|&m| {
                    Ok(ErrorRow {
                        omega_l: w,
                        lambda_nm,
                        model: m,
                        eta,
                        epsilon_2q: two_qubit_error_at(ion, m, w, config)?,
                    })
                })
                .collect()
        })
        .collect();
    Ok(rows?.into_iter().flatten().collect())
}

pub fn write_error_csv<W: std::io::Write>(rows: &[ErrorRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidInput(format!("CSV write failed: {e}"));
    w.write_record(ERROR_CSV_HEADER).map_err(io)?;
    for r in rows {
        w.write_record([
            scatter::fmt9(r.omega_l),
            scatter::fmt9(r.lambda_nm),
            r.model.as_str().to_string(),
            scatter::fmt9(r.eta),
            scatter::fmt9(r.epsilon_2q),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::InvalidInput(format!("CSV write failed: {e}")))?;
    Ok(())
}

/// CDA two-qubit error in the limit of infinite red detuning, with the
/// Lamb-Dicke parameter held at its value for `omega_eta`.
///
/// As `Δ → −∞` both the CDA Raman rate and the Raman Rabi frequency fall as
/// `g²/Δ²`, leaving
/// `Γ/Ω → (A_eg − A_e'g + A_eg' + 2A_e'g' + 2A_e'g'') / ω_FS`.
pub fn cda_asymptote(ion: &IonModel, config: &GateConfig, omega_eta: f64) -> Result<f64> {
    use ManifoldLabel::*;
    if !config.kind.is_two_qubit() {
        return Err(Error::InvalidInput("asymptote is defined for two-qubit gates".into()));
    }
    let a = |u, l| ion.einstein_a(u, l);
    let ratio = (a(E, G) - a(EPrime, G) + a(E, GPrime) + 2.0 * a(EPrime, GPrime) + 2.0 * a(EPrime, GDoublePrime))
        / ion.fine_structure();
    let eta = lamb_dicke(config, omega_eta);
    let scale = config.kind.mean_intensity() / config.kind.rabi_enhancement();
    two_qubit_error(ratio * scale, 1.0, eta, config)
}

/// `δ/Ω_R` for a single σ⁺ beam: o-type differential shift over the g-type
/// Raman Rabi frequency of two such beams. Independent of intensity.
pub fn stark_to_rabi(ion: &IonModel, omega_l: f64, opts: &PtOptions) -> Result<f64> {
    let beam = LaserField::sigma_plus(omega_l, 1.0)?;
    let stark = StarkOptions {
        guard: opts.guard,
        ..StarkOptions::default()
    };
    let delta = lightshift::differential_stark(ion, &beam, &QubitPair::o_type(ion)?, &stark)?;
    let rabi = lightshift::two_photon_rabi(ion, &beam, &beam, &QubitPair::g_type(ion)?, opts)?;
    if delta == 0.0 {
        return Err(Error::ZeroSensitivity(format!("o-type shift vanishes at {omega_l:.6e} rad/s")));
    }
    Ok(delta.abs() / rabi)
}

/// `ε_2q = π (Γ/δ)(δ/Ω_R)(n √K / η)` from a measured rate-versus-shift slope
/// (s⁻¹ per rad/s).
pub fn infer_error_from_slope(ion: &IonModel, slope: f64, omega_l: f64, config: &GateConfig, opts: &PtOptions) -> Result<f64> {
    if !(slope >= 0.0) {
        return Err(Error::InvalidInput(format!("slope must be >= 0, got {slope}")));
    }
    let ratio = stark_to_rabi(ion, omega_l, opts)?;
    two_qubit_error(slope * ratio, 1.0, lamb_dicke(config, omega_l), config)
}
