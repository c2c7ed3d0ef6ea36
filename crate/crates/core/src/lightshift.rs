//! AC Stark shifts, the coupling `g`, stimulated-Raman Rabi frequencies and
//! the Stark-shift intensity gauge.

use num_complex::Complex64;
use serde::Serialize;

use crate::angmom::{AtomState, HalfInt};
use crate::atomdata::{IonModel, ManifoldLabel};
use crate::error::{Error, Result};
use crate::scatter::{self, LaserField, PtOptions};
use crate::units;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum QubitKind {
    /// Hyperfine clock qubit within S1/2.
    #[serde(rename = "g_type")]
    GType,
    /// Optical qubit between S1/2 and D5/2.
    #[serde(rename = "o_type")]
    OType,
    /// Hyperfine clock qubit within D5/2.
    #[serde(rename = "m_type")]
    MType,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QubitPair {
    pub lower: AtomState,
    pub upper: AtomState,
    pub kind: QubitKind,
}

impl QubitPair {
    pub fn new(lower: AtomState, upper: AtomState, kind: QubitKind) -> Result<Self> {
        use ManifoldLabel::*;
        let ok = match kind {
            QubitKind::GType => lower.manifold == G && upper.manifold == G,
            QubitKind::OType => lower.manifold == G && upper.manifold == GDoublePrime,
            QubitKind::MType => lower.manifold == GDoublePrime && upper.manifold == GDoublePrime,
        };
        if !ok {
            return Err(Error::InvalidInput(format!(
                "{kind:?} pair cannot span {} and {}",
                lower.manifold, upper.manifold
            )));
        }
        Ok(QubitPair { lower, upper, kind })
    }

    /// `|g, F=I−1/2, 0⟩ ↔ |g, F=I+1/2, 0⟩`
    pub fn g_type(ion: &IonModel) -> Result<Self> {
        Self::new(AtomState::clock_lower(ion)?, AtomState::clock_upper(ion)?, QubitKind::GType)
    }

    /// `|g, F=I+1/2, 0⟩ ↔ |g'', F=5/2+I, 0⟩`
    pub fn o_type(ion: &IonModel) -> Result<Self> {
        let i = ion.nuclear_spin();
        let j = ion.manifold(ManifoldLabel::GDoublePrime).j;
        Self::new(
            AtomState::clock_upper(ion)?,
            AtomState::hyperfine(ion, ManifoldLabel::GDoublePrime, j + i, HalfInt::ZERO)?,
            QubitKind::OType,
        )
    }

    /// `|g'', F=5/2−I, 0⟩ ↔ |g'', F=5/2+I, 0⟩`
    pub fn m_type(ion: &IonModel) -> Result<Self> {
        let i = ion.nuclear_spin();
        let j = ion.manifold(ManifoldLabel::GDoublePrime).j;
        Self::new(
            AtomState::hyperfine(ion, ManifoldLabel::GDoublePrime, j - i, HalfInt::ZERO)?,
            AtomState::hyperfine(ion, ManifoldLabel::GDoublePrime, j + i, HalfInt::ZERO)?,
            QubitKind::MType,
        )
    }
}

/// The coupling of the closed-form scattering models: the resonant
/// half-Rabi frequency `ℰ₀ μ / (2ħ)` of the S1/2 ↔ P3/2 stretch transition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CouplingG {
    /// rad/s
    pub value: f64,
}

/// Largest `|⟨e' sublevel| d₊₁ |g sublevel⟩|`, C·m.
pub fn stretch_dipole(ion: &IonModel) -> f64 {
    let ops = ion.dipoles();
    let mut best: f64 = 0.0;
    for a in ops.indices_of(ManifoldLabel::EPrime) {
        for b in ops.indices_of(ManifoldLabel::G) {
            best = best.max(ops.get(1, a, b).abs());
        }
    }
    best
}

pub fn coupling_g(ion: &IonModel, laser: &LaserField) -> CouplingG {
    CouplingG {
        value: laser.field_sq().sqrt() * stretch_dipole(ion) / (2.0 * units::HBAR),
    }
}

/// Options for [`ac_stark_shift`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StarkOptions {
    pub counter_rotating: bool,
    pub guard: f64,
}

impl Default for StarkOptions {
    fn default() -> Self {
        StarkOptions {
            counter_rotating: true,
            guard: scatter::DEFAULT_GUARD,
        }
    }
}

/// Second-order light shift of `state`, rad/s. Red-detuned light lowers a
/// ground-state energy (negative shift).
pub fn ac_stark_shift(ion: &IonModel, laser: &LaserField, state: &AtomState, opts: &StarkOptions) -> Result<f64> {
    if state.manifold.is_upper() {
        return Err(Error::InvalidInput("light shifts are computed for g, g' and g'' states".into()));
    }
    scatter::check_guard(ion, laser.omega, state.manifold, opts.guard)?;
    let ops = ion.dipoles();
    let omega_s = ion.energy(state.manifold);
    let mut sum = 0.0;
    for k_label in ManifoldLabel::UPPER {
        let w_k = ion.energy(k_label) - omega_s;
        for k in ops.indices_of(k_label) {
            // ⟨k|d_ℓ|s⟩ and ⟨s|d_ℓ|k⟩
            let mut up = Complex64::new(0.0, 0.0);
            let mut down = Complex64::new(0.0, 0.0);
            for q in -1..=1 {
                let e = laser.eps(q);
                up += e * ops.bra_basis(q, k, state);
                down += e * ops.ket_basis(q, state, k);
            }
            sum += up.norm_sqr() / (w_k - laser.omega);
            if opts.counter_rotating {
                sum += down.norm_sqr() / (w_k + laser.omega);
            }
        }
    }
    Ok(-laser.field_sq() / (4.0 * units::HBAR * units::HBAR) * sum)
}

/// `shift(upper) − shift(lower)`, rad/s.
pub fn differential_stark(ion: &IonModel, laser: &LaserField, pair: &QubitPair, opts: &StarkOptions) -> Result<f64> {
    Ok(ac_stark_shift(ion, laser, &pair.upper, opts)? - ac_stark_shift(ion, laser, &pair.lower, opts)?)
}

/// Magnitude of the two-photon Rabi frequency driving `pair.lower → pair.upper`
/// by absorption from `beam1` and stimulated emission into `beam2`, rad/s.
pub fn two_photon_rabi(ion: &IonModel, beam1: &LaserField, beam2: &LaserField, pair: &QubitPair, opts: &PtOptions) -> Result<f64> {
    if pair.kind != QubitKind::GType {
        return Err(Error::InvalidInput("two-photon Rabi frequencies are computed for g-type pairs".into()));
    }
    scatter::check_guard(ion, beam1.omega, pair.lower.manifold, opts.guard)?;
    scatter::check_guard(ion, beam2.omega, pair.upper.manifold, opts.guard)?;
    let ops = ion.dipoles();
    let omega_down = ion.energy(pair.lower.manifold);
    let mut amp = Complex64::new(0.0, 0.0);
    for k_label in ManifoldLabel::UPPER {
        let den = ion.energy(k_label) - omega_down - beam1.omega;
        for k in ops.indices_of(k_label) {
            let mut absorb = Complex64::new(0.0, 0.0);
            let mut emit = Complex64::new(0.0, 0.0);
            for q in -1..=1 {
                absorb += beam1.eps(q) * ops.bra_basis(q, k, &pair.lower);
                emit += beam2.eps(q) * ops.bra_basis(q, k, &pair.upper);
            }
            amp += emit.conj() * absorb / den;
        }
    }
    Ok((beam1.field_sq() * beam2.field_sq()).sqrt() / (4.0 * units::HBAR * units::HBAR) * amp.norm())
}

/// Closed-form σ⁺σ⁺ clock Raman Rabi frequency `(g²/3)·ω_FS/|Δ(Δ−ω_FS)|`
/// for two beams with coupling `g` each.
pub fn closed_form_rabi(ion: &IonModel, g: f64, omega_l: f64) -> Result<f64> {
    let delta = omega_l - ion.energy(ManifoldLabel::E);
    let fs = ion.fine_structure();
    if delta == 0.0 || delta == fs {
        return Err(Error::ResonanceProximity {
            omega_l,
            upper: if delta == 0.0 { "e" } else { "e'" }.into(),
            lower: "g".into(),
            detuning: 0.0,
            guard: 0.0,
        });
    }
    Ok(g * g / 3.0 * fs / (delta * (delta - fs)).abs())
}

/// Intensity implied by a measured differential shift `delta_measured`
/// (rad/s) of `pair` under a beam shaped like `template`.
pub fn stark_to_intensity(
    ion: &IonModel,
    template: &LaserField,
    pair: &QubitPair,
    delta_measured: f64,
    opts: &StarkOptions,
) -> Result<f64> {
    let unit = template.with_intensity(1.0)?;
    let per = differential_stark(ion, &unit, pair, opts)?;
    let scale = ac_stark_shift(ion, &unit, &pair.upper, opts)?
        .abs()
        .max(ac_stark_shift(ion, &unit, &pair.lower, opts)?.abs());
    if per == 0.0 || per.abs() <= 1e-12 * scale {
        return Err(Error::ZeroSensitivity(format!(
            "{:?} pair has no differential shift at {:.6e} rad/s",
            pair.kind, template.omega
        )));
    }
    let i = delta_measured / per;
    if i < 0.0 {
        return Err(Error::InvalidInput(format!(
            "shift {delta_measured:.4e} rad/s has the wrong sign for this pair (expected sign of {per:.4e})"
        )));
    }
    Ok(i)
}
