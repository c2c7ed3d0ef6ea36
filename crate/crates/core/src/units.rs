//! Physical constants (CODATA 2018, SI) and unit conversions.
//!
//! Every frequency inside the crate is an angular frequency in rad/s.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s (exact).
pub const C: f64 = 299_792_458.0;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Atomic mass unit, kg.
pub const AMU: f64 = 1.660_539_066_60e-27;

/// `3π ε₀ ħ c³`, the denominator of the spontaneous-emission rate
/// `A = ω³ |d|² / (3π ε₀ ħ c³)`.
pub fn emission_denominator() -> f64 {
    3.0 * PI * EPSILON_0 * HBAR * C.powi(3)
}

/// Angular frequency of light with vacuum wavelength `lambda` (meters).
pub fn wavelength_to_omega(lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!(
            "wavelength must be positive and finite, got {lambda}"
        )));
    }
    Ok(2.0 * PI * C / lambda)
}

/// Vacuum wavelength (meters) of light with angular frequency `omega`.
pub fn omega_to_wavelength(omega: f64) -> Result<f64> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::InvalidInput(format!(
            "angular frequency must be positive and finite, got {omega}"
        )));
    }
    Ok(2.0 * PI * C / omega)
}

/// Wavenumber in cm⁻¹ to angular frequency.
pub fn wavenumber_to_omega(cm1: f64) -> f64 {
    2.0 * PI * C * 100.0 * cm1
}

/// Angular frequency to wavenumber in cm⁻¹.
pub fn omega_to_wavenumber(omega: f64) -> f64 {
    omega / (2.0 * PI * C * 100.0)
}

/// Peak intensity of a Gaussian beam with power `power` (W) and 1/e² intensity
/// radius `waist` (m): `I = 2P/(π w₀²)`.
pub fn gaussian_peak_intensity(power: f64, waist: f64) -> Result<f64> {
    if !(power >= 0.0) || !(waist > 0.0) {
        return Err(Error::InvalidInput(format!(
            "need power >= 0 and waist > 0, got P={power}, w0={waist}"
        )));
    }
    Ok(2.0 * power / (PI * waist * waist))
}

/// Squared field amplitude `ℰ₀² = 2I/(ε₀c)` for a monochromatic field of
/// time-averaged intensity `intensity` (W/m²).
pub fn field_amplitude_sq(intensity: f64) -> f64 {
    2.0 * intensity / (EPSILON_0 * C)
}
