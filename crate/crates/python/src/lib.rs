//! Python bindings for `ionscatter`.

use std::collections::BTreeMap;

use ionscatter::angmom::{self, AtomState, HalfInt};
use ionscatter::atomdata::{IonModel, ManifoldLabel};
use ionscatter::expsim::{self, ExperimentConfig, FitPoint};
use ionscatter::gatebudget::{self, BeamConfig, GateConfig};
use ionscatter::lightshift::{self, QubitPair, StarkOptions};
use ionscatter::scatter::{self, LaserField, PtOptions, ScatterModel};
use ionscatter::{units, Error};
use num_complex::Complex64;
use pyo3::exceptions::{PyArithmeticError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::NonConvergence { .. } => PyRuntimeError::new_err(e.to_string()),
        e if e.is_numerical_domain() => PyArithmeticError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn label(s: &str) -> PyResult<ManifoldLabel> {
    s.parse().map_err(to_py)
}

fn model(s: &str) -> PyResult<ScatterModel> {
    s.parse().map_err(to_py)
}

fn half(x: f64) -> PyResult<HalfInt> {
    HalfInt::try_from(x).map_err(to_py)
}

fn polarization(s: &str) -> PyResult<[Complex64; 3]> {
    let q = match s {
        "sigma-" => 0,
        "pi" => 1,
        "sigma+" => 2,
        _ => return Err(PyValueError::new_err(format!("unknown polarization {s:?}; use sigma+, sigma- or pi"))),
    };
    let mut p = [Complex64::new(0.0, 0.0); 3];
    p[q] = Complex64::new(1.0, 0.0);
    Ok(p)
}

fn pair(ion: &IonModel, s: &str) -> PyResult<QubitPair> {
    match s {
        "g" => QubitPair::g_type(ion),
        "o" => QubitPair::o_type(ion),
        "m" => QubitPair::m_type(ion),
        _ => return Err(PyValueError::new_err(format!("unknown pair {s:?}; use g, o or m"))),
    }
    .map_err(to_py)
}

fn guard_opts(guard_ghz: f64) -> PtOptions {
    PtOptions {
        guard: 2.0 * std::f64::consts::PI * guard_ghz * 1e9,
    }
}

/// Ion level structure and line strengths.
#[pyclass(name = "IonModel", module = "ionscatter_py", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyIonModel {
    inner: IonModel,
}

#[pymethods]
impl PyIonModel {
    /// The bundled 133Ba+ model.
    #[staticmethod]
    fn ba133() -> Self {
        Self { inner: IonModel::ba133() }
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: IonModel::load(path).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: IonModel::from_json(text).map_err(to_py)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    /// Copy with one Einstein A coefficient (s⁻¹) replaced.
    fn with_einstein_a(&self, upper: &str, lower: &str, a: f64) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.with_einstein_a(label(upper)?, label(lower)?, a).map_err(to_py)?,
        })
    }

    /// Copy with the S1/2 line strengths projected onto pure LS coupling.
    fn with_ls_s_lines(&self) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.with_ls_s_lines().map_err(to_py)?,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn nuclear_spin(&self) -> f64 {
        self.inner.nuclear_spin().value()
    }

    #[getter]
    fn mass_amu(&self) -> f64 {
        self.inner.mass_amu()
    }

    /// Level energy above S1/2, rad/s.
    fn energy(&self, manifold: &str) -> PyResult<f64> {
        Ok(self.inner.energy(label(manifold)?))
    }

    fn einstein_a(&self, upper: &str, lower: &str) -> PyResult<f64> {
        Ok(self.inner.einstein_a(label(upper)?, label(lower)?))
    }

    fn __repr__(&self) -> String {
        format!("IonModel({:?}, I={})", self.inner.name(), self.inner.nuclear_spin())
    }
}

/// Scattering rates (s⁻¹) from one model at one laser setting.
#[pyclass(name = "ScatterBreakdown", module = "ionscatter_py", frozen, get_all)]
pub struct PyBreakdown {
    model: String,
    total: f64,
    rayleigh: f64,
    raman: f64,
    gamma_s: f64,
    gamma_d32: f64,
    gamma_d52: f64,
    eta_d52: f64,
}

impl From<scatter::ScatterBreakdown> for PyBreakdown {
    fn from(b: scatter::ScatterBreakdown) -> Self {
        Self {
            model: b.model.as_str().to_string(),
            total: b.total,
            rayleigh: b.rayleigh,
            raman: b.raman,
            gamma_s: b.per_manifold.s,
            gamma_d32: b.per_manifold.d32,
            gamma_d52: b.per_manifold.d52,
            eta_d52: b.eta_d52,
        }
    }
}

#[pymethods]
impl PyBreakdown {
    fn to_dict(&self) -> BTreeMap<&'static str, f64> {
        BTreeMap::from([
            ("total", self.total),
            ("rayleigh", self.rayleigh),
            ("raman", self.raman),
            ("gamma_s", self.gamma_s),
            ("gamma_d32", self.gamma_d32),
            ("gamma_d52", self.gamma_d52),
            ("eta_d52", self.eta_d52),
        ])
    }

    fn __repr__(&self) -> String {
        format!(
            "ScatterBreakdown(model={}, raman={:.6e}, rayleigh={:.6e}, eta_d52={:.4})",
            self.model, self.raman, self.rayleigh, self.eta_d52
        )
    }
}

#[pyfunction]
fn wavelength_to_omega(lambda_nm: f64) -> PyResult<f64> {
    units::wavelength_to_omega(lambda_nm * 1e-9).map_err(to_py)
}

#[pyfunction]
fn omega_to_wavelength(omega: f64) -> PyResult<f64> {
    Ok(units::omega_to_wavelength(omega).map_err(to_py)? * 1e9)
}

#[pyfunction]
fn wigner3j(j1: f64, j2: f64, j3: f64, m1: f64, m2: f64, m3: f64) -> PyResult<f64> {
    angmom::wigner3j(j1, j2, j3, m1, m2, m3).map_err(to_py)
}

#[pyfunction]
fn wigner6j(j1: f64, j2: f64, j3: f64, j4: f64, j5: f64, j6: f64) -> PyResult<f64> {
    angmom::wigner6j(j1, j2, j3, j4, j5, j6).map_err(to_py)
}

/// Rates for the lower clock state under σ⁺ light (`model` = cda, w3 or pt).
#[pyfunction]
#[pyo3(signature = (ion, model_name, omega_l, intensity, guard_ghz = 10.0))]
fn clock_rates(ion: &PyIonModel, model_name: &str, omega_l: f64, intensity: f64, guard_ghz: f64) -> PyResult<PyBreakdown> {
    scatter::clock_rates(&ion.inner, model(model_name)?, omega_l, intensity, &guard_opts(guard_ghz))
        .map(Into::into)
        .map_err(to_py)
}

/// Perturbative rates from an arbitrary lower hyperfine state `(manifold, F, mF)`.
#[pyfunction]
#[pyo3(signature = (ion, omega_l, intensity, initial = ("g".to_string(), 0.0, 0.0), polarization_name = "sigma+", guard_ghz = 10.0))]
fn pt_rates(
    ion: &PyIonModel,
    omega_l: f64,
    intensity: f64,
    initial: (String, f64, f64),
    polarization_name: &str,
    guard_ghz: f64,
) -> PyResult<PyBreakdown> {
    let ion = &ion.inner;
    let state = AtomState::hyperfine(ion, label(&initial.0)?, half(initial.1)?, half(initial.2)?).map_err(to_py)?;
    let laser = LaserField::new(omega_l, intensity, polarization(polarization_name)?).map_err(to_py)?;
    scatter::pt_breakdown(ion, &laser, &state, &guard_opts(guard_ghz))
        .map(Into::into)
        .map_err(to_py)
}

/// Differential AC Stark shift (rad/s) of a qubit pair: g, o or m.
#[pyfunction]
#[pyo3(signature = (ion, omega_l, intensity, pair_name = "o", polarization_name = "sigma+", counter_rotating = true))]
fn differential_stark(
    ion: &PyIonModel,
    omega_l: f64,
    intensity: f64,
    pair_name: &str,
    polarization_name: &str,
    counter_rotating: bool,
) -> PyResult<f64> {
    let laser = LaserField::new(omega_l, intensity, polarization(polarization_name)?).map_err(to_py)?;
    let opts = StarkOptions {
        counter_rotating,
        ..StarkOptions::default()
    };
    lightshift::differential_stark(&ion.inner, &laser, &pair(&ion.inner, pair_name)?, &opts).map_err(to_py)
}

fn gate_config(ion: &IonModel, beams: &str, loops: u32, mode_mhz: f64) -> PyResult<GateConfig> {
    let kind: BeamConfig = beams.parse().map_err(to_py)?;
    GateConfig::new(kind, loops, 2.0 * std::f64::consts::PI * mode_mhz * 1e6, ion.mass()).map_err(to_py)
}

/// Intensity-independent two-qubit error for the cda or w3 model.
#[pyfunction]
#[pyo3(signature = (ion, model_name, omega_l, beams = "3", loops = 1, mode_mhz = 5.0))]
fn two_qubit_error(ion: &PyIonModel, model_name: &str, omega_l: f64, beams: &str, loops: u32, mode_mhz: f64) -> PyResult<f64> {
    let cfg = gate_config(&ion.inner, beams, loops, mode_mhz)?;
    gatebudget::two_qubit_error_at(&ion.inner, model(model_name)?, omega_l, &cfg).map_err(to_py)
}

/// CDA two-qubit error at infinite detuning, η taken at `omega_eta`.
#[pyfunction]
#[pyo3(signature = (ion, omega_eta, beams = "3", loops = 1, mode_mhz = 5.0))]
fn cda_asymptote(ion: &PyIonModel, omega_eta: f64, beams: &str, loops: u32, mode_mhz: f64) -> PyResult<f64> {
    let cfg = gate_config(&ion.inner, beams, loops, mode_mhz)?;
    gatebudget::cda_asymptote(&ion.inner, &cfg, omega_eta).map_err(to_py)
}

/// Two-qubit error from a measured Γ/δ slope (s⁻¹ per rad/s).
#[pyfunction]
#[pyo3(signature = (ion, slope, omega_l, beams = "3", loops = 1, mode_mhz = 5.0))]
fn infer_error_from_slope(ion: &PyIonModel, slope: f64, omega_l: f64, beams: &str, loops: u32, mode_mhz: f64) -> PyResult<f64> {
    let cfg = gate_config(&ion.inner, beams, loops, mode_mhz)?;
    gatebudget::infer_error_from_slope(&ion.inner, slope, omega_l, &cfg, &PtOptions::default()).map_err(to_py)
}

/// One simulated laser-on/off run; returns counts and the extracted rate.
#[pyfunction]
#[pyo3(signature = (rate, seed, shots = 50_000, tau = 5e-3, background = 6e-4))]
fn simulate_run(rate: f64, seed: u64, shots: u64, tau: f64, background: f64) -> PyResult<BTreeMap<&'static str, f64>> {
    let cfg = ExperimentConfig {
        shots,
        exposure_time: tau,
        true_rate: rate,
        background_prob: background,
        rng_seed: seed,
    };
    let c = expsim::simulate_run(&cfg).map_err(to_py)?;
    let m = expsim::measure_rate(&c, tau).map_err(to_py)?;
    Ok(BTreeMap::from([
        ("dark_on", c.dark_on as f64),
        ("dark_off", c.dark_off as f64),
        ("rate", m.rate),
        ("sigma", m.sigma),
        ("p_meas", m.p_meas),
    ]))
}

/// Orthogonal-distance straight-line fit.
#[pyfunction]
#[pyo3(signature = (x, sigma_x, y, sigma_y, intercept = false))]
fn odr_fit(x: Vec<f64>, sigma_x: Vec<f64>, y: Vec<f64>, sigma_y: Vec<f64>, intercept: bool) -> PyResult<BTreeMap<&'static str, f64>> {
    let n = x.len();
    if sigma_x.len() != n || y.len() != n || sigma_y.len() != n {
        return Err(PyValueError::new_err("x, sigma_x, y and sigma_y must have equal length"));
    }
    let pts: Vec<FitPoint> = (0..n)
        .map(|i| FitPoint {
            x: x[i],
            sigma_x: sigma_x[i],
            y: y[i],
            sigma_y: sigma_y[i],
        })
        .collect();
    let f = expsim::odr_fit(&pts, intercept).map_err(to_py)?;
    let mut out = BTreeMap::from([
        ("slope", f.slope),
        ("sigma_slope", f.sigma_slope),
        ("chi2", f.chi2),
        ("iterations", f.iterations as f64),
    ]);
    if let (Some(a), Some(s)) = (f.intercept, f.sigma_intercept) {
        out.insert("intercept", a);
        out.insert("sigma_intercept", s);
    }
    Ok(out)
}

#[pymodule]
fn ionscatter_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyIonModel>()?;
    m.add_class::<PyBreakdown>()?;
    m.add_function(wrap_pyfunction!(wavelength_to_omega, m)?)?;
    m.add_function(wrap_pyfunction!(omega_to_wavelength, m)?)?;
    m.add_function(wrap_pyfunction!(wigner3j, m)?)?;
    m.add_function(wrap_pyfunction!(wigner6j, m)?)?;
    m.add_function(wrap_pyfunction!(clock_rates, m)?)?;
    m.add_function(wrap_pyfunction!(pt_rates, m)?)?;
    m.add_function(wrap_pyfunction!(differential_stark, m)?)?;
    m.add_function(wrap_pyfunction!(two_qubit_error, m)?)?;
    m.add_function(wrap_pyfunction!(cda_asymptote, m)?)?;
    m.add_function(wrap_pyfunction!(infer_error_from_slope, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_run, m)?)?;
    m.add_function(wrap_pyfunction!(odr_fit, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn breakdown_conversion_keeps_fields() {
        let ion = IonModel::ba133();
        let w = units::wavelength_to_omega(532e-9).unwrap();
        let b = scatter::clock_rates(&ion, ScatterModel::W3, w, 1.0, &PtOptions::default()).unwrap();
        let p = PyBreakdown::from(b);
        assert_eq!(p.raman, b.raman);
        assert_eq!(p.gamma_d52, b.per_manifold.d52);
        assert_eq!(p.model, "w3");
    }

    #[test]
    fn polarization_names() {
        assert_eq!(polarization("sigma+").unwrap()[2], Complex64::new(1.0, 0.0));
        assert_eq!(polarization("pi").unwrap()[1], Complex64::new(1.0, 0.0));
    }
}
