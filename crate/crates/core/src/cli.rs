//! Command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical domain (resonance
//! guard band, zero sensitivity), 4 non-convergence.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::angmom::{AtomState, HalfInt};
use crate::atomdata::{self, IonModel, ManifoldLabel};
use crate::error::{Error, Result};
use crate::expsim::{self, ExperimentConfig};
use crate::gatebudget::{self, BeamConfig, GateConfig};
use crate::lightshift::{self, QubitPair, StarkOptions};
use crate::scatter::{self, fmt9, LaserField, PtOptions, ScatterModel};
use crate::units;

#[derive(Parser, Debug)]
#[command(name = "ionscatter", version, about = "Scattering rates, Stark shifts and gate errors for trapped ions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Scattering rates at one laser frequency (s⁻¹).
    Rates(RatesArgs),
    /// All three models on a frequency grid, as CSV.
    Sweep(SweepArgs),
    /// D5/2 branching fraction of Raman scattering.
    Branching(BranchingArgs),
    /// Scattering-limited gate errors.
    GateError(GateErrorArgs),
    /// AC Stark shifts of a qubit pair, or the intensity implied by a shift.
    Stark(StarkArgs),
    /// Simulate one laser-on/laser-off dark-count measurement.
    Simulate(SimulateArgs),
    /// Orthogonal-distance straight-line fit of a points CSV.
    Fit(FitArgs),
}

#[derive(Args, Debug, Serialize, Clone)]
pub struct IonArg {
    /// Ion data file (JSON); the bundled 133Ba+ model when omitted.
    #[arg(long, value_name = "FILE")]
    pub ion: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize, Clone)]
#[group(required = true, multiple = false)]
pub struct FreqArg {
    /// Laser vacuum wavelength, nm.
    #[arg(long, value_name = "NM")]
    pub lambda_nm: Option<f64>,
    /// Laser angular frequency, rad/s.
    #[arg(long, value_name = "RAD_PER_S")]
    pub omega_rads: Option<f64>,
}

impl FreqArg {
    fn omega(&self) -> Result<f64> {
        match (self.lambda_nm, self.omega_rads) {
            (Some(nm), None) => units::wavelength_to_omega(nm * 1e-9),
            (None, Some(w)) if w > 0.0 && w.is_finite() => Ok(w),
            (None, Some(w)) => Err(Error::InvalidInput(format!("--omega-rads must be positive, got {w}"))),
            _ => Err(Error::InvalidInput("give exactly one of --lambda-nm or --omega-rads".into())),
        }
    }
}

#[derive(Args, Debug, Serialize, Clone)]
pub struct IntensityArg {
    /// Intensity per beam, W/m².
    #[arg(long, value_name = "W_PER_M2", conflicts_with_all = ["power_w", "waist_um"])]
    pub intensity: Option<f64>,
    /// Beam power, W; peak intensity 2P/(πw₀²) with --waist-um.
    #[arg(long, value_name = "W", requires = "waist_um")]
    pub power_w: Option<f64>,
    /// 1/e² intensity radius, µm.
    #[arg(long, value_name = "UM", requires = "power_w")]
    pub waist_um: Option<f64>,
}

impl IntensityArg {
    fn get(&self) -> Result<Option<f64>> {
        match (self.intensity, self.power_w, self.waist_um) {
            (Some(i), None, None) if i >= 0.0 && i.is_finite() => Ok(Some(i)),
            (Some(i), None, None) => Err(Error::InvalidInput(format!("--intensity must be >= 0, got {i}"))),
            (None, Some(p), Some(w)) => units::gaussian_peak_intensity(p, w * 1e-6).map(Some),
            (None, None, None) => Ok(None),
            _ => Err(Error::InvalidInput("give --intensity or both --power-w and --waist-um".into())),
        }
    }

    fn require(&self) -> Result<f64> {
        self.get()?
            .ok_or_else(|| Error::InvalidInput("an intensity is required (--intensity or --power-w/--waist-um)".into()))
    }
}

#[derive(Args, Debug, Serialize, Clone)]
pub struct RangeArg {
    /// Grid start as a wavelength, nm.
    #[arg(long, value_name = "NM", requires = "to_nm", conflicts_with_all = ["from_rads", "to_rads"])]
    pub from_nm: Option<f64>,
    /// Grid end as a wavelength, nm.
    #[arg(long, value_name = "NM", requires = "from_nm")]
    pub to_nm: Option<f64>,
    /// Grid start, rad/s.
    #[arg(long, value_name = "RAD_PER_S", requires = "to_rads")]
    pub from_rads: Option<f64>,
    /// Grid end, rad/s.
    #[arg(long, value_name = "RAD_PER_S", requires = "from_rads")]
    pub to_rads: Option<f64>,
    /// Number of grid points, uniform in angular frequency.
    #[arg(long, default_value_t = 200)]
    pub points: usize,
}

impl RangeArg {
    fn get(&self) -> Result<Option<(f64, f64)>> {
        let (a, b) = match (self.from_nm, self.to_nm, self.from_rads, self.to_rads) {
            (Some(a), Some(b), None, None) => (
                units::wavelength_to_omega(a * 1e-9)?,
                units::wavelength_to_omega(b * 1e-9)?,
            ),
            (None, None, Some(a), Some(b)) => (a, b),
            (None, None, None, None) => return Ok(None),
            _ => return Err(Error::InvalidInput("give a range as --from-nm/--to-nm or --from-rads/--to-rads".into())),
        };
        Ok(Some((a.min(b), a.max(b))))
    }
}

#[derive(Args, Debug, Serialize, Clone)]
pub struct OutArg {
    /// Output file; stdout when omitted. A `<FILE>.manifest.json` is written beside it.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Serialize, clap::ValueEnum)]
pub enum ModelArg {
    Cda,
    W3,
    Pt,
    All,
}

impl ModelArg {
    fn models(self) -> Vec<ScatterModel> {
        match self {
            ModelArg::Cda => vec![ScatterModel::Cda],
            ModelArg::W3 => vec![ScatterModel::W3],
            ModelArg::Pt => vec![ScatterModel::Pt],
            ModelArg::All => vec![ScatterModel::Cda, ScatterModel::W3, ScatterModel::Pt],
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, clap::ValueEnum)]
pub enum PolarizationArg {
    #[value(name = "sigma+")]
    SigmaPlus,
    #[value(name = "sigma-")]
    SigmaMinus,
    Pi,
}

impl PolarizationArg {
    fn vector(self) -> [Complex64; 3] {
        let mut p = [Complex64::new(0.0, 0.0); 3];
        let q = match self {
            PolarizationArg::SigmaMinus => 0,
            PolarizationArg::Pi => 1,
            PolarizationArg::SigmaPlus => 2,
        };
        p[q] = Complex64::new(1.0, 0.0);
        p
    }
}

#[derive(Args, Debug, Serialize)]
pub struct RatesArgs {
    #[command(flatten)]
    pub ion: IonArg,
    #[command(flatten)]
    pub freq: FreqArg,
    #[command(flatten)]
    pub intensity: IntensityArg,
    #[arg(long, value_enum, default_value = "all")]
    pub model: ModelArg,
    /// Initial state as MANIFOLD,F,MF (e.g. "g,0,0" or "g'',3,-1"); default is the lower clock state.
    #[arg(long, value_name = "STATE")]
    pub initial: Option<String>,
    /// Polarization of the beam (perturbative model only).
    #[arg(long, value_enum, default_value = "sigma+")]
    pub polarization: PolarizationArg,
    /// Guard band around each resonance, GHz (times 2π).
    #[arg(long, default_value_t = 10.0)]
    pub guard_ghz: f64,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Args, Debug, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub ion: IonArg,
    #[command(flatten)]
    pub range: RangeArg,
    #[command(flatten)]
    pub intensity: IntensityArg,
    /// Guard band around each resonance, GHz (times 2π).
    #[arg(long, default_value_t = 10.0)]
    pub guard_ghz: f64,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Args, Debug, Serialize)]
pub struct BranchingArgs {
    #[command(flatten)]
    pub ion: IonArg,
    /// Laser vacuum wavelength, nm.
    #[arg(long, value_name = "NM", conflicts_with = "omega_rads")]
    pub lambda_nm: Option<f64>,
    /// Laser angular frequency, rad/s.
    #[arg(long, value_name = "RAD_PER_S")]
    pub omega_rads: Option<f64>,
    /// Emit a CSV over a grid; default grid runs from 10⁻⁴ ω(S1/2-P1/2) to 532 nm.
    #[arg(long)]
    pub sweep: bool,
    #[command(flatten)]
    pub range: RangeArg,
    /// Guard band around each resonance, GHz (times 2π).
    #[arg(long, default_value_t = 10.0)]
    pub guard_ghz: f64,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Args, Debug, Serialize)]
pub struct GateErrorArgs {
    #[command(flatten)]
    pub ion: IonArg,
    /// Laser vacuum wavelength, nm (sets η, and the point for single-point output).
    #[arg(long, value_name = "NM", conflicts_with = "omega_rads")]
    pub lambda_nm: Option<f64>,
    /// Laser angular frequency, rad/s.
    #[arg(long, value_name = "RAD_PER_S")]
    pub omega_rads: Option<f64>,
    /// Beam count: 2 (one-qubit gate), 3 or 4 (two-qubit gate).
    #[arg(long, default_value = "3")]
    pub beams: String,
    /// Number of phase-space loops.
    #[arg(long = "K", default_value_t = 1)]
    pub loops: u32,
    /// Motional mode frequency, MHz (times 2π).
    #[arg(long, default_value_t = 5.0)]
    pub mode_mhz: f64,
    #[arg(long, value_enum, default_value = "cda")]
    pub model: ModelArg,
    /// Report 1 − exp(−Σ τΓ) instead of the linearized error.
    #[arg(long)]
    pub exponential: bool,
    /// Also report the gate time at this beam intensity.
    #[command(flatten)]
    pub intensity: IntensityArg,
    /// Print the infinite-detuning CDA limit (η held at the given frequency).
    #[arg(long)]
    pub asymptote: bool,
    /// Infer the error from a measured Γ/δ slope (s⁻¹ per rad/s).
    #[arg(long, value_name = "SLOPE")]
    pub infer_slope: Option<f64>,
    /// Infer the error from a measured Γ/I slope (s⁻¹ per W/m²), converted with the computed δ/I.
    #[arg(long, value_name = "SLOPE", conflicts_with = "infer_slope")]
    pub infer_slope_per_intensity: Option<f64>,
    /// Emit error curves over a grid as CSV.
    #[arg(long)]
    pub sweep: bool,
    #[command(flatten)]
    pub range: RangeArg,
    /// Guard band around each resonance, GHz (times 2π).
    #[arg(long, default_value_t = 10.0)]
    pub guard_ghz: f64,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Clone, Copy, Debug, Serialize, clap::ValueEnum)]
pub enum PairArg {
    G,
    O,
    M,
}

#[derive(Args, Debug, Serialize)]
pub struct StarkArgs {
    #[command(flatten)]
    pub ion: IonArg,
    #[command(flatten)]
    pub freq: FreqArg,
    #[command(flatten)]
    pub intensity: IntensityArg,
    /// Qubit pair: g (S1/2 clock), o (S1/2-D5/2), m (D5/2 clock).
    #[arg(long, value_enum, default_value = "o")]
    pub pair: PairArg,
    #[arg(long, value_enum, default_value = "sigma+")]
    pub polarization: PolarizationArg,
    /// Drop the counter-rotating terms.
    #[arg(long)]
    pub no_counter_rotating: bool,
    /// Convert a measured differential shift (Hz, not rad/s) to intensity.
    #[arg(long, value_name = "HZ")]
    pub delta_hz: Option<f64>,
    /// Guard band around each resonance, GHz (times 2π).
    #[arg(long, default_value_t = 10.0)]
    pub guard_ghz: f64,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Args, Debug, Serialize)]
pub struct SimulateArgs {
    /// RNG seed (required; runs are reproducible).
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 50_000)]
    pub shots: u64,
    /// Exposure per shot, ms.
    #[arg(long, default_value_t = 5.0)]
    pub tau_ms: f64,
    /// True scattering rate, s⁻¹.
    #[arg(long)]
    pub rate: f64,
    /// Dark-event probability with the laser off.
    #[arg(long, default_value_t = 6e-4)]
    pub background: f64,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Args, Debug, Serialize)]
pub struct FitArgs {
    /// CSV with header `x,sigma_x,y,sigma_y`.
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// Float the intercept (default: line through the origin).
    #[arg(long)]
    pub intercept: bool,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Serialize)]
pub struct RunManifest<'a> {
    pub command: &'a Command,
    pub ion_sha256: Option<String>,
    pub tool_version: &'static str,
    /// Seconds since the Unix epoch; honours SOURCE_DATE_EPOCH.
    pub timestamp: u64,
}

fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or_else(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        })
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn load_ion(arg: &IonArg) -> Result<(IonModel, String)> {
    match &arg.ion {
        Some(p) => {
            let bytes = std::fs::read(p).map_err(|source| Error::Io {
                path: p.display().to_string(),
                source,
            })?;
            let text = String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))?;
            Ok((IonModel::from_json(&text)?, sha256_hex(text.as_bytes())))
        }
        None => Ok((IonModel::ba133(), sha256_hex(atomdata::BA133_ION.as_bytes()))),
    }
}

fn guard(ghz: f64) -> Result<PtOptions> {
    if !(ghz >= 0.0 && ghz.is_finite()) {
        return Err(Error::InvalidInput(format!("--guard-ghz must be >= 0, got {ghz}")));
    }
    Ok(PtOptions {
        guard: 2.0 * std::f64::consts::PI * ghz * 1e9,
    })
}

fn parse_state(ion: &IonModel, s: &str) -> Result<AtomState> {
    let parts: Vec<_> = s.split(',').map(str::trim).collect();
    let [m, f, mf] = parts.as_slice() else {
        return Err(Error::InvalidInput(format!("state {s:?} is not MANIFOLD,F,MF")));
    };
    let num = |t: &str| -> Result<HalfInt> {
        let v: f64 = if let Some((a, b)) = t.split_once('/') {
            let (a, b): (f64, f64) = (
                a.parse().map_err(|_| Error::InvalidInput(format!("bad number {t:?}")))?,
                b.parse().map_err(|_| Error::InvalidInput(format!("bad number {t:?}")))?,
            );
            a / b
        } else {
            t.parse().map_err(|_| Error::InvalidInput(format!("bad number {t:?}")))?
        };
        HalfInt::try_from(v)
    };
    AtomState::hyperfine(ion, m.parse::<ManifoldLabel>()?, num(f)?, num(mf)?)
}

fn branching_freq(lambda_nm: Option<f64>, omega_rads: Option<f64>) -> Result<Option<f64>> {
    match (lambda_nm, omega_rads) {
        (Some(nm), None) => units::wavelength_to_omega(nm * 1e-9).map(Some),
        (None, Some(w)) => FreqArg {
            lambda_nm: None,
            omega_rads: Some(w),
        }
        .omega()
        .map(Some),
        (None, None) => Ok(None),
        _ => Err(Error::InvalidInput("give at most one of --lambda-nm or --omega-rads".into())),
    }
}

/// Where a command writes its primary output.
struct Sink<'a> {
    path: Option<&'a Path>,
}

impl Sink<'_> {
    fn write(&self, stdout: &mut dyn Write, manifest: &RunManifest, body: &[u8]) -> Result<()> {
        let io = |p: &Path, source| Error::Io {
            path: p.display().to_string(),
            source,
        };
        match self.path {
            Some(p) => {
                let mut f = BufWriter::new(File::create(p).map_err(|e| io(p, e))?);
                f.write_all(body).map_err(|e| io(p, e))?;
                f.flush().map_err(|e| io(p, e))?;
                let mut mp = p.as_os_str().to_owned();
                mp.push(".manifest.json");
                let mp = PathBuf::from(mp);
                let text = serde_json::to_string_pretty(manifest).expect("manifest serialises") + "\n";
                std::fs::write(&mp, text).map_err(|e| io(&mp, e))?;
            }
            None => stdout.write_all(body).map_err(|e| io(Path::new("<stdout>"), e))?,
        }
        Ok(())
    }
}

fn json_body<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("output serialises");
    s.push('\n');
    s.into_bytes()
}

#[derive(Serialize)]
struct RatesOut {
    omega_l_rad_s: f64,
    lambda_nm: f64,
    intensity_w_m2: f64,
    initial: String,
    results: Vec<scatter::ScatterBreakdown>,
}

fn cmd_rates(a: &RatesArgs) -> Result<(Vec<u8>, String)> {
    let (ion, sha) = load_ion(&a.ion)?;
    let w = a.freq.omega()?;
    let intensity = a.intensity.require()?;
    let opts = guard(a.guard_ghz)?;
    let initial = match &a.initial {
        Some(s) => parse_state(&ion, s)?,
        None => AtomState::clock_lower(&ion)?,
    };
    let laser = LaserField::new(w, intensity, a.polarization.vector())?;
    let is_default = initial == AtomState::clock_lower(&ion)? && matches!(a.polarization, PolarizationArg::SigmaPlus);
    let mut results = Vec::new();
    for m in a.model.models() {
        results.push(match m {
            ScatterModel::Pt => scatter::pt_breakdown(&ion, &laser, &initial, &opts)?,
            _ if !is_default => {
                return Err(Error::InvalidInput(
                    "the cda and w3 models describe the lower clock state under sigma+ light only".into(),
                ))
            }
            _ => scatter::clock_rates(&ion, m, w, intensity, &opts)?,
        });
    }
    let out = RatesOut {
        omega_l_rad_s: w,
        lambda_nm: units::omega_to_wavelength(w)? * 1e9,
        intensity_w_m2: intensity,
        initial: format!("{},{},{}", initial.manifold, initial.f, initial.m_f),
        results,
    };
    Ok((json_body(&out), sha))
}

fn cmd_sweep(a: &SweepArgs) -> Result<(Vec<u8>, String)> {
    let (ion, sha) = load_ion(&a.ion)?;
    let (lo, hi) = a
        .range
        .get()?
        .ok_or_else(|| Error::InvalidInput("sweep needs --from-nm/--to-nm or --from-rads/--to-rads".into()))?;
    let rows = scatter::sweep_models(&ion, a.intensity.get()?.unwrap_or(1.0), lo, hi, a.range.points, &guard(a.guard_ghz)?)?;
    let mut buf = Vec::new();
    scatter::write_sweep_csv(&rows, &mut buf)?;
    Ok((buf, sha))
}

fn cmd_branching(a: &BranchingArgs) -> Result<(Vec<u8>, String)> {
    let (ion, sha) = load_ion(&a.ion)?;
    let opts = guard(a.guard_ghz)?;
    let single = branching_freq(a.lambda_nm, a.omega_rads)?;
    let range = a.range.get()?;
    if a.sweep || range.is_some() {
        let (lo, hi) = match range {
            Some(r) => r,
            None => (1e-4 * ion.energy(ManifoldLabel::E), units::wavelength_to_omega(532e-9)?),
        };
        let rows = scatter::sweep_models(&ion, 1.0, lo, hi, a.range.points, &opts)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        let e = |e: csv::Error| Error::InvalidInput(format!("CSV write failed: {e}"));
        w.write_record(["omega_l_rad_s", "lambda_nm", "model", "eta_D52"]).map_err(e)?;
        for r in &rows {
            let nm = units::omega_to_wavelength(r.omega_l)? * 1e9;
            for b in r.models() {
                w.write_record([fmt9(r.omega_l), fmt9(nm), b.model.as_str().into(), fmt9(b.eta_d52)])
                    .map_err(e)?;
            }
        }
        let buf = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
        return Ok((buf, sha));
    }
    let w = single.ok_or_else(|| Error::InvalidInput("give --lambda-nm/--omega-rads, or --sweep".into()))?;
    #[derive(Serialize)]
    struct Out {
        omega_l_rad_s: f64,
        lambda_nm: f64,
        eta_d52: std::collections::BTreeMap<&'static str, f64>,
    }
    let mut eta = std::collections::BTreeMap::new();
    for m in [ScatterModel::Cda, ScatterModel::W3, ScatterModel::Pt] {
        eta.insert(m.as_str(), scatter::clock_rates(&ion, m, w, 1.0, &opts)?.eta_d52);
    }
    let out = Out {
        omega_l_rad_s: w,
        lambda_nm: units::omega_to_wavelength(w)? * 1e9,
        eta_d52: eta,
    };
    Ok((json_body(&out), sha))
}

fn cmd_gate_error(a: &GateErrorArgs) -> Result<(Vec<u8>, String)> {
    let (ion, sha) = load_ion(&a.ion)?;
    let opts = guard(a.guard_ghz)?;
    let kind: BeamConfig = a.beams.parse()?;
    let mut config = GateConfig::new(kind, a.loops, 2.0 * std::f64::consts::PI * a.mode_mhz * 1e6, ion.mass())?;
    config.exponential = a.exponential;
    let models: Vec<ScatterModel> = match a.model {
        ModelArg::All => vec![ScatterModel::Cda, ScatterModel::W3],
        ModelArg::Pt => return Err(Error::InvalidInput("gate errors use --model cda, w3 or all".into())),
        m => m.models(),
    };
    let single = branching_freq(a.lambda_nm, a.omega_rads)?;

    if a.sweep || a.range.get()?.is_some() {
        let (lo, hi) = match a.range.get()? {
            Some(r) => r,
            None => (1e-3 * ion.energy(ManifoldLabel::E), units::wavelength_to_omega(532e-9)?),
        };
        let rows = gatebudget::error_sweep(&ion, &config, lo, hi, a.range.points, &models)?;
        let mut buf = Vec::new();
        gatebudget::write_error_csv(&rows, &mut buf)?;
        return Ok((buf, sha));
    }

    let w = single.ok_or_else(|| Error::InvalidInput("give --lambda-nm/--omega-rads, or --sweep".into()))?;
    let eta = gatebudget::lamb_dicke(&config, w);

    #[derive(Serialize)]
    struct Out {
        omega_l_rad_s: f64,
        lambda_nm: f64,
        config: GateConfig,
        eta_lamb_dicke: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        cda_asymptote: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        inferred_epsilon_2q: Option<f64>,
        budgets: Vec<BudgetOut>,
    }
    #[derive(Serialize)]
    struct BudgetOut {
        model: ScatterModel,
        epsilon_1q: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        epsilon_2q: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        gate_time_s: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        raman_rate_s: Option<f64>,
    }

    let intensity = a.intensity.get()?;
    let mut budgets = Vec::new();
    for &m in &models {
        let b = gatebudget::budget(&ion, m, w, intensity.unwrap_or(1.0), &config)?;
        budgets.push(BudgetOut {
            model: m,
            epsilon_1q: b.epsilon_1q,
            epsilon_2q: kind.is_two_qubit().then_some(b.epsilon_2q),
            gate_time_s: intensity.map(|_| b.gate_time),
            raman_rate_s: intensity.map(|_| b.scattering_rate_used),
        });
    }
    let cda_asymptote = if a.asymptote {
        Some(gatebudget::cda_asymptote(&ion, &config, w)?)
    } else {
        None
    };
    let slope = match (a.infer_slope, a.infer_slope_per_intensity) {
        (Some(s), None) => Some(s),
        (None, Some(s)) => {
            let beam = LaserField::sigma_plus(w, 1.0)?;
            let stark = StarkOptions {
                guard: opts.guard,
                ..StarkOptions::default()
            };
            let d = lightshift::differential_stark(&ion, &beam, &QubitPair::o_type(&ion)?, &stark)?;
            if d == 0.0 {
                return Err(Error::ZeroSensitivity("o-type shift vanishes at this frequency".into()));
            }
            Some(s / d.abs())
        }
        _ => None,
    };
    let inferred_epsilon_2q = match slope {
        Some(s) => Some(gatebudget::infer_error_from_slope(&ion, s, w, &config, &opts)?),
        None => None,
    };
    let out = Out {
        omega_l_rad_s: w,
        lambda_nm: units::omega_to_wavelength(w)? * 1e9,
        config,
        eta_lamb_dicke: eta,
        cda_asymptote,
        inferred_epsilon_2q,
        budgets,
    };
    Ok((json_body(&out), sha))
}

fn cmd_stark(a: &StarkArgs) -> Result<(Vec<u8>, String)> {
    let (ion, sha) = load_ion(&a.ion)?;
    let w = a.freq.omega()?;
    let opts = StarkOptions {
        counter_rotating: !a.no_counter_rotating,
        guard: guard(a.guard_ghz)?.guard,
    };
    let pair = match a.pair {
        PairArg::G => QubitPair::g_type(&ion)?,
        PairArg::O => QubitPair::o_type(&ion)?,
        PairArg::M => QubitPair::m_type(&ion)?,
    };
    let two_pi = 2.0 * std::f64::consts::PI;
    #[derive(Serialize)]
    struct Out {
        omega_l_rad_s: f64,
        lambda_nm: f64,
        pair: lightshift::QubitKind,
        intensity_w_m2: f64,
        shift_lower_rad_s: f64,
        shift_upper_rad_s: f64,
        differential_rad_s: f64,
        differential_hz: f64,
        differential_per_intensity_rad_s: f64,
    }
    let intensity = match (a.delta_hz, a.intensity.get()?) {
        (Some(d), None) => {
            let template = LaserField::new(w, 1.0, a.polarization.vector())?;
            lightshift::stark_to_intensity(&ion, &template, &pair, two_pi * d, &opts)?
        }
        (None, Some(i)) => i,
        (Some(_), Some(_)) => return Err(Error::InvalidInput("--delta-hz replaces the intensity flags".into())),
        (None, None) => return Err(Error::InvalidInput("give an intensity or --delta-hz".into())),
    };
    let laser = LaserField::new(w, intensity, a.polarization.vector())?;
    let lo = lightshift::ac_stark_shift(&ion, &laser, &pair.lower, &opts)?;
    let up = lightshift::ac_stark_shift(&ion, &laser, &pair.upper, &opts)?;
    let unit = lightshift::differential_stark(&ion, &laser.with_intensity(1.0)?, &pair, &opts)?;
    let out = Out {
        omega_l_rad_s: w,
        lambda_nm: units::omega_to_wavelength(w)? * 1e9,
        pair: pair.kind,
        intensity_w_m2: intensity,
        shift_lower_rad_s: lo,
        shift_upper_rad_s: up,
        differential_rad_s: up - lo,
        differential_hz: (up - lo) / two_pi,
        differential_per_intensity_rad_s: unit,
    };
    Ok((json_body(&out), String::new()))
        .map(|(b, _)| (b, sha))
}

fn cmd_simulate(a: &SimulateArgs) -> Result<(Vec<u8>, String)> {
    let cfg = ExperimentConfig {
        shots: a.shots,
        exposure_time: a.tau_ms * 1e-3,
        true_rate: a.rate,
        background_prob: a.background,
        rng_seed: a.seed,
    };
    let counts = expsim::simulate_run(&cfg)?;
    let m = expsim::measure_rate(&counts, cfg.exposure_time)?;
    #[derive(Serialize)]
    struct Out {
        config: ExperimentConfig,
        counts: expsim::RunCounts,
        measured: expsim::RateMeasurement,
    }
    Ok((
        json_body(&Out {
            config: cfg,
            counts,
            measured: m,
        }),
        String::new(),
    ))
}

fn cmd_fit(a: &FitArgs) -> Result<(Vec<u8>, String)> {
    let bytes = std::fs::read(&a.input).map_err(|source| Error::Io {
        path: a.input.display().to_string(),
        source,
    })?;
    let pts = expsim::read_points(bytes.as_slice())?;
    let f = expsim::odr_fit(&pts, a.intercept)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let e = |e: csv::Error| Error::InvalidInput(format!("CSV write failed: {e}"));
    let opt = |x: Option<f64>| x.map(fmt9).unwrap_or_default();
    w.write_record(["slope", "sigma_slope", "intercept", "sigma_intercept", "chi2", "n_iterations"])
        .map_err(e)?;
    w.write_record([
        fmt9(f.slope),
        fmt9(f.sigma_slope),
        opt(f.intercept),
        opt(f.sigma_intercept),
        fmt9(f.chi2),
        f.iterations.to_string(),
    ])
    .map_err(e)?;
    let buf = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok((buf, sha256_hex(&bytes)))
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonConvergence { .. } => 4,
        e if e.is_numerical_domain() => 3,
        _ => 2,
    }
}

/// Runs a parsed command, writing its output to `stdout` or `--out`.
pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    let (body, sha, out) = match &cli.command {
        Command::Rates(a) => {
            let (b, s) = cmd_rates(a)?;
            (b, Some(s), &a.out)
        }
        Command::Sweep(a) => {
            let (b, s) = cmd_sweep(a)?;
            (b, Some(s), &a.out)
        }
        Command::Branching(a) => {
            let (b, s) = cmd_branching(a)?;
            (b, Some(s), &a.out)
        }
        Command::GateError(a) => {
            let (b, s) = cmd_gate_error(a)?;
            (b, Some(s), &a.out)
        }
        Command::Stark(a) => {
            let (b, s) = cmd_stark(a)?;
            (b, Some(s), &a.out)
        }
        Command::Simulate(a) => {
            let (b, _) = cmd_simulate(a)?;
            (b, None, &a.out)
        }
        Command::Fit(a) => {
            let (b, _) = cmd_fit(a)?;
            (b, None, &a.out)
        }
    };
    let manifest = RunManifest {
        command: &cli.command,
        ion_sha256: sha,
        tool_version: env!("CARGO_PKG_VERSION"),
        timestamp: timestamp(),
    };
    Sink { path: out.out.as_deref() }.write(stdout, &manifest, &body)
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(&cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
