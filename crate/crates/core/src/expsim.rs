//! Monte Carlo model of the shelving measurement and the statistics used to
//! turn dark counts into a rate-versus-Stark-shift slope.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

pub const ODR_MAX_ITERATIONS: usize = 200;
pub const ODR_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub shots: u64,
    /// Laser exposure per shot, s.
    pub exposure_time: f64,
    /// s⁻¹
    pub true_rate: f64,
    /// Dark-event probability without the laser.
    pub background_prob: f64,
    pub rng_seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shots == 0 {
            return Err(Error::InvalidInput("shots must be >= 1".into()));
        }
        if !(self.exposure_time > 0.0 && self.exposure_time.is_finite()) {
            return Err(Error::InvalidInput(format!("exposure time must be positive, got {}", self.exposure_time)));
        }
        if !(self.true_rate >= 0.0 && self.true_rate.is_finite()) {
            return Err(Error::InvalidInput(format!("rate must be >= 0, got {}", self.true_rate)));
        }
        if !(0.0..=1.0).contains(&self.background_prob) {
            return Err(Error::InvalidInput(format!(
                "background probability must lie in [0, 1], got {}",
                self.background_prob
            )));
        }
        Ok(())
    }

    /// Dark probability with the laser on, `1 − (1 − p_bg) e^{−Γτ}`.
    pub fn p_on(&self) -> f64 {
        1.0 - (1.0 - self.background_prob) * (-self.true_rate * self.exposure_time).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RunCounts {
    pub shots: u64,
    pub dark_on: u64,
    pub dark_off: u64,
}

/// Draws the laser-on and laser-off dark counts. Summing independent
/// Bernoulli shots is drawn directly as a binomial.
pub fn simulate_run(config: &ExperimentConfig) -> Result<RunCounts> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    Ok(draw_counts(config, &mut rng))
}

fn draw_counts(config: &ExperimentConfig, rng: &mut ChaCha8Rng) -> RunCounts {
    let on = Binomial::new(config.shots, config.p_on()).expect("validated probability");
    let off = Binomial::new(config.shots, config.background_prob).expect("validated probability");
    RunCounts {
        shots: config.shots,
        dark_on: on.sample(rng),
        dark_off: off.sample(rng),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Corrected {
    pub p_meas: f64,
    /// Set when `p_on < p_off` and the difference was clamped to 0.
    pub clamped: bool,
}

pub fn background_correct(p_on: f64, p_off: f64) -> Result<Corrected> {
    for (n, p) in [("p_on", p_on), ("p_off", p_off)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidInput(format!("{n} must lie in [0, 1], got {p}")));
        }
    }
    let d = p_on - p_off;
    Ok(if d < 0.0 {
        Corrected { p_meas: 0.0, clamped: true }
    } else {
        Corrected { p_meas: d, clamped: false }
    })
}

/// `Γ = −ln(1 − P)/τ`
pub fn extract_rate(p_meas: f64, tau: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p_meas) {
        return Err(Error::InvalidInput(format!("P_meas must lie in [0, 1), got {p_meas}")));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidInput(format!("exposure time must be positive, got {tau}")));
    }
    Ok(-(-p_meas).ln_1p() / tau)
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> Result<(f64, f64)> {
    if n == 0 || k > n {
        return Err(Error::InvalidInput(format!("need 0 <= k <= n and n >= 1, got k={k}, n={n}")));
    }
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::InvalidInput(format!("z must be positive, got {z}")));
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let lo = if k == 0 { 0.0 } else { (centre - half).clamp(0.0, p) };
    let hi = if k == n { 1.0 } else { (centre + half).clamp(p, 1.0) };
    Ok((lo, hi))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateMeasurement {
    pub rate: f64,
    /// One-standard-error uncertainty on `rate`.
    pub sigma: f64,
    pub p_meas: f64,
    pub clamped: bool,
}

/// Background-corrected rate with an uncertainty from the z=1 Wilson
/// half-widths of both count fractions, combined in quadrature.
pub fn measure_rate(counts: &RunCounts, tau: f64) -> Result<RateMeasurement> {
    let n = counts.shots as f64;
    let p_on = counts.dark_on as f64 / n;
    let p_off = counts.dark_off as f64 / n;
    let c = background_correct(p_on, p_off)?;
    let hw = |k| -> Result<f64> {
        let (lo, hi) = wilson_interval(k, counts.shots, 1.0)?;
        Ok(0.5 * (hi - lo))
    };
    let sp = hw(counts.dark_on)?.hypot(hw(counts.dark_off)?);
    let rate = extract_rate(c.p_meas, tau)?;
    Ok(RateMeasurement {
        rate,
        sigma: sp / ((1.0 - c.p_meas) * tau),
        p_meas: c.p_meas,
        clamped: c.clamped,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FitPoint {
    pub x: f64,
    pub sigma_x: f64,
    pub y: f64,
    pub sigma_y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub slope: f64,
    pub sigma_slope: f64,
    pub intercept: Option<f64>,
    pub sigma_intercept: Option<f64>,
    /// Minimum of the weighted orthogonal-distance objective.
    pub chi2: f64,
    pub dof: usize,
    pub iterations: usize,
    /// Best objective after each iteration; non-increasing.
    pub trace: Vec<f64>,
}

struct Odr<'a> {
    pts: &'a [FitPoint],
    intercept: bool,
}

impl Odr<'_> {
    /// Objective after minimizing over the latent points:
    /// `Σ (y − a − b x)² / (σy² + b² σx²)`.
    fn objective(&self, a: f64, b: f64) -> f64 {
        self.pts
            .iter()
            .map(|p| {
                let r = p.y - a - b * p.x;
                r * r / (p.sigma_y * p.sigma_y + b * b * p.sigma_x * p.sigma_x)
            })
            .sum()
    }

    /// Optimal intercept at fixed slope (zero when not floated).
    fn best_intercept(&self, b: f64) -> f64 {
        if !self.intercept {
            return 0.0;
        }
        let (mut sw, mut swr) = (0.0, 0.0);
        for p in self.pts {
            let w = 1.0 / (p.sigma_y * p.sigma_y + b * b * p.sigma_x * p.sigma_x);
            sw += w;
            swr += w * (p.y - b * p.x);
        }
        swr / sw
    }

    fn profile(&self, b: f64) -> f64 {
        self.objective(self.best_intercept(b), b)
    }
}

/// Ratio of the y spread to the x spread, or 1 when either vanishes.
fn slope_scale(pts: &[FitPoint]) -> f64 {
    let spread = |v: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(x), h.max(x)));
        hi - lo
    };
    let sx = spread(&mut pts.iter().map(|p| p.x));
    let sy = spread(&mut pts.iter().map(|p| p.y));
    let s = if sx > 0.0 && sy > 0.0 { sy / sx } else { 0.0 };
    if s.is_finite() && s > 0.0 {
        s
    } else {
        1.0
    }
}

/// Weighted least-squares slope (and intercept) with weights `1/σy²`, and
/// the slope's standard error.
fn wls(pts: &[FitPoint], intercept: bool) -> (f64, f64, f64) {
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in pts {
        let w = 1.0 / (p.sigma_y * p.sigma_y);
        sw += w;
        sx += w * p.x;
        sy += w * p.y;
        sxx += w * p.x * p.x;
        sxy += w * p.x * p.y;
    }
    if intercept {
        let d = sw * sxx - sx * sx;
        let b = (sw * sxy - sx * sy) / d;
        let a = (sy - b * sx) / sw;
        (b, a, (sw / d).sqrt())
    } else {
        (sxy / sxx, 0.0, (1.0 / sxx).sqrt())
    }
}

/// Brent minimization of `f` on `[lo, hi]`, recording the best value seen
/// after every iteration.
fn brent_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, trace: &mut Vec<f64>) -> Result<(f64, usize)> {
    const GOLD: f64 = 0.381_966_011_250_105_1;
    let mut x = lo + GOLD * (hi - lo);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0_f64, 0.0_f64);
    for it in 1..=ODR_MAX_ITERATIONS {
        let m = 0.5 * (lo + hi);
        let tol = ODR_TOLERANCE * x.abs() + 1e-300;
        let t2 = 2.0 * tol;
        if (x - m).abs() <= t2 - 0.5 * (hi - lo) || fx == 0.0 {
            return Ok((x, it - 1));
        }
        let mut golden = true;
        if e.abs() > tol {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.abs() < (0.5 * q * e).abs() && p > q * (lo - x) && p < q * (hi - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - lo < t2 || hi - u < t2 {
                    d = if x < m { tol } else { -tol };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { hi - x } else { lo - x };
            d = GOLD * e;
        }
        let u = if d.abs() >= tol { x + d } else { x + tol.copysign(d) };
        let fu = f(u);
        if fu <= fx {
            if u < x {
                hi = x;
            } else {
                lo = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                lo = u;
            } else {
                hi = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
        trace.push(fx);
    }
    Err(Error::NonConvergence {
        iterations: ODR_MAX_ITERATIONS,
        reason: format!("slope bracket still [{lo:e}, {hi:e}]"),
    })
}

/// Orthogonal-distance (errors-in-variables) straight-line fit.
///
/// The latent abscissae are eliminated in closed form, leaving a 1-D search
/// over the slope; the intercept, when floated, is profiled out exactly.
/// Uncertainties come from the curvature of the objective, `cov = 2 H⁻¹`,
/// without rescaling by the reduced χ².
pub fn odr_fit(points: &[FitPoint], with_intercept: bool) -> Result<FitResult> {
    let need = if with_intercept { 2 } else { 1 };
    if points.len() < need {
        return Err(Error::InvalidInput(format!("need at least {need} points, got {}", points.len())));
    }
    for (i, p) in points.iter().enumerate() {
        if !(p.sigma_x > 0.0 && p.sigma_y > 0.0) || !(p.x.is_finite() && p.y.is_finite()) {
            return Err(Error::InvalidInput(format!("point {i}: need finite values and sigmas > 0")));
        }
    }
    if with_intercept && points.iter().all(|p| p.x == points[0].x) {
        return Err(Error::Degenerate("all x values identical".into()));
    }
    if !with_intercept && points.iter().all(|p| p.x == 0.0) {
        return Err(Error::Degenerate("all x values zero".into()));
    }

    let odr = Odr {
        pts: points,
        intercept: with_intercept,
    };
    let (b0, _, s0) = wls(points, with_intercept);
    // the y-on-x and x-on-y regressions usually bracket the orthogonal solution
    let swapped: Vec<FitPoint> = points
        .iter()
        .map(|p| FitPoint {
            x: p.y,
            sigma_x: p.sigma_y,
            y: p.x,
            sigma_y: p.sigma_x,
        })
        .collect();
    let (c0, _, _) = wls(&swapped, with_intercept);
    let mut cands = vec![b0];
    if c0 != 0.0 {
        cands.push(1.0 / c0);
    }
    // each term vanishes at its own point ratio (or, with an intercept, the
    // pair slopes); the optimum is usually near them but need not be
    if with_intercept {
        for (i, p) in points.iter().enumerate() {
            for q in &points[i + 1..] {
                if q.x != p.x {
                    cands.push((q.y - p.y) / (q.x - p.x));
                }
            }
        }
    } else {
        cands.extend(points.iter().filter(|p| p.x != 0.0).map(|p| p.y / p.x));
    }
    cands.retain(|c| c.is_finite());
    let mut lo = cands.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = cands.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = 0.1 * (hi - lo) + 10.0 * s0 + 1e-12 * b0.abs();
    lo -= pad;
    hi += pad;

    // coarse scan picks the basin, Brent refines inside it; the tan grid
    // reaches slopes far outside the candidates
    const SCAN: usize = 64;
    let scale = slope_scale(points);
    let mut grid: Vec<f64> = (0..=SCAN).map(|i| lo + (hi - lo) * i as f64 / SCAN as f64).collect();
    grid.extend((0..2 * SCAN).map(|k| {
        let t = -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * (k as f64 + 0.5) / (2 * SCAN) as f64;
        scale * t.tan()
    }));
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let vals: Vec<f64> = grid.iter().map(|&b| odr.profile(b)).collect();
    let best = (0..grid.len()).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap_or(0);
    let (lo, hi) = (grid[best.saturating_sub(1)], grid[(best + 1).min(grid.len() - 1)]);

    let mut trace = Vec::new();
    let (b, iterations) = brent_min(|b| odr.profile(b), lo, hi, &mut trace)?;
    let a = odr.best_intercept(b);
    let chi2 = odr.objective(a, b);
    if trace.is_empty() {
        trace.push(chi2);
    }

    // σ_b from the profile curvature; σ_a adds the exact ∂²/∂a² = 2Σw term
    // to the slope variance carried through a*(b). Both equal 2H⁻¹ but avoid
    // the cancellation in det H when a and b are strongly correlated.
    let hb = 1e-4 * b.abs().max(s0).max(1e-300);
    let f0 = odr.profile(b);
    let pbb = (odr.profile(b + hb) - 2.0 * f0 + odr.profile(b - hb)) / (hb * hb);
    if !(pbb > 0.0) {
        return Err(Error::Degenerate("objective is not convex at the optimum".into()));
    }
    let var_b = 2.0 / pbb;
    let sigma_intercept = with_intercept.then(|| {
        let haa = 2.0 / intercept_scale(points, b).powi(2);
        let da = (odr.best_intercept(b + hb) - odr.best_intercept(b - hb)) / (2.0 * hb);
        (2.0 / haa + da * da * var_b).sqrt()
    });
    let sigma_slope = var_b.sqrt();

    Ok(FitResult {
        slope: b,
        sigma_slope,
        intercept: with_intercept.then_some(a),
        sigma_intercept,
        chi2,
        dof: points.len().saturating_sub(if with_intercept { 2 } else { 1 }),
        iterations,
        trace,
    })
}

/// Standard error of the weighted mean of residual heights at slope `b`.
fn intercept_scale(points: &[FitPoint], b: f64) -> f64 {
    let sw: f64 = points
        .iter()
        .map(|p| 1.0 / (p.sigma_y * p.sigma_y + b * b * p.sigma_x * p.sigma_x))
        .sum();
    (1.0 / sw).sqrt()
}

/// Reads `x, sigma_x, y, sigma_y` rows (with header).
pub fn read_points<R: std::io::Read>(input: R) -> Result<Vec<FitPoint>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = r.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let expect = ["x", "sigma_x", "y", "sigma_y"];
    if headers.len() != 4 || headers.iter().zip(expect).any(|(h, e)| h != e) {
        return Err(Error::Parse(format!("expected header {}, found {:?}", expect.join(","), headers)));
    }
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let mut v = [0.0; 4];
        for (slot, field) in v.iter_mut().zip(rec.iter()) {
            *slot = field
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad number {field:?}", line + 2)))?;
        }
        out.push(FitPoint {
            x: v[0],
            sigma_x: v[1],
            y: v[2],
            sigma_y: v[3],
        });
    }
    Ok(out)
}

/// One point of a rate-versus-shift scan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DesignPoint {
    /// True Stark shift, rad/s.
    pub x: f64,
    /// Standard error reported for the measured shift, rad/s.
    pub sigma_x: f64,
    pub exposure_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineConfig {
    /// True `Γ/δ`.
    pub slope: f64,
    pub design: Vec<DesignPoint>,
    pub shots: u64,
    pub background_prob: f64,
    pub with_intercept: bool,
    pub seed: u64,
}

/// Simulates one scan: noisy shifts, dark counts per point, extracted rates.
pub fn simulate_scan(cfg: &PipelineConfig, replication: u64) -> Result<Vec<FitPoint>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(replication);
    cfg.design
        .iter()
        .map(|d| {
            let ec = ExperimentConfig {
                shots: cfg.shots,
                exposure_time: d.exposure_time,
                true_rate: cfg.slope * d.x,
                background_prob: cfg.background_prob,
                rng_seed: 0,
            };
            ec.validate()?;
            let noise = Normal::new(0.0, d.sigma_x).map_err(|e| Error::InvalidInput(e.to_string()))?;
            let x = d.x + noise.sample(&mut rng);
            let m = measure_rate(&draw_counts(&ec, &mut rng), d.exposure_time)?;
            Ok(FitPoint {
                x,
                sigma_x: d.sigma_x,
                y: m.rate,
                sigma_y: m.sigma,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverageReport {
    pub replications: usize,
    pub covered: usize,
    pub coverage: f64,
    pub mean_slope: f64,
    pub mean_sigma: f64,
}

/// Runs `replications` independent scans and fits, counting how often the
/// `z`-sigma slope interval contains the truth.
pub fn coverage_study(cfg: &PipelineConfig, replications: usize, z: f64) -> Result<CoverageReport> {
    if replications == 0 {
        return Err(Error::InvalidInput("need at least one replication".into()));
    }
    let fits: Result<Vec<FitResult>> = (0..replications as u64)
        .into_par_iter()
        .map(|r| odr_fit(&simulate_scan(cfg, r)?, cfg.with_intercept))
        .collect();
    let fits = fits?;
    let covered = fits
        .iter()
        .filter(|f| (f.slope - cfg.slope).abs() <= z * f.sigma_slope)
        .count();
    let n = fits.len() as f64;
    Ok(CoverageReport {
        replications,
        covered,
        coverage: covered as f64 / n,
        mean_slope: fits.iter().map(|f| f.slope).sum::<f64>() / n,
        mean_sigma: fits.iter().map(|f| f.sigma_slope).sum::<f64>() / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn odr_finds_minimum_steeper_than_every_pair_slope() {
        // large x errors on the outer points pull the optimum to b ≈ 400,
        // beyond the steepest pair slope (≈ 192)
        let pts = [
            FitPoint { x: 3.924127061114707, sigma_x: 0.6768403026885292, y: 61.56091371630869, sigma_y: 0.06155884997692239 },
            FitPoint { x: 4.150887843549311, sigma_x: 0.718097358910892, y: 105.15977312978887, sigma_y: 24.58044565509576 },
            FitPoint { x: 4.260825258978836, sigma_x: 0.004257174592694361, y: 77.1951672927663, sigma_y: 0.07722128782517741 },
        ];
        let f = odr_fit(&pts, true).unwrap();
        let odr = Odr { pts: &pts, intercept: true };
        for k in 0..2000 {
            let b = 10f64.powf(1.0 + 4.0 * k as f64 / 2000.0);
            assert!(f.chi2 <= odr.profile(b) + 1e-12, "b={b}: {} > {}", f.chi2, odr.profile(b));
        }
        assert!(f.slope > 192.0);
        let mut rev = pts;
        rev.reverse();
        assert!((odr_fit(&rev, true).unwrap().slope / f.slope - 1.0).abs() < 1e-7);
    }

    #[test]
    fn zero_rates_give_zero_counts() {
        let c = ExperimentConfig {
            shots: 1000,
            exposure_time: 1e-3,
            true_rate: 0.0,
            background_prob: 0.0,
            rng_seed: 1,
        };
        let r = simulate_run(&c).unwrap();
        assert_eq!((r.dark_on, r.dark_off), (0, 0));
    }

    #[test]
    fn half_dark_at_ln2() {
        let c = ExperimentConfig {
            shots: 2_000_000,
            exposure_time: 1.0,
            true_rate: std::f64::consts::LN_2,
            background_prob: 0.0,
            rng_seed: 7,
        };
        let r = simulate_run(&c).unwrap();
        let f = r.dark_on as f64 / c.shots as f64;
        assert!((f - 0.5).abs() < 3e-3, "{f}");
    }

    #[test]
    fn runs_are_deterministic() {
        let c = ExperimentConfig {
            shots: 50_000,
            exposure_time: 5e-3,
            true_rate: 0.4,
            background_prob: 6e-4,
            rng_seed: 42,
        };
        assert_eq!(simulate_run(&c).unwrap(), simulate_run(&c).unwrap());
        let other = ExperimentConfig { rng_seed: 43, ..c };
        assert_ne!(simulate_run(&c).unwrap(), simulate_run(&other).unwrap());
    }

    #[test]
    fn background_subtraction() {
        assert_eq!(background_correct(0.3, 0.3).unwrap().p_meas, 0.0);
        let c = background_correct(2e-3, 6e-4).unwrap();
        assert!((c.p_meas - 1.4e-3).abs() < 1e-15 && !c.clamped);
        let c = background_correct(1e-4, 6e-4).unwrap();
        assert_eq!(c.p_meas, 0.0);
        assert!(c.clamped);
        assert!(background_correct(1.1, 0.0).is_err());
    }

    #[test]
    fn rate_extraction() {
        assert_eq!(extract_rate(0.0, 1.0).unwrap(), 0.0);
        let r = extract_rate(1.0 - (-1.0f64).exp(), 1.0).unwrap();
        assert!((r - 1.0).abs() < 1e-15);
        assert!(extract_rate(1.0, 1.0).is_err());
        for p in [1e-5, 1e-3, 0.05] {
            let r = extract_rate(p, 1.0).unwrap();
            // -ln(1-p) = p + p²/2 + p³/3 + ...
            assert!((r - p).abs() / p <= p / 2.0 + p * p);
        }
        for g in [1e-3f64, 0.7, 12.0] {
            let p = -(-g).exp_m1();
            // conditioning of -ln(1-p) near p=1 is e^g/g
            let tol = 4.0 * f64::EPSILON * g.exp().max(1.0) / g.min(1.0);
            assert!((extract_rate(p, 1.0).unwrap() / g - 1.0).abs() < tol);
        }
    }

    #[test]
    fn wilson_known_value() {
        let (lo, hi) = wilson_interval(0, 10, 1.96).unwrap();
        assert_eq!(lo, 0.0);
        assert!((hi - 0.2775).abs() < 1e-4, "{hi}");
        let (lo, hi) = wilson_interval(10, 10, 1.96).unwrap();
        assert_eq!(hi, 1.0);
        assert!(lo < 1.0);
        assert!(wilson_interval(11, 10, 1.0).is_err());
        assert!(wilson_interval(0, 0, 1.0).is_err());
    }

    #[test]
    fn wilson_solves_the_score_equation() {
        // each bound is where the normal score statistic equals ±z
        for &(k, n, z) in &[(3u64, 40u64, 1.0), (17, 200, 1.96), (1, 5, 2.5)] {
            let (lo, hi) = wilson_interval(k, n, z).unwrap();
            let p = k as f64 / n as f64;
            for b in [lo, hi] {
                let s = (p - b).abs() / (b * (1.0 - b) / n as f64).sqrt();
                assert!((s - z).abs() < 1e-9, "{k}/{n}: {s}");
            }
        }
    }

    #[test]
    fn wilson_against_exact_binomial_tails() {
        use statrs::distribution::{Binomial as B, DiscreteCDF};
        // Wilson sits inside the exact (Clopper-Pearson) interval, so the
        // exact tails at its bounds exceed the nominal 2.5% but stay below 5%
        let (k, n) = (30u64, 300u64);
        let (lo, hi) = wilson_interval(k, n, 1.96).unwrap();
        let upper_tail = 1.0 - B::new(lo, n).unwrap().cdf(k - 1);
        let lower_tail = B::new(hi, n).unwrap().cdf(k);
        for t in [upper_tail, lower_tail] {
            assert!((0.025..0.05).contains(&t), "{t}");
        }
    }

    #[test]
    fn wilson_shrinks_as_root_n() {
        let (a, b) = wilson_interval(100, 1000, 1.0).unwrap();
        let (c, d) = wilson_interval(10000, 100000, 1.0).unwrap();
        let r = (b - a) / (d - c);
        assert!((r - 10.0).abs() < 0.05, "{r}");
    }

    fn line(b: f64, a: f64) -> Vec<FitPoint> {
        (1..=7)
            .map(|i| {
                let x = i as f64 * 1.3;
                FitPoint {
                    x,
                    sigma_x: 0.05 + 0.01 * i as f64,
                    y: a + b * x,
                    sigma_y: 0.2 + 0.03 * i as f64,
                }
            })
            .collect()
    }

    #[test]
    fn exact_line_is_recovered() {
        let f = odr_fit(&line(3.0, 0.0), false).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-10, "{}", f.slope);
        let f = odr_fit(&line(3.0, -2.0), true).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-10);
        assert!((f.intercept.unwrap() + 2.0).abs() < 1e-9);
    }

    fn noisy(seed: u64) -> Vec<FitPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = Normal::new(0.0, 1.0).unwrap();
        (0..12)
            .map(|i| {
                let x = 0.5 + i as f64;
                let (sx, sy) = (0.1 + 0.02 * i as f64, 0.3 + 0.05 * (i % 3) as f64);
                FitPoint {
                    x: x + sx * n.sample(&mut rng),
                    sigma_x: sx,
                    y: 1.0 + 2.0 * x + sy * n.sample(&mut rng),
                    sigma_y: sy,
                }
            })
            .collect()
    }

    #[test]
    fn small_sigma_x_reproduces_weighted_least_squares() {
        for intercept in [false, true] {
            let mut pts = noisy(3);
            for p in &mut pts {
                p.sigma_x = 1e-9;
            }
            // closed-form WLS oracle
            let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for p in &pts {
                let w = 1.0 / (p.sigma_y * p.sigma_y);
                sw += w;
                sx += w * p.x;
                sy += w * p.y;
                sxx += w * p.x * p.x;
                sxy += w * p.x * p.y;
            }
            let (b, sb) = if intercept {
                let d = sw * sxx - sx * sx;
                ((sw * sxy - sx * sy) / d, (sw / d).sqrt())
            } else {
                (sxy / sxx, (1.0 / sxx).sqrt())
            };
            let f = odr_fit(&pts, intercept).unwrap();
            assert!((f.slope / b - 1.0).abs() < 1e-6, "{} {b}", f.slope);
            assert!((f.sigma_slope / sb - 1.0).abs() < 1e-4, "{} {sb}", f.sigma_slope);
        }
    }

    #[test]
    fn axis_swap_inverts_slope() {
        for intercept in [false, true] {
            let pts = noisy(11);
            let swapped: Vec<_> = pts
                .iter()
                .map(|p| FitPoint {
                    x: p.y,
                    sigma_x: p.sigma_y,
                    y: p.x,
                    sigma_y: p.sigma_x,
                })
                .collect();
            let a = odr_fit(&pts, intercept).unwrap();
            let b = odr_fit(&swapped, intercept).unwrap();
            assert!((a.slope * b.slope - 1.0).abs() < 1e-6, "{} {}", a.slope, b.slope);
        }
    }

    #[test]
    fn trace_is_monotone() {
        let f = odr_fit(&noisy(5), true).unwrap();
        assert!(f.iterations <= ODR_MAX_ITERATIONS);
        assert!(f.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn degenerate_inputs() {
        let p = FitPoint {
            x: 1.0,
            sigma_x: 0.1,
            y: 2.0,
            sigma_y: 0.1,
        };
        assert!(matches!(odr_fit(&[p, p], true), Err(Error::Degenerate(_))));
        assert!(odr_fit(&[p], true).is_err());
        assert!(odr_fit(&[p], false).is_ok());
        assert!(odr_fit(&[], false).is_err());
        let bad = FitPoint { sigma_y: 0.0, ..p };
        assert!(odr_fit(&[p, bad], false).is_err());
    }

    #[test]
    fn points_csv() {
        let text = "x,sigma_x,y,sigma_y\n1,0.1,3,0.2\n2, 0.1, 6, 0.2\n";
        let pts = read_points(text.as_bytes()).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[1].y, 6.0);
        assert!(read_points("a,b,c,d\n1,2,3,4\n".as_bytes()).is_err());
        assert!(read_points("x,sigma_x,y,sigma_y\n1,2,z,4\n".as_bytes()).is_err());
    }

    #[test]
    fn small_coverage_study_is_sane() {
        let cfg = PipelineConfig {
            slope: 2e-3,
            design: (1..=6)
                .map(|i| DesignPoint {
                    x: 100.0 * i as f64,
                    sigma_x: 2.0 * i as f64,
                    exposure_time: 5e-3,
                })
                .collect(),
            shots: 50_000,
            background_prob: 6e-4,
            with_intercept: false,
            seed: 9,
        };
        let r = coverage_study(&cfg, 200, 1.96).unwrap();
        assert!(r.coverage > 0.85, "{r:?}");
        assert!((r.mean_slope / cfg.slope - 1.0).abs() < 0.01);
    }
}
