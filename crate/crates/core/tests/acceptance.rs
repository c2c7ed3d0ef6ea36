//! Acceptance criteria A1–A9. Prints one PASS/FAIL line per criterion.
//!
//! Always exits 0 unless `ACCEPTANCE_STRICT=1`, in which case any failing
//! criterion makes the process exit 1.

use std::f64::consts::PI;
use std::time::Instant;

use ionscatter::angmom::{three_j, HalfInt};
use ionscatter::atomdata::{IonModel, ManifoldLabel, REQUIRED_LINES};
use ionscatter::expsim::{self, DesignPoint, FitPoint, PipelineConfig};
use ionscatter::gatebudget::{self, GateConfig};
use ionscatter::lightshift::{self, QubitPair, StarkOptions};
use ionscatter::scatter::{self, LaserField, PtOptions, ScatterModel};
use ionscatter::units;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

struct Report {
    failed: Vec<&'static str>,
}

impl Report {
    fn line(&mut self, id: &'static str, ok: bool, detail: String) {
        println!("{id} {}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failed.push(id);
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    a / b - 1.0
}

fn w532() -> f64 {
    units::wavelength_to_omega(532e-9).unwrap()
}

fn a1(r: &mut Report, ion: &IonModel) {
    let opts = PtOptions::default();
    let cda = scatter::clock_rates(ion, ScatterModel::Cda, w532(), 1.0, &opts).unwrap();
    let w3 = scatter::clock_rates(ion, ScatterModel::W3, w532(), 1.0, &opts).unwrap();
    let checks = [
        ("CDA total", cda.raman, 1.65e-9),
        ("CDA D5/2", cda.per_manifold.d52, 0.48e-9),
        ("w3 total", w3.raman, 1.37e-9),
        ("w3 D5/2", w3.per_manifold.d52, 0.25e-9),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, got, want) in checks {
        let d = rel(got, want);
        ok &= d.abs() <= 0.06;
        parts.push(format!("{name} {got:.3e} vs {want:.2e} ({:+.1}%)", 100.0 * d));
    }
    r.line("A1", ok, parts.join("; "));
}

fn a2(r: &mut Report, ion: &IonModel) {
    let ls = ion.with_ls_s_lines().unwrap();
    let init = ionscatter::AtomState::clock_lower(&ls).unwrap();
    let opts = PtOptions { guard: 0.0 };
    let guard = 2.0 * PI * 50e9;
    let lo = units::wavelength_to_omega(1500e-9).unwrap();
    let hi = units::wavelength_to_omega(480e-9).unwrap();
    let grid = scatter::uniform_grid(lo, hi, 200).unwrap();
    let poles: Vec<f64> = ManifoldLabel::UPPER.iter().map(|&u| ls.transition_omega(u, ManifoldLabel::G)).collect();
    let (mut worst, mut used) = (0.0f64, 0);
    let mut raw_worst = 0.0f64;
    for &w in &grid {
        if poles.iter().any(|p| (w - p).abs() < guard) {
            continue;
        }
        used += 1;
        let laser = LaserField::sigma_plus(w, 1e8).unwrap();
        let pt = scatter::pt_breakdown(&ls, &laser, &init, &opts).unwrap();
        let g = lightshift::coupling_g(&ls, &laser).value;
        let w3 = scatter::w3_rates(&ls, g, w).unwrap();
        let pairs = [
            (pt.total, w3.total),
            (pt.rayleigh, w3.rayleigh),
            (pt.per_manifold.s, w3.per_manifold.s),
            (pt.per_manifold.d32, w3.per_manifold.d32),
            (pt.per_manifold.d52, w3.per_manifold.d52),
        ];
        for (a, b) in pairs {
            if a != b {
                worst = worst.max(((a - b) / b.abs().max(1e-300)).abs());
            }
        }
        // same comparison on the shipped (non-LS) line strengths, for information
        let pr = scatter::pt_breakdown(ion, &laser, &init, &opts).unwrap();
        let wr = scatter::w3_rates(ion, lightshift::coupling_g(ion, &laser).value, w).unwrap();
        raw_worst = raw_worst.max(rel(pr.total, wr.total).abs());
    }
    r.line(
        "A2",
        worst <= 1e-6,
        format!(
            "PT vs w3 on LS-projected S-line data, {used}/200 grid points outside guards: max rel dev {worst:.2e} (shipped data: {raw_worst:.2e}, info)"
        ),
    );
}

fn a3(r: &mut Report, ion: &IonModel) {
    let w = 1e-4 * ion.energy(ManifoldLabel::E);
    let eta = scatter::clock_rates(ion, ScatterModel::Cda, w, 1.0, &PtOptions::default()).unwrap().eta_d52;
    r.line("A3", (eta - 0.73).abs() <= 0.01, format!("CDA eta_D5/2 at 1e-4 w_eg = {eta:.4} (0.73 ± 0.01)"));
}

fn a4(r: &mut Report, ion: &IonModel) {
    let eta = scatter::clock_rates(ion, ScatterModel::W3, w532(), 1.0, &PtOptions::default()).unwrap().eta_d52;
    r.line("A4", (eta - 0.18).abs() <= 0.01, format!("w3 eta_D5/2 at 532 nm = {eta:.4} (0.18 ± 0.01)"));
}

fn a5(r: &mut Report, ion: &IonModel) {
    let cfg = GateConfig::default_for(ion);
    let cda = gatebudget::two_qubit_error_at(ion, ScatterModel::Cda, w532(), &cfg).unwrap();
    let w3 = gatebudget::two_qubit_error_at(ion, ScatterModel::W3, w532(), &cfg).unwrap();
    let asym = gatebudget::cda_asymptote(ion, &cfg, w532()).unwrap();

    let lo = 2.0 * PI * 10e12;
    let grid = scatter::uniform_grid(lo, w532(), 400).unwrap();
    let mut below = true;
    let mut prev = 0.0;
    let mut monotone = true;
    for &w in &grid {
        let c = gatebudget::two_qubit_error_at(ion, ScatterModel::Cda, w, &cfg).unwrap();
        let e = gatebudget::two_qubit_error_at(ion, ScatterModel::W3, w, &cfg).unwrap();
        below &= e <= c;
        monotone &= e >= prev;
        prev = e;
    }
    let first = gatebudget::two_qubit_error_at(ion, ScatterModel::W3, grid[0], &cfg).unwrap();
    let tends_to_zero = first < 1e-3 * w3;

    // where the ordering flips on the blue side, for information
    let blue = scatter::uniform_grid(w532(), ion.energy(ManifoldLabel::E) - 2.0 * PI * 1e12, 200).unwrap();
    let cross = blue.iter().find(|&&w| {
        gatebudget::two_qubit_error_at(ion, ScatterModel::W3, w, &cfg).unwrap()
            > gatebudget::two_qubit_error_at(ion, ScatterModel::Cda, w, &cfg).unwrap()
    });
    let cross = cross.map_or("none".to_string(), |&w| format!("{:.1} nm", units::omega_to_wavelength(w).unwrap() * 1e9));

    let d1 = rel(cda, 1.05e-4);
    let d2 = rel(asym, 7.3e-5);
    let ok = d1.abs() <= 0.10 && d2.abs() <= 0.05 && below && w3 < 7.3e-5 && monotone && tends_to_zero;
    r.line(
        "A5",
        ok,
        format!(
            "CDA e2q {cda:.3e} vs 1.05e-4 ({:+.1}%); CDA asymptote {asym:.3e} vs 7.3e-5 ({:+.1}%); \
             w3 {w3:.3e} < 7.3e-5: {}; w3 <= CDA on 2pi*10 THz..532 nm: {below}; \
             w3 monotone and -> 0: {}; first w3 > CDA blue of 532 nm: {cross}",
            100.0 * d1,
            100.0 * d2,
            w3 < 7.3e-5,
            monotone && tends_to_zero,
        ),
    );
}

fn delta_per_intensity(ion: &IonModel) -> f64 {
    let beam = LaserField::sigma_plus(w532(), 1.0).unwrap();
    let d = lightshift::differential_stark(ion, &beam, &QubitPair::o_type(ion).unwrap(), &StarkOptions::default()).unwrap();
    d.abs()
}

fn a6(r: &mut Report, ion: &IonModel) {
    let cfg = GateConfig::default_for(ion);
    let di = delta_per_intensity(ion);
    let slope = 1.52e-9 / di;
    let e = gatebudget::infer_error_from_slope(ion, slope, w532(), &cfg, &PtOptions::default()).unwrap();
    let ratio = gatebudget::stark_to_rabi(ion, w532(), &PtOptions::default()).unwrap();
    r.line(
        "A6",
        (5.5e-5..=7.5e-5).contains(&e),
        format!("delta/I {di:.4e} rad/s per W/m^2, delta/Omega_R {ratio:.4}, inferred e2q {e:.3e} (band [5.5, 7.5]e-5)"),
    );
}

fn a7(r: &mut Report, ion: &IonModel) {
    let opts = PtOptions::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for (label, name) in [(ManifoldLabel::GPrime, "D3/2"), (ManifoldLabel::GDoublePrime, "D5/2")] {
        let th = ion.energy(label);
        let rate = |w: f64| {
            let b = scatter::clock_rates(ion, ScatterModel::W3, w, 1e8, &opts).unwrap();
            b.per_manifold.get(label)
        };
        let zero_below = [0.999, 0.9, 0.5, 0.1].iter().all(|&f| rate(f * th) == 0.0) && rate(th) == 0.0;
        let x = 2.0 * PI * 1e9;
        let s = ((rate(th + 2.0 * x) / rate(th + x)).ln()) / 2f64.ln();
        ok &= zero_below && (s - 3.0).abs() <= 0.01;
        parts.push(format!("{name}: zero below {zero_below}, slope {s:.4}"));
    }
    r.line("A7", ok, parts.join("; "));
}

fn a8(r: &mut Report, ion: &IonModel) {
    let start = Instant::now();
    let di = delta_per_intensity(ion);
    let slope = 1.52e-9 / di;
    let taus = [4e-3, 5.5e-3, 7e-3, 8.5e-3, 10e-3, 11e-3];
    let design: Vec<DesignPoint> = taus
        .iter()
        .enumerate()
        .map(|(k, &tau)| {
            let power = 0.3 + 1.1 * k as f64 / (taus.len() - 1) as f64;
            let i = units::gaussian_peak_intensity(power, 40e-6).unwrap();
            let x = di * i;
            DesignPoint { x, sigma_x: 0.02 * x, exposure_time: tau }
        })
        .collect();
    let cfg = PipelineConfig {
        slope,
        design,
        shots: 50_000,
        background_prob: 6e-4,
        with_intercept: false,
        seed: 20_240_601,
    };
    let rep = expsim::coverage_study(&cfg, 1000, 1.96).unwrap();
    let secs = start.elapsed().as_secs_f64();
    r.line(
        "A8",
        (0.92..=0.98).contains(&rep.coverage) && secs < 60.0,
        format!(
            "coverage {:.1}% over {} replications (target 92-98%), mean slope bias {:+.2}%, {secs:.2} s",
            100.0 * rep.coverage,
            rep.replications,
            100.0 * rel(rep.mean_slope, slope)
        ),
    );
}

fn a9(r: &mut Report, ion: &IonModel) {
    let mut runner = TestRunner::new(Config {
        cases: 256,
        failure_persistence: None,
        ..Config::default()
    });
    let mut failures = Vec::new();

    // 3j orthogonality and odd-permutation symmetry, j ≤ 4
    let triads = (0..=8i32, 0..=8i32, 0..=8usize, 0..=8usize).prop_map(|(a, b, kc, km)| {
        let (lo, hi) = ((a - b).abs(), (a + b).min(8));
        let c = lo + 2 * (kc as i32 % ((hi - lo) / 2 + 1));
        let m3 = -c + 2 * (km as i32 % (c + 1));
        (HalfInt::from_twice(a), HalfInt::from_twice(b), HalfInt::from_twice(c), HalfInt::from_twice(m3))
    });
    let res = runner.run(&triads, |(j1, j2, j3, m3)| {
        prop_assume!(j3 <= j1 + j2);
        let mut s = 0.0;
        for m1 in j1.projections() {
            let m2 = -(m1 + m3);
            if m2.abs() <= j2 {
                let w = three_j(j1, j2, j3, m1, m2, m3);
                s += w * w;
                let sign = if (j1 + j2 + j3).twice().rem_euclid(4) == 0 { 1.0 } else { -1.0 };
                prop_assert!((three_j(j2, j1, j3, m2, m1, m3) - sign * w).abs() < 1e-13);
                prop_assert!((three_j(j2, j3, j1, m2, m3, m1) - w).abs() < 1e-13);
            }
        }
        prop_assert!((s * f64::from(j3.multiplicity()) - 1.0).abs() < 1e-12);
        Ok(())
    });
    if res.is_err() {
        failures.push("3j");
    }

    // dipole decay sum rule
    let d = ion.dipoles();
    let den = 3.0 * PI * units::EPSILON_0 * units::HBAR * units::C.powi(3);
    let sum_rule = REQUIRED_LINES.iter().all(|&(up, lo)| {
        let expect = ion.einstein_a(up, lo) * den / ion.transition_omega(up, lo).powi(3);
        d.indices_of(up).all(|u| {
            let s: f64 = d.indices_of(lo).flat_map(|l| (-1..=1).map(move |q| d.get(q, l, u).powi(2))).sum();
            (s / expect - 1.0).abs() < 1e-12
        })
    });
    if !sum_rule {
        failures.push("sum rule");
    }

    // intensity linearity and Raman + Rayleigh = total
    let mut runner = TestRunner::new(Config {
        cases: 64,
        failure_persistence: None,
        ..Config::default()
    });
    let res = runner.run(&(520.0..5000.0f64, 1e3..1e10f64, 0.1..10.0f64), |(nm, i, k)| {
        let w = units::wavelength_to_omega(nm * 1e-9).unwrap();
        for m in [ScatterModel::Cda, ScatterModel::W3, ScatterModel::Pt] {
            let a = scatter::clock_rates(ion, m, w, i, &PtOptions::default()).unwrap();
            let b = scatter::clock_rates(ion, m, w, k * i, &PtOptions::default()).unwrap();
            prop_assert!((b.total / (k * a.total) - 1.0).abs() < 1e-12);
            prop_assert!((a.raman + a.rayleigh - a.total).abs() <= 1e-12 * a.total);
        }
        Ok(())
    });
    if res.is_err() {
        failures.push("scatter linearity/closure");
    }

    // ODR: exact lines recovered, axis swap inverts slope
    let res = runner.run(
        &(0.05..20.0f64, proptest::collection::vec((0.1..10.0f64, 0.005..0.2f64, -1.0..1.0f64, -1.0..1.0f64), 3..8)),
        |(b, raw)| {
            let exact: Vec<_> = raw
                .iter()
                .map(|&(x, f, _, _)| FitPoint { x, sigma_x: f * x, y: b * x, sigma_y: f * b * x })
                .collect();
            prop_assert!((expsim::odr_fit(&exact, false).unwrap().slope / b - 1.0).abs() < 1e-9);
            let noisy: Vec<_> = raw
                .iter()
                .map(|&(x, f, nx, ny)| FitPoint { x: x * (1.0 + f * nx), sigma_x: f * x, y: b * x * (1.0 + f * ny), sigma_y: f * b * x })
                .collect();
            let swapped: Vec<_> = noisy.iter().map(|p| FitPoint { x: p.y, sigma_x: p.sigma_y, y: p.x, sigma_y: p.sigma_x }).collect();
            let s1 = expsim::odr_fit(&noisy, false).unwrap().slope;
            let s2 = expsim::odr_fit(&swapped, false).unwrap().slope;
            prop_assert!((s1 * s2 - 1.0).abs() < 1e-7);
            Ok(())
        },
    );
    if res.is_err() {
        failures.push("ODR");
    }

    r.line(
        "A9",
        failures.is_empty(),
        if failures.is_empty() {
            "3j orthogonality/symmetry, dipole sum rules, intensity linearity, Raman+Rayleigh=total, ODR oracles (full suites in tests/)".into()
        } else {
            format!("failing: {}", failures.join(", "))
        },
    );
}

fn main() {
    let ion = IonModel::ba133();
    let mut r = Report { failed: Vec::new() };
    a1(&mut r, &ion);
    a2(&mut r, &ion);
    a3(&mut r, &ion);
    a4(&mut r, &ion);
    a5(&mut r, &ion);
    a6(&mut r, &ion);
    a7(&mut r, &ion);
    a8(&mut r, &ion);
    a9(&mut r, &ion);
    if r.failed.is_empty() {
        println!("acceptance: all criteria pass");
    } else {
        println!("acceptance: failing {}", r.failed.join(", "));
        if std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
            std::process::exit(1);
        }
    }
}
