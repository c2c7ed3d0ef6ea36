use ionscatter::angmom::{AtomState, HalfInt};
use ionscatter::atomdata::{IonModel, ManifoldLabel};
use ionscatter::lightshift::{self, coupling_g, StarkOptions};
use ionscatter::scatter::{self, LaserField, PtOptions, ScatterModel};
use ionscatter::units;
use proptest::prelude::*;
use std::f64::consts::PI;

fn omega_nm(nm: f64) -> f64 {
    units::wavelength_to_omega(nm * 1e-9).unwrap()
}

const MODELS: [ScatterModel; 3] = [ScatterModel::Cda, ScatterModel::W3, ScatterModel::Pt];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rates_scale_linearly_with_intensity(nm in 520.0..5000.0f64, i in 1e3..1e10f64, k in 0.1..10.0f64) {
        let ion = IonModel::ba133();
        let opts = PtOptions::default();
        for m in MODELS {
            let a = scatter::clock_rates(&ion, m, omega_nm(nm), i, &opts).unwrap();
            let b = scatter::clock_rates(&ion, m, omega_nm(nm), k * i, &opts).unwrap();
            prop_assert!((b.total / (k * a.total) - 1.0).abs() < 1e-12);
            prop_assert!((b.raman - k * a.raman).abs() <= 1e-12 * b.total);
        }
    }

    #[test]
    fn raman_plus_rayleigh_is_total(nm in 520.0..20000.0f64) {
        let ion = IonModel::ba133();
        for m in MODELS {
            let b = scatter::clock_rates(&ion, m, omega_nm(nm), 1e8, &PtOptions::default()).unwrap();
            prop_assert!((b.raman + b.rayleigh - b.total).abs() <= 1e-12 * b.total);
            prop_assert!((b.per_manifold.sum() - b.total).abs() <= 1e-12 * b.total);
            prop_assert!(b.raman >= 0.0 && b.rayleigh >= 0.0);
            prop_assert!((0.0..=1.0).contains(&b.eta_d52));
        }
    }

    #[test]
    fn f0_rates_do_not_depend_on_polarization(nm in 520.0..5000.0f64, re in -1.0..1.0f64, im in -1.0..1.0f64, p in -1.0..1.0f64) {
        // the F=0 state is isotropic
        let ion = IonModel::ba133();
        let w = omega_nm(nm);
        let init = AtomState::clock_lower(&ion).unwrap();
        let opts = PtOptions::default();
        let sp = scatter::pt_breakdown(&ion, &LaserField::sigma_plus(w, 1e8).unwrap(), &init, &opts).unwrap();
        let mut pol = [
            num_complex::Complex64::new(re, im),
            num_complex::Complex64::new(p, 0.0),
            num_complex::Complex64::new(0.3, -im),
        ];
        let n = pol.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        pol.iter_mut().for_each(|c| *c /= n);
        let other = scatter::pt_breakdown(&ion, &LaserField::new(w, 1e8, pol).unwrap(), &init, &opts).unwrap();
        prop_assert!((other.total / sp.total - 1.0).abs() < 1e-10);
        prop_assert!((other.raman / sp.raman - 1.0).abs() < 1e-10);
    }

    #[test]
    fn final_state_rates_sum_to_total(nm in 520.0..3000.0f64) {
        let ion = IonModel::ba133();
        let laser = LaserField::sigma_plus(omega_nm(nm), 1e8).unwrap();
        let init = AtomState::clock_lower(&ion).unwrap();
        let opts = PtOptions::default();
        let b = scatter::pt_breakdown(&ion, &laser, &init, &opts).unwrap();
        let i = ion.nuclear_spin();
        let mut s = 0.0;
        for m in ManifoldLabel::LOWER {
            let j = m.j();
            let mut f = (j - i).abs();
            while f <= j + i {
                for mf in f.projections() {
                    let fin = AtomState::hyperfine(&ion, m, f, mf).unwrap();
                    s += scatter::pt_rate(&ion, &laser, &init, &fin, &opts).unwrap();
                }
                f = f + HalfInt::ONE;
            }
        }
        prop_assert!((s / b.total - 1.0).abs() < 1e-10);
    }
}

#[test]
fn pt_matches_w3_for_ls_projected_data() {
    let ion = IonModel::ba133().with_ls_s_lines().unwrap();
    let opts = PtOptions::default();
    for nm in [532.0, 600.0, 800.0, 1064.0, 1500.0, 3000.0] {
        let w = omega_nm(nm);
        let pt = scatter::clock_rates(&ion, ScatterModel::Pt, w, 1e8, &opts).unwrap();
        let w3 = scatter::clock_rates(&ion, ScatterModel::W3, w, 1e8, &opts).unwrap();
        for (a, b) in [(pt.total, w3.total), (pt.raman, w3.raman), (pt.rayleigh, w3.rayleigh)] {
            assert!((a / b - 1.0).abs() < 1e-9, "{nm} nm: {a} vs {b}");
        }
    }
}

#[test]
fn cda_matches_w3_as_detuning_vanishes_relative_to_optical() {
    // near the P1/2 line the ω³ factors approach one
    let ion = IonModel::ba133();
    let w = ion.energy(ManifoldLabel::E) - 2.0 * PI * 100e9;
    let g = coupling_g(&ion, &LaserField::sigma_plus(w, 1e6).unwrap()).value;
    let c = scatter::cda_rates(&ion, g, w).unwrap();
    let d = scatter::w3_rates(&ion, g, w).unwrap();
    assert!((d.per_manifold.s / c.per_manifold.s - 1.0).abs() < 1e-3);
}

fn loglog_slope(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    (f(2.0 * x) / f(x)).ln() / 2f64.ln()
}

#[test]
fn d32_rate_has_cubic_threshold() {
    let ion = IonModel::ba133();
    let th = ion.energy(ManifoldLabel::GPrime);
    let opts = PtOptions::default();
    for m in [ScatterModel::W3, ScatterModel::Pt] {
        let rate = |x: f64| scatter::clock_rates(&ion, m, th + x, 1e8, &opts).unwrap().per_manifold.d32;
        let s = loglog_slope(rate, 2.0 * PI * 1e9);
        assert!((s - 3.0).abs() < 1e-3, "{m:?}: {s}");
    }
    // closed-form CDA has no threshold behaviour
    let cda = |x: f64| scatter::clock_rates(&ion, ScatterModel::Cda, th + x, 1e8, &opts).unwrap().per_manifold.d32;
    assert!(loglog_slope(cda, 2.0 * PI * 1e9).abs() < 1e-3);
}

#[test]
fn d52_rate_has_cubic_threshold() {
    let ion = IonModel::ba133();
    let th = ion.energy(ManifoldLabel::GDoublePrime);
    let opts = PtOptions::default();
    for m in [ScatterModel::W3, ScatterModel::Pt] {
        let rate = |x: f64| scatter::clock_rates(&ion, m, th + x, 1e8, &opts).unwrap().per_manifold.d52;
        let s = loglog_slope(rate, 2.0 * PI * 1e9);
        assert!((s - 3.0).abs() < 1e-3, "{m:?}: {s}");
    }
    let below = scatter::clock_rates(&ion, ScatterModel::Pt, th * 0.99, 1e8, &opts).unwrap();
    assert_eq!(below.per_manifold.d52, 0.0);
}

#[test]
fn stark_shift_is_negative_for_red_detuned_ground_state() {
    let ion = IonModel::ba133();
    let laser = LaserField::sigma_plus(omega_nm(1064.0), 1e8).unwrap();
    let s = AtomState::clock_lower(&ion).unwrap();
    let d = lightshift::ac_stark_shift(&ion, &laser, &s, &StarkOptions::default()).unwrap();
    assert!(d < 0.0);
}

#[test]
fn stark_shift_has_static_limit_matching_polarizability_sum() {
    // at ω → 0 the rotating and counter-rotating terms add to the DC result
    // -E²/(4ħ²) Σ 2|d|²/ω_k, independent of polarization for F=0
    let ion = IonModel::ba133();
    let d = ion.dipoles();
    let s = AtomState::clock_lower(&ion).unwrap();
    let w = 1e9;
    let laser = LaserField::pi(w, 1e8).unwrap();
    let got = lightshift::ac_stark_shift(&ion, &laser, &s, &StarkOptions::default()).unwrap();
    let mut sum = 0.0;
    for up in [ManifoldLabel::E, ManifoldLabel::EPrime] {
        let wk = ion.energy(up);
        for k in d.indices_of(up) {
            let m = d.bra_basis(0, k, &s);
            sum += 2.0 * m * m / wk;
        }
    }
    let expect = -units::field_amplitude_sq(1e8) / (4.0 * units::HBAR * units::HBAR) * sum;
    assert!((got / expect - 1.0).abs() < 1e-6, "{got} vs {expect}");
}
