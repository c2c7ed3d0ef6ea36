//! Angular-momentum algebra: Wigner 3j/6j symbols, Clebsch-Gordan
//! coefficients, hyperfine states and electric-dipole matrix elements.
//!
//! Reduced matrix elements follow the 3j form of the Wigner-Eckart theorem,
//!
//! ```text
//! ⟨J' m'| d_q |J m⟩ = (-1)^(J'-m') (J' 1 J; -m' q m) ⟨J'‖d‖J⟩
//! ```
//!
//! with Condon-Shortley phases. The magnitude of the reduced element of a line
//! is fixed by its Einstein coefficient,
//!
//! ```text
//! A = ω³ / (3π ε₀ ħ c³) · |⟨J_lower‖d‖J_upper⟩|² / (2 J_upper + 1),
//! ```
//!
//! and we take `⟨J_upper‖d‖J_lower⟩ > 0`. Hermiticity then fixes
//! `⟨J_lower‖d‖J_upper⟩ = (-1)^(J_lower - J_upper) ⟨J_upper‖d‖J_lower⟩`.
//! The nuclear spin is a spectator: dipole elements are diagonal in `m_I`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Mutex, OnceLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::atomdata::{IonModel, ManifoldLabel, TransitionLine};
use crate::error::{Error, Result};
use crate::units;

/// Largest angular momentum accepted by the exact symbol evaluators.
pub const MAX_J: f64 = 50.0;

/// A half-integer, stored as twice its value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HalfInt(i32);

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);
    pub const HALF: HalfInt = HalfInt(1);
    pub const ONE: HalfInt = HalfInt(2);

    pub const fn from_twice(twice: i32) -> Self {
        HalfInt(twice)
    }

    pub const fn from_int(n: i32) -> Self {
        HalfInt(2 * n)
    }

    pub const fn twice(self) -> i32 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 2.0
    }

    pub fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    pub fn abs(self) -> Self {
        HalfInt(self.0.abs())
    }

    /// `2j + 1`
    pub fn multiplicity(self) -> i32 {
        self.0 + 1
    }

    /// Projections `-j, -j+1, …, j`.
    pub fn projections(self) -> impl Iterator<Item = HalfInt> + Clone {
        let j = self.0;
        (-j..=j).step_by(2).map(HalfInt)
    }
}

impl TryFrom<f64> for HalfInt {
    type Error = Error;

    fn try_from(x: f64) -> Result<Self> {
        let twice = 2.0 * x;
        if !twice.is_finite() || (twice - twice.round()).abs() > 1e-9 || twice.abs() > 1e6 {
            return Err(Error::NotHalfInteger(x));
        }
        Ok(HalfInt(twice.round() as i32))
    }
}

impl From<HalfInt> for f64 {
    fn from(h: HalfInt) -> f64 {
        h.value()
    }
}

impl std::ops::Add for HalfInt {
    type Output = HalfInt;
    fn add(self, o: HalfInt) -> HalfInt {
        HalfInt(self.0 + o.0)
    }
}

impl std::ops::Sub for HalfInt {
    type Output = HalfInt;
    fn sub(self, o: HalfInt) -> HalfInt {
        HalfInt(self.0 - o.0)
    }
}

impl std::ops::Neg for HalfInt {
    type Output = HalfInt;
    fn neg(self) -> HalfInt {
        HalfInt(-self.0)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// `(-1)^n` for an integer-valued half-integer.
fn phase(n: HalfInt) -> f64 {
    debug_assert!(n.is_integer());
    if (n.0 / 2) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn factorial_table() -> &'static [BigInt] {
    static TABLE: OnceLock<Vec<BigInt>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(4 * MAX_J as usize + 4);
        t.push(BigInt::one());
        for n in 1..(4 * MAX_J as usize + 4) {
            let next = &t[n - 1] * BigInt::from(n);
            t.push(next);
        }
        t
    })
}

/// `n!` for an integer-valued half-integer `n >= 0`.
fn fact(n: HalfInt) -> &'static BigInt {
    debug_assert!(n.is_integer() && n.0 >= 0);
    &factorial_table()[(n.0 / 2) as usize]
}

fn triangle_ok(a: HalfInt, b: HalfInt, c: HalfInt) -> bool {
    (a + b + c).is_integer() && c >= (a - b).abs() && c <= a + b
}

/// Squared triangle coefficient `(a+b-c)!(a-b+c)!(-a+b+c)!/(a+b+c+1)!`.
fn triangle_coefficient(a: HalfInt, b: HalfInt, c: HalfInt) -> BigRational {
    BigRational::new(
        fact(a + b - c) * fact(a - b + c) * fact(b + c - a),
        fact(a + b + c + HalfInt::ONE).clone(),
    )
}

/// `sign(s) · sqrt(prefactor_sq · s²)` rounded once at the end.
fn signed_sqrt(prefactor_sq: BigRational, sum: BigRational) -> f64 {
    if sum.is_zero() {
        return 0.0;
    }
    let sign = if sum.is_negative() { -1.0 } else { 1.0 };
    let sq = prefactor_sq * &sum * &sum;
    sign * sq.to_f64().unwrap_or(f64::NAN).sqrt()
}

fn in_domain(js: &[HalfInt]) -> bool {
    js.iter().all(|j| j.0 >= 0 && j.value() <= MAX_J)
}

type Key3j = [i32; 6];
type Key6j = [i32; 6];

fn cache_3j() -> &'static Mutex<HashMap<Key3j, f64>> {
    static CACHE: OnceLock<Mutex<HashMap<Key3j, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cache_6j() -> &'static Mutex<HashMap<Key6j, f64>> {
    static CACHE: OnceLock<Mutex<HashMap<Key6j, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Wigner 3j symbol `(j1 j2 j3; m1 m2 m3)` by the Racah formula, summed in
/// exact rational arithmetic. Zero when a selection rule fails.
pub fn three_j(j1: HalfInt, j2: HalfInt, j3: HalfInt, m1: HalfInt, m2: HalfInt, m3: HalfInt) -> f64 {
    if (m1 + m2 + m3) != HalfInt::ZERO
        || !triangle_ok(j1, j2, j3)
        || m1.abs() > j1
        || m2.abs() > j2
        || m3.abs() > j3
        || !(j1 + m1).is_integer()
        || !(j2 + m2).is_integer()
        || !(j3 + m3).is_integer()
    {
        return 0.0;
    }
    assert!(in_domain(&[j1, j2, j3]), "3j arguments above {MAX_J}");
    let key = [j1.0, j2.0, j3.0, m1.0, m2.0, m3.0];
    if let Some(&v) = cache_3j().lock().unwrap().get(&key) {
        return v;
    }

    let prefactor_sq = triangle_coefficient(j1, j2, j3)
        * BigRational::from_integer(
            fact(j1 + m1) * fact(j1 - m1) * fact(j2 + m2) * fact(j2 - m2) * fact(j3 + m3) * fact(j3 - m3),
        );

    // k runs over integers keeping every factorial argument non-negative.
    let lo = [HalfInt::ZERO, j2 - j3 - m1, j1 - j3 + m2]
        .into_iter()
        .max()
        .unwrap();
    let hi = [j1 + j2 - j3, j1 - m1, j2 + m2].into_iter().min().unwrap();
    let mut sum = BigRational::zero();
    let mut k = lo;
    while k <= hi {
        let den = fact(k)
            * fact(j3 - j2 + k + m1)
            * fact(j3 - j1 + k - m2)
            * fact(j1 + j2 - j3 - k)
            * fact(j1 - k - m1)
            * fact(j2 - k + m2);
        let term = BigRational::new(BigInt::one(), den);
        if phase(k) > 0.0 {
            sum += term;
        } else {
            sum -= term;
        }
        k = k + HalfInt::ONE;
    }
    let v = phase(j1 - j2 - m3) * signed_sqrt(prefactor_sq, sum);
    cache_3j().lock().unwrap().insert(key, v);
    v
}

/// Wigner 6j symbol `{j1 j2 j3; j4 j5 j6}` by the Racah formula.
pub fn six_j(j1: HalfInt, j2: HalfInt, j3: HalfInt, j4: HalfInt, j5: HalfInt, j6: HalfInt) -> f64 {
    let triads = [(j1, j2, j3), (j1, j5, j6), (j4, j2, j6), (j4, j5, j3)];
    if !triads.iter().all(|&(a, b, c)| triangle_ok(a, b, c)) {
        return 0.0;
    }
    assert!(in_domain(&[j1, j2, j3, j4, j5, j6]), "6j arguments above {MAX_J}");
    let key = [j1.0, j2.0, j3.0, j4.0, j5.0, j6.0];
    if let Some(&v) = cache_6j().lock().unwrap().get(&key) {
        return v;
    }

    let prefactor_sq = triads
        .iter()
        .map(|&(a, b, c)| triangle_coefficient(a, b, c))
        .fold(BigRational::one(), |acc, x| acc * x);

    let a = [j1 + j2 + j3, j1 + j5 + j6, j4 + j2 + j6, j4 + j5 + j3];
    let b = [j1 + j2 + j4 + j5, j2 + j3 + j5 + j6, j3 + j1 + j6 + j4];
    let lo = *a.iter().max().unwrap();
    let hi = *b.iter().min().unwrap();
    let mut sum = BigRational::zero();
    let mut t = lo;
    while t <= hi {
        let den = a.iter().map(|&ai| fact(t - ai)).product::<BigInt>()
            * b.iter().map(|&bi| fact(bi - t)).product::<BigInt>();
        let term = BigRational::new(fact(t + HalfInt::ONE).clone(), den);
        if phase(t) > 0.0 {
            sum += term;
        } else {
            sum -= term;
        }
        t = t + HalfInt::ONE;
    }
    let v = signed_sqrt(prefactor_sq, sum);
    cache_6j().lock().unwrap().insert(key, v);
    v
}

/// Clebsch-Gordan coefficient `⟨j1 m1; j2 m2 | J M⟩`.
pub fn clebsch_gordan(j1: HalfInt, m1: HalfInt, j2: HalfInt, m2: HalfInt, j: HalfInt, m: HalfInt) -> f64 {
    let w = three_j(j1, j2, j, m1, m2, -m);
    if w == 0.0 {
        return 0.0;
    }
    phase(j1 - j2 + m) * f64::from(j.multiplicity()).sqrt() * w
}

fn half_ints<const N: usize>(xs: [f64; N]) -> Result<[HalfInt; N]> {
    let mut out = [HalfInt::ZERO; N];
    for (o, &x) in out.iter_mut().zip(xs.iter()) {
        *o = HalfInt::try_from(x)?;
    }
    Ok(out)
}

fn check_j(js: &[HalfInt]) -> Result<()> {
    if js.iter().any(|j| j.0 < 0 || j.value() > MAX_J) {
        return Err(Error::InvalidInput(format!(
            "angular momenta must lie in [0, {MAX_J}]"
        )));
    }
    Ok(())
}

/// Wigner 3j symbol taking plain numbers; rejects non-half-integer input.
pub fn wigner3j(j1: f64, j2: f64, j3: f64, m1: f64, m2: f64, m3: f64) -> Result<f64> {
    let [j1, j2, j3, m1, m2, m3] = half_ints([j1, j2, j3, m1, m2, m3])?;
    check_j(&[j1, j2, j3])?;
    Ok(three_j(j1, j2, j3, m1, m2, m3))
}

/// Wigner 6j symbol taking plain numbers; rejects non-half-integer input.
pub fn wigner6j(j1: f64, j2: f64, j3: f64, j4: f64, j5: f64, j6: f64) -> Result<f64> {
    let js = half_ints([j1, j2, j3, j4, j5, j6])?;
    check_j(&js)?;
    let [j1, j2, j3, j4, j5, j6] = js;
    Ok(six_j(j1, j2, j3, j4, j5, j6))
}

/// One element of the uncoupled basis `|J m_J⟩|I m_I⟩` of a manifold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BasisState {
    pub manifold: ManifoldLabel,
    pub m_j: HalfInt,
    pub m_i: HalfInt,
}

/// A state of the ion, expanded over the uncoupled product basis.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomState {
    pub manifold: ManifoldLabel,
    pub f: HalfInt,
    pub m_f: HalfInt,
    /// `(index into DipoleOperator::basis, amplitude)`; amplitudes are
    /// Clebsch-Gordan coefficients.
    pub components: Vec<(usize, f64)>,
}

impl AtomState {
    /// Hyperfine state `|manifold, F, m_F⟩`.
    pub fn hyperfine(ion: &IonModel, manifold: ManifoldLabel, f: HalfInt, m_f: HalfInt) -> Result<Self> {
        let j = ion.manifold(manifold).j;
        let i = ion.nuclear_spin();
        if f < (j - i).abs() || f > j + i || !(f + j + i).is_integer() {
            return Err(Error::InvalidInput(format!(
                "F={f} not allowed for J={j}, I={i} in manifold {manifold}"
            )));
        }
        if m_f.abs() > f || !(f + m_f).is_integer() {
            return Err(Error::InvalidInput(format!("m_F={m_f} not allowed for F={f}")));
        }
        let ops = ion.dipoles();
        let mut components = Vec::new();
        for m_j in j.projections() {
            let m_i = m_f - m_j;
            if m_i.abs() > i {
                continue;
            }
            let c = clebsch_gordan(j, m_j, i, m_i, f, m_f);
            if c != 0.0 {
                let idx = ops
                    .index_of(BasisState { manifold, m_j, m_i })
                    .expect("basis covers every manifold");
                components.push((idx, c));
            }
        }
        Ok(AtomState {
            manifold,
            f,
            m_f,
            components,
        })
    }

    /// Lower clock state of the ground manifold, `|g, F=I-1/2, m_F=0⟩`.
    pub fn clock_lower(ion: &IonModel) -> Result<Self> {
        let f = ion.nuclear_spin() - HalfInt::HALF;
        Self::hyperfine(ion, ManifoldLabel::G, f, HalfInt::ZERO)
    }

    /// Upper clock state of the ground manifold, `|g, F=I+1/2, m_F=0⟩`.
    pub fn clock_upper(ion: &IonModel) -> Result<Self> {
        let f = ion.nuclear_spin() + HalfInt::HALF;
        Self::hyperfine(ion, ManifoldLabel::G, f, HalfInt::ZERO)
    }

    /// Sum of squared amplitudes; 1 for a properly built state.
    pub fn norm_sq(&self) -> f64 {
        self.components.iter().map(|(_, c)| c * c).sum()
    }
}

/// A dipole matrix element `⟨bra| d_q |ket⟩` in C·m.
#[derive(Clone, Debug, PartialEq)]
pub struct DipoleElement {
    pub value: f64,
    pub q: i32,
    pub bra: AtomState,
    pub ket: AtomState,
}

/// Magnitude of the reduced element `|⟨J_lower‖d‖J_upper⟩|` (C·m) implied by
/// the line's Einstein coefficient.
pub fn reduced_dipole_from_a(line: &TransitionLine, ion: &IonModel) -> f64 {
    let omega = ion.transition_omega(line.upper, line.lower);
    let j_up = ion.manifold(line.upper).j;
    (line.einstein_a * f64::from(j_up.multiplicity()) * units::emission_denominator() / omega.powi(3)).sqrt()
}

/// Dense matrices of `d_q`, `q ∈ {-1, 0, +1}`, over the uncoupled basis of all
/// five manifolds.
#[derive(Clone, Debug)]
pub struct DipoleOperator {
    basis: Vec<BasisState>,
    index: HashMap<BasisState, usize>,
    mats: [Vec<f64>; 3],
}

impl DipoleOperator {
    pub fn new(ion: &IonModel) -> Self {
        let i = ion.nuclear_spin();
        let mut basis = Vec::new();
        for label in ManifoldLabel::ALL {
            let j = ion.manifold(label).j;
            for m_j in j.projections() {
                for m_i in i.projections() {
                    basis.push(BasisState { manifold: label, m_j, m_i });
                }
            }
        }
        let index = basis.iter().enumerate().map(|(n, b)| (*b, n)).collect();
        let n = basis.len();

        // signed reduced element ⟨a‖d‖b⟩ for every ordered manifold pair
        let mut reduced: HashMap<(ManifoldLabel, ManifoldLabel), f64> = HashMap::new();
        for line in ion.lines() {
            let r = reduced_dipole_from_a(line, ion);
            let ju = ion.manifold(line.upper).j;
            let jl = ion.manifold(line.lower).j;
            reduced.insert((line.upper, line.lower), r);
            reduced.insert((line.lower, line.upper), phase(jl - ju) * r);
        }

        let mut mats = [vec![0.0; n * n], vec![0.0; n * n], vec![0.0; n * n]];
        for (a, sa) in basis.iter().enumerate() {
            for (b, sb) in basis.iter().enumerate() {
                if sa.m_i != sb.m_i {
                    continue;
                }
                let Some(&red) = reduced.get(&(sa.manifold, sb.manifold)) else {
                    continue;
                };
                let ja = ion.manifold(sa.manifold).j;
                let jb = ion.manifold(sb.manifold).j;
                for q in -1..=1 {
                    let w = three_j(ja, HalfInt::ONE, jb, -sa.m_j, HalfInt::from_int(q), sb.m_j);
                    if w != 0.0 {
                        mats[(q + 1) as usize][a * n + b] = phase(ja - sa.m_j) * w * red;
                    }
                }
            }
        }
        DipoleOperator { basis, index, mats }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[BasisState] {
        &self.basis
    }

    pub fn index_of(&self, s: BasisState) -> Option<usize> {
        self.index.get(&s).copied()
    }

    /// Basis indices belonging to `manifold`.
    pub fn indices_of(&self, manifold: ManifoldLabel) -> impl Iterator<Item = usize> + '_ {
        self.basis
            .iter()
            .enumerate()
            .filter(move |(_, b)| b.manifold == manifold)
            .map(|(n, _)| n)
    }

    /// `⟨a| d_q |b⟩` between basis states.
    #[inline]
    pub fn get(&self, q: i32, a: usize, b: usize) -> f64 {
        self.mats[(q + 1) as usize][a * self.basis.len() + b]
    }

    /// `⟨a| d_q |ket⟩` for a basis bra and an expanded ket.
    pub fn bra_basis(&self, q: i32, a: usize, ket: &AtomState) -> f64 {
        ket.components.iter().map(|&(b, c)| c * self.get(q, a, b)).sum()
    }

    /// `⟨bra| d_q |b⟩` for an expanded bra and a basis ket.
    pub fn ket_basis(&self, q: i32, bra: &AtomState, b: usize) -> f64 {
        bra.components.iter().map(|&(a, c)| c * self.get(q, a, b)).sum()
    }

    pub fn element(&self, bra: &AtomState, q: i32, ket: &AtomState) -> f64 {
        bra.components
            .iter()
            .map(|&(a, ca)| ca * self.bra_basis(q, a, ket))
            .sum()
    }
}

/// `⟨bra| d_q |ket⟩` via the Wigner-Eckart theorem. Disconnected manifold
/// pairs and violated selection rules give a zero element.
pub fn dipole_element(bra: &AtomState, q: i32, ket: &AtomState, ion: &IonModel) -> Result<DipoleElement> {
    if !(-1..=1).contains(&q) {
        return Err(Error::InvalidInput(format!("spherical component q={q} not in {{-1,0,1}}")));
    }
    let value = ion.dipoles().element(bra, q, ket);
    Ok(DipoleElement {
        value,
        q,
        bra: bra.clone(),
        ket: ket.clone(),
    })
}
