//! Ion level structure: the five fine-structure manifolds, the dipole lines
//! connecting them, and the on-disk ion file format.
//!
//! An ion file is JSON:
//!
//! ```json
//! {
//!   "name": "133Ba+",
//!   "source": "optional free text",
//!   "nuclear_spin": 0.5,
//!   "mass_amu": 132.906,
//!   "levels": [ { "label": "g", "term": "6s 2S1/2", "J": 0.5, "energy_cm1": 0.0 }, ... ],
//!   "lines":  [ { "upper": "e", "lower": "g", "A_per_s": 9.53e7 }, ... ]
//! }
//! ```
//!
//! Labels are `g`, `g'`, `g''`, `e`, `e'` for S1/2, D3/2, D5/2, P1/2, P3/2.
//! Unknown keys are rejected.

use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::angmom::{DipoleOperator, HalfInt};
use crate::error::{Error, Result};
use crate::units;

/// The bundled 133Ba+ data file.
pub const BA133_ION: &str = include_str!("../data/ba133.ion");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ManifoldLabel {
    /// S1/2
    #[serde(rename = "g")]
    G,
    /// D3/2
    #[serde(rename = "g'")]
    GPrime,
    /// D5/2
    #[serde(rename = "g''")]
    GDoublePrime,
    /// P1/2
    #[serde(rename = "e")]
    E,
    /// P3/2
    #[serde(rename = "e'")]
    EPrime,
}

impl ManifoldLabel {
    /// In order of increasing energy.
    pub const ALL: [ManifoldLabel; 5] = [
        ManifoldLabel::G,
        ManifoldLabel::GPrime,
        ManifoldLabel::GDoublePrime,
        ManifoldLabel::E,
        ManifoldLabel::EPrime,
    ];

    /// Long-lived manifolds that can end a scattering event.
    pub const LOWER: [ManifoldLabel; 3] = [ManifoldLabel::G, ManifoldLabel::GPrime, ManifoldLabel::GDoublePrime];

    /// Short-lived P manifolds that act as intermediate states.
    pub const UPPER: [ManifoldLabel; 2] = [ManifoldLabel::E, ManifoldLabel::EPrime];

    pub fn as_str(self) -> &'static str {
        match self {
            ManifoldLabel::G => "g",
            ManifoldLabel::GPrime => "g'",
            ManifoldLabel::GDoublePrime => "g''",
            ManifoldLabel::E => "e",
            ManifoldLabel::EPrime => "e'",
        }
    }

    /// Required total electronic angular momentum.
    pub fn j(self) -> HalfInt {
        match self {
            ManifoldLabel::G | ManifoldLabel::E => HalfInt::from_twice(1),
            ManifoldLabel::GPrime | ManifoldLabel::EPrime => HalfInt::from_twice(3),
            ManifoldLabel::GDoublePrime => HalfInt::from_twice(5),
        }
    }

    pub fn is_upper(self) -> bool {
        matches!(self, ManifoldLabel::E | ManifoldLabel::EPrime)
    }

    fn index(self) -> usize {
        ManifoldLabel::ALL.iter().position(|&l| l == self).unwrap()
    }
}

impl fmt::Display for ManifoldLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ManifoldLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ManifoldLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown manifold label {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Manifold {
    pub label: ManifoldLabel,
    pub term: String,
    pub j: HalfInt,
    /// Energy above the ground manifold, cm⁻¹.
    pub energy_cm1: f64,
}

impl Manifold {
    /// Energy above the ground manifold as an angular frequency.
    pub fn energy(&self) -> f64 {
        units::wavenumber_to_omega(self.energy_cm1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransitionLine {
    pub upper: ManifoldLabel,
    pub lower: ManifoldLabel,
    /// Einstein A coefficient, s⁻¹.
    pub einstein_a: f64,
}

/// The ion. Immutable once built; all mutators return a new validated model.
#[derive(Clone, Debug)]
pub struct IonModel {
    name: String,
    source: Option<String>,
    nuclear_spin: HalfInt,
    mass_amu: f64,
    manifolds: [Manifold; 5],
    lines: Vec<TransitionLine>,
    dipoles: OnceLock<DipoleOperator>,
}

impl PartialEq for IonModel {
    fn eq(&self, o: &Self) -> bool {
        self.name == o.name
            && self.source == o.source
            && self.nuclear_spin == o.nuclear_spin
            && self.mass_amu == o.mass_amu
            && self.manifolds == o.manifolds
            && self.lines == o.lines
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LevelFile {
    label: ManifoldLabel,
    term: String,
    #[serde(rename = "J")]
    j: f64,
    energy_cm1: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LineFile {
    upper: ManifoldLabel,
    lower: ManifoldLabel,
    #[serde(rename = "A_per_s")]
    a_per_s: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IonFile {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<String>,
    nuclear_spin: f64,
    mass_amu: f64,
    levels: Vec<LevelFile>,
    lines: Vec<LineFile>,
}

/// The five dipole lines every model must carry.
pub const REQUIRED_LINES: [(ManifoldLabel, ManifoldLabel); 5] = [
    (ManifoldLabel::E, ManifoldLabel::G),
    (ManifoldLabel::E, ManifoldLabel::GPrime),
    (ManifoldLabel::EPrime, ManifoldLabel::G),
    (ManifoldLabel::EPrime, ManifoldLabel::GPrime),
    (ManifoldLabel::EPrime, ManifoldLabel::GDoublePrime),
];

impl IonModel {
    /// Builds and validates a model.
    pub fn new(
        name: impl Into<String>,
        nuclear_spin: HalfInt,
        mass_amu: f64,
        manifolds: Vec<Manifold>,
        lines: Vec<TransitionLine>,
    ) -> Result<Self> {
        if nuclear_spin.twice() < 1 {
            return Err(Error::invariant(
                "nuclear_spin",
                "must be a positive half-integer (hyperfine clock states need I >= 1/2)",
            ));
        }
        if !(mass_amu > 0.0 && mass_amu.is_finite()) {
            return Err(Error::invariant("mass_amu", "must be positive"));
        }
        if manifolds.len() != 5 {
            return Err(Error::invariant(
                "levels",
                format!("expected 5 levels, found {}", manifolds.len()),
            ));
        }
        let mut slots: [Option<Manifold>; 5] = Default::default();
        for m in manifolds {
            let k = m.label.index();
            if slots[k].is_some() {
                return Err(Error::invariant(format!("levels.{}", m.label), "duplicate label"));
            }
            if m.j != m.label.j() {
                return Err(Error::invariant(
                    format!("levels.{}.J", m.label),
                    format!("expected J={}, found J={}", m.label.j(), m.j),
                ));
            }
            if !m.energy_cm1.is_finite() {
                return Err(Error::invariant(format!("levels.{}.energy_cm1", m.label), "not finite"));
            }
            slots[k] = Some(m);
        }
        let manifolds: [Manifold; 5] = slots.map(|s| s.expect("five distinct labels"));
        if manifolds[0].energy_cm1 != 0.0 {
            return Err(Error::invariant("levels.g.energy_cm1", "ground manifold must sit at 0"));
        }
        for w in manifolds.windows(2) {
            if !(w[1].energy_cm1 > w[0].energy_cm1) {
                return Err(Error::invariant(
                    format!("levels.{}.energy_cm1", w[1].label),
                    format!("must lie above {}", w[0].label),
                ));
            }
        }

        if lines.len() != REQUIRED_LINES.len() {
            return Err(Error::invariant(
                "lines",
                format!("expected {} lines, found {}", REQUIRED_LINES.len(), lines.len()),
            ));
        }
        let mut ordered = Vec::with_capacity(5);
        for (up, lo) in REQUIRED_LINES {
            let found: Vec<_> = lines.iter().filter(|l| l.upper == up && l.lower == lo).collect();
            match found.as_slice() {
                [l] => {
                    if !(l.einstein_a > 0.0 && l.einstein_a.is_finite()) {
                        return Err(Error::invariant(
                            format!("lines.{up}->{lo}.A_per_s"),
                            "must be positive and finite",
                        ));
                    }
                    ordered.push(**l);
                }
                [] => return Err(Error::invariant(format!("lines.{up}->{lo}"), "missing")),
                _ => return Err(Error::invariant(format!("lines.{up}->{lo}"), "duplicate")),
            }
        }

        Ok(IonModel {
            name: name.into(),
            source: None,
            nuclear_spin,
            mass_amu,
            manifolds,
            lines: ordered,
            dipoles: OnceLock::new(),
        })
    }

    /// The bundled 133Ba+ model.
    pub fn ba133() -> Self {
        Self::from_json(BA133_ION).expect("bundled ion file is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: IonFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let spin = HalfInt::try_from(f.nuclear_spin)
            .map_err(|_| Error::invariant("nuclear_spin", "not a half-integer"))?;
        let mut manifolds = Vec::with_capacity(f.levels.len());
        for l in f.levels {
            let j = HalfInt::try_from(l.j)
                .map_err(|_| Error::invariant(format!("levels.{}.J", l.label), "not a half-integer"))?;
            manifolds.push(Manifold {
                label: l.label,
                term: l.term,
                j,
                energy_cm1: l.energy_cm1,
            });
        }
        let lines = f
            .lines
            .into_iter()
            .map(|l| TransitionLine {
                upper: l.upper,
                lower: l.lower,
                einstein_a: l.a_per_s,
            })
            .collect();
        let mut ion = IonModel::new(f.name, spin, f.mass_amu, manifolds, lines)?;
        ion.source = f.source;
        Ok(ion)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let f = IonFile {
            name: self.name.clone(),
            source: self.source.clone(),
            nuclear_spin: self.nuclear_spin.value(),
            mass_amu: self.mass_amu,
            levels: self
                .manifolds
                .iter()
                .map(|m| LevelFile {
                    label: m.label,
                    term: m.term.clone(),
                    j: m.j.value(),
                    energy_cm1: m.energy_cm1,
                })
                .collect(),
            lines: self
                .lines
                .iter()
                .map(|l| LineFile {
                    upper: l.upper,
                    lower: l.lower,
                    a_per_s: l.einstein_a,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&f).expect("ion model serialises")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Copy with one line's Einstein coefficient replaced.
    pub fn with_einstein_a(&self, upper: ManifoldLabel, lower: ManifoldLabel, a: f64) -> Result<Self> {
        if !self.lines.iter().any(|l| l.upper == upper && l.lower == lower) {
            return Err(Error::InvalidInput(format!("no line {upper}->{lower}")));
        }
        let lines = self
            .lines
            .iter()
            .map(|l| {
                if l.upper == upper && l.lower == lower {
                    TransitionLine { einstein_a: a, ..*l }
                } else {
                    *l
                }
            })
            .collect();
        let mut ion = IonModel::new(
            self.name.clone(),
            self.nuclear_spin,
            self.mass_amu,
            self.manifolds.to_vec(),
            lines,
        )?;
        ion.source = self.source.clone();
        Ok(ion)
    }

    /// Copy whose S1/2-P1/2 coefficient is rescaled so that both S-lines
    /// share one radial element: `A_eg/ω_eg³ = A_e'g/ω_e'g³`.
    pub fn with_ls_s_lines(&self) -> Result<Self> {
        let ratio = (self.energy(ManifoldLabel::E) / self.energy(ManifoldLabel::EPrime)).powi(3);
        self.with_einstein_a(
            ManifoldLabel::E,
            ManifoldLabel::G,
            self.einstein_a(ManifoldLabel::EPrime, ManifoldLabel::G) * ratio,
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn source(&self) -> Option<&str> {
        self.source.as_deref()
    }

    pub fn nuclear_spin(&self) -> HalfInt {
        self.nuclear_spin
    }

    pub fn mass_amu(&self) -> f64 {
        self.mass_amu
    }

    /// Ion mass, kg.
    pub fn mass(&self) -> f64 {
        self.mass_amu * units::AMU
    }

    pub fn manifolds(&self) -> &[Manifold; 5] {
        &self.manifolds
    }

    pub fn manifold(&self, label: ManifoldLabel) -> &Manifold {
        &self.manifolds[label.index()]
    }

    /// Manifold energy as an angular frequency above the ground manifold.
    pub fn energy(&self, label: ManifoldLabel) -> f64 {
        self.manifold(label).energy()
    }

    /// `ω_upper - ω_lower`.
    pub fn transition_omega(&self, upper: ManifoldLabel, lower: ManifoldLabel) -> f64 {
        self.energy(upper) - self.energy(lower)
    }

    pub fn lines(&self) -> &[TransitionLine] {
        &self.lines
    }

    pub fn line(&self, upper: ManifoldLabel, lower: ManifoldLabel) -> Option<&TransitionLine> {
        self.lines.iter().find(|l| l.upper == upper && l.lower == lower)
    }

    /// Einstein coefficient of `upper -> lower`, zero for pairs without a line.
    pub fn einstein_a(&self, upper: ManifoldLabel, lower: ManifoldLabel) -> f64 {
        self.line(upper, lower).map_or(0.0, |l| l.einstein_a)
    }

    /// P-manifold fine-structure splitting `ω_e'g - ω_eg`.
    pub fn fine_structure(&self) -> f64 {
        self.energy(ManifoldLabel::EPrime) - self.energy(ManifoldLabel::E)
    }

    /// Product-basis dipole matrices, built on first use.
    pub fn dipoles(&self) -> &DipoleOperator {
        self.dipoles.get_or_init(|| DipoleOperator::new(self))
    }
}
