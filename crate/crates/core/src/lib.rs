//! Off-resonant photon scattering and AC Stark shifts in trapped ions, and
//! the gate errors they cause.
//!
//! Three scattering models are provided. The closed-form "CDA" and "ω³"
//! models treat the ion as a two-level-like system; the perturbative model
//! sums Kramers-Heisenberg amplitudes over every Zeeman sublevel of the P
//! manifolds. All frequencies are angular (rad/s), intensities are W/m².

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod angmom;
pub mod atomdata;
pub mod cli;
pub mod error;
pub mod expsim;
pub mod gatebudget;
pub mod lightshift;
pub mod scatter;
pub mod units;

pub use angmom::{AtomState, DipoleElement, HalfInt};
pub use atomdata::{IonModel, Manifold, ManifoldLabel, TransitionLine};
pub use error::{Error, Result};
pub use scatter::{LaserField, ScatterBreakdown, ScatterModel};
