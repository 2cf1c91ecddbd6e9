//! Ring traps built from time-averaged rf-dressed quadrupole potentials, and
//! the rotation-sensing interferometers that run on them.
//!
//! Layers, bottom up:
//! - [`constants`], [`vec3`] and the numerical kernels in [`numerics`]
//! - [`fields`]: magnetic fields, dressed potentials and their time average
//! - [`geometry`]: analytic and numerically extracted trap parameters
//! - [`dynamics`]: arm trajectories with accumulated action phase
//! - [`interferometer`]: full sequences and their observables
//! - [`adiabaticity`]: loss, mean-field and sensitivity diagnostics
//! - [`cli`]: scenario files, commands and deterministic output

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adiabaticity;
pub mod cli;
pub mod constants;
pub mod dynamics;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod interferometer;
pub mod numerics;
pub mod vec3;

pub use error::{Error, Result};
pub use fields::{AtomState, Branch, FieldConfig, PotentialForm, PotentialOptions};
pub use geometry::{GeometryOrigin, TrapGeometry};
pub use vec3::Vec3;
