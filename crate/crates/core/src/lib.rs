//! Mullins–Sekerka and surface diffusion flows of interfaces on the flat unit
//! torus, the Ohta–Kawasaki energy, and its second variation.
//!
//! Conventions used throughout: the normal `ν` points out of the phase `E`;
//! curvature is positive on a circle bounding a disk-shaped phase; the
//! velocity `V` is the normal speed along `ν`.

pub mod diagnostics;
pub mod error;
pub mod field;
pub mod flow;
pub mod geometry;
pub mod green;
pub mod io;
pub mod layer;
pub mod ms;
pub mod par;
pub mod spectral;
pub mod variation;

pub use error::{Error, Result};
