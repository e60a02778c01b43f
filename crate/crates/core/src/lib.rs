//! Numerical laboratory for a biphase elastic rod whose two halves prefer
//! the wells `SO(3)` and `SO(3)H`, with optional misfit dislocations on the
//! interface `x₁ = 0`.
//!
//! The crate evaluates the two-well truncated energy on hexahedral grids,
//! minimizes it over deformations with clamped end slabs and prescribed
//! displacement jumps, builds explicit competitor fields, and runs the
//! scaling and limit experiments on top of those pieces.

pub mod constructions;
pub mod error;
pub mod estimates;
pub mod experiments;
pub mod fields;
pub mod geometry;
pub mod linalg;
pub mod material;
pub mod record;
pub mod solver;

pub use error::{Error, Result};
pub use linalg::{Mat3, Vec3};
