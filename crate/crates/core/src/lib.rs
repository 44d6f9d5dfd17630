//! Sharp Schwarz-type bounds for harmonic mappings `F: B^n → B^{m+1}` with a
//! prescribed center value `F(0) = (a, b)`.
//!
//! The crate solves the multiplier system that characterizes the extremal
//! boundary maps, evaluates their Poisson extensions, and turns them into
//! directional bounds and a support-function description of the image of
//! `B_r^n`. An independent discretized convex program cross-checks the
//! closed-form construction.

pub mod error;
pub mod extremal_mapping;
pub mod extremal_solver;
pub mod linalg_kernels;
pub mod schwarz_bounds;
pub mod sphere_quadrature;
pub mod suite;
pub mod verification_oracle;

pub use error::{Result, SchwarzError};
