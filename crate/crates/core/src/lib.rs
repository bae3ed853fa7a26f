//! Gaussian steady states of a driven-dissipative optomechanical system and
//! local quantum estimation of its linear (`g₁`) and quadratic (`g₂`)
//! coupling strengths.
//!
//! The pipeline is
//! [`model::steady_state`] → [`estimation::parameter_gradients`] →
//! [`estimation::qfim`] / [`estimation::quadrature_fi`] → [`estimation::error_bounds`],
//! and [`sweep`] runs it over drive/temperature grids and writes the results.

pub mod estimation;
pub mod gaussian;
pub mod model;
pub mod poly;
pub mod sweep;

pub use gaussian::{CommutatorMatrix, DampingMatrix, DriftDiffusion, GaussianError, MomentState};
pub use model::{ModelError, ModelVariant, PhysicalParams, SteadyOperatingPoint, SteadyState};
