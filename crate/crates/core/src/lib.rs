//! Catoni-type robust M-estimation for heavy-tailed data.
//!
//! The crate solves the location estimating equation `Σ φ(α(Xᵢ − θ)) = 0`, its
//! self-normalized variant, and the regression analogue
//! `h(β) = (nα)⁻¹ Σ xᵢ φ(α(yᵢ − xᵢ'β)) = 0`, for influence functions `φ` inside the
//! logarithmic envelope. It also provides the population oracles (pseudo-true
//! location, truncated moments, `E φ(αε)`), finite-sample bound utilities, and a
//! counter-based random stream for reproducible simulation.

pub mod dist;
pub mod error;
pub mod influence;
pub mod linalg;
pub mod mean;
pub mod quad;
pub mod regression;
pub mod rng;
pub mod root;
pub mod specialfn;

pub use error::{Error, Result};
pub use influence::{InfluenceSpec, phi_derivative, phi_eval};
