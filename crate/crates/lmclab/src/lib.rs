//! A numerical laboratory for Lagrangian mean curvature type equations
//!
//! ```text
//!   sum_i arctan(lambda_i(D^2 u)) = Theta(x, u, Du)
//! ```
//!
//! where the `lambda_i` are Hessian eigenvalues and `Theta` is the Lagrangian
//! phase of the gradient graph `(x, Du(x))`. The crate evaluates and solves
//! the equation on grids, constructs closed-form singular viscosity solutions
//! with matched phases, and implements the operator transforms
//! (exponentiation into a concave operator, upward rotation of the gradient
//! graph) together with the identities that certify them.
//!
//! Everything is generic over the scalar type through [`scalar::Real`]
//! (f32 or f64); the `*64` aliases at the crate root pin the default
//! double-precision instantiations.

pub mod error;
pub mod geometry;
pub mod grid;
pub mod linalg;
pub mod phase;
pub mod scalar;
pub mod spectral;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision aliases for the main domain types.
pub type SymMatrix64 = spectral::SymMatrix<f64>;
pub type Spectrum64 = spectral::Spectrum<f64>;
pub type PhaseRegime64 = spectral::PhaseRegime<f64>;
