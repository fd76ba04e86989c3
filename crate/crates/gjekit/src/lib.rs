//! gjekit: numerical toolkit for generated Jacobian equations.
//!
//! The math core (generating functions, exponential maps, tensor forms,
//! envelope evaluation) is generic over [`Real`]; the grid-based modules
//! (solver, ray tracing, estimates) run in `f64`.

pub mod demos;
pub mod error;
pub mod estimates;
pub mod expmaps;
pub mod gconvex;
pub mod genfun;
pub mod grid;
pub mod hull;
pub mod io;
pub mod linalg;
pub mod optics;
pub mod sampling;
pub mod scalar;
pub mod solver;
pub mod structure;
pub mod tol;

pub use error::{GjeError, Result};
pub use scalar::Real;
pub use tol::Tolerances;

/// Double-precision aliases.
pub mod f64 {
    pub type GenFun = crate::genfun::GenFun<f64>;
    pub type Vector = crate::linalg::Vector<f64>;
    pub type Matrix = crate::linalg::Matrix<f64>;
}

/// Single-precision aliases.
pub mod f32 {
    pub type GenFun = crate::genfun::GenFun<f32>;
    pub type Vector = crate::linalg::Vector<f32>;
    pub type Matrix = crate::linalg::Matrix<f32>;
}
