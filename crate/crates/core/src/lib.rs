//! Space-time finite element reconstruction of the spatial source factor
//! `f` in `∂ₜu + Au = R(x, t) f(x)` from interior observations.

pub mod assembly;
pub mod basis;
pub mod error;
pub mod inverse;
pub mod mesh;
pub mod linsolve;
pub mod quadrature;
pub mod spaces;
pub mod sparse;

pub use error::{Error, Result};
