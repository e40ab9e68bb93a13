//! Adaptive FEM-BEM coupling for a nonlinear interior problem with a linear
//! exterior Laplace problem, solved by an Uzawa-type outer iteration.

pub mod bem;
pub mod cli;
pub mod estimate;
pub mod error;
pub mod fem;
pub mod mesh;
pub mod model;
pub mod solver;
pub mod uzawa;

pub use error::{Error, Result};
