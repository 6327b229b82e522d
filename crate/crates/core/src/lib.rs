//! Positivity-preserving interior-penalty discontinuous Galerkin scheme for
//! the Fisher-KPP equation `∂_t u = D u'' + u(1 - u)` with no-flux boundary
//! conditions, solved for `λ = log u` with implicit Euler time stepping.
//!
//! Every density `e^λ` produced by the scheme is positive by construction.
//! [`diagnostics`] certifies the structural properties of each step:
//! coercivity of the diffusion form, the discrete entropy inequality, mass
//! bounds and a uniform DG-norm bound.

pub mod diagnostics;
pub mod dgspace;
pub mod error;
pub mod forms;
pub mod mesh;
pub mod reference;
pub mod solver;

pub use dgspace::{DgFunction, Quadrature};
pub use error::{Error, Result};
pub use forms::SchemeParams;
pub use mesh::Mesh1D;
pub use solver::{run_simulation, InitialDatum, NewtonControls, TimeSeries};
