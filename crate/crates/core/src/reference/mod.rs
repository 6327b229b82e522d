//! Reference solvers: continuous P1 finite elements and the traveling-wave ODE.

pub mod fem;
pub mod wave;

pub use fem::{fem_p1_lambda, fem_p1_lambda_default, fem_p1_u, FemError, FemFunction, FemParams, FemVariable};
pub use wave::{dopri5, traveling_wave_reference, WaveProfile};
