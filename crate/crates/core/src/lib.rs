//! Finite-volume laboratory for the Neumann filtration equation
//! `u_t = Δφ(u)` on boxes, with exact self-similar reference solutions and
//! the diagnostics needed to measure smoothing exponents and decay rates.

pub mod analysis;
pub mod mesh;
pub mod nonlinearity;
pub mod reference;
pub mod solver;

pub use analysis::{Quantity, Record, TimeSeries};
pub use mesh::{project_function, BoxMesh, Field};
pub use nonlinearity::{verify_growth_conditions, DiffusionLaw, Nonlinearity};
pub use solver::{run, run_observed, step_backward_euler, SolverConfig};
