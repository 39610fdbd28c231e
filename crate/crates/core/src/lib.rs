//! Discrete fractional fast diffusion `∂t u = −A u^m` on the unit interval and square.
//!
//! The crate builds dense symmetric discretizations of several Dirichlet-type
//! operators, integrates the flow with implicit proximal steps, and evaluates
//! smoothing, boundary, extinction and structure inequalities along the
//! computed trajectories.

pub mod constants;
pub mod datum;
pub mod error;
pub mod flow;
pub mod mesh;
pub mod norms;
pub mod operators;
pub mod verify;

pub use datum::{separable_scale, Datum};
pub use error::{Error, Result};
pub use mesh::{boundary_distance, make_grid, BoundaryDistance, Grid};
pub use norms::Field;
pub use operators::{
    build_cfl, build_local_laplacian, build_operator, build_rfl, build_sfl, green_matrix,
    spectrum, DiscreteOperator, GreenMatrix, OperatorKind, OperatorSpec, SpectralData,
};
