//! Stationarity certificates and minimax classification for constrained
//! min-max problems `min_{x∈X} max_{y∈Y} f(x, y)` over polyhedral sets.
//!
//! The crate evaluates first- and second-order optimality conditions at a
//! candidate point, estimates directional and second-order subderivatives for
//! nonsmooth objectives, classifies points against the saddle and minimax
//! notions on grids, and builds the sample-average GAN instance used for the
//! convergence experiment.

pub mod canonical;
pub mod certify;
pub mod deriv;
pub mod error;
pub mod gan;
pub mod geometry;
pub mod grid;
pub mod problem;
pub mod seeds;
mod sum;
pub mod vecops;

pub use error::{Error, Result};
pub use geometry::{PolyhedralSet, Tolerances};
pub use problem::{build_example, ExampleId, MinMaxProblem, Point, Smoothness};
