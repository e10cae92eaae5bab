//! Monte Carlo toolkit for Poisson functionals: process simulation,
//! add-one-cost difference operators, variance lower and upper bounds, and
//! the spatial statistics they are exercised on (geometric and
//! nearest-neighbour graphs, convex hulls, shot-noise excursion sets).

pub mod error;
pub mod graph;
pub mod knn;
pub mod malliavin;
pub mod polytope;
pub mod process;
pub mod registry;
pub mod rgg;
pub mod shotnoise;
pub mod stats;

pub use error::{Error, Result};
pub use malliavin::Functional;
pub use process::{PointConfiguration, SeedSpec, Window};
pub use stats::EstimateWithCI;
