//! Simulation kernel for distance-stationary random walks on the hyperbolic
//! plane: disk-model geometry, a lazily sampled Poisson field, certified
//! Poisson-Delaunay neighborhoods, four walk families and the estimators run
//! on their traces.
//!
//! The geometry kernel is generic over the float type; everything above it
//! runs in `f64` through the aliases below.

pub mod delaunay;
pub mod error;
pub mod estimate;
pub mod field;
pub mod geom;
pub mod oracle;
pub mod stats;
pub mod walks;

pub use error::{EstimateError, FieldError, GeomError, GraphError, WalkError};

/// Disk point in double precision.
pub type Point = geom::ModelPoint<f64>;
/// Disk isometry in double precision.
pub type Mobius = geom::Isometry<f64>;
/// Boundary point in double precision.
pub type Boundary = geom::BoundaryPoint<f64>;
