//! Differential geometry on coordinate superdomains: Grassmann arithmetic,
//! superfunction expressions, affine connections, geodesic flows, projective
//! equivalence and metrics.

pub mod connection;
pub mod error;
pub mod flows;
pub mod geometry;
pub mod grassmann;
pub mod linalg;
pub mod metric;
pub mod model;
pub mod projective;
pub mod sampling;
pub mod superexpr;

pub use error::{Error, Result};
pub use grassmann::{GrassmannNumber, Parity};
pub use superexpr::{CoordinateSystem, SuperExpr, Tape};
