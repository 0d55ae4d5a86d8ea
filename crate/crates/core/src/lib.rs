//! Finite-stage operator constructions on coordinate sequence spaces.

pub mod check;
pub mod density;
pub mod error;
pub mod finite_rank;
pub mod harness;
pub mod hypercyclic;
pub mod linalg;
pub mod lp;
pub mod omega;
pub mod random;
pub mod scalar;
pub mod sparse;
pub mod spaces;
pub mod transport;

pub use error::{Error, Result};
pub use scalar::{Field, Rational, ScalarMode};
pub use sparse::{CoordFunctional, SparseVector};
