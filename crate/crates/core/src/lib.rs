//! Weighted Fock spaces built from matrix weight sequences, the associated
//! operator domains, Poisson dilations and kernel positivity checks.

pub mod dilation;
pub mod error;
pub mod fock;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod sampling;
pub mod tuple;
pub mod weights;
pub mod words;

pub use error::{Error, Result};
pub use linalg::{CMat, CVec, C64};
pub use tuple::OperatorTuple;
pub use weights::{RadialData, WeightSequence};
