//! Numerical laboratory for quasilinear Maxwell equations with a perfectly
//! conducting boundary.

pub mod calculus;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod initial_data;
pub mod linear;
pub mod material;
pub mod picard;
pub mod scenario;

pub use error::{QmxError, Result};
