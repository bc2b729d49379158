//! Vertex functions, elliptic stable envelopes and Macdonald operators for
//! the cotangent bundle of the full flag variety, plus numerical checks of
//! the identities relating them under 3d mirror symmetry.

pub mod cache;
pub mod cli;
pub mod combinatorics;
pub mod envelope;
pub mod error;
pub mod geometry;
pub mod macdonald;
pub mod numerics;
pub mod mirror;
pub mod qseries;
pub mod report;
pub mod series;
pub mod verify;
pub mod vertex;

pub use error::{Error, Result};
