//! Special functions, random streams and space-filling designs.

pub mod lhs;
pub mod qmc;
pub mod rng;
pub mod special;

pub use lhs::{latin_hypercube, latin_hypercube_with, UnitHypercubeDesign};
pub use rng::{RngStream, StreamRng};
pub use special::*;
