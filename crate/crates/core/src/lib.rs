pub mod anderson;
pub mod dense;
pub mod eigen;
pub mod error;
pub mod krylov;
pub mod matching;
pub mod mlildl;
pub mod mmio;
pub mod ordering;
pub mod rng;
pub mod sparse;
pub mod vecops;

pub use error::{Error, Result};
