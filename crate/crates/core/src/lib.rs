pub mod cli;
pub mod consensus;
pub mod dataset;
pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod numerics;
pub mod relatedness;
pub mod world;

pub use error::{Error, Result};
