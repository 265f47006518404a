pub mod attnviz;
pub mod cli;
pub mod coretypes;
pub mod datagen;
pub mod embedding;
pub mod error;
pub mod masking;
pub mod metrics;
pub mod model;
pub mod nnkernel;
pub mod plot;
pub mod training;

pub use error::{Error, Result};
