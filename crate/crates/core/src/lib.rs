pub mod catalog;
pub mod encoder;
pub mod error;
pub mod linker;
pub mod nn;
pub mod promptkit;
pub mod pruner;
pub mod retriever;
pub mod runner;
pub mod sqlkit;
pub mod synth;

pub use error::{Error, Result};
