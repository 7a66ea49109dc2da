pub mod artifact;
pub mod cluster;
pub mod embed;
pub mod error;
pub mod eval;
pub mod matching;
pub mod pipeline;
pub mod prune;
pub mod registration;
pub mod spatial;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
