pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod labeler;
pub mod policy;
pub mod quality;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
