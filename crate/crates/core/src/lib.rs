pub mod data;
pub mod encode;
pub mod error;
pub mod experiment;
pub mod gbdt;
pub mod metrics;
pub mod synth;

pub use error::{Error, Result};
