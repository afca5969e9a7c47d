//! Layer-wise probing of speech encoders for lexical tone and onset
//! consonants: corpus ingest, feature extraction and caching, leakage-proof
//! ridge probes, and experiment reports.

pub mod audio;
pub mod corpus;
pub mod error;
pub mod exec;
pub mod features;
pub mod fixture;
pub mod hash;
pub mod matrix;
pub mod experiments;
pub mod probe;

pub use error::{Error, Result};
pub use exec::Parallelism;
pub use matrix::FeatureMatrix;
