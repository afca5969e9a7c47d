//! Config-driven front end for toneprobe: validation, the staged pipeline
//! and the bundled fixture configuration.

pub mod config;
pub mod fixture;
pub mod stages;

pub use config::{ConfigErrors, Overrides, RunConfig};
pub use stages::{Layout, Pipeline, RunOptions, StageError};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const INVALID_CONFIG: i32 = 1;
    /// A stage failed or cells are absent; whatever finished was written.
    pub const RUNTIME_FAILURE: i32 = 2;
}
