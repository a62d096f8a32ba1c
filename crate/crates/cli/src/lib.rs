//! IO, file formats, and command implementations for the `diffkmeans`
//! binary. The numeric kernel lives in `diffkmeans-core`.

pub mod checkpoint;
pub mod cifar;
pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use commands::{
    cmd_baseline, cmd_eval, cmd_gen_data, cmd_gradcheck, cmd_train, GradCheckOptions, Overrides,
};
pub use config::{DatasetSource, RunConfig};
pub use error::CliError;
