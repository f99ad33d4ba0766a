//! Library surface of the `spinflip` harness: the TOML experiment config and
//! the pipeline/report plumbing the binary dispatches into. Exposed so
//! integration tests and external tooling can drive the same code paths.

pub mod config;
pub mod pipeline;
