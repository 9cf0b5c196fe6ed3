//! Library surface of the command-line tool: configuration, pipeline and
//! run-manifest handling. The `chargesim` binary is a thin wrapper over
//! these modules; integration tests drive them directly.

pub mod config;
pub mod manifest;
pub mod pipeline;
