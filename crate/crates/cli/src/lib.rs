//! Library side of the `pinnlab` binary: configuration, artifact formats
//! (checkpoint, CSV, SVG), and the subcommand implementations. Kept as a
//! library so integration tests can drive every command in-process.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod csv;
pub mod svg;
