//! Command-line front end, file formats and report producers for `bwtpe-core`.

pub mod cli;
pub mod experiments;
pub mod io;
pub mod manifest;
pub mod presets;
