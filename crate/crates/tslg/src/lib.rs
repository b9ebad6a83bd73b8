//! Std companion of `tslg-core`: synthetic naturalistic data, file formats,
//! case pipelines, parallel campaigns, run manifests, and the CLI.

pub mod campaign;
pub mod cases;
pub mod cli;
pub mod io;
pub mod manifest;
pub mod synth;
