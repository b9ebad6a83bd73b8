//! Criticality-weighted testing-scenario libraries for automated-driving
//! models, and importance-sampling evaluation of an accident rate against
//! such a library.
//!
//! The crate is `no_std` (with `alloc`); file formats, the synthetic data
//! generator and the command line live in the companion `tslg` crate.
//!
//! Pipeline, per case study:
//!
//! 1. [`config::build_space`] discretizes the decision variables.
//! 2. [`ndd`] turns event records into an [`exposure::ExposureModel`].
//! 3. The surrogate model is simulated ([`vehicle`], [`highway`]) and scored
//!    ([`objective`]); [`search`] collects every cell whose criticality
//!    exceeds the threshold γ, or [`rl`] learns a Q-table over the
//!    car-following MDP ([`mdp`]).
//! 4. [`sampler`] draws ε-greedy scenarios from the library and
//!    [`estimate`] runs the weighted campaign with its stopping rule.

#![no_std]

extern crate alloc;

pub mod config;
pub mod error;
pub mod estimate;
pub mod exposure;
pub mod highway;
pub mod library;
pub mod mdp;
pub mod ndd;
pub mod objective;
pub mod rl;
pub mod sampler;
pub mod search;
pub mod space;
pub mod vehicle;

pub use config::{CaseConfig, CaseId, SubjectId};
pub use error::{Error, Result};
pub use exposure::{ExposureModel, GridExposure, MdpExposure};
pub use library::Library;
pub use space::{CellIndex, Dim, ScenarioSpace};
