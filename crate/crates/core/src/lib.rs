//! Uplink spectral efficiency of MMSE receivers in power-controlled
//! hexagonal cellular networks.
//!
//! The crate has two halves that are meant to be compared against each other:
//!
//! * a Monte Carlo simulator ([`geometry`], [`powerctl`], [`channel`],
//!   [`montecarlo`]) that drops mobiles in a disk, assigns powers and
//!   evaluates the exact MMSE SIR of a representative uplink;
//! * a large-system solver ([`asymptotics`]) for the deterministic limit of
//!   the normalised SIR and the spectral-efficiency distribution it implies.

pub mod asymptotics;
pub mod channel;
pub mod cli;
pub mod config;
pub mod error;
pub mod geometry;
pub mod montecarlo;
pub mod numeric;
pub mod params;
pub mod powerctl;

pub use error::{Error, Result};
pub use params::{SamplingMode, ScenarioParams};
pub use powerctl::PowerPolicy;
