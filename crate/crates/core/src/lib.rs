//! Self-organizing roadside-unit support networks built from parked cars.
//!
//! Parked vehicles listen to beacons from passing traffic, assemble
//! self-observed coverage maps on a shared geographic cell grid, and run a
//! greedy local decision process to choose whether to power up as a roadside
//! unit (RSU) or sleep. Sleeping cars wake periodically and elect a
//! replacement when an active RSU drives away.
//!
//! The crate also ships the experiment machinery used to evaluate the
//! approach: a deterministic discrete-event engine, a brute-force optimal
//! selection baseline, and a sparse-network broadcast experiment.

pub mod battery;
pub mod broadcast;
pub mod election;
pub mod engine;
pub mod geo;
pub mod oracle;
pub mod propagation;
pub mod scenario;
pub mod selforg;

pub use geo::{CellIndex, CoverageMap, GeoCoord, Observation, SignalQuality};

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A byte buffer does not decode as the expected wire format.
    #[error("format error: {0}")]
    Format(String),
    /// A scenario file failed validation; names the offending field/record.
    #[error("scenario load error: {0}")]
    ScenarioLoad(String),
    /// A configuration value is out of range.
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
