//! Space-aware frame selection for video spatial reasoning, together with
//! the rule-based rewards, QA generation and cold-start filtering used to
//! train and evaluate on top of it.
//!
//! The sampling pipeline lives in [`geom`] (unprojection, confidence
//! filtering, voxelization) and [`coverage`] (greedy maximum coverage).

pub mod cli;
pub mod coldstart;
pub mod coverage;
pub mod error;
pub mod geom;
pub mod io;
pub mod qagen;
pub mod rewards;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};

/// Version stamped on every JSON record this crate reads or writes.
pub const SCHEMA_VERSION: u32 = 1;

pub fn schema_version() -> u32 {
    SCHEMA_VERSION
}
