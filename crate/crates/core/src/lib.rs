//! Seedable simulation laboratory for separated-measurement correlation models.
//!
//! The crate has two halves:
//!
//! * [`disks`]: partitioned-disk preparations that embody a joint PMF over two
//!   dichotomic outcomes, their split (per-side) versions, and the sampling
//!   regimes that either preserve or destroy the joint statistics.
//! * [`optics`] and [`scan`]: a local-realist photon-pair model with Malus-law
//!   analyzers and threshold detectors. Depending on how the two detection
//!   thresholds are calibrated it produces classical, quantum-like or
//!   super-quantum correlations, with singles asymmetry as the giveaway.
//!
//! [`eventio`] adds a time-tagged event-file pipeline with window matching, and
//! [`domain`] holds the shared types, closed-form predictions and statistics.

pub mod disks;
pub mod domain;
pub mod error;
pub mod eventio;
pub mod optics;
pub mod rng;
pub mod scan;

pub use domain::{Angle, CountTable, JointPmf, Outcome, SingletKind};
pub use error::{Error, Result};
