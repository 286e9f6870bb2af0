//! Spectral-efficiency analysis and network planning for network-assisted
//! full-duplex cell-free massive MIMO.
//!
//! - [`netgen`]: random drops, wrap-around geometry, large-scale fading.
//! - [`grouping`], [`se`], [`solution`]: partial zero-forcing grouping,
//!   closed-form per-UE SE and constraint checks.
//! - [`oracle`]: Monte Carlo estimate of the same SE from simulated channels.
//! - [`opt`]: constraint-handling differential evolution and baselines.

pub mod config;
pub mod error;
pub mod grouping;
pub mod netgen;
pub mod opt;
pub mod oracle;
pub mod rng;
pub mod se;
pub mod solution;

pub use config::{DuplexPolicy, NetworkConfig};
pub use error::{Error, Result};
pub use grouping::{Grouping, Link, LinkGroups, ProcessingMode};
pub use netgen::{NetworkRealization, Point, Topology};
pub use se::SeReport;
pub use solution::{Solution, Violation, ViolationReport};
