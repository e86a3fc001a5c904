//! Balanced homodyne detection with click detectors, simulated and analysed.
//!
//! The crate synthesizes time-tag streams for two single-photon detectors
//! behind a 50:50 beamsplitter fed by a coherent local oscillator and the
//! vacuum, then runs two analyses on the same data:
//!
//! * [`homodyne`]: variance of the per-bin count difference against the
//!   shot-noise line, dark-count floor, linear range and clearance;
//! * [`hbt`]: coincidence-based second-order correlation `g2(tau)`.
//!
//! [`simgen`] produces the streams, [`timetag`] stores and bins them and
//! [`model`] holds the shared types and configuration.

pub mod error;
pub mod hbt;
pub mod homodyne;
pub mod model;
pub mod simgen;
pub mod timetag;

pub use error::{AnalysisError, ConfigError, Error, FormatError, Result, Violation};
pub use model::{
    BinnedCounts, ClearanceResult, DetectorModel, DifferenceSeries, G2Curve, G2Estimate, G2Flag,
    SimConfig, SweepPoint, TimeTagStream,
};
