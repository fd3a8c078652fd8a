//! Toolkit for rate-compatible protograph-based Raptor-like (PBRL) QC-LDPC
//! codes.
//!
//! The pieces, bottom up:
//!
//! - [`protomatrix`]: the base-matrix model, text format and rate accounting.
//! - [`permanent`]: exact permanents (naive, Ryser, singleton-reduced).
//! - [`bound`]: permanent-based upper bounds on the minimum distance of any
//!   QC lift, both by full enumeration and by the raptor-structure shortcut.
//! - [`designer`]: greedy row-by-row construction of the extension rows.
//! - [`threshold`]: BI-AWGN decoding thresholds via the reciprocal channel
//!   approximation.
//! - [`lifting`]: circulant PEG lifting with ACE tie-breaking, girth.
//! - [`simulator`]: encoder, channel, flooding BP and the FER harness.

pub mod bound;
pub mod designer;
pub mod fixtures;
pub mod lifting;
pub mod permanent;
pub mod protomatrix;
pub mod simulator;
pub mod sparse;
pub mod threshold;

pub use bound::{BoundReport, BoundValue};
pub use designer::{DesignConstraints, DesignRecord, Objective};
pub use lifting::LiftedCode;

pub use protomatrix::{HrcShape, Protomatrix, RatePoint};
pub use sparse::{Girth, SparseBinary};
pub use threshold::ThresholdResult;

/// Version tag written into JSON outputs.
pub const SCHEMA_VERSION: u32 = 1;
