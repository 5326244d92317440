//! Smoothed convolutional classification of daily circulation patterns.
//!
//! The crate covers the whole pipeline for classifying six anticyclonic
//! circulation types (plus a residual class) from two-channel pressure grids:
//!
//! - [`datamodel`]: class codes, gridded daily fields, label catalogs, text I/O
//!   and run-length utilities.
//! - [`synth`]: a seeded generator of labeled synthetic grids with a 3-day
//!   minimum dwell time.
//! - [`net`]: a small CNN with hand-written backpropagation, Adam, a
//!   class-weighted smoothed cross-entropy and the training loop.
//! - [`smoothing`]: boundary-day label smoothing and the transition-smoothing
//!   post-processor that enforces the dwell rule on predictions.
//! - [`evalcv`]: year-grouped nested cross-validation, metrics and ablations.

pub mod datamodel;
pub mod error;
pub mod evalcv;
pub mod net;
pub mod seeds;
pub mod smoothing;
pub mod synth;

pub use datamodel::{ClassId, Dataset, GridField, LabelSeries, Run, N_CLASSES};
pub use error::{Error, Result};
