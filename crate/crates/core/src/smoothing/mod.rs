//! Boundary-day label smoothing and transition smoothing of predictions.

mod series;
mod targets;
mod transition;

pub use series::{
    argmax_row, argmax_series, parse_probs, write_probs, PredSeries, ProbRow, ProbSeries,
};
pub use targets::smooth_targets;
pub(crate) use targets::smoothed_row;
pub use transition::{
    membership, transition_smooth, transition_smooth_bounded, transition_smooth_pass,
    SmoothingCase, SmoothingReport,
};
