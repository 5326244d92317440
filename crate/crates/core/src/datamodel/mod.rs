//! Domain types, file formats and run-length utilities.

mod class;
mod fields;
mod labels;
mod runs;

pub use class::{ClassId, N_CLASSES};
pub(crate) use fields::parse_date as fields_parse_date;
pub use fields::{
    parse_fields, write_fields, DailySample, Dataset, GridField, CELLS, CHANNELS, CHANNEL_NAMES,
    COLS, FIELD_LEN, ROWS,
};
pub(crate) use labels::frequencies;
pub use labels::{
    class_frequencies, parse_labels, write_labels, CatalogMapping, LabelCoding, LabelSeries,
};
pub use runs::{boundary_mask, runs, Run};
