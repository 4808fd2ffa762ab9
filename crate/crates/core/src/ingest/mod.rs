//! Parsing, validation and sanitation of raw inputs.
//!
//! Three input formats are handled here: the observation CSV, the region
//! GeoJSON with population counts and the country-level reference index CSV
//! in the public Community Mobility Reports layout.

mod observations;
mod reference;
mod regions;

pub use observations::{
    parse_observations, sanitize, write_observations, ObservationRecord, ParsedObservations, RowError,
    SanitationReport, MIN_SPACING_MINUTES, OBSERVATION_HEADER, REPLACEMENT_UNCERTAINTY_M,
};
pub use reference::{
    parse_reference_indices, write_reference_indices, IndexCategory, ReferenceIndexSeries, ReferenceRow, CMR_HEADER,
};
pub use regions::{assign_region, Polygon, Region, RegionTable};

use chrono::NaiveDate;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("unexpected header: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("invalid GeoJSON: {0}")]
    GeoJson(String),
    #[error("invalid region `{region_id}`: {reason}")]
    InvalidRegion { region_id: String, reason: String },
    #[error("duplicate region id `{region_id}` in country {country}")]
    DuplicateRegion { country: String, region_id: String },
    #[error("no series for country {country}")]
    NoSeries { country: String },
    #[error("duplicate date {date} for country {country}")]
    DuplicateDate { country: String, date: NaiveDate },
    #[error("line {line}: bad value `{value}` in column `{column}`")]
    BadValue { line: u64, column: String, value: String },
}
