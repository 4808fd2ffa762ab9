//! Country-level mobility metrics estimated from raw smartphone location
//! records.
//!
//! The pipeline turns per-device observation streams into two daily
//! country metrics:
//!
//! * `M1`, the population-weighted average distance travelled per person (km);
//! * `M2`, the population-weighted fraction of people who did not move.
//!
//! Around that core sit stratified bootstrap intervals, pooled moving-average
//! smoothing, correlation against external mobility indices, a beta
//! regression of correlation on data set penetration, a parameter
//! sensitivity sweep and a synthetic world generator with known ground truth.
//!
//! Data-parallel loops go through [`exec`]; with the `parallel` feature
//! disabled everything runs on the calling thread and produces the same
//! bytes.

pub mod analysis;
pub mod exec;
pub mod geodesy;
pub mod ingest;
pub mod metrics;
pub mod smoothing;
pub mod synthgen;
pub mod uncertainty;

pub use geodesy::GeoPoint;
pub use ingest::{ObservationRecord, RegionTable};
pub use metrics::{CountryDailyMetric, CountryPanel, EstimationParams};
