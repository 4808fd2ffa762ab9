use std::io::{Read, Write};

use chrono::{Duration, NaiveDateTime};

use super::IngestError;
use crate::exec;
use crate::geodesy::GeoPoint;

pub const OBSERVATION_HEADER: [&str; 5] = ["device_id", "lat", "lon", "uncertainty_m", "timestamp"];

/// Uncertainty substituted for non-positive reported values, metres.
pub const REPLACEMENT_UNCERTAINTY_M: f64 = 25.0;

/// Minimum spacing between consecutive observations of one device.
pub const MIN_SPACING_MINUTES: i64 = 20;

const TIMESTAMP_FORMATS: [&str; 2] = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"];

/// One location fix of one device. Timestamps are local civil time.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationRecord {
    pub device_id: String,
    pub lat: f64,
    pub lon: f64,
    pub uncertainty_m: f64,
    pub timestamp: NaiveDateTime,
}

impl ObservationRecord {
    pub fn point(&self) -> GeoPoint {
        GeoPoint::new(self.lat, self.lon)
    }
}

/// A row that could not be turned into a record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct ParsedObservations {
    pub records: Vec<ObservationRecord>,
    pub errors: Vec<RowError>,
}

/// Parses the observation CSV. Malformed rows are reported in
/// [`ParsedObservations::errors`] with their line number; only an unreadable
/// stream or a wrong header is fatal.
pub fn parse_observations<R: Read>(reader: R) -> Result<ParsedObservations, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().ne(OBSERVATION_HEADER.iter().copied()) {
        return Err(IngestError::Header {
            expected: OBSERVATION_HEADER.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut out = ParsedObservations::default();
    let mut row = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {
                let line = row.position().map_or(0, |p| p.line());
                match parse_row(&row) {
                    Ok(rec) => out.records.push(rec),
                    Err(message) => out.errors.push(RowError { line, message }),
                }
            }
            Err(err) => match err.kind() {
                csv::ErrorKind::Io(_) => return Err(err.into()),
                csv::ErrorKind::Utf8 { pos, .. } => out
                    .errors
                    .push(RowError { line: pos.as_ref().map_or(0, |p| p.line()), message: "invalid UTF-8".into() }),
                _ => return Err(err.into()),
            },
        }
    }
    Ok(out)
}

fn parse_row(row: &csv::StringRecord) -> Result<ObservationRecord, String> {
    if row.len() != OBSERVATION_HEADER.len() {
        return Err(format!("expected {} fields, found {}", OBSERVATION_HEADER.len(), row.len()));
    }
    let device_id = &row[0];
    if device_id.is_empty() {
        return Err("empty device_id".into());
    }
    let number = |idx: usize, name: &str| -> Result<f64, String> {
        let v: f64 = row[idx].parse().map_err(|_| format!("{name} is not a number"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("{name} is not finite"))
        }
    };
    let lat = number(1, "latitude")?;
    if !(-90.0..=90.0).contains(&lat) {
        return Err("latitude out of range".into());
    }
    let lon = number(2, "longitude")?;
    if !(-180.0..=180.0).contains(&lon) {
        return Err("longitude out of range".into());
    }
    let uncertainty_m = number(3, "uncertainty")?;
    let timestamp = TIMESTAMP_FORMATS
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(&row[4], fmt).ok())
        .ok_or_else(|| format!("unparseable timestamp `{}`", &row[4]))?;
    Ok(ObservationRecord { device_id: device_id.to_owned(), lat, lon, uncertainty_m, timestamp })
}

/// Writes records in the observation CSV format.
pub fn write_observations<W: Write>(writer: W, records: &[ObservationRecord]) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(OBSERVATION_HEADER)?;
    for r in records {
        wtr.write_record([
            r.device_id.as_str(),
            &r.lat.to_string(),
            &r.lon.to_string(),
            &r.uncertainty_m.to_string(),
            &r.timestamp.format(TIMESTAMP_FORMATS[0]).to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SanitationReport {
    pub input_count: usize,
    pub zero_coordinate_removed: usize,
    pub uncertainty_replaced: usize,
    pub spacing_removed: usize,
}

impl SanitationReport {
    pub fn removed_count(&self) -> usize {
        self.zero_coordinate_removed + self.spacing_removed
    }

    pub fn output_count(&self) -> usize {
        self.input_count - self.removed_count()
    }

    /// Share of input observations whose uncertainty was replaced.
    pub fn replacement_fraction(&self) -> f64 {
        if self.input_count == 0 {
            0.0
        } else {
            self.uncertainty_replaced as f64 / self.input_count as f64
        }
    }

    fn absorb(&mut self, other: &Self) {
        self.input_count += other.input_count;
        self.zero_coordinate_removed += other.zero_coordinate_removed;
        self.uncertainty_replaced += other.uncertainty_replaced;
        self.spacing_removed += other.spacing_removed;
    }
}

/// Cleans raw records.
///
/// * fixes at exactly (0, 0) are dropped;
/// * non-positive uncertainties become [`REPLACEMENT_UNCERTAINTY_M`];
/// * a fix closer than [`MIN_SPACING_MINUTES`] to the previously kept fix of
///   the same device is dropped, so the earlier one survives.
///
/// The output is sorted by device then timestamp (stable, so equal
/// timestamps keep input order and the first one wins).
pub fn sanitize(mut records: Vec<ObservationRecord>) -> (Vec<ObservationRecord>, SanitationReport) {
    records.sort_by(|a, b| a.device_id.cmp(&b.device_id).then(a.timestamp.cmp(&b.timestamp)));

    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..=records.len() {
        if i == records.len() || records[i].device_id != records[start].device_id {
            groups.push(start..i);
            start = i;
        }
    }

    let cleaned = exec::map(&groups, |range| sanitize_device(&records[range.clone()]));
    let mut report = SanitationReport::default();
    let mut out = Vec::with_capacity(records.len());
    for (kept, part) in cleaned {
        report.absorb(&part);
        out.extend(kept);
    }
    (out, report)
}

fn sanitize_device(records: &[ObservationRecord]) -> (Vec<ObservationRecord>, SanitationReport) {
    let spacing = Duration::minutes(MIN_SPACING_MINUTES);
    let mut report = SanitationReport { input_count: records.len(), ..Default::default() };
    let mut kept: Vec<ObservationRecord> = Vec::with_capacity(records.len());
    for rec in records {
        if rec.lat == 0.0 && rec.lon == 0.0 {
            report.zero_coordinate_removed += 1;
            continue;
        }
        if let Some(last) = kept.last() {
            if rec.timestamp - last.timestamp < spacing {
                report.spacing_removed += 1;
                continue;
            }
        }
        let mut rec = rec.clone();
        if rec.uncertainty_m <= 0.0 {
            rec.uncertainty_m = REPLACEMENT_UNCERTAINTY_M;
            report.uncertainty_replaced += 1;
        }
        kept.push(rec);
    }
    (kept, report)
}
