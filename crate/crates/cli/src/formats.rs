//! Versioned CSV outputs.
//!
//! Each file starts with a `#format=<name>/<version>` line, optionally
//! followed by `#key=value` metadata lines, then a header row. Readers refuse
//! a file whose format line differs from the one they were built for.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use mobility_core::analysis::{CorrelationResult, PenetrationRecord, SensitivityRow};
use mobility_core::metrics::{DailyTrajectorySummary, Interval};
use mobility_core::{CountryDailyMetric, GeoPoint};

use crate::error::{CliError, Result};

pub const METRICS: &str = "mobility-metrics/1";
pub const SMOOTHED: &str = "mobility-smoothed/1";
pub const TRAJECTORIES: &str = "mobility-trajectories/1";
pub const CORRELATION: &str = "mobility-correlation/1";
pub const PENETRATION: &str = "mobility-penetration/1";
pub const SENSITIVITY: &str = "mobility-sensitivity/1";
pub const REGRESSION: &str = "mobility-regression/1";
pub const REGRESSION_POINTS: &str = "mobility-regression-points/1";
pub const REGRESSION_CURVE: &str = "mobility-regression-curve/1";
pub const SANITATION: &str = "mobility-sanitation/1";

pub const METRICS_HEADER: [&str; 10] =
    ["country", "day", "date", "M1_km", "M2", "N", "M1_lo", "M1_hi", "M2_lo", "M2_hi"];
pub const TRAJECTORY_HEADER: [&str; 8] = ["device_id", "date", "country", "region", "L_km", "stationary", "lat", "lon"];
pub const CORRELATION_HEADER: [&str; 6] = ["country", "metric", "index", "q", "abs_rho", "n_days"];
pub const PENETRATION_HEADER: [&str; 4] = ["country", "average_N", "population", "penetration"];
pub const SENSITIVITY_HEADER: [&str; 5] = ["n", "r", "z", "rho1_abs", "rho2_abs"];

/// Empty for a missing value, shortest round-trip decimal otherwise.
pub fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_opt(s: &str, path: &Path, line: usize) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| CliError::input(format!("{}:{line}: bad number `{s}`", path.display())))
}

fn parse_req<T: std::str::FromStr>(s: &str, what: &str, path: &Path, line: usize) -> Result<T> {
    s.parse().map_err(|_| CliError::input(format!("{}:{line}: bad {what} `{s}`", path.display())))
}

/// Writer for one versioned file.
pub struct VersionedWriter {
    inner: csv::Writer<BufWriter<File>>,
}

impl VersionedWriter {
    pub fn create(path: &Path, format: &str, meta: &[(&str, String)], header: &[&str]) -> Result<Self> {
        let mut file = BufWriter::new(File::create(path)?);
        writeln!(file, "#format={format}")?;
        for (k, v) in meta {
            writeln!(file, "#{k}={v}")?;
        }
        let mut inner = csv::Writer::from_writer(file);
        inner.write_record(header)?;
        Ok(Self { inner })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

/// Parsed body of a versioned file.
pub struct VersionedFile {
    pub meta: BTreeMap<String, String>,
    pub rows: Vec<(usize, csv::StringRecord)>,
}

pub fn read_versioned(path: &Path, format: &str, header: &[&str]) -> Result<VersionedFile> {
    let file = File::open(path).map_err(|e| CliError::input(format!("cannot open {}: {e}", path.display())))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let found = first.trim_end().strip_prefix("#format=").unwrap_or("");
    if found != format {
        return Err(CliError::input(format!(
            "{}: format mismatch: expected `{format}`, found `{}`",
            path.display(),
            if found.is_empty() { first.trim_end() } else { found }
        )));
    }
    let mut meta = BTreeMap::new();
    let mut rest = String::new();
    let mut line_no = 1;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        line_no += 1;
        match line.strip_prefix('#') {
            Some(kv) => {
                let (k, v) = kv.trim_end().split_once('=').unwrap_or((kv.trim_end(), ""));
                meta.insert(k.to_owned(), v.to_owned());
            }
            None => {
                rest = line;
                break;
            }
        }
    }
    reader.read_to_string(&mut rest)?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(rest.as_bytes());
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if found.iter().map(String::as_str).ne(header.iter().copied()) {
        return Err(CliError::input(format!(
            "{}: format {format} expects columns `{}`, found `{}`",
            path.display(),
            header.join(","),
            found.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        rows.push((line_no + 1 + i, rec?));
    }
    Ok(VersionedFile { meta, rows })
}

fn interval_cells(ci: Option<Interval>) -> [String; 2] {
    [cell(ci.map(|c| c.low)), cell(ci.map(|c| c.high))]
}

fn metric_cells(m: &CountryDailyMetric) -> Vec<String> {
    let [l1, h1] = interval_cells(m.m1_ci);
    let [l2, h2] = interval_cells(m.m2_ci);
    vec![
        m.country_code.clone(),
        m.day.to_string(),
        m.date.to_string(),
        cell(m.m1_km),
        cell(m.m2_fraction),
        m.sample_size.to_string(),
        l1,
        h1,
        l2,
        h2,
    ]
}

pub fn write_metrics(path: &Path, metrics: &[CountryDailyMetric]) -> Result<()> {
    let mut w = VersionedWriter::create(path, METRICS, &[], &METRICS_HEADER)?;
    for m in metrics {
        w.row(metric_cells(m))?;
    }
    w.finish()
}

pub fn write_smoothed(path: &Path, series: &[(usize, Vec<CountryDailyMetric>)]) -> Result<()> {
    let mut header = vec!["q"];
    header.extend(METRICS_HEADER);
    let mut w = VersionedWriter::create(path, SMOOTHED, &[], &header)?;
    for (q, metrics) in series {
        for m in metrics {
            let mut row = vec![q.to_string()];
            row.extend(metric_cells(m));
            w.row(row)?;
        }
    }
    w.finish()
}

fn parse_metric(rec: &csv::StringRecord, offset: usize, path: &Path, line: usize) -> Result<CountryDailyMetric> {
    let f = |i: usize| rec.get(offset + i).unwrap_or("");
    let interval = |lo: Option<f64>, hi: Option<f64>| lo.zip(hi).map(|(low, high)| Interval { low, high });
    Ok(CountryDailyMetric {
        country_code: f(0).to_owned(),
        day: parse_req(f(1), "day", path, line)?,
        date: parse_req(f(2), "date", path, line)?,
        m1_km: parse_opt(f(3), path, line)?,
        m2_fraction: parse_opt(f(4), path, line)?,
        sample_size: parse_req(f(5), "sample size", path, line)?,
        m1_ci: interval(parse_opt(f(6), path, line)?, parse_opt(f(7), path, line)?),
        m2_ci: interval(parse_opt(f(8), path, line)?, parse_opt(f(9), path, line)?),
    })
}

pub fn read_metrics(path: &Path) -> Result<Vec<CountryDailyMetric>> {
    let file = read_versioned(path, METRICS, &METRICS_HEADER)?;
    file.rows.iter().map(|(line, rec)| parse_metric(rec, 0, path, *line)).collect()
}

pub fn read_smoothed(path: &Path) -> Result<Vec<(usize, CountryDailyMetric)>> {
    let mut header = vec!["q"];
    header.extend(METRICS_HEADER);
    let file = read_versioned(path, SMOOTHED, &header)?;
    file.rows
        .iter()
        .map(|(line, rec)| Ok((parse_req(&rec[0], "q", path, *line)?, parse_metric(rec, 1, path, *line)?)))
        .collect()
}

/// The analysis period recorded alongside the trajectories.
pub fn write_trajectories(
    path: &Path,
    period: (NaiveDate, NaiveDate),
    summaries: &[DailyTrajectorySummary],
) -> Result<()> {
    let meta = [("period", format!("{}..{}", period.0, period.1))];
    let mut w = VersionedWriter::create(path, TRAJECTORIES, &meta, &TRAJECTORY_HEADER)?;
    for s in summaries {
        w.row([
            s.device_id.clone(),
            s.date.to_string(),
            s.country_code.clone(),
            s.region_id.clone(),
            s.travelled_km.to_string(),
            u8::from(s.stationary).to_string(),
            s.mean_coordinate.lat.to_string(),
            s.mean_coordinate.lon.to_string(),
        ])?;
    }
    w.finish()
}

pub struct Trajectories {
    pub period: (NaiveDate, NaiveDate),
    pub summaries: Vec<DailyTrajectorySummary>,
}

pub fn read_trajectories(path: &Path) -> Result<Trajectories> {
    let file = read_versioned(path, TRAJECTORIES, &TRAJECTORY_HEADER)?;
    let period = file
        .meta
        .get("period")
        .and_then(|p| p.split_once(".."))
        .and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)))
        .ok_or_else(|| CliError::input(format!("{}: missing or bad `#period=` line", path.display())))?;
    let summaries = file
        .rows
        .iter()
        .map(|(line, rec)| {
            let line = *line;
            Ok(DailyTrajectorySummary {
                device_id: rec[0].to_owned(),
                date: parse_req(&rec[1], "date", path, line)?,
                country_code: rec[2].to_owned(),
                region_id: rec[3].to_owned(),
                travelled_km: parse_req(&rec[4], "distance", path, line)?,
                stationary: match &rec[5] {
                    "0" => false,
                    "1" => true,
                    other => return Err(CliError::input(format!("{}:{line}: bad flag `{other}`", path.display()))),
                },
                mean_coordinate: GeoPoint::new(
                    parse_req(&rec[6], "latitude", path, line)?,
                    parse_req(&rec[7], "longitude", path, line)?,
                ),
                // Not needed downstream and not stored.
                observation_count: 0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectories { period, summaries })
}

/// One correlation-table row; `result` is `None` when undefined.
pub struct CorrelationRow {
    pub country: String,
    pub metric: String,
    pub index: String,
    pub q: usize,
    pub abs_rho: Option<f64>,
    pub n_days: usize,
}

impl From<&CorrelationResult> for CorrelationRow {
    fn from(c: &CorrelationResult) -> Self {
        Self {
            country: c.country_code.clone(),
            metric: c.metric.to_string(),
            index: c.index.to_string(),
            q: c.q,
            abs_rho: Some(c.abs_rho),
            n_days: c.paired_days,
        }
    }
}

pub fn write_correlations(path: &Path, rows: &[CorrelationRow]) -> Result<()> {
    let mut w = VersionedWriter::create(path, CORRELATION, &[], &CORRELATION_HEADER)?;
    for r in rows {
        w.row([
            r.country.clone(),
            r.metric.clone(),
            r.index.clone(),
            r.q.to_string(),
            cell(r.abs_rho),
            r.n_days.to_string(),
        ])?;
    }
    w.finish()
}

pub fn read_correlations(path: &Path) -> Result<Vec<CorrelationRow>> {
    let file = read_versioned(path, CORRELATION, &CORRELATION_HEADER)?;
    file.rows
        .iter()
        .map(|(line, rec)| {
            Ok(CorrelationRow {
                country: rec[0].to_owned(),
                metric: rec[1].to_owned(),
                index: rec[2].to_owned(),
                q: parse_req(&rec[3], "q", path, *line)?,
                abs_rho: parse_opt(&rec[4], path, *line)?,
                n_days: parse_req(&rec[5], "day count", path, *line)?,
            })
        })
        .collect()
}

pub fn write_penetration(path: &Path, rows: &[PenetrationRecord]) -> Result<()> {
    let mut w = VersionedWriter::create(path, PENETRATION, &[], &PENETRATION_HEADER)?;
    for r in rows {
        w.row([
            r.country_code.clone(),
            r.average_sample_size.to_string(),
            r.population.to_string(),
            r.penetration.to_string(),
        ])?;
    }
    w.finish()
}

pub fn read_penetration(path: &Path) -> Result<Vec<PenetrationRecord>> {
    let file = read_versioned(path, PENETRATION, &PENETRATION_HEADER)?;
    file.rows
        .iter()
        .map(|(line, rec)| {
            Ok(PenetrationRecord {
                country_code: rec[0].to_owned(),
                average_sample_size: parse_req(&rec[1], "sample size", path, *line)?,
                population: parse_req(&rec[2], "population", path, *line)?,
                penetration: parse_req(&rec[3], "penetration", path, *line)?,
            })
        })
        .collect()
}

pub fn write_sensitivity(path: &Path, rows: &[SensitivityRow]) -> Result<()> {
    let mut w = VersionedWriter::create(path, SENSITIVITY, &[], &SENSITIVITY_HEADER)?;
    for r in rows {
        w.row([r.n.to_string(), r.r.to_string(), r.z.to_string(), cell(r.rho1_abs), cell(r.rho2_abs)])?;
    }
    w.finish()
}

pub fn read_sensitivity(path: &Path) -> Result<Vec<SensitivityRow>> {
    let file = read_versioned(path, SENSITIVITY, &SENSITIVITY_HEADER)?;
    file.rows
        .iter()
        .map(|(line, rec)| {
            Ok(SensitivityRow {
                n: parse_req(&rec[0], "n", path, *line)?,
                r: parse_req(&rec[1], "r", path, *line)?,
                z: parse_req(&rec[2], "z", path, *line)?,
                rho1_abs: parse_opt(&rec[3], path, *line)?,
                rho2_abs: parse_opt(&rec[4], path, *line)?,
            })
        })
        .collect()
}
