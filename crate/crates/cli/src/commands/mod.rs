//! One module per subcommand, plus the input plumbing they share.

pub mod correlate;
pub mod estimate;
pub mod regress;
pub mod sensitivity;
pub mod simulate;
pub mod smooth;

use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use mobility_core::analysis::MetricKind;
use mobility_core::ingest::{
    parse_observations, parse_reference_indices, sanitize, IndexCategory, IngestError, ReferenceIndexSeries,
    SanitationReport,
};
use mobility_core::metrics::DailyTrajectorySummary;
use mobility_core::{CountryPanel, ObservationRecord, RegionTable};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::formats::{VersionedWriter, SANITATION};

/// Metric and reference index pairs that are correlated.
pub const PAIRS: [(MetricKind, IndexCategory); 3] = [
    (MetricKind::M1, IndexCategory::TransitStations),
    (MetricKind::M2, IndexCategory::Residential),
    (MetricKind::M2, IndexCategory::Workplaces),
];

pub fn prepare_output(cfg: &RunConfig, command: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(&cfg.output)
        .map_err(|e| CliError::runtime(format!("cannot create output {}: {e}", cfg.output.display())))?;
    let params = cfg.effective_toml();
    log::debug!("{command}: effective parameters\n{params}");
    std::fs::write(cfg.output.join(format!("params_{command}.toml")), params)?;
    Ok(cfg.output.clone())
}

pub fn load_regions(cfg: &RunConfig) -> Result<RegionTable> {
    let path = RunConfig::require(&cfg.input.regions, "regions")?;
    let file = File::open(path).map_err(|e| CliError::input(format!("cannot open {}: {e}", path.display())))?;
    RegionTable::from_geojson_reader(BufReader::new(file))
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub struct Observations {
    pub records: Vec<ObservationRecord>,
    pub report: SanitationReport,
    pub row_errors: usize,
}

/// Reads and sanitizes the observation file. A zero-byte file counts as an
/// empty one.
pub fn load_observations(cfg: &RunConfig) -> Result<Observations> {
    let path = RunConfig::require(&cfg.input.observations, "observations")?;
    let file = File::open(path).map_err(|e| CliError::input(format!("cannot open {}: {e}", path.display())))?;
    if file.metadata()?.len() == 0 {
        return Ok(Observations { records: Vec::new(), report: SanitationReport::default(), row_errors: 0 });
    }
    let parsed = parse_observations(BufReader::new(file)).map_err(|e| match e {
        IngestError::Io(e) => CliError::runtime(format!("{}: {e}", path.display())),
        other => CliError::input(format!("{}: {other}", path.display())),
    })?;
    for err in parsed.errors.iter().take(10) {
        log::warn!("{}:{}: {}", path.display(), err.line, err.message);
    }
    if parsed.errors.len() > 10 {
        log::warn!("{} further malformed rows skipped", parsed.errors.len() - 10);
    }
    let row_errors = parsed.errors.len();
    let (records, report) = sanitize(parsed.records);
    log::info!(
        "sanitation: {} in, {} zero-coordinate and {} spacing removals, {} uncertainties replaced",
        report.input_count,
        report.zero_coordinate_removed,
        report.spacing_removed,
        report.uncertainty_replaced
    );
    Ok(Observations { records, report, row_errors })
}

pub fn write_sanitation(dir: &Path, obs: &Observations) -> Result<()> {
    let r = &obs.report;
    let header = [
        "input",
        "malformed_rows",
        "zero_coordinate_removed",
        "spacing_removed",
        "uncertainty_replaced",
        "output",
        "replacement_fraction",
    ];
    let mut w = VersionedWriter::create(&dir.join("sanitation.csv"), SANITATION, &[], &header)?;
    w.row([
        r.input_count.to_string(),
        obs.row_errors.to_string(),
        r.zero_coordinate_removed.to_string(),
        r.spacing_removed.to_string(),
        r.uncertainty_replaced.to_string(),
        r.output_count().to_string(),
        if r.input_count == 0 { String::new() } else { r.replacement_fraction().to_string() },
    ])?;
    w.finish()
}

/// Requested countries, or every country of the region table.
pub fn countries(cfg: &RunConfig, table: &RegionTable) -> Result<Vec<String>> {
    if cfg.countries.is_empty() {
        return Ok(table.countries());
    }
    let known: BTreeSet<String> = table.countries().into_iter().collect();
    let mut out = Vec::new();
    for c in &cfg.countries {
        if !known.contains(c) {
            return Err(CliError::input(format!("country {c} has no regions in the region file")));
        }
        if !out.contains(c) {
            out.push(c.clone());
        }
    }
    Ok(out)
}

/// Configured period, falling back to the first and last observed dates.
pub fn period<'a, I>(cfg: &RunConfig, observed: I) -> Result<(NaiveDate, NaiveDate)>
where
    I: IntoIterator<Item = &'a NaiveDate>,
{
    let mut lo: Option<NaiveDate> = None;
    let mut hi: Option<NaiveDate> = None;
    for d in observed {
        lo = Some(lo.map_or(*d, |x: NaiveDate| x.min(*d)));
        hi = Some(hi.map_or(*d, |x: NaiveDate| x.max(*d)));
    }
    match (cfg.start.or(lo), cfg.end.or(hi)) {
        (Some(s), Some(e)) if s <= e => Ok((s, e)),
        (Some(s), Some(e)) => Err(CliError::input(format!("start date {s} is after end date {e}"))),
        _ => Err(CliError::runtime("no qualifying trajectories")),
    }
}

pub struct Reference {
    text: String,
    path: PathBuf,
}

impl Reference {
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let path = RunConfig::require(&cfg.input.reference, "reference")?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
        Ok(Self { text, path: path.to_owned() })
    }

    pub fn series(&self, country: &str) -> Result<Vec<ReferenceIndexSeries>> {
        parse_reference_indices(self.text.as_bytes(), country)
            .map_err(|e| CliError::input(format!("{}: {e}", self.path.display())))
    }
}

pub fn pick(series: &[ReferenceIndexSeries], index: IndexCategory) -> &ReferenceIndexSeries {
    series.iter().find(|s| s.index == index).expect("every category is returned")
}

/// Directory holding upstream outputs.
pub fn input_dir(cfg: &RunConfig, from: &Option<PathBuf>) -> PathBuf {
    from.clone().unwrap_or_else(|| cfg.output.clone())
}

/// Panels of the requested countries from stored trajectories.
pub fn panels_from(
    summaries: &[DailyTrajectorySummary],
    table: &RegionTable,
    countries: &[String],
    dates: &[NaiveDate],
) -> Result<Vec<CountryPanel>> {
    countries.iter().map(|c| CountryPanel::build(c, summaries, table, dates).map_err(CliError::input)).collect()
}

/// Countries present in trajectories, restricted to the configured list.
pub fn trajectory_countries(cfg: &RunConfig, summaries: &[DailyTrajectorySummary]) -> Vec<String> {
    if !cfg.countries.is_empty() {
        return cfg.countries.clone();
    }
    let set: BTreeSet<&str> = summaries.iter().map(|s| s.country_code.as_str()).collect();
    set.into_iter().map(str::to_owned).collect()
}
