//! Synthetic worlds with known ground truth.
//!
//! Agents live at a home point inside a rectangular region and on each day
//! either stay home or make one round trip to a destination at a log-normal
//! distance. Observation times fall on a 20-minute grid so the generated
//! files already satisfy the minimum-spacing rule. Ground truth is computed
//! from the true positions at the observation times, without noise and
//! without gating.

mod experiment;

pub use experiment::{log_spaced_fractions, penetration_experiment, PenetrationExperiment, PenetrationPoint};

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Weekday};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::exec;
use crate::geodesy::{daily_mean_coordinate, destination_point, geodesic_distance_km, GeoPoint, EARTH_RADIUS_KM};
use crate::ingest::{
    write_observations, write_reference_indices, IngestError, ObservationRecord, Polygon, ReferenceRow, Region,
    RegionTable,
};
use crate::metrics::{EstimationParams, MetricsError};
use crate::uncertainty::substream_seed;

/// Observation slots per day on the 20-minute grid.
pub const SLOTS_PER_DAY: usize = 72;
const SLOT_SECONDS: i64 = 20 * 60;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("infeasible configuration: {0}")]
    Infeasible(String),
    #[error("subsample fraction must be in (0, 1], got {0}")]
    BadFraction(f64),
    #[error("subsample is empty")]
    EmptySubset,
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectRegion {
    pub id: String,
    pub lon_min: f64,
    pub lat_min: f64,
    pub lon_max: f64,
    pub lat_max: f64,
    pub population: f64,
}

/// A per-day quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DailyProfile {
    Constant(f64),
    /// Explicit values; days past the end reuse the last value.
    Values(Vec<f64>),
    /// `baseline + amplitude * exp(-day / decay_days)`, plus `weekend` on
    /// Saturdays and Sundays.
    Trend {
        baseline: f64,
        amplitude: f64,
        decay_days: f64,
        weekend: f64,
    },
}

impl DailyProfile {
    pub fn value(&self, day: usize, date: NaiveDate) -> f64 {
        match self {
            Self::Constant(v) => *v,
            Self::Values(vs) => vs.get(day).or(vs.last()).copied().unwrap_or(f64::NAN),
            Self::Trend { baseline, amplitude, decay_days, weekend } => {
                let wk = matches!(date.weekday(), Weekday::Sat | Weekday::Sun);
                baseline + amplitude * (-(day as f64) / decay_days).exp() + if wk { *weekend } else { 0.0 }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JitterMode {
    /// Reported coordinates equal the true ones.
    None,
    /// Fresh bivariate normal error for every record.
    PerRecord,
    /// One error draw per stay at a location, reused by every record of the
    /// stay, as a device does when it keeps returning a cached fix.
    PerStay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticWorldConfig {
    pub country_code: String,
    pub country_name: String,
    pub start_date: NaiveDate,
    pub days: usize,
    pub regions: Vec<RectRegion>,
    pub n_agents: usize,
    pub stay_probability: DailyProfile,
    pub travel_median_km: DailyProfile,
    pub travel_sigma: f64,
    /// Inclusive range of observations per agent-day.
    pub observations_per_day: [usize; 2],
    pub uncertainty_choices_m: Vec<f64>,
    pub jitter: JitterMode,
    /// Qualification rule applied when computing ground truth.
    pub truth_params: EstimationParams,
    /// Standard deviation of the noise added to the reference indices.
    pub reference_noise: f64,
    pub seed: u64,
}

impl Default for SyntheticWorldConfig {
    fn default() -> Self {
        let rect = |id: &str, lon: f64, lat: f64, population: f64| RectRegion {
            id: id.into(),
            lon_min: lon,
            lat_min: lat,
            lon_max: lon + 1.0,
            lat_max: lat + 1.0,
            population,
        };
        Self {
            country_code: "SYN".into(),
            country_name: "Synthetia".into(),
            start_date: NaiveDate::from_ymd_opt(2020, 3, 11).expect("valid date"),
            days: 60,
            regions: vec![
                rect("R01", 10.0, 40.0, 400_000.0),
                rect("R02", 11.0, 40.0, 250_000.0),
                rect("R03", 10.0, 41.0, 200_000.0),
                rect("R04", 11.0, 41.0, 150_000.0),
            ],
            n_agents: 500,
            stay_probability: DailyProfile::Trend { baseline: 0.25, amplitude: 0.45, decay_days: 25.0, weekend: 0.1 },
            travel_median_km: DailyProfile::Trend { baseline: 8.0, amplitude: -4.0, decay_days: 25.0, weekend: -1.0 },
            travel_sigma: 0.8,
            observations_per_day: [12, 24],
            uncertainty_choices_m: vec![10.0, 25.0, 50.0],
            jitter: JitterMode::PerStay,
            truth_params: EstimationParams::default(),
            reference_noise: 2.0,
            seed: 1,
        }
    }
}

impl SyntheticWorldConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Infeasible(m));
        let [lo, hi] = self.observations_per_day;
        if lo < 1 || lo > hi {
            return bad(format!("observations_per_day range [{lo}, {hi}] is empty"));
        }
        if hi > SLOTS_PER_DAY {
            return bad(format!(
                "{hi} observations per day cannot respect 20-minute spacing (at most {SLOTS_PER_DAY})"
            ));
        }
        if self.days == 0 || self.n_agents == 0 || self.regions.is_empty() {
            return bad("world needs at least one day, agent and region".into());
        }
        if self.regions.iter().map(|r| r.population).sum::<f64>() <= 0.0 {
            return bad("total population is zero".into());
        }
        if self.uncertainty_choices_m.is_empty() || self.uncertainty_choices_m.iter().any(|u| !(*u > 0.0)) {
            return bad("uncertainty choices must be positive".into());
        }
        if !(self.travel_sigma >= 0.0 && self.travel_sigma.is_finite()) {
            return bad("travel_sigma must be finite and non-negative".into());
        }
        for (d, date) in self.dates().into_iter().enumerate() {
            let p = self.stay_probability.value(d, date);
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("stay probability {p} on day {} is not a probability", d + 1));
            }
            let m = self.travel_median_km.value(d, date);
            if !(m > 0.0 && m.is_finite()) {
                return bad(format!("travel median {m} on day {} must be positive", d + 1));
            }
        }
        Ok(())
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.start_date.iter_days().take(self.days).collect()
    }

    pub fn region_table(&self) -> Result<RegionTable, SynthError> {
        let regions = self
            .regions
            .iter()
            .map(|r| {
                let polygon = Polygon::rectangle(r.lon_min, r.lat_min, r.lon_max, r.lat_max)
                    .map_err(|reason| IngestError::InvalidRegion { region_id: r.id.clone(), reason })?;
                Ok(Region {
                    region_id: r.id.clone(),
                    country_code: self.country_code.clone(),
                    population: r.population,
                    polygons: vec![polygon],
                })
            })
            .collect::<Result<Vec<_>, IngestError>>()?;
        Ok(RegionTable::new(regions)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub country_code: String,
    pub day: usize,
    pub date: NaiveDate,
    pub m1_true: Option<f64>,
    pub m2_true: Option<f64>,
    pub agents_moving: usize,
}

#[derive(Debug, Clone)]
pub struct SyntheticBundle {
    pub records: Vec<ObservationRecord>,
    pub regions: RegionTable,
    pub truth: Vec<TruthRow>,
    pub reference: Vec<ReferenceRow>,
}

impl SyntheticBundle {
    /// Writes `observations.csv`, `regions.geojson`, `truth.csv` and
    /// `reference.csv` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<(), SynthError> {
        std::fs::create_dir_all(dir)?;
        write_observations(BufWriter::new(File::create(dir.join("observations.csv"))?), &self.records)?;
        std::fs::write(dir.join("regions.geojson"), self.regions.to_geojson())?;
        write_truth(BufWriter::new(File::create(dir.join("truth.csv"))?), &self.truth)?;
        write_reference_indices(BufWriter::new(File::create(dir.join("reference.csv"))?), &self.reference)?;
        Ok(())
    }
}

pub fn write_truth<W: Write>(writer: W, truth: &[TruthRow]) -> Result<(), SynthError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["country", "day", "M1_true", "M2_true", "N_agents_moving"]).map_err(IngestError::from)?;
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for t in truth {
        w.write_record([
            t.country_code.clone(),
            t.day.to_string(),
            cell(t.m1_true),
            cell(t.m2_true),
            t.agents_moving.to_string(),
        ])
        .map_err(IngestError::from)?;
    }
    w.flush()?;
    Ok(())
}

pub fn agent_id(index: usize) -> String {
    format!("agent{index:06}")
}

/// Offsets a point by independent north and east normal errors of `sigma_m`.
fn jittered(p: GeoPoint, sigma_m: f64, rng: &mut ChaCha8Rng) -> GeoPoint {
    let normal = Normal::new(0.0, sigma_m).expect("finite sigma");
    let metres_per_degree = EARTH_RADIUS_KM * 1000.0 * std::f64::consts::PI / 180.0;
    let north: f64 = normal.sample(rng);
    let east: f64 = normal.sample(rng);
    let lat = (p.lat + north / metres_per_degree).clamp(-90.0, 90.0);
    let lon = p.lon + east / (metres_per_degree * p.lat.to_radians().cos().max(1e-6));
    GeoPoint::new(lat, crate::geodesy::normalize_lon(lon))
}

fn observation_slots(count: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut first = rng.random_range(0..=8);
    let mut last = rng.random_range(63..SLOTS_PER_DAY);
    if count == 1 {
        return vec![first];
    }
    if count - 2 > last - first - 1 {
        first = 0;
        last = SLOTS_PER_DAY - 1;
    }
    let mut slots: Vec<usize> =
        index::sample(rng, last - first - 1, count - 2).into_iter().map(|i| first + 1 + i).collect();
    slots.push(first);
    slots.push(last);
    slots.sort_unstable();
    slots
}

/// True positions at the observation times of one agent, plus generated
/// records and per-day trip flags.
struct AgentTrace {
    records: Vec<ObservationRecord>,
    true_positions: Vec<GeoPoint>,
    moved: Vec<bool>,
}

fn simulate_agent(cfg: &SyntheticWorldConfig, dates: &[NaiveDate], weights: &[f64], agent: usize) -> AgentTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(cfg.seed, "agent", agent, 0, 0));
    let total: f64 = weights.iter().sum();
    let mut pick = rng.random::<f64>() * total;
    let mut region = weights.len() - 1;
    for (i, w) in weights.iter().enumerate() {
        if pick < *w {
            region = i;
            break;
        }
        pick -= w;
    }
    let r = &cfg.regions[region];
    let (w, h) = (r.lon_max - r.lon_min, r.lat_max - r.lat_min);
    let home = GeoPoint::new(r.lat_min + h * rng.random_range(0.1..0.9), r.lon_min + w * rng.random_range(0.1..0.9));
    let offset = rng.random_range(0..SLOT_SECONDS);
    let id = agent_id(agent);
    let choose_u =
        |rng: &mut ChaCha8Rng| cfg.uncertainty_choices_m[rng.random_range(0..cfg.uncertainty_choices_m.len())];

    let mut trace = AgentTrace { records: Vec::new(), true_positions: Vec::new(), moved: Vec::new() };
    // Current cached fix for per-stay jitter: (at destination, reported point, uncertainty).
    let mut fix: Option<(bool, GeoPoint, f64)> = None;
    for (d, &date) in dates.iter().enumerate() {
        let [lo, hi] = cfg.observations_per_day;
        let count = rng.random_range(lo..=hi);
        let slots = observation_slots(count, &mut rng);
        let trip = if rng.random::<f64>() < cfg.stay_probability.value(d, date) {
            None
        } else {
            let leave = rng.random_range(6 * 3600..11 * 3600);
            let back = rng.random_range(14 * 3600..21 * 3600);
            let median = cfg.travel_median_km.value(d, date);
            let dist: f64 = LogNormal::new(median.ln(), cfg.travel_sigma).expect("log-normal").sample(&mut rng);
            let dest = destination_point(home, rng.random_range(0.0..360.0), dist);
            Some((leave, back, dest))
        };
        trace.moved.push(trip.is_some());
        let midnight = NaiveDateTime::from(date);
        for slot in slots {
            let secs = slot as i64 * SLOT_SECONDS + offset;
            let at_dest = trip.is_some_and(|(leave, back, _)| leave <= secs && secs < back);
            let truth = if at_dest { trip.expect("trip").2 } else { home };
            let (reported, u) = match cfg.jitter {
                JitterMode::None => (truth, choose_u(&mut rng)),
                JitterMode::PerRecord => {
                    let u = choose_u(&mut rng);
                    (jittered(truth, u, &mut rng), u)
                }
                JitterMode::PerStay => match fix {
                    Some((dest_flag, p, u)) if dest_flag == at_dest => (p, u),
                    _ => {
                        let u = choose_u(&mut rng);
                        let p = jittered(truth, u, &mut rng);
                        fix = Some((at_dest, p, u));
                        (p, u)
                    }
                },
            };
            trace.records.push(ObservationRecord {
                device_id: id.clone(),
                lat: reported.lat,
                lon: reported.lon,
                uncertainty_m: u,
                timestamp: midnight + Duration::seconds(secs),
            });
            trace.true_positions.push(truth);
        }
    }
    trace
}

/// Truth contributions `(day, region, travelled_km)` of one agent.
fn agent_truth(
    trace: &AgentTrace,
    dates: &[NaiveDate],
    table: &RegionTable,
    params: &EstimationParams,
) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    let recs = &trace.records;
    let mut start = 0;
    while start < recs.len() {
        let date = recs[start].timestamp.date();
        let mut end = start;
        while end < recs.len() && recs[end].timestamp.date() == date {
            end += 1;
        }
        let count = end - start;
        let span = (recs[end - 1].timestamp - recs[start].timestamp).num_seconds() as f64;
        if count >= params.min_observations && span >= params.min_span_hours * 3600.0 {
            let mut km = 0.0;
            let last =
                if end < recs.len() && date.succ_opt() == Some(recs[end].timestamp.date()) { end } else { end - 1 };
            for i in start..last {
                km += geodesic_distance_km(trace.true_positions[i], trace.true_positions[i + 1]);
            }
            let mean = daily_mean_coordinate(&trace.true_positions[start..end]);
            if let (Some(region), Some(day)) = (table.assign_index(mean), dates.iter().position(|d| *d == date)) {
                out.push((day, region, km));
            }
        }
        start = end;
    }
    out
}

/// Generates a world. Records are ordered by agent, then time.
pub fn generate(cfg: &SyntheticWorldConfig) -> Result<SyntheticBundle, SynthError> {
    cfg.validate()?;
    let table = cfg.region_table()?;
    let dates = cfg.dates();
    let weights: Vec<f64> = cfg.regions.iter().map(|r| r.population).collect();
    let params = cfg.truth_params;

    let agents = exec::map_range(cfg.n_agents, |a| {
        let trace = simulate_agent(cfg, &dates, &weights, a);
        let truth = agent_truth(&trace, &dates, &table, &params);
        (trace.records, trace.moved, truth)
    });

    // (day, region) -> (sum km, stationary count, n)
    let mut cells: BTreeMap<(usize, usize), (f64, f64, usize)> = BTreeMap::new();
    let mut moving = vec![0usize; dates.len()];
    let mut records = Vec::new();
    for (recs, moved, truth) in agents {
        records.extend(recs);
        for (d, m) in moved.iter().enumerate() {
            moving[d] += usize::from(*m);
        }
        for (day, region, km) in truth {
            let cell = cells.entry((day, region)).or_default();
            cell.0 += km;
            cell.1 += if km < params.stationary_threshold_km { 1.0 } else { 0.0 };
            cell.2 += 1;
        }
    }

    let truth: Vec<TruthRow> = dates
        .iter()
        .enumerate()
        .map(|(d, &date)| {
            let observed: Vec<(f64, f64, f64)> = cells
                .range((d, 0)..(d + 1, 0))
                .map(|(&(_, r), &(km, st, n))| (table.get(r).population, km / n as f64, st / n as f64))
                .collect();
            let total: f64 = observed.iter().map(|o| o.0).sum();
            let value = (total > 0.0).then(|| {
                observed.iter().fold((0.0, 0.0), |acc, o| (acc.0 + o.1 * o.0 / total, acc.1 + o.2 * o.0 / total))
            });
            TruthRow {
                country_code: cfg.country_code.clone(),
                day: d + 1,
                date,
                m1_true: value.map(|v| v.0),
                m2_true: value.map(|v| v.1),
                agents_moving: moving[d],
            }
        })
        .collect();
    let reference = reference_rows(cfg, &truth);
    Ok(SyntheticBundle { records, regions: table, truth, reference })
}

/// Reference indices linear in the true metrics: transit tracks M1, the
/// residential index rises and the workplaces index falls with M2.
fn reference_rows(cfg: &SyntheticWorldConfig, truth: &[TruthRow]) -> Vec<ReferenceRow> {
    let baseline = |f: fn(&TruthRow) -> Option<f64>| {
        let vals: Vec<f64> = truth.iter().filter_map(f).take(7).collect();
        if vals.is_empty() {
            0.0
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    };
    let (b1, b2) = (baseline(|t| t.m1_true), baseline(|t| t.m2_true));
    let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(cfg.seed, "reference", 0, 0, 0));
    let noise = Normal::new(0.0, cfg.reference_noise.max(0.0)).expect("noise sd");
    truth
        .iter()
        .map(|t| {
            let mut draw = || noise.sample(&mut rng);
            let transit = t.m1_true.filter(|_| b1 > 0.0).map(|m| (100.0 * (m / b1 - 1.0) + draw()).round());
            let residential = t.m2_true.map(|m| (40.0 * (m - b2) + draw()).round());
            let workplaces = t.m2_true.map(|m| (-80.0 * (m - b2) + draw()).round());
            ReferenceRow {
                country_code: cfg.country_code.clone(),
                country_name: cfg.country_name.clone(),
                date: t.date,
                transit_stations: transit,
                workplaces,
                residential,
            }
        })
        .collect()
}

/// Uniform sample without replacement of `round(fraction * devices)` device
/// ids from the distinct ids in `ids`.
pub fn sample_devices<'a, I>(ids: I, fraction: f64, seed: u64) -> Result<HashSet<String>, SynthError>
where
    I: IntoIterator<Item = &'a str>,
{
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(SynthError::BadFraction(fraction));
    }
    let mut distinct: Vec<&str> = ids.into_iter().collect();
    distinct.sort_unstable();
    distinct.dedup();
    let k = (fraction * distinct.len() as f64).round() as usize;
    if k == 0 {
        return Err(SynthError::EmptySubset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(seed, "subsample", 0, 0, 0));
    Ok(index::sample(&mut rng, distinct.len(), k).into_iter().map(|i| distinct[i].to_owned()).collect())
}

/// Keeps every record of a uniformly sampled subset of devices.
pub fn subsample_penetration(
    records: &[ObservationRecord],
    fraction: f64,
    seed: u64,
) -> Result<Vec<ObservationRecord>, SynthError> {
    let keep = sample_devices(records.iter().map(|r| r.device_id.as_str()), fraction, seed)?;
    Ok(records.iter().filter(|r| keep.contains(&r.device_id)).cloned().collect())
}
