use std::collections::HashMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{summarize, DailyTrajectorySummary, DeviceDay, EstimationParams, MetricsError};
use crate::exec;
use crate::ingest::RegionTable;

/// Per-trajectory daily values fed into regional means and the bootstrap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryValue {
    pub travelled_km: f64,
    pub stationary: bool,
}

/// Running sums over the trajectories of one stratum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StratumSums {
    pub travelled_km: f64,
    pub stationary: f64,
    pub count: usize,
}

impl StratumSums {
    pub fn push(&mut self, v: TrajectoryValue) {
        self.travelled_km += v.travelled_km;
        self.stationary += if v.stationary { 1.0 } else { 0.0 };
        self.count += 1;
    }

    pub fn absorb(&mut self, other: &StratumSums) {
        self.travelled_km += other.travelled_km;
        self.stationary += other.stationary;
        self.count += other.count;
    }

    pub fn from_values(values: &[TrajectoryValue]) -> Self {
        let mut s = Self::default();
        for &v in values {
            s.push(v);
        }
        s
    }

    pub fn mean_km(&self) -> f64 {
        self.travelled_km / self.count as f64
    }

    pub fn stationary_fraction(&self) -> f64 {
        self.stationary / self.count as f64
    }
}

/// Population-weighted combination of regional values.
///
/// `strata` holds `(population, mean_km, stationary_fraction)` of every
/// observed region; weights are renormalized over exactly these regions.
/// Results are clamped to the range of the regional inputs so rounding can
/// never push them outside it. `None` when the observed population is zero.
pub fn weighted_country_value(strata: &[(f64, f64, f64)]) -> Option<(f64, f64)> {
    let total: f64 = strata.iter().map(|s| s.0).sum();
    if strata.is_empty() || total <= 0.0 {
        return None;
    }
    let (mut m1, mut m2) = (0.0, 0.0);
    let (mut lo1, mut hi1, mut lo2, mut hi2) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(pop, km, frac) in strata {
        let w = pop / total;
        m1 += km * w;
        m2 += frac * w;
        lo1 = lo1.min(km);
        hi1 = hi1.max(km);
        lo2 = lo2.min(frac);
        hi2 = hi2.max(frac);
    }
    Some((m1.clamp(lo1, hi1), m2.clamp(lo2, hi2)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionalDailyAggregate {
    pub region_id: String,
    pub date: NaiveDate,
    pub mean_travelled_km: f64,
    pub stationary_fraction: f64,
    pub sample_size: usize,
}

/// Regional means for the summaries of one country-day, ordered by region
/// id. Within a region summaries are accumulated in device-id order.
pub fn regional_aggregate(summaries: &[DailyTrajectorySummary]) -> Vec<RegionalDailyAggregate> {
    let mut order: Vec<&DailyTrajectorySummary> = summaries.iter().collect();
    order.sort_by(|a, b| a.region_id.cmp(&b.region_id).then_with(|| a.device_id.cmp(&b.device_id)));
    let mut out: Vec<RegionalDailyAggregate> = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let region = &order[i].region_id;
        let mut sums = StratumSums::default();
        let mut j = i;
        while j < order.len() && &order[j].region_id == region {
            sums.push(TrajectoryValue { travelled_km: order[j].travelled_km, stationary: order[j].stationary });
            j += 1;
        }
        out.push(RegionalDailyAggregate {
            region_id: region.clone(),
            date: order[i].date,
            mean_travelled_km: sums.mean_km(),
            stationary_fraction: sums.stationary_fraction(),
            sample_size: sums.count,
        });
        i = j;
    }
    out
}

/// Country `(M1, M2)` from one day's regional aggregates; `None` when no
/// populated region was observed.
pub fn country_metric(aggregates: &[RegionalDailyAggregate], table: &RegionTable, country: &str) -> Option<(f64, f64)> {
    let strata: Vec<(f64, f64, f64)> = aggregates
        .iter()
        .filter(|a| a.sample_size > 0)
        .filter_map(|a| {
            let pop = table.country_regions(country).find(|r| r.region_id == a.region_id)?.population;
            Some((pop, a.mean_travelled_km, a.stationary_fraction))
        })
        .collect();
    weighted_country_value(&strata)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }
}

/// Daily country metrics. `None` metrics mark a day with no qualifying
/// trajectory in any populated region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryDailyMetric {
    pub country_code: String,
    /// 1-based position of `date` in the analysis period.
    pub day: usize,
    pub date: NaiveDate,
    pub m1_km: Option<f64>,
    pub m2_fraction: Option<f64>,
    pub sample_size: usize,
    pub m1_ci: Option<Interval>,
    pub m2_ci: Option<Interval>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionStratum {
    pub region_id: String,
    pub population: f64,
}

/// Trajectory values of one country laid out by day and region.
///
/// Regions are sorted by id and values within a cell by device id, which
/// fixes every reduction order downstream.
#[derive(Debug, Clone)]
pub struct CountryPanel {
    pub country_code: String,
    pub dates: Vec<NaiveDate>,
    pub regions: Vec<RegionStratum>,
    cells: Vec<Vec<Vec<TrajectoryValue>>>,
}

impl CountryPanel {
    pub fn build(
        country: &str,
        summaries: &[DailyTrajectorySummary],
        table: &RegionTable,
        dates: &[NaiveDate],
    ) -> Result<Self, MetricsError> {
        let mut regions: Vec<RegionStratum> = table
            .country_regions(country)
            .map(|r| RegionStratum { region_id: r.region_id.clone(), population: r.population })
            .collect();
        if regions.is_empty() {
            return Err(MetricsError::UnknownCountry(country.to_owned()));
        }
        if regions.iter().map(|r| r.population).sum::<f64>() <= 0.0 {
            return Err(MetricsError::ZeroPopulation(country.to_owned()));
        }
        regions.sort_by(|a, b| a.region_id.cmp(&b.region_id));
        let region_index: HashMap<&str, usize> =
            regions.iter().enumerate().map(|(i, r)| (r.region_id.as_str(), i)).collect();
        let day_index: HashMap<NaiveDate, usize> = dates.iter().enumerate().map(|(i, d)| (*d, i)).collect();

        let mut selected: Vec<&DailyTrajectorySummary> =
            summaries.iter().filter(|s| s.country_code == country).collect();
        selected.sort_by(|a, b| a.device_id.cmp(&b.device_id));
        let mut cells = vec![vec![Vec::new(); regions.len()]; dates.len()];
        for s in selected {
            if let (Some(&d), Some(&r)) = (day_index.get(&s.date), region_index.get(s.region_id.as_str())) {
                cells[d][r].push(TrajectoryValue { travelled_km: s.travelled_km, stationary: s.stationary });
            }
        }
        Ok(Self { country_code: country.to_owned(), dates: dates.to_vec(), regions, cells })
    }

    pub fn day_count(&self) -> usize {
        self.dates.len()
    }

    pub fn population(&self) -> f64 {
        self.regions.iter().map(|r| r.population).sum()
    }

    /// Trajectory values of region `region` on day index `day` (0-based).
    pub fn cell(&self, day: usize, region: usize) -> &[TrajectoryValue] {
        &self.cells[day][region]
    }

    pub fn stratum_sums(&self, day: usize, region: usize) -> StratumSums {
        StratumSums::from_values(self.cell(day, region))
    }

    pub fn sample_size(&self, day: usize) -> usize {
        self.cells[day].iter().map(Vec::len).sum()
    }

    pub fn sample_sizes(&self) -> Vec<usize> {
        (0..self.day_count()).map(|d| self.sample_size(d)).collect()
    }

    pub fn regional_aggregates(&self, day: usize) -> Vec<RegionalDailyAggregate> {
        self.regions
            .iter()
            .enumerate()
            .filter_map(|(r, region)| {
                let sums = self.stratum_sums(day, r);
                (sums.count > 0).then(|| RegionalDailyAggregate {
                    region_id: region.region_id.clone(),
                    date: self.dates[day],
                    mean_travelled_km: sums.mean_km(),
                    stationary_fraction: sums.stationary_fraction(),
                    sample_size: sums.count,
                })
            })
            .collect()
    }

    /// Combines per-region sums with this country's population weights.
    pub fn combine(&self, sums: &[StratumSums]) -> Option<(f64, f64)> {
        let strata: Vec<(f64, f64, f64)> = sums
            .iter()
            .zip(&self.regions)
            .filter(|(s, _)| s.count > 0)
            .map(|(s, r)| (r.population, s.mean_km(), s.stationary_fraction()))
            .collect();
        weighted_country_value(&strata)
    }

    /// Point estimates for every day of the period, without intervals.
    pub fn daily_metrics(&self) -> Vec<CountryDailyMetric> {
        (0..self.day_count())
            .map(|d| {
                let sums: Vec<StratumSums> = (0..self.regions.len()).map(|r| self.stratum_sums(d, r)).collect();
                let value = self.combine(&sums);
                CountryDailyMetric {
                    country_code: self.country_code.clone(),
                    day: d + 1,
                    date: self.dates[d],
                    m1_km: value.map(|v| v.0),
                    m2_fraction: value.map(|v| v.1),
                    sample_size: self.sample_size(d),
                    m1_ci: None,
                    m2_ci: None,
                }
            })
            .collect()
    }
}

/// Summarizes prepared device-days under `params` and lays them out per
/// country over `dates`.
pub fn build_panels(
    days: &[DeviceDay],
    table: &RegionTable,
    params: &EstimationParams,
    countries: &[String],
    dates: &[NaiveDate],
) -> Result<Vec<CountryPanel>, MetricsError> {
    params.validate()?;
    if dates.is_empty() {
        return Err(MetricsError::EmptyPeriod);
    }
    let summaries = summarize(days, table, params);
    exec::map(countries, |c| CountryPanel::build(c, &summaries, table, dates)).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::GeoPoint;
    use crate::ingest::{Polygon, Region};

    fn summary(dev: &str, region: &str, km: f64, stationary: bool) -> DailyTrajectorySummary {
        DailyTrajectorySummary {
            device_id: dev.into(),
            date: NaiveDate::from_ymd_opt(2020, 3, 11).unwrap(),
            country_code: "AAA".into(),
            region_id: region.into(),
            travelled_km: km,
            stationary,
            mean_coordinate: GeoPoint::new(0.0, 0.0),
            observation_count: 12,
        }
    }

    fn table(pops: &[(&str, f64)]) -> RegionTable {
        RegionTable::new(
            pops.iter()
                .enumerate()
                .map(|(i, (id, p))| Region {
                    region_id: id.to_string(),
                    country_code: "AAA".into(),
                    population: *p,
                    polygons: vec![Polygon::rectangle(i as f64, 0.0, i as f64 + 1.0, 1.0).unwrap()],
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn singleton_and_pair_means() {
        let agg = regional_aggregate(&[summary("a", "A", 10.0, false)]);
        assert_eq!(agg.len(), 1);
        assert_eq!((agg[0].mean_travelled_km, agg[0].sample_size), (10.0, 1));

        let agg = regional_aggregate(&[summary("a", "A", 2.0, false), summary("b", "A", 4.0, false)]);
        assert_eq!((agg[0].mean_travelled_km, agg[0].sample_size), (3.0, 2));
    }

    #[test]
    fn stationary_fraction_is_mean_of_flags() {
        let s = [
            summary("a", "A", 0.0, true),
            summary("b", "A", 1.0, false),
            summary("c", "A", 1.0, false),
            summary("d", "A", 0.1, true),
        ];
        assert_eq!(regional_aggregate(&s)[0].stationary_fraction, 0.5);
    }

    #[test]
    fn population_weighting() {
        let t = table(&[("A", 1e6), ("B", 3e6)]);
        let agg = regional_aggregate(&[summary("a", "A", 10.0, false), summary("b", "B", 20.0, false)]);
        let (m1, m2) = country_metric(&agg, &t, "AAA").unwrap();
        assert_eq!(m1, 17.5);
        assert_eq!(m2, 0.0);
    }

    #[test]
    fn single_region_gets_full_weight() {
        let t = table(&[("A", 1e6), ("B", 3e6)]);
        let agg = regional_aggregate(&[summary("a", "B", 7.25, true)]);
        assert_eq!(country_metric(&agg, &t, "AAA"), Some((7.25, 1.0)));
    }

    #[test]
    fn constant_fraction_is_preserved() {
        let strata = [(123.0, 1.0, 0.3), (4567.0, 2.0, 0.3), (89.0, 3.0, 0.3)];
        assert_eq!(weighted_country_value(&strata).unwrap().1, 0.3);
    }

    #[test]
    fn no_observed_region_is_missing() {
        let t = table(&[("A", 1e6)]);
        assert_eq!(country_metric(&[], &t, "AAA"), None);
        assert_eq!(weighted_country_value(&[(0.0, 1.0, 1.0)]), None);
    }

    #[test]
    fn panel_matches_direct_aggregation() {
        let t = table(&[("A", 1e6), ("B", 3e6)]);
        let d0 = NaiveDate::from_ymd_opt(2020, 3, 11).unwrap();
        let summaries =
            vec![summary("c", "A", 1.5, false), summary("a", "B", 0.1, true), summary("b", "A", 0.3, false)];
        let panel = CountryPanel::build("AAA", &summaries, &t, &[d0, d0.succ_opt().unwrap()]).unwrap();
        let metrics = panel.daily_metrics();
        assert_eq!(metrics.len(), 2);
        let direct = country_metric(&regional_aggregate(&summaries), &t, "AAA").unwrap();
        assert_eq!((metrics[0].m1_km.unwrap(), metrics[0].m2_fraction.unwrap()), direct);
        assert_eq!(metrics[0].sample_size, 3);
        assert_eq!(metrics[1].m1_km, None);
        assert_eq!(metrics[1].sample_size, 0);
        assert_eq!(panel.regional_aggregates(0), regional_aggregate(&summaries));
    }

    #[test]
    fn zero_population_country_is_rejected() {
        let t = table(&[("A", 0.0)]);
        let d0 = NaiveDate::from_ymd_opt(2020, 3, 11).unwrap();
        assert_eq!(CountryPanel::build("AAA", &[], &t, &[d0]).unwrap_err(), MetricsError::ZeroPopulation("AAA".into()));
        assert_eq!(CountryPanel::build("BBB", &[], &t, &[d0]).unwrap_err(), MetricsError::UnknownCountry("BBB".into()));
    }
}
