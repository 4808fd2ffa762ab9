//! Stratified percentile bootstrap for daily and smoothed country metrics.
//!
//! Each replicate redraws, with replacement, the same number of trajectories
//! from every (day, region) cell of the window, pools them per region and
//! recombines with the population weights.
//!
//! Every replicate owns an RNG seeded from `(seed, country, day, q,
//! iteration)`, so intervals do not depend on how replicates are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exec;
use crate::metrics::{CountryDailyMetric, CountryPanel, Interval, StratumSums, TrajectoryValue};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum BootstrapError {
    #[error("invalid bootstrap configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    pub iterations: usize,
    /// Two-sided miss rate in percent; 5 gives 95% intervals.
    pub alpha: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { iterations: 1000, alpha: 5.0, seed: 0 }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<(), BootstrapError> {
        if self.iterations < 1 {
            return Err(BootstrapError::InvalidConfig("iterations must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 100.0) {
            return Err(BootstrapError::InvalidConfig(format!("alpha must be in (0, 100), got {}", self.alpha)));
        }
        Ok(())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Seed of the RNG driving one replicate.
pub fn substream_seed(seed: u64, country: &str, day: usize, q: usize, iteration: usize) -> u64 {
    [fnv1a(country.as_bytes()), day as u64, q as u64, iteration as u64]
        .iter()
        .fold(splitmix64(seed), |acc, &part| splitmix64(acc ^ part))
}

/// Linear-interpolation empirical quantile of sorted data, `p` in [0, 1].
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Bootstrap replicates of `(M1, M2)` for day index `day` (0-based) under a
/// `q`-day window. Empty when the window is incomplete or holds no data.
pub fn bootstrap_replicates(
    panel: &CountryPanel,
    day: usize,
    q: usize,
    config: &BootstrapConfig,
) -> Result<Vec<(f64, f64)>, BootstrapError> {
    config.validate()?;
    if q == 0 || day + 1 < q {
        return Ok(Vec::new());
    }
    let first = day + 1 - q;
    // Non-empty cells of the window, grouped by region.
    let strata: Vec<Vec<&[TrajectoryValue]>> = (0..panel.regions.len())
        .map(|r| (first..=day).map(|s| panel.cell(s, r)).filter(|c| !c.is_empty()).collect())
        .collect();
    if strata.iter().all(Vec::is_empty) {
        return Ok(Vec::new());
    }

    let replicates = exec::map_range(config.iterations, |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(config.seed, &panel.country_code, day + 1, q, b));
        let sums: Vec<StratumSums> = strata
            .iter()
            .map(|cells| {
                let mut pooled = StratumSums::default();
                for cell in cells {
                    for _ in 0..cell.len() {
                        pooled.push(cell[rng.random_range(0..cell.len())]);
                    }
                }
                pooled
            })
            .collect();
        panel.combine(&sums)
    });
    Ok(replicates.into_iter().flatten().collect())
}

/// Percentile intervals `(M1, M2)` for one day, `None` when the metric
/// itself is missing.
pub fn bootstrap_ci(
    panel: &CountryPanel,
    day: usize,
    q: usize,
    config: &BootstrapConfig,
) -> Result<Option<(Interval, Interval)>, BootstrapError> {
    let replicates = bootstrap_replicates(panel, day, q, config)?;
    if replicates.is_empty() {
        return Ok(None);
    }
    let mut m1: Vec<f64> = replicates.iter().map(|r| r.0).collect();
    let mut m2: Vec<f64> = replicates.iter().map(|r| r.1).collect();
    m1.sort_by(f64::total_cmp);
    m2.sort_by(f64::total_cmp);
    let (lo, hi) = (config.alpha / 200.0, 1.0 - config.alpha / 200.0);
    let interval = |v: &[f64]| Interval { low: quantile_sorted(v, lo), high: quantile_sorted(v, hi) };
    Ok(Some((interval(&m1), interval(&m2))))
}

/// Fills the interval fields of a daily (`q = 1`) or smoothed series.
pub fn annotate(
    metrics: &mut [CountryDailyMetric],
    panel: &CountryPanel,
    q: usize,
    config: &BootstrapConfig,
) -> Result<(), BootstrapError> {
    config.validate()?;
    let cis = exec::map_range(metrics.len(), |i| bootstrap_ci(panel, metrics[i].day - 1, q, config));
    for (m, ci) in metrics.iter_mut().zip(cis) {
        if let Some((a, b)) = ci? {
            m.m1_ci = Some(a);
            m.m2_ci = Some(b);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::GeoPoint;
    use crate::ingest::{Polygon, Region, RegionTable};
    use crate::metrics::DailyTrajectorySummary;
    use crate::smoothing::smooth;
    use chrono::NaiveDate;

    fn table() -> RegionTable {
        RegionTable::new(
            ["A", "B"]
                .iter()
                .enumerate()
                .map(|(i, id)| Region {
                    region_id: id.to_string(),
                    country_code: "AAA".into(),
                    population: (i + 1) as f64,
                    polygons: vec![Polygon::rectangle(i as f64, 0.0, i as f64 + 1.0, 1.0).unwrap()],
                })
                .collect(),
        )
        .unwrap()
    }

    fn panel_from(values: &[(usize, &str, f64)], days: usize) -> CountryPanel {
        let d0 = NaiveDate::from_ymd_opt(2020, 3, 11).unwrap();
        let dates: Vec<NaiveDate> = d0.iter_days().take(days).collect();
        let summaries: Vec<DailyTrajectorySummary> = values
            .iter()
            .enumerate()
            .map(|(k, &(day, region, km))| DailyTrajectorySummary {
                device_id: format!("dev{k:04}"),
                date: dates[day],
                country_code: "AAA".into(),
                region_id: region.into(),
                travelled_km: km,
                stationary: km < 0.2,
                mean_coordinate: GeoPoint::new(0.5, 0.5),
                observation_count: 12,
            })
            .collect();
        CountryPanel::build("AAA", &summaries, &table(), &dates).unwrap()
    }

    #[test]
    fn constant_values_give_degenerate_interval() {
        let values: Vec<_> = (0..20).map(|k| (0, if k % 2 == 0 { "A" } else { "B" }, 4.5)).collect();
        let panel = panel_from(&values, 1);
        let (m1, m2) =
            bootstrap_ci(&panel, 0, 1, &BootstrapConfig { iterations: 200, ..Default::default() }).unwrap().unwrap();
        assert_eq!((m1.low, m1.high), (4.5, 4.5));
        assert_eq!((m2.low, m2.high), (0.0, 0.0));
    }

    #[test]
    fn same_seed_same_interval() {
        let values: Vec<_> = (0..40).map(|k| (k % 3, if k % 4 == 0 { "A" } else { "B" }, k as f64 * 0.3)).collect();
        let panel = panel_from(&values, 3);
        let cfg = BootstrapConfig { iterations: 300, alpha: 5.0, seed: 42 };
        let a = bootstrap_ci(&panel, 2, 3, &cfg).unwrap();
        let b = bootstrap_ci(&panel, 2, 3, &cfg).unwrap();
        assert_eq!(a, b);
        let seq = exec::sequential(|| bootstrap_ci(&panel, 2, 3, &cfg).unwrap());
        assert_eq!(a, seq);
        let other = bootstrap_ci(&panel, 2, 3, &BootstrapConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn interval_brackets_estimate() {
        let values: Vec<_> =
            (0..200).map(|k| (k % 4, if k % 3 == 0 { "A" } else { "B" }, ((k * 37) % 11) as f64)).collect();
        let panel = panel_from(&values, 4);
        let cfg = BootstrapConfig { iterations: 500, alpha: 5.0, seed: 7 };
        let mut daily = panel.daily_metrics();
        annotate(&mut daily, &panel, 1, &cfg).unwrap();
        let mut smoothed = smooth(&panel, 2).unwrap().metrics;
        annotate(&mut smoothed, &panel, 2, &cfg).unwrap();
        assert!(smoothed[0].m1_ci.is_none());
        for m in daily.iter().chain(&smoothed[1..]) {
            let ci = m.m1_ci.unwrap();
            assert!(ci.low <= ci.high);
            assert!(ci.contains(m.m1_km.unwrap()), "{m:?}");
        }
        // Pooling two days narrows the interval relative to either day.
        let w_smooth = smoothed[1].m1_ci.unwrap().width();
        assert!(w_smooth < daily[0].m1_ci.unwrap().width().max(daily[1].m1_ci.unwrap().width()));
    }

    #[test]
    fn replicates_respect_strata_sizes() {
        // Region A holds only zeros, region B only ones; any replicate that kept
        // the strata sizes reproduces the point estimate exactly.
        let mut values: Vec<_> = (0..5).map(|_| (0, "A", 0.0)).collect();
        values.extend((0..7).map(|_| (0, "B", 1.0)));
        let panel = panel_from(&values, 1);
        let reps =
            bootstrap_replicates(&panel, 0, 1, &BootstrapConfig { iterations: 50, ..Default::default() }).unwrap();
        let point = panel.daily_metrics()[0].m1_km.unwrap();
        assert!(reps.iter().all(|r| r.0 == point));
    }

    #[test]
    fn invalid_config() {
        let panel = panel_from(&[(0, "A", 1.0)], 1);
        for cfg in [
            BootstrapConfig { iterations: 0, ..Default::default() },
            BootstrapConfig { alpha: 0.0, ..Default::default() },
            BootstrapConfig { alpha: 100.0, ..Default::default() },
        ] {
            assert!(bootstrap_ci(&panel, 0, 1, &cfg).is_err());
        }
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 5.0);
        assert_eq!(quantile_sorted(&v, 0.5), 3.0);
        assert_eq!(quantile_sorted(&v, 0.125), 1.5);
    }
}
