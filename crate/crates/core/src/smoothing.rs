//! Trailing q-day moving averages pooled over the underlying trajectories.
//!
//! A regional smoothed value is the mean of every trajectory value in the
//! window, i.e. daily regional means weighted by their sample sizes. Country
//! values then reuse the population weighting of the daily metrics.

use crate::metrics::{CountryDailyMetric, CountryPanel, StratumSums};

/// Smoothing windows produced by default, in days.
pub const DEFAULT_WINDOWS: [usize; 4] = [7, 14, 21, 28];

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SmoothingError {
    #[error("smoothing window must be at least one day")]
    ZeroWindow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedSeries {
    pub country_code: String,
    pub q: usize,
    /// `sample_size` holds the pooled count over the window.
    pub metrics: Vec<CountryDailyMetric>,
}

/// Per-region sums pooled over days `day + 1 - q ..= day` (0-based), or
/// `None` while the window would reach before the first day.
pub fn pooled_window_sums(panel: &CountryPanel, q: usize, day: usize) -> Option<Vec<StratumSums>> {
    if q == 0 || day + 1 < q {
        return None;
    }
    let first = day + 1 - q;
    Some(
        (0..panel.regions.len())
            .map(|r| {
                let mut pooled = StratumSums::default();
                for s in first..=day {
                    pooled.absorb(&panel.stratum_sums(s, r));
                }
                pooled
            })
            .collect(),
    )
}

/// Smoothed `(mean km, stationary fraction)` of one region, `None` for an
/// empty or incomplete window.
pub fn smooth_region(panel: &CountryPanel, q: usize, day: usize, region: usize) -> Option<(f64, f64)> {
    let sums = pooled_window_sums(panel, q, day)?;
    let s = sums[region];
    (s.count > 0).then(|| (s.mean_km(), s.stationary_fraction()))
}

/// Smoothed country series for window `q`. Missing values mark days before
/// the first full window and windows without any trajectory.
pub fn smooth(panel: &CountryPanel, q: usize) -> Result<SmoothedSeries, SmoothingError> {
    if q == 0 {
        return Err(SmoothingError::ZeroWindow);
    }
    let metrics = (0..panel.day_count())
        .map(|d| {
            let sums = pooled_window_sums(panel, q, d);
            let value = sums.as_ref().and_then(|s| panel.combine(s));
            CountryDailyMetric {
                country_code: panel.country_code.clone(),
                day: d + 1,
                date: panel.dates[d],
                m1_km: value.map(|v| v.0),
                m2_fraction: value.map(|v| v.1),
                sample_size: sums.map_or(0, |s| s.iter().map(|x| x.count).sum()),
                m1_ci: None,
                m2_ci: None,
            }
        })
        .collect();
    Ok(SmoothedSeries { country_code: panel.country_code.clone(), q, metrics })
}
