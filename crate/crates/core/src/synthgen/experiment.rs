use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{generate, sample_devices, SynthError, SyntheticWorldConfig};
use crate::analysis::{metric_series, pearson, MetricKind};
use crate::ingest::sanitize;
use crate::metrics::{build_panels, prepare_device_days, CountryDailyMetric, DeviceDay, EstimationParams};
use crate::smoothing::smooth;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenetrationPoint {
    pub fraction: f64,
    pub devices: usize,
    pub average_sample_size: f64,
    pub penetration: f64,
    pub abs_rho_m1: Option<f64>,
    pub abs_rho_m2: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct PenetrationExperiment {
    /// Metrics estimated from every device, smoothed like the subsamples.
    pub reference: Vec<CountryDailyMetric>,
    pub points: Vec<PenetrationPoint>,
}

/// `count` fractions spaced evenly in log scale from `min_fraction` to 1.
pub fn log_spaced_fractions(count: usize, min_fraction: f64) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => {
            let lo = min_fraction.log10();
            (0..count).map(|i| 10f64.powf(lo - lo * i as f64 / (count - 1) as f64)).collect()
        }
    }
}

fn abs_correlation(a: &BTreeMap<NaiveDate, f64>, b: &BTreeMap<NaiveDate, f64>) -> Option<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = a.iter().filter_map(|(d, v)| b.get(d).map(|w| (*v, *w))).unzip();
    if x.len() < 3 {
        return None;
    }
    pearson(&x, &y).map(f64::abs)
}

/// Estimates the metrics of one synthetic world from device subsamples and
/// correlates each `q`-day series with the full-sample estimate.
pub fn penetration_experiment(
    world: &SyntheticWorldConfig,
    fractions: &[f64],
    params: &EstimationParams,
    q: usize,
    seed: u64,
) -> Result<PenetrationExperiment, SynthError> {
    if q == 0 {
        return Err(SynthError::Infeasible("smoothing window must be at least one day".into()));
    }
    let bundle = generate(world)?;
    let table = bundle.regions;
    let (records, _) = sanitize(bundle.records);
    let days = prepare_device_days(&records, &table);
    drop(records);
    let dates = world.dates();
    let countries = vec![world.country_code.clone()];
    let population = table.country_population(&world.country_code);

    // Daily metrics for the sample sizes, `q`-day metrics for the correlation.
    let estimate = |days: &[DeviceDay]| -> Result<(Vec<CountryDailyMetric>, Vec<CountryDailyMetric>), SynthError> {
        let panel = build_panels(days, &table, params, &countries, &dates)?.remove(0);
        let smoothed = smooth(&panel, q).expect("window checked").metrics;
        Ok((panel.daily_metrics(), smoothed))
    };
    let (_, reference) = estimate(&days)?;
    let ref1 = metric_series(&reference, MetricKind::M1);
    let ref2 = metric_series(&reference, MetricKind::M2);

    let mut points = Vec::with_capacity(fractions.len());
    for (i, &fraction) in fractions.iter().enumerate() {
        let keep = sample_devices(days.iter().map(|d| d.device_id.as_str()), fraction, seed.wrapping_add(i as u64))?;
        let subset: Vec<DeviceDay> = days.iter().filter(|d| keep.contains(&d.device_id)).cloned().collect();
        let (daily, metrics) = estimate(&subset)?;
        let average = daily.iter().map(|m| m.sample_size as f64).sum::<f64>() / daily.len() as f64;
        points.push(PenetrationPoint {
            fraction,
            devices: keep.len(),
            average_sample_size: average,
            penetration: average / population,
            abs_rho_m1: abs_correlation(&metric_series(&metrics, MetricKind::M1), &ref1),
            abs_rho_m2: abs_correlation(&metric_series(&metrics, MetricKind::M2), &ref2),
        });
    }
    Ok(PenetrationExperiment { reference, points })
}
