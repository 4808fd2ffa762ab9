use std::collections::BTreeMap;
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::ingest::{IndexCategory, ReferenceIndexSeries};
use crate::metrics::CountryDailyMetric;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MetricKind {
    M1,
    M2,
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::M1 => "M1",
            Self::M2 => "M2",
        })
    }
}

impl std::str::FromStr for MetricKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "M1" => Ok(Self::M1),
            "M2" => Ok(Self::M2),
            _ => Err(format!("unknown metric `{s}`")),
        }
    }
}

/// Present values of one metric, keyed by date.
pub fn metric_series(metrics: &[CountryDailyMetric], metric: MetricKind) -> BTreeMap<NaiveDate, f64> {
    metrics
        .iter()
        .filter_map(|m| {
            let v = match metric {
                MetricKind::M1 => m.m1_km,
                MetricKind::M2 => m.m2_fraction,
            };
            v.map(|v| (m.date, v))
        })
        .collect()
}

/// Sample Pearson correlation; `None` with fewer than two points or a
/// constant input.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 2 || x.iter().all(|v| *v == x[0]) || y.iter().all(|v| *v == y[0]) {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub country_code: String,
    pub metric: MetricKind,
    pub index: IndexCategory,
    pub q: usize,
    pub abs_rho: f64,
    pub paired_days: usize,
}

/// Absolute Pearson correlation between a metric series and a reference
/// index over the dates present in both.
pub fn correlate(
    series: &BTreeMap<NaiveDate, f64>,
    metric: MetricKind,
    reference: &ReferenceIndexSeries,
    q: usize,
) -> Result<CorrelationResult, AnalysisError> {
    let (x, y): (Vec<f64>, Vec<f64>) =
        series.iter().filter_map(|(d, v)| reference.values.get(d).map(|r| (*v, *r))).unzip();
    if x.len() < 3 {
        return Err(AnalysisError::UndefinedCorrelation(format!("only {} paired days", x.len())));
    }
    let rho = pearson(&x, &y).ok_or_else(|| AnalysisError::UndefinedCorrelation("zero variance".into()))?;
    Ok(CorrelationResult {
        country_code: reference.country_code.clone(),
        metric,
        index: reference.index,
        q,
        abs_rho: rho.abs(),
        paired_days: x.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenetrationRecord {
    pub country_code: String,
    pub average_sample_size: f64,
    pub population: f64,
    pub penetration: f64,
}

/// Average daily sample size over the period (days without data count as
/// zero) relative to the population.
pub fn penetration(
    country: &str,
    daily_sample_sizes: &[usize],
    population: f64,
) -> Result<PenetrationRecord, AnalysisError> {
    if !(population > 0.0) {
        return Err(AnalysisError::NonPositivePopulation(population));
    }
    if daily_sample_sizes.is_empty() {
        return Err(AnalysisError::EmptyPeriod);
    }
    let average = daily_sample_sizes.iter().map(|&n| n as f64).sum::<f64>() / daily_sample_sizes.len() as f64;
    Ok(PenetrationRecord {
        country_code: country.to_owned(),
        average_sample_size: average,
        population,
        penetration: average / population,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference(values: &[f64]) -> ReferenceIndexSeries {
        let d0 = NaiveDate::from_ymd_opt(2020, 3, 11).unwrap();
        ReferenceIndexSeries {
            country_code: "AAA".into(),
            index: IndexCategory::TransitStations,
            values: d0.iter_days().zip(values.iter().copied()).collect(),
        }
    }

    fn series(values: &[f64]) -> BTreeMap<NaiveDate, f64> {
        reference(values).values
    }

    #[test]
    fn perfect_linear_relations() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 3.0).collect();
        let r = correlate(&series(&x), MetricKind::M1, &reference(&y), 1).unwrap();
        assert!((r.abs_rho - 1.0).abs() < 1e-12);
        assert_eq!(r.paired_days, 10);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let r = correlate(&series(&x), MetricKind::M1, &reference(&neg), 1).unwrap();
        assert!((r.abs_rho - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_series_is_undefined() {
        let x = [4.0; 10];
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(matches!(
            correlate(&series(&x), MetricKind::M2, &reference(&y), 1),
            Err(AnalysisError::UndefinedCorrelation(_))
        ));
    }

    #[test]
    fn only_paired_days_count() {
        let x = series(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let mut refs = reference(&[2.0, 1.0, 4.0, 3.0, 6.0]);
        let dates: Vec<_> = refs.values.keys().copied().collect();
        refs.values.remove(&dates[1]);
        let r = correlate(&x, MetricKind::M1, &refs, 7).unwrap();
        assert_eq!(r.paired_days, 4);
        let expected = pearson(&[1.0, 3.0, 4.0, 5.0], &[2.0, 4.0, 3.0, 6.0]).unwrap();
        assert_eq!(r.abs_rho, expected.abs());
        refs.values.retain(|d, _| *d <= dates[2]);
        assert!(correlate(&x, MetricKind::M1, &refs, 7).is_err());
    }

    #[test]
    fn penetration_arithmetic() {
        let p = penetration("A", &[1500; 30], 15_000_000.0).unwrap();
        assert!((p.penetration - 1e-4).abs() < 1e-18);
        assert_eq!(penetration("A", &[0, 200], 1_000_000.0).unwrap().penetration, 1e-4);
        assert_eq!(penetration("A", &[1], 1.0).unwrap().penetration, 1.0);
        assert!(penetration("A", &[1], 0.0).is_err());
        assert!(penetration("A", &[], 1.0).is_err());
    }

    proptest! {
        #[test]
        fn affine_invariance(
            xs in prop::collection::vec(-100.0f64..100.0, 5..40),
            noise in prop::collection::vec(-10.0f64..10.0, 40),
            scale in 0.01f64..100.0,
            shift in -1e3f64..1e3,
            negate in any::<bool>(),
        ) {
            let ys: Vec<f64> = xs.iter().zip(&noise).map(|(x, e)| x + e).collect();
            let s = if negate { -scale } else { scale };
            let scaled: Vec<f64> = ys.iter().map(|y| s * y + shift).collect();
            if let (Some(a), Some(b)) = (pearson(&xs, &ys), pearson(&xs, &scaled)) {
                prop_assert!((a.abs() - b.abs()).abs() < 1e-9);
                prop_assert!(a.abs() <= 1.0);
            }
        }
    }
}
