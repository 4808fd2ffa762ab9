//! Daily trajectory distances, stationarity and population-weighted country
//! metrics.
//!
//! Work is split in two stages. [`prepare_device_days`] does everything
//! that does not depend on [`EstimationParams`] (segment lengths, daily mean
//! coordinate, region lookup) once; [`summarize`] then applies a parameter
//! set cheaply, which is what the sensitivity sweep relies on.

mod device_day;
mod panel;

pub use device_day::{prepare_device_days, summarize, DailyTrajectorySummary, DeviceDay, Segment};
pub use panel::{
    build_panels, country_metric, regional_aggregate, weighted_country_value, CountryDailyMetric, CountryPanel,
    Interval, RegionStratum, RegionalDailyAggregate, StratumSums, TrajectoryValue,
};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::ingest::ObservationRecord;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("invalid estimation parameters: {0}")]
    InvalidParams(String),
    #[error("country {0} has no regions")]
    UnknownCountry(String),
    #[error("country {0} has zero total population")]
    ZeroPopulation(String),
    #[error("empty analysis period")]
    EmptyPeriod,
}

/// Qualification and thresholding parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationParams {
    /// Minimum number of observations in the day (`n`).
    pub min_observations: usize,
    /// Multiplier on each observation's 1-sigma radius when gating (`r`).
    pub uncertainty_multiplier: f64,
    /// Daily distance below which a device counts as stationary, km (`z`).
    pub stationary_threshold_km: f64,
    /// Minimum span between the first and last observation of the day, hours.
    pub min_span_hours: f64,
}

impl Default for EstimationParams {
    fn default() -> Self {
        Self { min_observations: 12, uncertainty_multiplier: 1.0, stationary_threshold_km: 0.2, min_span_hours: 12.0 }
    }
}

impl EstimationParams {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.min_observations < 2 {
            return Err(MetricsError::InvalidParams(format!(
                "min_observations must be at least 2, got {}",
                self.min_observations
            )));
        }
        if !(self.uncertainty_multiplier > 0.0 && self.uncertainty_multiplier.is_finite()) {
            return Err(MetricsError::InvalidParams(format!(
                "uncertainty_multiplier must be positive, got {}",
                self.uncertainty_multiplier
            )));
        }
        if !(self.stationary_threshold_km > 0.0 && self.stationary_threshold_km.is_finite()) {
            return Err(MetricsError::InvalidParams(format!(
                "stationary_threshold_km must be positive, got {}",
                self.stationary_threshold_km
            )));
        }
        if !(self.min_span_hours >= 0.0 && self.min_span_hours.is_finite()) {
            return Err(MetricsError::InvalidParams(format!(
                "min_span_hours must be non-negative, got {}",
                self.min_span_hours
            )));
        }
        Ok(())
    }

    fn span_qualifies(&self, span_seconds: i64) -> bool {
        span_seconds as f64 >= self.min_span_hours * 3600.0
    }
}

/// Whether one device's observations of a single day are enough to estimate
/// its travelled distance. Both bounds are inclusive.
pub fn qualify_day(observations: &[ObservationRecord], params: &EstimationParams) -> bool {
    let (Some(first), Some(last)) = (observations.first(), observations.last()) else {
        return false;
    };
    observations.len() >= params.min_observations
        && params.span_qualifies((last.timestamp - first.timestamp).num_seconds())
}

/// Length of the hop `a -> b`, or zero when the two `r`-scaled uncertainty
/// disks overlap.
pub fn gated_segment_km(a: &ObservationRecord, b: &ObservationRecord, r: f64) -> f64 {
    Segment::between(a, b).gated_km(r)
}

/// Travelled distance of one device on one day. `next_day_first` is the
/// device's first observation of the following day, whose hop from the last
/// observation of `day_observations` is credited to this day.
pub fn daily_distance(
    day_observations: &[ObservationRecord],
    next_day_first: Option<&ObservationRecord>,
    r: f64,
) -> f64 {
    let mut total = 0.0;
    for pair in day_observations.windows(2) {
        total += gated_segment_km(&pair[0], &pair[1], r);
    }
    if let (Some(last), Some(next)) = (day_observations.last(), next_day_first) {
        total += gated_segment_km(last, next, r);
    }
    total
}

/// 1 when the device is considered not to have moved.
pub fn stationarity_flag(travelled_km: f64, threshold_km: f64) -> u8 {
    u8::from(travelled_km < threshold_km)
}

/// Calendar dates `start..=end`.
pub fn date_range(start: NaiveDate, end: NaiveDate) -> Vec<NaiveDate> {
    start.iter_days().take_while(|d| *d <= end).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::{destination_point, geodesic_distance_km, GeoPoint};
    use chrono::{Duration, NaiveDateTime};

    fn at(p: GeoPoint, u: f64, t: NaiveDateTime) -> ObservationRecord {
        ObservationRecord { device_id: "d".into(), lat: p.lat, lon: p.lon, uncertainty_m: u, timestamp: t }
    }

    fn t0() -> NaiveDateTime {
        NaiveDateTime::parse_from_str("2020-03-11T06:00:00", "%Y-%m-%dT%H:%M:%S").unwrap()
    }

    fn spaced(count: usize, span: Duration) -> Vec<ObservationRecord> {
        let step = span / (count as i32 - 1);
        (0..count)
            .map(|i| {
                let t = if i + 1 == count { t0() + span } else { t0() + step * i as i32 };
                at(GeoPoint::new(1.0, 1.0), 10.0, t)
            })
            .collect()
    }

    #[test]
    fn qualification_boundaries() {
        let p = EstimationParams::default();
        assert!(qualify_day(&spaced(12, Duration::hours(12)), &p));
        assert!(!qualify_day(&spaced(11, Duration::hours(14)), &p));
        assert!(!qualify_day(&spaced(12, Duration::hours(12) - Duration::minutes(1)), &p));
        assert!(!qualify_day(&[], &p));
    }

    #[test]
    fn gating_rule() {
        let a = GeoPoint::new(45.0, 9.0);
        let b40 = destination_point(a, 90.0, 0.040);
        assert_eq!(gated_segment_km(&at(a, 25.0, t0()), &at(b40, 25.0, t0()), 1.0), 0.0);

        // Uncertainties chosen so the disks touch exactly: kept.
        let b50 = destination_point(a, 90.0, 0.050);
        let d = geodesic_distance_km(a, b50);
        let u = d * 1000.0 / 2.0;
        let kept = gated_segment_km(&at(a, u, t0()), &at(b50, u, t0()), 1.0);
        assert_eq!(kept, d);
        assert!((kept - 0.05).abs() < 1e-9);

        assert_eq!(gated_segment_km(&at(a, u, t0()), &at(b50, u, t0()), 2.0), 0.0);
    }

    #[test]
    fn stationary_day_has_zero_distance() {
        let obs = spaced(12, Duration::hours(12));
        assert_eq!(daily_distance(&obs, None, 1.0), 0.0);
    }

    #[test]
    fn collinear_hops_add_up() {
        let a = GeoPoint::new(0.0, 0.0);
        let b = destination_point(a, 90.0, 1.0);
        let c = destination_point(b, 90.0, 1.0);
        let obs =
            vec![at(a, 1e-3, t0()), at(b, 1e-3, t0() + Duration::hours(1)), at(c, 1e-3, t0() + Duration::hours(2))];
        assert!((daily_distance(&obs, None, 1.0) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn midnight_hop_counts_for_the_earlier_day() {
        let a = GeoPoint::new(10.0, 10.0);
        let b = destination_point(a, 0.0, 5.0);
        let late = NaiveDateTime::parse_from_str("2020-03-11T23:50:00", "%Y-%m-%dT%H:%M:%S").unwrap();
        let day = vec![at(a, 20.0, late - Duration::hours(2)), at(a, 20.0, late)];
        let next = at(b, 20.0, late + Duration::minutes(30));
        assert!((daily_distance(&day, Some(&next), 1.0) - 5.0).abs() < 1e-9);
        assert_eq!(daily_distance(&day, None, 1.0), 0.0);
    }

    #[test]
    fn stationarity_threshold_is_strict() {
        assert_eq!(stationarity_flag(0.19, 0.2), 1);
        assert_eq!(stationarity_flag(0.2, 0.2), 0);
        assert_eq!(stationarity_flag(0.0, 1e-9), 1);
    }

    #[test]
    fn params_validation() {
        assert!(EstimationParams::default().validate().is_ok());
        let bad = [
            EstimationParams { min_observations: 1, ..Default::default() },
            EstimationParams { uncertainty_multiplier: 0.0, ..Default::default() },
            EstimationParams { stationary_threshold_km: -1.0, ..Default::default() },
            EstimationParams { min_span_hours: f64::NAN, ..Default::default() },
        ];
        for p in bad {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }
}
