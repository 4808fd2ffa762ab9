use chrono::NaiveDate;

use super::{stationarity_flag, EstimationParams};
use crate::exec;
use crate::geodesy::{daily_mean_coordinate, geodesic_distance_km, GeoPoint};
use crate::ingest::{ObservationRecord, RegionTable};

/// One hop between consecutive observations of a device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub distance_km: f64,
    /// Sum of the two endpoint uncertainties, metres.
    pub uncertainty_sum_m: f64,
}

impl Segment {
    pub fn between(a: &ObservationRecord, b: &ObservationRecord) -> Self {
        Self {
            distance_km: geodesic_distance_km(a.point(), b.point()),
            uncertainty_sum_m: a.uncertainty_m + b.uncertainty_m,
        }
    }

    pub fn gated_km(&self, r: f64) -> f64 {
        if self.distance_km * 1000.0 >= r * self.uncertainty_sum_m {
            self.distance_km
        } else {
            0.0
        }
    }
}

/// Parameter-independent view of one device on one calendar day.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceDay {
    pub device_id: String,
    pub date: NaiveDate,
    pub observation_count: usize,
    /// Seconds between the first and last observation of the day.
    pub span_seconds: i64,
    /// Hops in time order; the last one may end on the following day.
    pub segments: Vec<Segment>,
    pub mean_coordinate: GeoPoint,
    /// Index into the region table of the region holding the mean coordinate.
    pub region: Option<usize>,
}

impl DeviceDay {
    pub fn qualifies(&self, params: &EstimationParams) -> bool {
        self.observation_count >= params.min_observations && params.span_qualifies(self.span_seconds)
    }

    pub fn travelled_km(&self, r: f64) -> f64 {
        let mut total = 0.0;
        for s in &self.segments {
            total += s.gated_km(r);
        }
        total
    }
}

/// Splits sanitized records (sorted by device, then time) into device-days.
pub fn prepare_device_days(records: &[ObservationRecord], table: &RegionTable) -> Vec<DeviceDay> {
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..=records.len() {
        if i == records.len() || records[i].device_id != records[start].device_id {
            groups.push(start..i);
            start = i;
        }
    }
    exec::map(&groups, |range| device_days_of(&records[range.clone()], table)).into_iter().flatten().collect()
}

fn device_days_of(records: &[ObservationRecord], table: &RegionTable) -> Vec<DeviceDay> {
    let mut days = Vec::new();
    let mut start = 0;
    while start < records.len() {
        let date = records[start].timestamp.date();
        let end = start + records[start..].iter().take_while(|r| r.timestamp.date() == date).count();
        let obs = &records[start..end];
        let next = records.get(end).filter(|r| date.succ_opt() == Some(r.timestamp.date()));

        let mut segments: Vec<Segment> = obs.windows(2).map(|w| Segment::between(&w[0], &w[1])).collect();
        if let Some(next) = next {
            segments.push(Segment::between(&obs[obs.len() - 1], next));
        }
        let points: Vec<GeoPoint> = obs.iter().map(ObservationRecord::point).collect();
        let mean_coordinate = daily_mean_coordinate(&points);
        days.push(DeviceDay {
            device_id: obs[0].device_id.clone(),
            date,
            observation_count: obs.len(),
            span_seconds: (obs[obs.len() - 1].timestamp - obs[0].timestamp).num_seconds(),
            segments,
            mean_coordinate,
            region: table.assign_index(mean_coordinate),
        });
        start = end;
    }
    days
}

/// Per-device daily result for one qualifying, region-assigned device-day.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyTrajectorySummary {
    pub device_id: String,
    pub date: NaiveDate,
    pub country_code: String,
    pub region_id: String,
    pub travelled_km: f64,
    pub stationary: bool,
    pub mean_coordinate: GeoPoint,
    pub observation_count: usize,
}

/// Applies `params` to prepared device-days. Days that do not qualify or
/// whose mean coordinate falls outside every region are dropped.
pub fn summarize(days: &[DeviceDay], table: &RegionTable, params: &EstimationParams) -> Vec<DailyTrajectorySummary> {
    days.iter()
        .filter(|d| d.qualifies(params))
        .filter_map(|d| {
            let region = table.get(d.region?);
            let travelled_km = d.travelled_km(params.uncertainty_multiplier);
            Some(DailyTrajectorySummary {
                device_id: d.device_id.clone(),
                date: d.date,
                country_code: region.country_code.clone(),
                region_id: region.region_id.clone(),
                travelled_km,
                stationary: stationarity_flag(travelled_km, params.stationary_threshold_km) == 1,
                mean_coordinate: d.mean_coordinate,
                observation_count: d.observation_count,
            })
        })
        .collect()
}
