use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{correlate, metric_series, MetricKind};
use crate::exec;
use crate::ingest::{ReferenceIndexSeries, RegionTable};
use crate::metrics::{build_panels, DeviceDay, EstimationParams, MetricsError};

/// Parameter grid of the sensitivity sweep. The minimum span in hours
/// follows the minimum observation count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivityGrid {
    pub n: Vec<usize>,
    pub r: Vec<f64>,
    pub z: Vec<f64>,
}

impl Default for SensitivityGrid {
    fn default() -> Self {
        Self { n: vec![3, 6, 9, 12, 15], r: vec![1.0, 2.0, 3.0], z: vec![0.1, 0.2, 0.3, 0.4] }
    }
}

impl SensitivityGrid {
    /// All combinations, `n` slowest and `z` fastest.
    pub fn combinations(&self) -> Vec<EstimationParams> {
        let mut out = Vec::with_capacity(self.n.len() * self.r.len() * self.z.len());
        for &n in &self.n {
            for &r in &self.r {
                for &z in &self.z {
                    out.push(EstimationParams {
                        min_observations: n,
                        uncertainty_multiplier: r,
                        stationary_threshold_km: z,
                        min_span_hours: n as f64,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub n: usize,
    pub r: f64,
    pub z: f64,
    /// |rho| of daily M1 against the transit index; `None` when undefined.
    pub rho1_abs: Option<f64>,
    /// |rho| of daily M2 against the residential index; `None` when undefined.
    pub rho2_abs: Option<f64>,
}

/// Recomputes daily metrics of `country` for every grid cell from the
/// prepared device-days and correlates them with the reference indices.
pub fn sensitivity_sweep(
    days: &[DeviceDay],
    table: &RegionTable,
    country: &str,
    dates: &[NaiveDate],
    transit: &ReferenceIndexSeries,
    residential: &ReferenceIndexSeries,
    grid: &SensitivityGrid,
) -> Result<Vec<SensitivityRow>, MetricsError> {
    let combos = grid.combinations();
    let countries = [country.to_owned()];
    exec::map(&combos, |params| {
        let panel = build_panels(days, table, params, &countries, dates)?.remove(0);
        let daily = panel.daily_metrics();
        let rho1 = correlate(&metric_series(&daily, MetricKind::M1), MetricKind::M1, transit, 1).ok();
        let rho2 = correlate(&metric_series(&daily, MetricKind::M2), MetricKind::M2, residential, 1).ok();
        Ok(SensitivityRow {
            n: params.min_observations,
            r: params.uncertainty_multiplier,
            z: params.stationary_threshold_km,
            rho1_abs: rho1.map(|c| c.abs_rho),
            rho2_abs: rho2.map(|c| c.abs_rho),
        })
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_has_sixty_cells() {
        let combos = SensitivityGrid::default().combinations();
        assert_eq!(combos.len(), 60);
        assert!(combos.iter().all(|p| p.validate().is_ok()));
        assert_eq!(combos[0].min_span_hours, 3.0);
        assert_eq!(combos[59].stationary_threshold_km, 0.4);
    }
}
