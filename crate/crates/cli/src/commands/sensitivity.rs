//! Correlations over the (n, r, z) grid.

use mobility_core::analysis::sensitivity_sweep;
use mobility_core::ingest::IndexCategory;
use mobility_core::metrics::{date_range, prepare_device_days};

use super::{countries, load_observations, load_regions, period, pick, prepare_output, Reference};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::formats::write_sensitivity;

pub fn run(cfg: &RunConfig) -> Result<()> {
    let table = load_regions(cfg)?;
    let targets = countries(cfg, &table)?;
    let reference = Reference::load(cfg)?;
    let obs = load_observations(cfg)?;
    let out = prepare_output(cfg, "sensitivity")?;
    for p in cfg.sensitivity.combinations() {
        p.validate().map_err(CliError::input)?;
    }
    let days = prepare_device_days(&obs.records, &table);
    drop(obs);
    let (start, end) = period(cfg, days.iter().map(|d| &d.date))?;
    let dates = date_range(start, end);
    for country in &targets {
        let series = reference.series(country)?;
        let rows = sensitivity_sweep(
            &days,
            &table,
            country,
            &dates,
            pick(&series, IndexCategory::TransitStations),
            pick(&series, IndexCategory::Residential),
            &cfg.sensitivity,
        )
        .map_err(CliError::runtime)?;
        let rho1: Vec<f64> = rows.iter().filter_map(|r| r.rho1_abs).collect();
        if let (Some(lo), Some(hi)) = (rho1.iter().copied().reduce(f64::min), rho1.iter().copied().reduce(f64::max)) {
            log::info!("{country}: |rho1| spans {lo:.4}..{hi:.4} over {} cells", rows.len());
        }
        write_sensitivity(&out.join(format!("sensitivity_{country}.csv")), &rows)?;
    }
    Ok(())
}
