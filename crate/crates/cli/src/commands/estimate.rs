//! Daily country metrics with bootstrap intervals.

use mobility_core::metrics::{date_range, prepare_device_days, summarize};
use mobility_core::uncertainty::annotate;
use mobility_core::CountryPanel;

use super::{countries, load_observations, load_regions, period, prepare_output, write_sanitation};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::formats::{write_metrics, write_trajectories};

pub fn run(cfg: &RunConfig) -> Result<()> {
    let table = load_regions(cfg)?;
    let targets = countries(cfg, &table)?;
    let obs = load_observations(cfg)?;
    let out = prepare_output(cfg, "estimate")?;
    write_sanitation(&out, &obs)?;
    if obs.records.is_empty() {
        return Err(CliError::runtime("no qualifying trajectories"));
    }

    let days = prepare_device_days(&obs.records, &table);
    drop(obs);
    let (start, end) = period(cfg, days.iter().map(|d| &d.date))?;
    let dates = date_range(start, end);
    let mut summaries = summarize(&days, &table, &cfg.estimation);
    drop(days);
    summaries.retain(|s| s.date >= start && s.date <= end && targets.contains(&s.country_code));
    if summaries.is_empty() {
        return Err(CliError::runtime("no qualifying trajectories"));
    }
    summaries.sort_by(|a, b| (&a.country_code, a.date, &a.device_id).cmp(&(&b.country_code, b.date, &b.device_id)));
    write_trajectories(&out.join("trajectories.csv"), (start, end), &summaries)?;

    let boot = cfg.bootstrap_config();
    let mut failures = Vec::new();
    for country in &targets {
        let panel = CountryPanel::build(country, &summaries, &table, &dates).map_err(CliError::input)?;
        if panel.sample_sizes().iter().all(|&n| n == 0) {
            log::error!("{country}: no qualifying trajectories in {start}..{end}");
            failures.push(country.clone());
            continue;
        }
        let mut metrics = panel.daily_metrics();
        annotate(&mut metrics, &panel, 1, &boot).map_err(CliError::input)?;
        let path = out.join(format!("metrics_{country}.csv"));
        write_metrics(&path, &metrics)?;
        log::info!("{country}: wrote {} days to {}", metrics.len(), path.display());
    }
    if !failures.is_empty() {
        return Err(CliError::runtime(format!("no qualifying trajectories for {}", failures.join(", "))));
    }
    Ok(())
}
