//! Correlations with the reference indices and average penetrations.

use mobility_core::analysis::{correlate, metric_series, penetration};
use mobility_core::metrics::date_range;
use mobility_core::smoothing::smooth;
use mobility_core::CountryDailyMetric;

use super::{input_dir, load_regions, panels_from, pick, prepare_output, trajectory_countries, Reference, PAIRS};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::formats::{read_trajectories, write_correlations, write_penetration, CorrelationRow};

pub fn run(cfg: &RunConfig, from: &Option<std::path::PathBuf>) -> Result<()> {
    let table = load_regions(cfg)?;
    let reference = Reference::load(cfg)?;
    let traj = read_trajectories(&input_dir(cfg, from).join("trajectories.csv"))?;
    let out = prepare_output(cfg, "correlate")?;
    let dates = date_range(traj.period.0, traj.period.1);
    let targets = trajectory_countries(cfg, &traj.summaries);

    let mut rows = Vec::new();
    let mut penetrations = Vec::new();
    for panel in panels_from(&traj.summaries, &table, &targets, &dates)? {
        let country = panel.country_code.clone();
        penetrations.push(penetration(&country, &panel.sample_sizes(), panel.population()).map_err(CliError::input)?);
        let series = reference.series(&country)?;
        for &q in &cfg.correlation.q {
            let metrics: Vec<CountryDailyMetric> =
                if q == 1 { panel.daily_metrics() } else { smooth(&panel, q).map_err(CliError::input)?.metrics };
            for (metric, index) in PAIRS {
                let values = metric_series(&metrics, metric);
                let reference = pick(&series, index);
                let row = match correlate(&values, metric, reference, q) {
                    Ok(c) => CorrelationRow::from(&c),
                    Err(e) => {
                        log::warn!("{country} {metric}/{index} q={q}: {e}");
                        CorrelationRow {
                            country: country.clone(),
                            metric: metric.to_string(),
                            index: index.to_string(),
                            q,
                            abs_rho: None,
                            n_days: values.keys().filter(|d| reference.values.contains_key(d)).count(),
                        }
                    }
                };
                rows.push(row);
            }
        }
    }
    write_correlations(&out.join("correlation.csv"), &rows)?;
    write_penetration(&out.join("penetration.csv"), &penetrations)?;
    log::info!("wrote {} correlations for {} countries", rows.len(), penetrations.len());
    Ok(())
}
