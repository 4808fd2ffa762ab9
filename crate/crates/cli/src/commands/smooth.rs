//! Pooled moving averages of the daily metrics, with intervals.

use mobility_core::metrics::date_range;
use mobility_core::smoothing::smooth;
use mobility_core::uncertainty::annotate;

use super::{input_dir, load_regions, panels_from, prepare_output, trajectory_countries};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::formats::{read_trajectories, write_smoothed};

pub fn run(cfg: &RunConfig, from: &Option<std::path::PathBuf>) -> Result<()> {
    let table = load_regions(cfg)?;
    let traj = read_trajectories(&input_dir(cfg, from).join("trajectories.csv"))?;
    let out = prepare_output(cfg, "smooth")?;
    let dates = date_range(traj.period.0, traj.period.1);
    let targets = trajectory_countries(cfg, &traj.summaries);
    let boot = cfg.bootstrap_config();
    for panel in panels_from(&traj.summaries, &table, &targets, &dates)? {
        let mut series = Vec::new();
        for &q in &cfg.smoothing.windows {
            let mut s = smooth(&panel, q).map_err(CliError::input)?;
            annotate(&mut s.metrics, &panel, q, &boot).map_err(CliError::input)?;
            series.push((q, s.metrics));
        }
        let path = out.join(format!("smoothed_{}.csv", panel.country_code));
        write_smoothed(&path, &series)?;
        log::info!("{}: wrote windows {:?} to {}", panel.country_code, cfg.smoothing.windows, path.display());
    }
    Ok(())
}
