//! Synthetic bundle with ground truth.

use mobility_core::synthgen::{generate, SynthError};

use super::prepare_output;
use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub fn run(cfg: &RunConfig) -> Result<()> {
    let out = prepare_output(cfg, "simulate")?;
    let world = world(cfg);
    let bundle = generate(&world).map_err(|e| match e {
        SynthError::Io(e) => CliError::runtime(e),
        other => CliError::input(other),
    })?;
    bundle.write_dir(&out).map_err(CliError::runtime)?;
    log::info!(
        "wrote {} records of {} agents over {} days to {}",
        bundle.records.len(),
        world.n_agents,
        world.days,
        out.display()
    );
    Ok(())
}

/// The configured world driven by the run seed.
pub fn world(cfg: &RunConfig) -> mobility_core::synthgen::SyntheticWorldConfig {
    let mut world = cfg.simulate.clone();
    world.seed = cfg.seed;
    world
}
