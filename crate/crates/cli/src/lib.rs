//! The `mobility` command line: estimation, smoothing, correlation,
//! regression, sensitivity sweeps and synthetic data.
//!
//! Exit codes: 0 on success, 1 for input errors, 2 for runtime failures.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;

use std::ffi::OsString;
use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use error::Result;

#[derive(Debug, Parser)]
#[command(name = "mobility", version, about = "Country-level mobility metrics from smartphone location records")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed of every random stream.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct InputArgs {
    #[arg(long, value_name = "PATH")]
    pub observations: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub regions: Option<PathBuf>,
    /// Reference index CSV in the Community Mobility Reports layout.
    #[arg(long, value_name = "PATH")]
    pub reference: Option<PathBuf>,
    /// Country code to process; repeatable.
    #[arg(long = "country", value_name = "CODE")]
    pub countries: Vec<String>,
    #[arg(long, value_name = "YYYY-MM-DD")]
    pub start: Option<NaiveDate>,
    #[arg(long, value_name = "YYYY-MM-DD")]
    pub end: Option<NaiveDate>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Daily M1/M2 per country with bootstrap intervals.
    Estimate {
        #[command(flatten)]
        input: InputArgs,
        /// Bootstrap replicates.
        #[arg(long, value_name = "B")]
        iterations: Option<usize>,
    },
    /// Pooled q-day moving averages of the estimated metrics.
    Smooth {
        #[command(flatten)]
        input: InputArgs,
        /// Directory with `trajectories.csv` (default: the output directory).
        #[arg(long, value_name = "DIR")]
        from: Option<PathBuf>,
        /// Window length in days; repeatable.
        #[arg(long = "q", value_name = "DAYS")]
        windows: Vec<usize>,
        #[arg(long, value_name = "B")]
        iterations: Option<usize>,
    },
    /// Correlations with the reference indices and average penetrations.
    Correlate {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_name = "DIR")]
        from: Option<PathBuf>,
        /// Window length in days, 1 for unsmoothed; repeatable.
        #[arg(long = "q", value_name = "DAYS")]
        windows: Vec<usize>,
    },
    /// Beta regression of |rho| on penetration.
    Regress {
        /// Directory with `correlation.csv` and `penetration.csv`.
        #[arg(long, value_name = "DIR")]
        from: Option<PathBuf>,
        /// Use subsampled synthetic countries instead of stored correlations.
        #[arg(long)]
        synthetic: bool,
        #[arg(long = "q", value_name = "DAYS")]
        windows: Vec<usize>,
    },
    /// |rho| over the (n, r, z) parameter grid.
    Sensitivity {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Synthetic observations, regions, reference indices and ground truth.
    Simulate {
        #[arg(long, value_name = "N")]
        agents: Option<usize>,
        #[arg(long, value_name = "D")]
        days: Option<usize>,
    },
}

impl InputArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        let set = |dst: &mut Option<PathBuf>, src: &Option<PathBuf>| {
            if src.is_some() {
                dst.clone_from(src);
            }
        };
        set(&mut cfg.input.observations, &self.observations);
        set(&mut cfg.input.regions, &self.regions);
        set(&mut cfg.input.reference, &self.reference);
        if !self.countries.is_empty() {
            cfg.countries.clone_from(&self.countries);
        }
        cfg.start = self.start.or(cfg.start);
        cfg.end = self.end.or(cfg.end);
    }
}

/// Merges the configuration file and the flags.
pub fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    if let Some(out) = &cli.output {
        cfg.output.clone_from(out);
    }
    match &cli.command {
        Command::Estimate { input, iterations } => {
            input.apply(&mut cfg);
            cfg.bootstrap.iterations = iterations.unwrap_or(cfg.bootstrap.iterations);
        }
        Command::Smooth { input, windows, iterations, .. } => {
            input.apply(&mut cfg);
            if !windows.is_empty() {
                cfg.smoothing.windows.clone_from(windows);
            }
            cfg.bootstrap.iterations = iterations.unwrap_or(cfg.bootstrap.iterations);
        }
        Command::Correlate { input, windows, .. } => {
            input.apply(&mut cfg);
            if !windows.is_empty() {
                cfg.correlation.q.clone_from(windows);
            }
        }
        Command::Regress { windows, .. } => {
            if !windows.is_empty() {
                cfg.regression.q.clone_from(windows);
            }
        }
        Command::Sensitivity { input } => input.apply(&mut cfg),
        Command::Simulate { agents, days } => {
            cfg.simulate.n_agents = agents.unwrap_or(cfg.simulate.n_agents);
            cfg.simulate.days = days.unwrap_or(cfg.simulate.days);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cli: &Cli, cfg: &RunConfig) -> Result<()> {
    match &cli.command {
        Command::Estimate { .. } => commands::estimate::run(cfg),
        Command::Smooth { from, .. } => commands::smooth::run(cfg, from),
        Command::Correlate { from, .. } => commands::correlate::run(cfg, from),
        Command::Regress { from, synthetic, .. } => commands::regress::run(cfg, from, *synthetic),
        Command::Sensitivity { .. } => commands::sensitivity::run(cfg),
        Command::Simulate { .. } => commands::simulate::run(cfg),
    }
}

/// Runs a parsed command line inside a pool of the configured size.
pub fn execute(cli: &Cli) -> Result<()> {
    let cfg = resolve(cli)?;
    #[cfg(feature = "parallel")]
    if let Some(n) = cfg.threads {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| error::CliError::runtime(format!("cannot start {n} worker threads: {e}")))?;
        return pool.install(|| dispatch(cli, &cfg));
    }
    #[cfg(not(feature = "parallel"))]
    if cfg.threads.is_some_and(|n| n > 1) {
        log::warn!("built without the parallel feature; running on one thread");
    }
    dispatch(cli, &cfg)
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            e.print().ok();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("mobility: {e}");
            e.exit_code()
        }
    }
}
