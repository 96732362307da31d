//! Command-line front end: `run`, `verify` and `dump-config`.
//!
//! Exit codes: 0 on success, 1 on a configuration or I/O error, 2 when a
//! verification suite fails. The log level comes from `REPEATER_FD_LOG`
//! (env_logger syntax), else from `--verbose`.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::harness::{run_campaign, summarize, write_outputs, ArchitectureSpec};
use crate::verify::{
    optimizer_grid_suite, sinr_oracle_suite, solver_oracle_suite, GridOracleParams, SinrOracleParams,
    SolverOracleParams, SuiteReport,
};

pub const LOG_ENV: &str = "REPEATER_FD_LOG";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_VERIFY: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "repeater-fd",
    version,
    about = "Repeater-assisted full-duplex massive MIMO simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a Monte Carlo campaign and write results.csv, summary.json and CDF files.
    Run(Common),
    /// Run the oracle suites (Monte Carlo SINR, optimizer grid, convex solver).
    Verify(Common),
    /// Print the resolved configuration, defaults included, as TOML.
    DumpConfig(Common),
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// TOML configuration file; missing sections and keys take their defaults.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Dotted override such as `scenario.num_repeaters=8`; repeatable, applied in order.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Number of drops (campaign.drops).
    #[arg(long)]
    pub drops: Option<usize>,
    /// Master seed (scenario.rng_seed).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Architecture to evaluate (ra-fd-opt, ra-fd-random, ra-hd, ra-hd-opt, fd-mmimo); repeatable.
    #[arg(long = "arch", value_name = "NAME", value_parser = parse_arch)]
    pub archs: Vec<ArchitectureSpec>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; 0 uses every core (campaign.jobs).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Raise the log level and write per-run optimizer traces; repeat for more detail.
    #[arg(short, long, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

fn parse_arch(s: &str) -> std::result::Result<ArchitectureSpec, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Common {
    /// Config file, then `--set` overrides, then the dedicated flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(self.config.as_deref(), &self.overrides)?;
        if let Some(d) = self.drops {
            cfg.campaign.drops = d;
        }
        if let Some(s) = self.seed {
            cfg.scenario.rng_seed = s;
        }
        if !self.archs.is_empty() {
            cfg.campaign.archs = self.archs.clone();
        }
        if let Some(j) = self.jobs {
            cfg.campaign.jobs = j;
        }
        if self.verbose > 0 {
            cfg.campaign.keep_traces = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    let env = env_logger::Env::new().filter_or(LOG_ENV, default);
    // A second initialization (tests calling `main_with_args` repeatedly) is harmless.
    let _ = env_logger::Builder::from_env(env).format_timestamp_millis().try_init();
}

fn run(common: &Common) -> Result<()> {
    let cfg = common.resolve()?;
    let result = run_campaign(&cfg.scenario, &cfg.path_loss, &cfg.optimizer, &cfg.campaign)?;
    let written = write_outputs(&result, &common.out)?;
    let summary = summarize(&result);
    println!(
        "{} drops, {} redraws, {} files in {}",
        summary.drops,
        summary.rejections,
        written.len(),
        common.out.display()
    );
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
    for a in &summary.architectures {
        println!(
            "{:<14} median DL SE {:>8}  median UL SE {:>8}  mean objective {:>8}",
            a.arch,
            fmt(a.median_dl_se),
            fmt(a.median_ul_se),
            fmt(a.mean_objective)
        );
    }
    Ok(())
}

fn print_suite(r: &SuiteReport) {
    let tag = if r.passed { "PASS" } else { "FAIL" };
    println!("{tag} {}: {} ({:.1?})", r.name, r.detail, r.elapsed);
}

/// Runs every suite and returns whether all passed.
fn verify(common: &Common) -> Result<bool> {
    let cfg = common.resolve()?;
    let grid = GridOracleParams {
        optimizer: cfg.optimizer.clone(),
        ..GridOracleParams::default()
    };
    let mut ok = true;
    for report in [
        sinr_oracle_suite(&SinrOracleParams::default())?,
        optimizer_grid_suite(&grid)?,
        solver_oracle_suite(&SolverOracleParams::default())?,
    ] {
        print_suite(&report);
        ok &= report.passed;
    }
    Ok(ok)
}

/// Parses `args` (program name first) and executes; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let common = match &cli.command {
        Command::Run(c) | Command::Verify(c) | Command::DumpConfig(c) => c,
    };
    init_logging(common.verbose);
    let outcome = match &cli.command {
        Command::Run(c) => run(c).map(|_| EXIT_OK),
        Command::Verify(c) => verify(c).map(|ok| if ok { EXIT_OK } else { EXIT_VERIFY }),
        Command::DumpConfig(c) => c.resolve().and_then(|cfg| cfg.to_toml()).map(|text| {
            print!("{text}");
            EXIT_OK
        }),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        EXIT_CONFIG
    })
}
