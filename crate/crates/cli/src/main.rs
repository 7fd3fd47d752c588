//! `tempus`: covariant time-observable computations as reproducible runs.
//!
//! Every subcommand reads a plain-text config, writes headered CSV output,
//! and drops a `run_manifest.json` next to it. Exit codes: 0 success, 2
//! configuration error, 3 numerical-policy violation.

mod cmds;
mod common;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Config;

/// CLI-level error split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad config, grid, or I/O: exit 2.
    Config(String),
    /// A numerical bound was violated: exit 3, naming the bound.
    Policy(String),
}

impl From<tempus_core::Error> for CliError {
    fn from(e: tempus_core::Error) -> Self {
        use tempus_core::Error as E;
        match e {
            E::Stability(_)
            | E::AbsorberOverlap { .. }
            | E::NearSingularKernel { .. }
            | E::ChannelFactorSingular { .. }
            | E::NotPositiveSemidefinite { .. }
            | E::NoArrival { .. } => CliError::Policy(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "tempus",
    version,
    about = "Quantum arrival-time distributions: free, scattering, and absorbing-detector models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration file ([section] / key = value)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Primary output path (CSV; fixture config for backflow-scan)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override the [times] section: tmin:tmax:n
    #[arg(long, global = true)]
    times: Option<String>,

    /// Override the [units] section: hbar=..,mass=..
    #[arg(long, global = true)]
    units: Option<String>,

    /// Worker threads (falls back to TEMPUS_THREADS, then all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Free-particle arrival distribution at x = 0 in 1D
    #[command(name = "kijowski1d")]
    Kijowski1d,
    /// Arrival distribution at a plane for a 3D packet
    #[command(name = "kijowski-plane")]
    KijowskiPlane,
    /// Arrival density vs probability current for the same packet
    #[command(name = "current-compare")]
    CurrentCompare,
    /// Clock distribution of a packet scattering off a 1D potential
    #[command(name = "clock-scatter")]
    ClockScatter,
    /// Partial-wave clock distribution for a spherical well/barrier
    #[command(name = "partialwave")]
    Partialwave,
    /// Conditional first-arrival distribution from an absorbing detector
    #[command(name = "conditional")]
    Conditional,
    /// Operator-normalized arrival distribution on a packet basis
    #[command(name = "opnorm")]
    Opnorm,
    /// Random kernel factorization round trip
    #[command(name = "schmidt-demo")]
    SchmidtDemo,
    /// Scan two-Gaussian packets for current backflow; writes a fixture config
    #[command(name = "backflow-scan")]
    BackflowScan,
}

fn init_threads(cli_threads: Option<usize>) {
    let n = cli_threads.or_else(|| {
        std::env::var("TEMPUS_THREADS").ok().and_then(|s| s.parse().ok())
    });
    if let Some(n) = n.filter(|&n| n > 0) {
        // summation order is fixed, so the pool size never changes output
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn apply_overrides(cfg: &mut Config, cli: &Cli) -> Result<(), CliError> {
    if let Some(spec) = &cli.times {
        let v = common::split_floats(spec, "--times", 3, 3)?;
        if v[2].fract() != 0.0 || v[2] < 2.0 {
            return Err(CliError::Config(format!("--times node count must be an integer >= 2, got '{spec}'")));
        }
        cfg.set_section(
            "times",
            &[
                ("t_min", format!("{}", v[0])),
                ("t_max", format!("{}", v[1])),
                ("n", format!("{}", v[2] as usize)),
            ],
        );
    }
    if let Some(spec) = &cli.units {
        let mut hbar = 1.0;
        let mut mass = 1.0;
        for part in spec.split(',') {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--units expects hbar=..,mass=.., got '{spec}'")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("--units value '{value}' is not a number")))?;
            match key.trim() {
                "hbar" => hbar = value,
                "mass" => mass = value,
                other => return Err(CliError::Config(format!("--units key must be hbar or mass, got '{other}'"))),
            }
        }
        cfg.set_section("units", &[("hbar", format!("{hbar}")), ("mass", format!("{mass}"))]);
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    init_threads(cli.threads);
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let mut cfg = Config::load(config_path)?;
    apply_overrides(&mut cfg, cli)?;
    let out = cli
        .out
        .as_ref()
        .ok_or_else(|| CliError::Config("--out <path> is required".into()))?;
    match cli.command {
        Command::Kijowski1d => cmds::kijowski1d(&cfg, out),
        Command::KijowskiPlane => cmds::kijowski_plane(&cfg, out),
        Command::CurrentCompare => cmds::current_compare(&cfg, out),
        Command::ClockScatter => cmds::clock_scatter(&cfg, out),
        Command::Partialwave => cmds::partialwave(&cfg, out),
        Command::Conditional => cmds::conditional(&cfg, out),
        Command::Opnorm => cmds::opnorm(&cfg, out),
        Command::SchmidtDemo => cmds::schmidt_demo(&cfg, out),
        Command::BackflowScan => cmds::backflow_scan(&cfg, out),
    }
}

fn main() -> ExitCode {
    // clap itself exits with code 2 on unknown flags / bad usage
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Policy(msg)) => {
            eprintln!("numerical policy violation: {msg}");
            ExitCode::from(3)
        }
    }
}
