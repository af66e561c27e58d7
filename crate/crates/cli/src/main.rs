use std::path::PathBuf;
use std::process::ExitCode;

use alphadecay::{Command, ScenarioConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "alphadecay", version, about = "Alpha decay scenario runner")]
struct Cli {
    /// TOML scenario file; missing keys fall back to the baseline.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Monte Carlo replications for crash, welfare and vintage fits.
    #[arg(long, global = true)]
    replications: Option<usize>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Half-life against adoption for several crowding correlations.
    HalflifeSweep,
    /// Sequential extinction cascade.
    Cascade,
    /// Market simulation and retraining regressions.
    Market,
    /// Flash-crash batch and multiplier summary.
    Crash,
    /// Adoption equilibria, stability and best-response curve.
    Equilibrium,
    /// Welfare curves and the three optima.
    Welfare,
    /// Synthetic holdings panel, convergence and homogeneity.
    Thirteenf,
    /// Fund return dispersion and vintage half-lives.
    Dispersion,
    /// One-at-a-time parameter sensitivity of the half-life.
    Sensitivity,
    /// Every data command into its own subdirectory.
    ReportData,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::HalflifeSweep => Command::HalflifeSweep,
            Sub::Cascade => Command::Cascade,
            Sub::Market => Command::Market,
            Sub::Crash => Command::Crash,
            Sub::Equilibrium => Command::Equilibrium,
            Sub::Welfare => Command::Welfare,
            Sub::Thirteenf => Command::Thirteenf,
            Sub::Dispersion => Command::Dispersion,
            Sub::Sensitivity => Command::Sensitivity,
            Sub::ReportData => Command::ReportData,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(p) => match ScenarioConfig::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => ScenarioConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.replications {
        cfg.set_replications(n);
    }
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match Command::from(cli.command).run(&cfg, &cli.out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
