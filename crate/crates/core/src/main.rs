use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use spinor_squeeze::config::{Mode, RunConfig};
use spinor_squeeze::experiments;

/// Exit code for a computation or configuration error.
const EXIT_ERROR: u8 = 1;
/// Exit code when `oracle-check` ran but an invariant failed.
const EXIT_CHECK_FAILED: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "spinor-squeeze",
    version,
    about = "Spin squeezing and three-mode entanglement in a spin-1 condensate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One trajectory per atom number.
    Run(Overrides),
    /// Independent trajectories in parallel, plus a summary table.
    Sweep(Overrides),
    /// Compare the sector solver against the full Fock-space oracle.
    OracleCheck(Overrides),
    /// Both panels of the squeezing/entanglement figure as CSV.
    Fig1(Overrides),
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// JSON configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Atom number or comma-separated list.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// lambda'_a in rad/s.
    #[arg(long)]
    lambda: Option<f64>,
    /// Final dimensionless time lambda'_a t.
    #[arg(long)]
    tau_max: Option<f64>,
    /// Grid points per trajectory.
    #[arg(long)]
    samples: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Parallel workers for sweeps.
    #[arg(long)]
    workers: Option<usize>,
}

fn load(mode: Mode, o: &Overrides) -> anyhow::Result<RunConfig> {
    let mut cfg = match &o.config {
        Some(path) => RunConfig::from_file(path).with_context(|| format!("reading config {}", path.display()))?,
        None => RunConfig::default(),
    };
    cfg.mode = mode;
    if let Some(list) = &o.n {
        cfg.n = None;
        cfg.n_list = Some(list.clone());
    }
    if let Some(x) = o.lambda {
        cfg.lambda_a_prime = x;
    }
    if let Some(x) = o.tau_max {
        cfg.tau_max = Some(x);
    }
    if let Some(x) = o.samples {
        cfg.samples = x;
    }
    if let Some(x) = &o.out {
        cfg.output_dir = x.clone();
    }
    if let Some(x) = o.workers {
        cfg.workers = Some(x);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> anyhow::Result<bool> {
    let (mode, overrides) = match &cli.command {
        Command::Run(o) => (Mode::Run, o),
        Command::Sweep(o) => (Mode::Sweep, o),
        Command::OracleCheck(o) => (Mode::OracleCheck, o),
        Command::Fig1(o) => (Mode::Fig1, o),
    };
    let cfg = load(mode, overrides)?;
    if mode == Mode::OracleCheck {
        let report = experiments::oracle_check(&cfg)?;
        for c in &report.checks {
            println!(
                "{} N={:<3} {:<24} residual={:.3e} tolerance={:.1e}",
                if c.passed { "PASS" } else { "FAIL" },
                c.n,
                c.name,
                c.residual,
                c.tolerance
            );
        }
        println!("report: {}", cfg.output_dir.join("oracle_report.json").display());
        return Ok(report.passed);
    }
    let meta = experiments::execute(&cfg)?;
    println!("{}", serde_json::to_string_pretty(&meta["runs"])?);
    println!("metadata: {}", cfg.output_dir.join("metadata.json").display());
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CHECK_FAILED),
        Err(e) => {
            let chain: Vec<String> = e.chain().map(|c| c.to_string()).collect();
            let report = json!({ "status": "error", "error": chain.first(), "causes": &chain[1..] });
            eprintln!("{report}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
