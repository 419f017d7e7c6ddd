use clap::{Parser, Subcommand};
use crossway::cli::{self, CliError, Overrides, PlotKind};
use crossway::config::{Algorithm, ScenarioConfig};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "crossway", version, about = "Unsignalised intersection microsimulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    algorithm: Option<Algorithm>,
    #[arg(long = "duration-s")]
    duration_s: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write metrics, vehicles, trace and summary.
    Run(RunArgs),
    /// Run the `[sweep]` grid of a scenario in parallel.
    Sweep(RunArgs),
    /// Turn run or sweep artifacts into plot-ready tables.
    Plotdata {
        #[arg(long)]
        kind: String,
        /// metrics.csv for halts_bar, vehicles.csv for the series, trace.jsonl for timelines.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse and check a scenario file.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

const EXIT_FAILED_RUN: u8 = 1;
const EXIT_BAD_INPUT: u8 = 2;

fn load(path: &Path, o: Overrides) -> Result<ScenarioConfig, CliError> {
    let mut cfg = ScenarioConfig::load(path)?;
    o.apply(&mut cfg)?;
    Ok(cfg)
}

fn overrides(a: &RunArgs) -> Overrides {
    Overrides {
        seed: a.seed,
        algorithm: a.algorithm,
        duration_s: a.duration_s,
    }
}

fn execute(cmd: Command) -> Result<bool, CliError> {
    match cmd {
        Command::Run(a) => {
            let cfg = load(&a.config, overrides(&a))?;
            let report = cli::run_to_dir(&cfg, &a.out)?;
            print!("{}", report.summary);
            Ok(report.clean())
        }
        Command::Sweep(a) => {
            let cfg = load(&a.config, overrides(&a))?;
            let threads = cli::threads_from_env()?;
            let result = cli::run_sweep(&cfg, threads)?;
            cli::write_sweep(&result, &a.out)?;
            println!(
                "{} runs, {} failed; results in {}",
                result.jobs.len(),
                result.failed_runs(),
                a.out.display()
            );
            Ok(result.clean())
        }
        Command::Plotdata { kind, input, out } => {
            let kind: PlotKind = kind.parse()?;
            let path = cli::emit_plotdata(kind, &input, &out)?;
            println!("{}", path.display());
            Ok(true)
        }
        Command::Validate { config } => {
            let cfg = load(&config, Overrides::default())?;
            let source = match &cfg.demand {
                Some(d) => format!("demand {} pcu/h at penetration {}", d.flow_pcuh, d.penetration),
                None => format!("{} explicit vehicles", cfg.vehicles.len()),
            };
            println!("{}: ok ({source}, {} s, {})", cfg.scenario, cfg.run.duration_s, cfg.run.algorithm);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAILED_RUN),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_BAD_INPUT)
        }
    }
}
