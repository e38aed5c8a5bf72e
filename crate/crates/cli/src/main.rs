use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jumpest_cli::commands::parse_estimators;
use jumpest_cli::{cmd_analyze, cmd_simulate, cmd_solve, cmd_wonham, examples, CliError, ConfigDocument, Run, SimulateOptions, WORKERS_ENV};

#[derive(Parser)]
#[command(name = "jumpest", version, about = "Stationary estimator design over Markovian packet-drop channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// Scenario file (TOML).
    #[arg(required_unless_present = "example", conflicts_with = "example")]
    config: Option<PathBuf>,
    /// Use a built-in scenario instead of a file: singer or paper51.
    #[arg(long, value_name = "NAME")]
    example: Option<String>,
}

impl Source {
    fn load(&self) -> Result<ConfigDocument, CliError> {
        match (&self.example, &self.config) {
            (Some(name), _) => examples::by_name(name).ok_or_else(|| {
                CliError::Config(format!("unknown example `{name}` (expected one of {})", examples::NAMES.join(", ")))
            }),
            (None, Some(path)) => ConfigDocument::load(path),
            (None, None) => Err(CliError::Config("no config given".into())),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Detectability analysis.
    Analyze {
        #[command(flatten)]
        source: Source,
        /// Write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimal and locally optimal stationary gains.
    Solve {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Block-triangular decomposition and per-block thresholds.
    Wonham {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo comparison of the estimators.
    Simulate {
        #[command(flatten)]
        source: Source,
        /// Variance table; the channel path goes to `<stem>_path.csv`.
        #[arg(long)]
        csv: PathBuf,
        /// JSON summary, by default next to the CSV.
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated subset of os, los, tvkf.
        #[arg(long)]
        estimators: Option<String>,
        /// Worker threads; all cores when unset.
        #[arg(long, env = WORKERS_ENV)]
        workers: Option<usize>,
    },
    /// Print a built-in scenario file.
    Example {
        #[arg(value_parser = examples::NAMES)]
        name: String,
    },
}

fn finish(run: Result<Run, CliError>, out: Option<&PathBuf>) -> Result<i32, CliError> {
    let run = run?;
    for line in &run.lines {
        println!("{line}");
    }
    if let Some(path) = out {
        run.report.write(path)?;
    }
    Ok(run.exit_code())
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Analyze { source, out } => finish(cmd_analyze(&source.load()?), out.as_ref()),
        Command::Solve { source, out } => finish(cmd_solve(&source.load()?), out.as_ref()),
        Command::Wonham { source, out } => finish(cmd_wonham(&source.load()?), out.as_ref()),
        Command::Simulate {
            source,
            csv,
            summary,
            trials,
            horizon,
            seed,
            estimators,
            workers,
        } => {
            let opts = SimulateOptions {
                csv,
                summary,
                trials,
                horizon,
                seed,
                estimators: estimators.as_deref().map(parse_estimators).transpose()?,
                workers,
            };
            finish(cmd_simulate(&source.load()?, &opts), None)
        }
        Command::Example { name } => {
            let doc = examples::by_name(&name).expect("clap restricts the name");
            print!("{}", doc.to_toml());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let code = match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("jumpest: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
