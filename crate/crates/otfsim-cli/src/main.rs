//! `otfsim`: seeded MIMO-OTFS link-level experiments from the command line.
//!
//! Subcommands: `ber-sweep`, `sinr-validate`, `complexity-report`,
//! `selftest`. Flags can also be set through `OTFSIM_*` environment
//! variables (`OTFSIM_CONFIG`, `OTFSIM_SEED`, `OTFSIM_OUT`,
//! `OTFSIM_TRIALS`, `OTFSIM_THREADS`); flags win over the environment,
//! which wins over the config file.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical failure,
//! 3 self-test failure.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use otfsim_cli::config::{ExperimentConfig, Overrides};
use otfsim_cli::report::run_complexity_report;
use otfsim_cli::selftest::run_selftest;
use otfsim_cli::sweep::{run_ber_sweep, run_sinr_validation};
use otfsim_cli::HarnessError;

#[derive(Parser)]
#[command(
    name = "otfsim",
    version,
    about = "MIMO-OTFS link-level simulation harness"
)]
struct Cli {
    /// TOML experiment configuration (env: OTFSIM_CONFIG; built-in
    /// defaults when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed override (env: OTFSIM_SEED).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output CSV path override; stdout when unset (env: OTFSIM_OUT).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Channel realizations per SNR point (env: OTFSIM_TRIALS).
    #[arg(long, global = true)]
    trials: Option<usize>,

    /// Worker threads; defaults to all cores (env: OTFSIM_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo BER sweep over the configured SNR grid and receivers.
    BerSweep,
    /// Paired analytic/simulated BER columns for the LZ and LM receivers.
    SinrValidate,
    /// Closed-form complexity sweep, with LZ/LM rows counter-verified.
    ComplexityReport,
    /// Run the oracle-equivalence, reconstruction, op-exactness, and
    /// lemma-statistics suites.
    Selftest,
}

fn env_var<T: std::str::FromStr>(name: &str) -> Result<Option<T>, HarnessError> {
    match std::env::var(name) {
        Ok(text) => text
            .parse()
            .map(Some)
            .map_err(|_| HarnessError::Config(format!("cannot parse {name}={text:?}"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let threads = match cli.threads {
        Some(n) => Some(n),
        None => env_var::<usize>("OTFSIM_THREADS")?,
    };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    }

    let config_path = match cli.config {
        Some(p) => Some(p),
        None => env_var::<PathBuf>("OTFSIM_CONFIG")?,
    };
    let mut config = match &config_path {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    let overrides = Overrides {
        seed: match cli.seed {
            Some(s) => Some(s),
            None => env_var::<u64>("OTFSIM_SEED")?,
        },
        trials: match cli.trials {
            Some(t) => Some(t),
            None => env_var::<usize>("OTFSIM_TRIALS")?,
        },
        out: match cli.out {
            Some(o) => Some(o),
            None => env_var::<PathBuf>("OTFSIM_OUT")?,
        },
    };
    config.apply_overrides(&overrides)?;

    match cli.command {
        Command::BerSweep => {
            let output = run_ber_sweep(&config)?;
            if output.redraws > 0 {
                eprintln!("note: {} singular trial(s) redrawn", output.redraws);
            }
            emit(&config, |w| output.write_csv(w))?;
        }
        Command::SinrValidate => {
            let output = run_sinr_validation(&config)?;
            if output.redraws > 0 {
                eprintln!("note: {} singular trial(s) redrawn", output.redraws);
            }
            emit(&config, |w| output.write_csv(w))?;
        }
        Command::ComplexityReport => {
            let output = run_complexity_report(&config)?;
            emit(&config, |w| output.write_csv(w))?;
        }
        Command::Selftest => run_selftest()?,
    }
    Ok(())
}

fn emit<F>(config: &ExperimentConfig, write: F) -> Result<(), HarnessError>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    match &config.out {
        Some(path) => {
            let mut file = std::fs::File::create(path)?;
            write(&mut file)?;
            file.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
