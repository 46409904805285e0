use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hytm::{cmd_report, cmd_run, cmd_scenario, CheckKind, CliError, ConfigFile, Overrides, RunConfig, EXIT_ERROR};
use hytm_core::checker::DEFAULT_TX_LIMIT;
use hytm_core::Algorithm;

#[derive(Parser)]
#[command(name = "hytm", version, about = "Deterministic hybrid transactional memory simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute schedules, write logs and run checks.
    Run {
        /// JSON config document; flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "alg")]
        algorithm: Option<Algorithm>,
        /// Number of t-objects.
        #[arg(long)]
        tobjects: Option<u32>,
        /// Tracking-set capacity.
        #[arg(long)]
        ts: Option<usize>,
        /// Schedule file (JSON lines).
        #[arg(long)]
        schedule: Option<PathBuf>,
        /// Seeded fuzzing: seed=, n_txns=, ops_per_txn=, fast_fraction=, iterations=.
        #[arg(long, num_args = 0.., value_name = "KEY=VALUE")]
        fuzz: Option<Vec<String>>,
        #[arg(long)]
        scenario: Option<String>,
        /// Checks to run, comma separated or repeated.
        #[arg(long = "check", value_delimiter = ',')]
        checks: Option<Vec<CheckKind>>,
        /// Largest history the checker accepts, in transactions.
        #[arg(long)]
        limit: Option<usize>,
        /// Where to write the history log.
        #[arg(long)]
        history: Option<PathBuf>,
        /// Where to write the metrics JSON.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Run a scripted scenario and evaluate its assertion.
    Scenario {
        name: String,
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Summarize a history log.
    Report {
        #[arg(long)]
        history: PathBuf,
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[arg(long)]
        json: bool,
        #[arg(long, default_value_t = DEFAULT_TX_LIMIT)]
        limit: usize,
    },
}

fn dispatch(cmd: Command) -> Result<i32, CliError> {
    let mut out = std::io::stdout().lock();
    match cmd {
        Command::Run {
            config,
            algorithm,
            tobjects,
            ts,
            schedule,
            fuzz,
            scenario,
            checks,
            limit,
            history,
            metrics,
        } => {
            let file = config.as_deref().map(ConfigFile::load).transpose()?;
            let overrides = Overrides {
                algorithm,
                n_tobjects: tobjects,
                capacity: ts,
                schedule_file: schedule,
                fuzz,
                scenario,
                checks,
                limit,
                history,
                metrics,
            };
            cmd_run(&RunConfig::resolve(file, overrides)?, &mut out)
        }
        Command::Scenario { name, history } => cmd_scenario(&name, history.as_deref(), &mut out),
        Command::Report {
            history,
            metrics,
            json,
            limit,
        } => cmd_report(&history, metrics.as_deref(), json, limit, &mut out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("hytm: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
