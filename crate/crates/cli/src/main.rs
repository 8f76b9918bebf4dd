use std::path::{Path, PathBuf};
use std::process::ExitCode;

use arp_sentinel::stages::{self, DATASET_FILE, MODEL_FILE, TEST_FILE, TRACE_FILE, TRAIN_FILE};
use arp_sentinel::{Error, ExperimentConfig};
use clap::{Args, Parser, Subcommand};
use log::debug;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_INVARIANT: u8 = 3;

/// ARP spoofing simulation, detection and drift monitoring.
///
/// Every stage reads and writes files under the output directory; inputs
/// default to the artifacts an earlier stage left there.
#[derive(Parser, Debug)]
#[command(name = "arp-sentinel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a network and write trace.tsv.
    Simulate(Common),
    /// Extract windowed features from a trace into dataset.tsv.
    Featurize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Split a dataset and train the ensemble.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Score a model on a dataset (the held-out split by default).
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Run the drift monitor over a simulated or supplied trace.
    Monitor {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Training data the model was fit on.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Monitoring trace; simulated from the config when absent.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Aggregate metrics into report tables.
    Report {
        #[command(flatten)]
        common: Common,
        /// Directory holding metrics.csv and timing.json; defaults to --out.
        #[arg(long)]
        dir: Option<PathBuf>,
        /// Extra metrics rows in the same CSV layout.
        #[arg(long)]
        external: Option<PathBuf>,
    },
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("ARP_SENTINEL_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("ARP_SENTINEL_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn load(common: &Common) -> arp_sentinel::Result<(ExperimentConfig, PathBuf)> {
    let cfg = ExperimentConfig::load(&common.config)?;
    let out = common.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    debug!("config {} hash {}", common.config.display(), cfg.hash());
    Ok((cfg, out))
}

fn or_default(given: &Option<PathBuf>, out: &Path, name: &str) -> PathBuf {
    given.clone().unwrap_or_else(|| out.join(name))
}

fn run(cmd: &Command) -> arp_sentinel::Result<Vec<PathBuf>> {
    match cmd {
        Command::Simulate(common) => {
            let (cfg, out) = load(common)?;
            stages::simulate(&cfg, &out)
        }
        Command::Featurize { common, trace } => {
            let (cfg, out) = load(common)?;
            stages::featurize(&cfg, &or_default(trace, &out, TRACE_FILE), &out)
        }
        Command::Train { common, dataset } => {
            let (cfg, out) = load(common)?;
            stages::train(&cfg, &or_default(dataset, &out, DATASET_FILE), &out)
        }
        Command::Evaluate {
            common,
            model,
            dataset,
        } => {
            let (cfg, out) = load(common)?;
            stages::evaluate(
                &cfg,
                &or_default(model, &out, MODEL_FILE),
                &or_default(dataset, &out, TEST_FILE),
                &out,
            )
        }
        Command::Monitor {
            common,
            model,
            reference,
            trace,
        } => {
            let (cfg, out) = load(common)?;
            stages::monitor(
                &cfg,
                &or_default(model, &out, MODEL_FILE),
                &or_default(reference, &out, TRAIN_FILE),
                trace.as_deref(),
                &out,
            )
        }
        Command::Report {
            common,
            dir,
            external,
        } => {
            let (cfg, out) = load(common)?;
            let dir = dir.clone().unwrap_or_else(|| out.clone());
            stages::report(&cfg, &dir, &out, external.as_deref())
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Invariant(_) => EXIT_INVARIANT,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_USAGE);
    }
    match run(&cli.command) {
        Ok(written) => {
            for p in written {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
