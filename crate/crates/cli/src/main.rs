//! `owrf`: generate a synthetic dataset, train, evaluate, stream and rerun
//! discovery, all inside one run directory.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use owrf::config::PipelineConfig;
use owrf::evaluation::format_percent;
use owrf::pipeline;
use owrf::{Error, ErrorKind};

#[derive(Parser)]
#[command(
    name = "owrf",
    version,
    about = "Incremental open-set recognition for RF emitters"
)]
struct Cli {
    /// Pipeline configuration (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Run directory
    #[arg(long, global = true, default_value = "run")]
    out: PathBuf,

    /// Overrides the root seed from the config
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Print a short summary on stderr
    #[arg(long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic I/Q records and manifests
    Generate,
    /// Train the encoder and fit the open-set gate
    Train,
    /// Score the checkpoint on a dataset split
    Eval {
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Stream unseen records through the gate with discovery and updates
    Stream,
    /// Rerun discovery on the buffers saved by `stream`
    Discover,
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 2,
        ErrorKind::MissingArtifact => 3,
        ErrorKind::Budget => 4,
        ErrorKind::Numerical => 5,
        ErrorKind::Data | ErrorKind::Io => 1,
    }
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<PipelineConfig, Error> {
    let path = path.ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = PipelineConfig::load(path)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), Error> {
    let cfg = load_config(cli.config.as_deref(), cli.seed)?;
    let out = cli.out.as_path();
    match &cli.command {
        Command::Generate => {
            let s = pipeline::cmd_generate(&cfg, out)?;
            if cli.verbose {
                eprintln!(
                    "generated {} records over {} classes ({} known, {} unknown)",
                    s.records, s.classes, s.known_records, s.unknown_records
                );
            }
        }
        Command::Train => {
            let s = pipeline::cmd_train(&cfg, out)?;
            if cli.verbose {
                let last = s.epochs.last().map_or(f64::NAN, |e| e.loss.total);
                eprintln!(
                    "trained on {} samples, {} classes, final loss {last:.4}",
                    s.n_train,
                    s.classes.len()
                );
            }
        }
        Command::Eval { split } => {
            let r = pipeline::cmd_eval(&cfg, out, split)?;
            if cli.verbose {
                eprintln!("{}", r.summary());
            }
        }
        Command::Stream => {
            let s = pipeline::cmd_stream(&cfg, out)?;
            if cli.verbose {
                eprintln!(
                    "{} samples, {} rejected, {} discovery rounds, {} classes",
                    s.stream_samples,
                    s.rejected,
                    s.rounds,
                    s.classes.len()
                );
                eprintln!("open set: {}", s.open_set.summary());
                let acc = |v: Option<f64>| {
                    v.map_or("n/a".to_string(), |v| format!("{}%", format_percent(v)))
                };
                eprintln!(
                    "closed set: Acc_old {} Acc_new {}",
                    acc(s.closed_set.acc_old),
                    acc(s.closed_set.acc_new)
                );
                for note in &s.notes {
                    eprintln!("note: {note}");
                }
            }
        }
        Command::Discover => {
            let reports = pipeline::cmd_discover(&cfg, out)?;
            if cli.verbose {
                for r in &reports {
                    eprintln!(
                        "k*={} ({:?}), {} clusters accepted",
                        r.k_star,
                        r.rule,
                        r.accepted_clusters.len()
                    );
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e.kind();
            let body = serde_json::json!({
                "error": e.tag(),
                "kind": format!("{kind:?}").to_lowercase(),
                "message": e.to_string(),
                "exit_code": exit_code(kind),
            });
            eprintln!("{body}");
            ExitCode::from(exit_code(kind))
        }
    }
}
