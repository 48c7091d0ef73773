use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use eventalpha::pipeline::{Backend, Pipeline, RunConfig, StageReport};

#[derive(Parser)]
#[command(name = "eventalpha", version, about = "Event-driven alpha from social-media posts")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Log filter, e.g. `info` or `eventalpha=debug`.
    #[arg(long, global = true, default_value = "info")]
    log_level: String,
    /// Worker threads.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Annotation backend (overrides the config).
    #[arg(long, global = true, value_parser = parse_backend)]
    backend: Option<Backend>,
    /// Synthetic data seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Validate tweets and prices; write aligned tweets and returns.
    Ingest,
    /// Tone and event labels per tweet.
    Annotate,
    /// Exposure panel and event samples.
    Factors,
    /// Event studies, portfolio sorts and plot data.
    Backtest,
    /// Markdown metrics report.
    Report,
    /// Synthetic dataset with planted effects.
    Synth,
    /// Ingest through report.
    Run,
}

fn parse_backend(s: &str) -> Result<Backend, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown backend {s:?} (mock, llm, replay)"))
}

fn execute(cli: &Cli) -> eventalpha::Result<Vec<StageReport>> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default().with_base("."),
    };
    if let Some(n) = cli.workers {
        config.workers = Some(n);
    }
    if let Some(b) = cli.backend {
        config.backend = b;
    }
    if let Some(s) = cli.seed {
        config.synth.seed = s;
    }
    let pipeline = match &cli.out {
        Some(out) => Pipeline::with_out(config, out)?,
        None => Pipeline::new(config)?,
    };
    Ok(match cli.command {
        Command::Ingest => vec![pipeline.ingest()?],
        Command::Annotate => vec![pipeline.annotate()?],
        Command::Factors => vec![pipeline.factors()?],
        Command::Backtest => vec![pipeline.backtest()?],
        Command::Report => vec![pipeline.report()?],
        Command::Synth => vec![pipeline.synth()?],
        Command::Run => pipeline.run_all()?,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let filter = tracing_subscriber::EnvFilter::try_new(&cli.log_level)
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();
    match execute(&cli) {
        Ok(reports) => {
            for r in reports {
                println!("{}: {}", r.stage, r.dir.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
