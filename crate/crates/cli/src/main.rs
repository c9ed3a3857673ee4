use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ormer::harness::config::magnitude_from_f64;
use ormer::harness::synth::{self, SynthKind};
use ormer::harness::{
    compare, emit_report, inject_attack, load_feed, save_feed, AttackSpec, AttackTargets, Config, HarnessError,
    OracleKind,
};
use serde_json::json;

/// Replay price feeds through median and baseline oracles.
#[derive(Parser)]
#[command(name = "ormer", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay one oracle over a feed and write its report.
    Replay(ReplayArgs),
    /// Replay several oracles over a feed and score them side by side.
    Compare(CompareArgs),
    /// Generate a seeded synthetic feed.
    Synth(SynthArgs),
    /// Scale selected points of a feed under a per-window budget.
    Attack(AttackArgs),
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    oracle: String,
    /// Overrides the config's window.
    #[arg(long)]
    window: Option<u32>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated oracle names.
    #[arg(long, value_delimiter = ',')]
    oracles: Vec<String>,
    #[arg(long)]
    window: Option<u32>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    kind: String,
    #[arg(long)]
    seconds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    input: PathBuf,
    /// Most manipulated points in any run of `window` points.
    #[arg(long)]
    beta: usize,
    #[arg(long)]
    magnitude: f64,
    /// Comma-separated point indices.
    #[arg(long, value_delimiter = ',', required = true)]
    at: Vec<usize>,
    #[arg(long, default_value_t = 25)]
    window: usize,
    #[arg(long)]
    out: PathBuf,
}

fn load_config(path: Option<&Path>) -> Result<Config, HarnessError> {
    path.map_or_else(|| Ok(Config::default()), Config::load)
}

fn run_comparison(input: &Path, config: &Config, out: &Path) -> Result<(), HarnessError> {
    let feed = load_feed(input)?;
    let run = compare(&feed, config)?;
    for w in &run.report.warnings {
        eprintln!("warning: {}", w.0);
    }
    let written = emit_report(out, &run)?;
    let files: Vec<String> = written.iter().map(|p| p.display().to_string()).collect();
    println!("{}", json!({ "written": files }));
    Ok(())
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Replay(a) => {
            let mut config = load_config(a.config.as_deref())?;
            config.oracles = vec![a.oracle.parse()?];
            if let Some(w) = a.window {
                config.window = w;
            }
            run_comparison(&a.input, &config, &a.out)
        }
        Command::Compare(a) => {
            let mut config = load_config(a.config.as_deref())?;
            if !a.oracles.is_empty() {
                config.oracles = a.oracles.iter().map(|s| s.parse()).collect::<Result<Vec<OracleKind>, _>>()?;
            }
            if let Some(w) = a.window {
                config.window = w;
            }
            run_comparison(&a.input, &config, &a.out)
        }
        Command::Synth(a) => {
            let kind: SynthKind = a.kind.parse()?;
            let feed = synth::synth(kind, a.seconds, a.seed)?;
            save_feed(&feed, &a.out)?;
            println!("{}", json!({ "points": feed.len(), "out": a.out.display().to_string() }));
            Ok(())
        }
        Command::Attack(a) => {
            let feed = load_feed(&a.input)?;
            let spec = AttackSpec {
                beta: a.beta,
                window: a.window,
                targets: AttackTargets::Indices(a.at),
                magnitude: magnitude_from_f64(a.magnitude)?,
            };
            let outcome = inject_attack(&feed, &spec, 0)?;
            save_feed(&outcome.series, &a.out)?;
            println!("{}", json!({ "manipulated": outcome.manipulated, "out": a.out.display().to_string() }));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let message = e.render().to_string();
            eprintln!("{}", json!({ "error": "usage", "message": message.trim(), "row": null }));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string(), "row": e.row() }));
            ExitCode::FAILURE
        }
    }
}
