use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use asal::commands::{atlas, enumerate, illuminate, quantify, target};
use asal::{CommandKind, Preset, RunConfig, RunOptions};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "asal", version, about = "Search artificial-life simulations with image embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sep-CMA-ES toward prompts or a target image.
    Target(Common),
    /// Rank every Life-like rule by open-endedness.
    Enumerate(Common),
    /// Grow a diverse archive with the nearest-neighbour GA.
    Illuminate(Common),
    /// Interpolation, importance, population sweep or plateau analysis.
    Quantify(Common),
    /// Build an atlas mosaic from an illumination run.
    Atlas(Common),
}

#[derive(Args)]
struct Common {
    /// JSON file merged over the preset defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Checkpoint file to continue from.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, short)]
    quiet: bool,
    /// Print the resolved config and exit.
    #[arg(long)]
    print_config: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common) = match &cli.command {
        Command::Target(c) => (CommandKind::Target, c),
        Command::Enumerate(c) => (CommandKind::Enumerate, c),
        Command::Illuminate(c) => (CommandKind::Illuminate, c),
        Command::Quantify(c) => (CommandKind::Quantify, c),
        Command::Atlas(c) => (CommandKind::Atlas, c),
    };
    match execute(kind, common) {
        Ok(summary) => {
            let mut out = io::stdout().lock();
            match writeln!(out, "{summary}") {
                Err(e) if e.kind() != io::ErrorKind::BrokenPipe => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
                _ => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(kind: CommandKind, c: &Common) -> asal::Result<String> {
    let mut config = RunConfig::load(kind, c.preset, c.config.as_deref())?;
    if let Some(out) = &c.out {
        config.output_dir = out.clone();
    }
    if c.print_config {
        return Ok(config.to_json());
    }
    let opts = RunOptions { workers: c.workers, resume: c.resume.clone(), verbose: !c.quiet };
    let json = match kind {
        CommandKind::Target => serde_json::to_string_pretty(&target::run(&config, &opts)?),
        CommandKind::Enumerate => serde_json::to_string_pretty(&enumerate::run(&config, &opts)?),
        CommandKind::Illuminate => serde_json::to_string_pretty(&illuminate::run(&config, &opts)?),
        CommandKind::Quantify => serde_json::to_string_pretty(&quantify::run(&config, &opts)?),
        CommandKind::Atlas => serde_json::to_string_pretty(&atlas::run(&config, &opts)?),
    };
    Ok(json.expect("serializable summary"))
}
