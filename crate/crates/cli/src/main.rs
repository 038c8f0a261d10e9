use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use centerdepth::config::parse_config;
use centerdepth::pipeline::{run, Command as PipelineCommand};

/// Center-point object depth estimation pipeline.
#[derive(Parser)]
#[command(name = "centerdepth", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// TOML config file; missing file is an error, omitted flag uses defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global seed, overriding the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output root for run directories.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Dotted-path config overrides, e.g. `crf.sigma_f=0.2`.
    #[arg(long = "override", global = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic dataset.
    Gen,
    /// Refine center depths over a dataset (`--input <dataset dir>`).
    Refine {
        #[arg(long)]
        input: PathBuf,
    },
    /// Evaluate a pairs file (`--input <pairs.jsonl>`).
    Eval {
        #[arg(long)]
        input: PathBuf,
    },
    /// Plan a BEV path over a dataset's first frame (`--input <dataset dir>`).
    Plan {
        #[arg(long)]
        input: PathBuf,
    },
    /// Full pipeline: gen, refine, eval, plan in one run directory.
    Demo,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, input) = match &cli.command {
        Cmd::Gen => (PipelineCommand::Gen, None),
        Cmd::Refine { input } => (PipelineCommand::Refine, Some(input.clone())),
        Cmd::Eval { input } => (PipelineCommand::Eval, Some(input.clone())),
        Cmd::Plan { input } => (PipelineCommand::Plan, Some(input.clone())),
        Cmd::Demo => (PipelineCommand::Demo, None),
    };
    let cfg = match parse_config(
        cli.config.as_deref(),
        &cli.overrides,
        cli.seed,
        cli.out.as_deref(),
    ) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(&cfg, cmd, input.as_deref()) {
        Ok(run_dir) => {
            println!("{}", run_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
