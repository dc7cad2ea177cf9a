use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use coldtree::commands::{self, Invocation, TreeFormat};
use coldtree::Config;

#[derive(Parser)]
#[command(name = "coldtree", version, about = "Decision-tree rating elicitation experiments")]
struct Cli {
    /// TOML config file; library defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides every seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic ratings file.
    Generate,
    /// Run the configured strategies and write per-iteration results.
    Simulate,
    /// Print the first-round tree of a tree strategy.
    InspectTree {
        #[arg(long)]
        strategy: Option<String>,
        /// Number of levels to print.
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        json: bool,
    },
    /// Answer tree queries at the terminal.
    Interactive {
        #[arg(long)]
        strategy: Option<String>,
        /// Maximum number of queries.
        #[arg(long)]
        depth: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    let inv = Invocation {
        config_path: cli.config.clone(),
        out_dir: cli.out.clone(),
    };
    match cli.command {
        Command::Generate => {
            let path = commands::generate(&cfg, &inv)?;
            println!("{}", path.display());
        }
        Command::Simulate => {
            let outcomes = commands::simulate(&cfg, &inv)?;
            for o in &outcomes {
                let last = o.records.last().expect("at least one record");
                println!("{}\trmse {:.4} after {} iterations", o.name, last.rmse, last.iteration);
            }
            println!("{}", inv.out_dir.join("results.csv").display());
        }
        Command::InspectTree {
            strategy,
            depth,
            json,
        } => {
            if let Some(s) = strategy {
                cfg.inspect.strategy = s;
            }
            if depth.is_some() {
                cfg.inspect.depth = depth;
            }
            let format = if json { TreeFormat::Json } else { TreeFormat::Text };
            print!("{}", commands::inspect_tree(&cfg, format)?);
        }
        Command::Interactive { strategy, depth } => {
            if let Some(s) = strategy {
                cfg.interactive.strategy = s;
            }
            if depth.is_some() {
                cfg.interactive.depth = depth;
            }
            let stdin = std::io::stdin();
            commands::interactive(&cfg, stdin.lock(), std::io::stdout())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
