//! `requery` binary: run search-agent episodes, forge benchmarks, and
//! evaluate results.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use requery_cli::commands::{cmd_eval, cmd_forge, cmd_run, EvalSummary};
use requery_cli::config::{load_toml, EvalConfig, ForgeConfig, RunConfig};

#[derive(Parser)]
#[command(
    name = "requery",
    version,
    about = "Self-correcting search-agent engine: episodes, rewards, benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run episodes over a dataset and export traces, rewards, advantages,
    /// and an evaluation report.
    Run {
        /// TOML config; flags below override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Episodes per sample.
        #[arg(long)]
        group_size: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Rewrite a fraction of seed questions into fictional ones backed by
    /// injected documents, with a leakage audit.
    Forge {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Seed samples, one JSON object per line.
        #[arg(long)]
        seeds: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Fraction of seeds to fictionalize.
        #[arg(long)]
        fraction: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score an existing trace file, or rerun samples across search budgets
    /// when --budgets is given.
    Eval {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        traces: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Comma-separated, strictly ascending search budgets.
        #[arg(long, value_delimiter = ',')]
        budgets: Option<Vec<usize>>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load_or_default<T: serde::de::DeserializeOwned + Default>(
    path: &Option<PathBuf>,
) -> anyhow::Result<T> {
    match path {
        Some(p) => load_toml(p),
        None => Ok(T::default()),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run {
            config,
            corpus,
            dataset,
            out_dir,
            group_size,
            seed,
        } => {
            let mut cfg: RunConfig = load_or_default(&config)?;
            cfg.corpus = corpus.or(cfg.corpus);
            cfg.dataset = dataset.or(cfg.dataset);
            cfg.out_dir = out_dir.or(cfg.out_dir);
            cfg.group_size = group_size.unwrap_or(cfg.group_size);
            cfg.base_seed = seed.unwrap_or(cfg.base_seed);
            let summary = cmd_run(&cfg)?;
            println!(
                "ran {} episodes ({} errored), em {:.4}, {} advantage rows -> {}",
                summary.episodes,
                summary.errored,
                summary.em,
                summary.advantage_rows,
                summary.out_dir.display()
            );
        }
        Command::Forge {
            config,
            seeds,
            corpus,
            out_dir,
            fraction,
            seed,
        } => {
            let mut cfg: ForgeConfig = load_or_default(&config)?;
            cfg.seeds = seeds.or(cfg.seeds);
            cfg.corpus = corpus.or(cfg.corpus);
            cfg.out_dir = out_dir.or(cfg.out_dir);
            cfg.fraction = fraction.unwrap_or(cfg.fraction);
            cfg.seed = seed.unwrap_or(cfg.seed);
            let summary = cmd_forge(&cfg)?;
            println!(
                "forged {} samples ({} fictional, {} docs injected), audit {} -> {}",
                summary.samples,
                summary.fictional,
                summary.injected_docs,
                if summary.audit_clean { "clean" } else { "LEAKY" },
                summary.out_dir.display()
            );
        }
        Command::Eval {
            config,
            traces,
            dataset,
            corpus,
            out_dir,
            budgets,
            seed,
        } => {
            let mut cfg: EvalConfig = load_or_default(&config)?;
            cfg.traces = traces.or(cfg.traces);
            cfg.dataset = dataset.or(cfg.dataset);
            cfg.corpus = corpus.or(cfg.corpus);
            cfg.out_dir = out_dir.or(cfg.out_dir);
            cfg.budgets = budgets.unwrap_or(cfg.budgets);
            cfg.base_seed = seed.unwrap_or(cfg.base_seed);
            match cmd_eval(&cfg)? {
                EvalSummary::Traces {
                    out_dir,
                    report,
                    impact,
                } => println!(
                    "evaluated {} episodes, em {:.4}, judge impact +{}/-{}/{} -> {}",
                    report.n,
                    report.em,
                    impact.positive,
                    impact.negative,
                    impact.normal,
                    out_dir.display()
                ),
                EvalSummary::Sweep { out_dir, rows } => {
                    for row in &rows {
                        println!("budget {}: em {:.4}", row.budget, row.em);
                    }
                    println!("-> {}", out_dir.display());
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
