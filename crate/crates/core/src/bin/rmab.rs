use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use rmab::harness::{aggregate_files, run, seed_instance, RunConfig, Series};
use rmab::lpql::{lambda_max_bound, LambdaGrid};
use rmab::oracles::{oracle_q_table, IndexMode, IndexTable, VI_MAX_ITER, VI_TOL};
use rmab::RmabInstance;

#[derive(Parser)]
#[command(
    name = "rmab",
    version,
    about = "Multi-action restless bandit experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the instance each seed of a run config would use.
    Gen {
        config: PathBuf,
        #[arg(short, long, default_value = "instances")]
        out: PathBuf,
    },
    /// Execute a run config and write per-seed and aggregate CSVs.
    Run {
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Export exact λ-grid Q-tables and multi-action indexes of an instance.
    Oracle {
        instance: PathBuf,
        #[arg(short, long, default_value = "oracle")]
        out: PathBuf,
        /// Grid upper end; defaults to the instance's reward/cost bound.
        #[arg(long)]
        lambda_max: Option<f64>,
        #[arg(long, default_value_t = 100)]
        n_lam: usize,
        /// Fail on arms that are not indexable instead of recording a fallback.
        #[arg(long)]
        strict: bool,
    },
    /// Recompute an aggregate from per-seed CSVs.
    Aggregate {
        inputs: Vec<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
        /// Aggregate trailing moving averages of instant reward instead.
        #[arg(long)]
        window: Option<usize>,
    },
}

fn base_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn execute(cmd: Command) -> rmab::Result<()> {
    match cmd {
        Command::Gen { config, out } => {
            let cfg = RunConfig::load(&config)?;
            std::fs::create_dir_all(&out)?;
            for &seed in &cfg.seeds {
                let inst = seed_instance(&cfg, seed, &base_dir(&config))?;
                let path = out.join(format!("seed{seed}.toml"));
                inst.save(&path)?;
                info!("wrote {}", path.display());
            }
        }
        Command::Run { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output.clone());
            let summary = run(&cfg, &base_dir(&config), &dir)?;
            for (alg, finals) in &summary.finals {
                let mean = finals.iter().sum::<f64>() / finals.len() as f64;
                println!(
                    "{alg:>16}  final mean cumulative reward {mean:.4} over {} seeds",
                    finals.len()
                );
            }
        }
        Command::Oracle {
            instance,
            out,
            lambda_max,
            n_lam,
            strict,
        } => {
            let inst = RmabInstance::load(&instance)?;
            std::fs::create_dir_all(&out)?;
            let lmax = match lambda_max {
                Some(l) => l,
                None => lambda_max_bound(&inst)?,
            };
            let table = oracle_q_table(&inst, LambdaGrid::new(lmax, n_lam)?, VI_TOL, VI_MAX_ITER)?;
            table.write_csv(File::create(out.join("q_table.csv"))?)?;
            let mode = if strict {
                IndexMode::Strict
            } else {
                IndexMode::Lenient
            };
            let idx = IndexTable::compute(&inst, 1e-9, mode)?;
            idx.write_csv(File::create(out.join("indexes.csv"))?)?;
            info!("wrote oracle tables to {}", out.display());
        }
        Command::Aggregate {
            inputs,
            out,
            window,
        } => {
            if inputs.is_empty() {
                return Err(rmab::RmabError::Config("no input CSVs".into()));
            }
            let which = window.map_or(Series::MeanCumulative, Series::MovingAverage);
            let rows = aggregate_files(&inputs, which, &out)?;
            info!("wrote {} rows to {}", rows.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
