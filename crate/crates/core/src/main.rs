// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rtlbench::contamination::parse_k_grid;
use rtlbench::pipeline::{self, Config, PipelineError, ShuttleSource};

#[derive(Parser)]
#[command(name = "rtlbench", version, about = "Contextual module-completion benchmark toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Build tasks.jsonl, dedup_report.jsonl and release.json from shuttle corpora.
    Build {
        #[command(flatten)]
        common: Common,
        /// Extra shuttle as NAME:ORDINAL:ROOT (repeatable).
        #[arg(long = "shuttle", value_parser = parse_shuttle)]
        shuttles: Vec<ShuttleSource>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Score candidate modules against the golden ones.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Samples, mean LOC and mean complexity per shuttle.
    Stats {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        tasks: PathBuf,
    },
    /// Min-K contamination curves per model and shuttle subset.
    Audit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        logprobs: PathBuf,
        /// Comma-separated K percentages, e.g. 10,15,20,25,30.
        #[arg(long)]
        k_grid: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn parse_shuttle(s: &str) -> Result<ShuttleSource, String> {
    let mut it = s.splitn(3, ':');
    match (it.next(), it.next(), it.next()) {
        (Some(name), Some(ord), Some(root)) if !name.is_empty() => Ok(ShuttleSource {
            name: name.into(),
            ordinal: ord.parse().map_err(|_| format!("bad ordinal `{ord}`"))?,
            root: PathBuf::from(root),
        }),
        _ => Err("expected NAME:ORDINAL:ROOT".into()),
    }
}

fn load(common: &Common) -> Result<Config, PipelineError> {
    let mut cfg = match &common.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(n) = common.jobs {
        // Fails only if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(cfg)
}

fn rebase(cfg: &mut Config, config_path: Option<&Path>) {
    let Some(dir) = config_path.and_then(Path::parent) else { return };
    for s in &mut cfg.shuttles {
        if s.root.is_relative() {
            s.root = dir.join(&s.root);
        }
    }
}

fn run(cli: Cli) -> Result<i32, PipelineError> {
    match cli.command {
        Command::Build { common, shuttles, out } => {
            let mut cfg = load(&common)?;
            rebase(&mut cfg, common.config.as_deref());
            cfg.shuttles.extend(shuttles);
            let r = pipeline::cmd_build(&cfg, &out)?;
            let s = &r.stages;
            println!(
                "scanned {} -> accepted {} -> merged {} -> parsed {} -> tasks {} -> design dedup {} -> module dedup {} -> verified {}",
                s.scanned, s.accepted, s.merged, s.parsed, s.tasks, s.after_design_dedup, s.after_module_dedup, s.verified
            );
            for (name, n) in &r.manifest.per_shuttle {
                println!("  {name}: {n} tasks");
            }
            Ok(r.outcome.exit_code())
        }
        Command::Eval {
            common,
            tasks,
            candidates,
            out,
        } => {
            let cfg = load(&common)?;
            let r = pipeline::cmd_eval(&cfg, &tasks, &candidates, &out)?;
            print!("{}", pipeline::score_table(&r.summary));
            Ok(r.outcome.exit_code())
        }
        Command::Stats { common, tasks } => {
            let cfg = load(&common)?;
            print!("{}", pipeline::stats_table(&pipeline::cmd_stats(&cfg, &tasks)?));
            Ok(0)
        }
        Command::Audit {
            common,
            tasks,
            logprobs,
            k_grid,
            out,
        } => {
            let mut cfg = load(&common)?;
            if let Some(g) = k_grid {
                cfg.k_grid = parse_k_grid(&g).map_err(|e| PipelineError::Config(e.to_string()))?;
            }
            let (report, outcome) = pipeline::cmd_audit(&cfg, &tasks, &logprobs, &out)?;
            print!("{}", pipeline::audit_table(&report));
            Ok(outcome.exit_code())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
