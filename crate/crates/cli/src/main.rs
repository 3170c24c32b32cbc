//! `layermc` command-line interface.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use layermc::pipeline::{self, DataKind, Overrides, WorldChoice};
use layermc::sampler::with_threads;
use layermc::Error;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "layermc", version, about = "Parallel-tempered MCMC inversion of layered 3-D geological models")]
struct Cli {
    /// Worker threads; defaults to the machine's parallelism. Outputs do not
    /// depend on it.
    #[arg(long, global = true, env = "LAYERMC_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `sampler.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `outputs.directory`.
    #[arg(long)]
    output: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> layermc::Result<layermc::io::LoadedConfig> {
        pipeline::load(
            &self.config,
            &Overrides {
                seed: self.seed,
                output: self.output.clone(),
            },
        )
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Gravity,
    Magnetic,
    Mt,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the posterior from a fresh start.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Stop and checkpoint once this many iterations have completed.
        #[arg(long)]
        stop_after: Option<u64>,
    },
    /// Continue a stopped run from its checkpoint.
    Resume {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        stop_after: Option<u64>,
    },
    /// Convergence, residual and entropy diagnostics of a run.
    Diagnose {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Write the voxel grid of one recorded world as CSV.
    Voxelise {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Recorded row of the untempered chain.
        #[arg(long, conflicts_with = "prior_mean", required_unless_present = "prior_mean")]
        sample: Option<usize>,
        #[arg(long, default_value_t = 0)]
        stack: usize,
        /// Voxelise the prior-mean world instead of a sample.
        #[arg(long)]
        prior_mean: bool,
        #[arg(long, default_value = "voxels.csv")]
        out: PathBuf,
    },
    /// Keep a seeded random subset of the rows of a sensor file.
    Subsample {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn execute(cmd: Command) -> layermc::Result<Value> {
    match cmd {
        Command::Run { cfg, stop_after } => {
            let c = cfg.load()?;
            let o = pipeline::run(&c, stop_after)?;
            Ok(run_summary(&o))
        }
        Command::Resume { cfg, stop_after } => {
            let c = cfg.load()?;
            let o = pipeline::resume(&c, stop_after)?;
            Ok(run_summary(&o))
        }
        Command::Diagnose { cfg } => {
            let c = cfg.load()?;
            let r = pipeline::diagnose(&c)?;
            Ok(json!({
                "report": c.output_dir().join(pipeline::DIAGNOSTICS_DIR).join(pipeline::REPORT_FILE),
                "summary": r.summary,
                "unconverged": r.unconverged,
            }))
        }
        Command::Voxelise {
            cfg,
            sample,
            stack,
            prior_mean: _,
            out,
        } => {
            let c = cfg.load()?;
            let choice = match sample {
                Some(row) => WorldChoice::Sample { stack, row },
                None => WorldChoice::PriorMean,
            };
            let n = pipeline::voxelise(&c, choice, &out)?;
            Ok(json!({ "file": out, "voxels": n }))
        }
        Command::Subsample {
            input,
            kind,
            count,
            seed,
            out,
        } => {
            let kind = match kind {
                Kind::Gravity => DataKind::Gravity,
                Kind::Magnetic => DataKind::Magnetic,
                Kind::Mt => DataKind::Mt,
            };
            let n = pipeline::subsample_file(&input, kind, count, seed, &out)?;
            Ok(json!({ "file": out, "rows": n }))
        }
    }
}

fn run_summary(o: &pipeline::RunOutcome) -> Value {
    json!({
        "output": o.output_dir,
        "config_hash": o.meta.config_hash,
        "seed": o.meta.seed,
        "iterations_completed": o.meta.iterations_completed,
        "complete": o.meta.complete,
        "wall_seconds": o.meta.wall_seconds,
    })
}

fn error_json(kind: &str, message: String, details: Vec<String>) -> Value {
    json!({ "error": { "kind": kind, "message": message, "details": details } })
}

fn fail(e: &Error) -> ExitCode {
    let details = match e {
        Error::Config(v) => v.clone(),
        _ => Vec::new(),
    };
    eprintln!("{}", error_json(e.kind(), e.to_string(), details));
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.render().to_string();
            let message = text.lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            eprintln!("{}", error_json("usage", message, vec![text]));
            return ExitCode::from(2);
        }
    };
    match with_threads(cli.threads, || execute(cli.command)) {
        Ok(Ok(v)) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Ok(Err(e)) | Err(e) => fail(&e),
    }
}
