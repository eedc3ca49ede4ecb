//! `rca <experiment> [--config FILE] [--out DIR] [--seed N] [--instances N] [--full-scale]`
//!
//! Exit status: 0 on success, 2 for configuration errors, 3 for numerical
//! failures, 1 for anything else (I/O).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use rca_core::experiments::{run_experiment, write_outputs, ExperimentConfig, ExperimentKind};
use rca_core::par::set_default_exec;
use rca_core::{Error, Exec};

#[derive(Parser, Debug)]
#[command(name = "rca", version, about = "Reproduce the memory and task-error experiments")]
struct Args {
    /// memory-curve, memory-vs-alpha, narma10, mackey-glass or topology-sweep
    experiment: String,
    /// JSON configuration; omitted fields take the experiment's defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output root; files go to `<out>/<experiment>/`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed; instance `i` uses `seed + i`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    instances: Option<usize>,
    /// Use the large published setting where it differs from the defaults.
    #[arg(long)]
    full_scale: bool,
    /// Run every loop on the calling thread.
    #[arg(long)]
    sequential: bool,
}

fn run(args: &Args) -> Result<PathBuf, Error> {
    let kind: ExperimentKind = args.experiment.parse()?;
    let text = match &args.config {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?,
        None => "{}".to_owned(),
    };
    let mut cfg = ExperimentConfig::from_json(&text, Some(kind), args.full_scale)?;
    if let Some(seed) = args.seed {
        cfg.base_seed = seed;
    }
    if let Some(n) = args.instances {
        cfg.instances = n;
    }
    if let Some(out) = &args.out {
        cfg.output = out.clone();
    }
    cfg.validate()?;
    let exec = if args.sequential { Exec::Sequential } else { Exec::default() };
    set_default_exec(exec);
    log::info!("running {kind} with {} instance(s)", cfg.instances);
    let result = run_experiment(&cfg, exec)?;
    write_outputs(&result, &cfg.output)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match run(&args) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("rca: {e}");
            let code = if e.is_config() {
                2
            } else if e.is_numerical() {
                3
            } else {
                1
            };
            ExitCode::from(code)
        }
    }
}
