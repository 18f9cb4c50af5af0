use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use leafkit::cli_reports::{cmd_analyze, cmd_grad_check, cmd_init_fb, cmd_jsd, cmd_train, ExperimentConfig};
use leafkit::exec::init_thread_pool;
use leafkit::task_harness::Split;
use leafkit::{LeafError, Result};

#[derive(Parser)]
#[command(name = "leafkit", version, about = "Learnable Gabor/PCEN audio frontend toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration (`key = value` lines); defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Replace an existing run directory.
    #[arg(long, global = true)]
    overwrite: bool,

    /// Training seed, overriding `train.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the initial filterbank as CSV and SVG.
    InitFb,
    /// Train a model and record metrics, snapshots and checkpoints.
    Train,
    /// Measure filter movement in a run directory.
    Analyze,
    /// Compare analytic gradients with finite differences.
    GradCheck {
        #[arg(long, default_value_t = 3)]
        instances: usize,
    },
    /// Per-filter distance between two filterbank CSV files.
    Jsd { a: PathBuf, b: PathBuf },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn threads_from_env() -> Result<()> {
    if let Ok(v) = std::env::var("LEAFKIT_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| LeafError::Config(format!("LEAFKIT_THREADS must be a positive integer, got `{v}`")))?;
        init_thread_pool(n);
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    threads_from_env()?;
    let cfg = load_config(cli)?;
    let out: &Path = &cfg.out_dir;
    match &cli.command {
        Command::InitFb => {
            let (fb, paths) = cmd_init_fb(&cfg, out)?;
            println!("{} filters ({})", fb.n_filters(), cfg.init.kind);
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Command::Train => {
            let run = cmd_train(&cfg, out, cli.overwrite)?;
            for r in run.metrics.iter().filter(|r| r.split != Split::Train) {
                println!(
                    "epoch {:>3} {:<5} loss {:.4} acc {:.3} lr {:.2e} max_snr {} dB",
                    r.epoch,
                    r.split.as_str(),
                    r.loss,
                    r.metrics.accuracy,
                    r.lr,
                    r.max_snr_db
                );
            }
            println!("run written to {}", out.display());
        }
        Command::Analyze => {
            let a = cmd_analyze(&cfg, out)?;
            println!(
                "{} epochs, mean final JSD {:.4}, largest movement: filter {}",
                a.trajectory.n_epochs().saturating_sub(1),
                a.summary.final_mean,
                a.summary.max_filter
            );
            for p in a.paths {
                println!("wrote {}", p.display());
            }
        }
        Command::GradCheck { instances } => {
            let reports = cmd_grad_check(&cfg, *instances)?;
            let mut ok = true;
            for (i, r) in reports.iter().enumerate() {
                println!("instance {i}\n{r}\n");
                ok &= r.passed();
            }
            if !ok {
                return Err(LeafError::Numerics { stage: "grad-check" });
            }
        }
        Command::Jsd { a, b } => {
            let d = cmd_jsd(&cfg, a, b)?;
            println!("filter_index,jsd");
            for (n, v) in d.iter().enumerate() {
                println!("{n},{v}");
            }
            println!("# mean={}", d.iter().sum::<f64>() / d.len().max(1) as f64);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
