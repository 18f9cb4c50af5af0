//! Command implementations behind the `leafkit` binary: configuration,
//! run orchestration and CSV/SVG reports.

mod config;
pub mod svg;

use std::fs;
use std::path::{Path, PathBuf};

pub use config::{ExperimentConfig, Toggle};

use crate::diffengine::{grad_check, random_instance, GradCheckOptions, GradCheckReport};
use crate::error::{LeafError, Result};
use crate::exec::ExecMode;
use crate::filterbank::GaborFilterbank;
use crate::initializers::build_filterbank;
use crate::sensitivity::{filter_pmf_with, jsd, summarize, trajectory_with, JsdTrajectory, Summary};
use crate::task_harness::{make_dataset, train, RunDir, TrainingRun};

pub const FILTERBANK_CSV: &str = "filterbank.csv";
pub const FILTERBANK_SVG: &str = "filterbank.svg";
pub const ANALYSIS_DIR: &str = "analysis";
pub const TRAJECTORY_CSV: &str = "trajectory.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const JSD_SVG: &str = "jsd.svg";
pub const RESPONSES_SVG: &str = "responses.svg";

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| LeafError::io(path, e))
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| LeafError::io(path, e))
}

/// Writes the initial filterbank CSV and its centre/bandwidth plot into
/// `out`. Returns the filterbank and the written paths.
pub fn cmd_init_fb(cfg: &ExperimentConfig, out: &Path) -> Result<(GaborFilterbank, Vec<PathBuf>)> {
    let fb = build_filterbank(&cfg.init, cfg.sample_rate_hz, cfg.kernel_width)?;
    mkdir(out)?;
    let csv = out.join(FILTERBANK_CSV);
    let svg_path = out.join(FILTERBANK_SVG);
    write(&csv, &fb.to_csv(cfg.sample_rate_hz, &[cfg.init.comment()]))?;
    let title = format!("{} initialisation, {} filters", cfg.init.kind, fb.n_filters());
    let plot = svg::filterbank_svg(
        &[svg::Layer {
            filterbank: &fb,
            label: cfg.init.kind.as_str(),
        }],
        cfg.sample_rate_hz,
        &title,
    );
    write(&svg_path, &plot)?;
    Ok((fb, vec![csv, svg_path]))
}

/// Trains into `out`. On failure a MANIFEST describing the error is left
/// next to whatever the run had already written.
pub fn cmd_train(cfg: &ExperimentConfig, out: &Path, overwrite: bool) -> Result<TrainingRun> {
    let train_cfg = cfg.train_config();
    train_cfg.validate()?;
    let dataset = make_dataset(&cfg.task_spec(), cfg.sizes(), cfg.data_seed)?;
    build_filterbank(&cfg.init, cfg.sample_rate_hz, cfg.kernel_width)?;
    let dir = RunDir::create(out, overwrite)?;
    dir.write_config(&cfg.to_text())?;
    match train(&dataset, &cfg.init, &train_cfg, Some(&dir)) {
        Ok(run) => Ok(run),
        Err(e) => {
            let completed = dir.load_snapshots().map(|(s, _)| s.len().saturating_sub(1)).unwrap_or(0);
            let manifest = format!(
                "status = failed\nerror = {e}\ncompleted_epochs = {completed}\ncheckpoint = {}\n",
                dir.checkpoint_path().display()
            );
            dir.write_manifest(&manifest)?;
            Err(e)
        }
    }
}

/// Products of [`cmd_analyze`].
#[derive(Debug, Clone)]
pub struct Analysis {
    pub trajectory: JsdTrajectory,
    pub summary: Summary,
    pub paths: Vec<PathBuf>,
}

/// Reads the snapshots of a run and writes the distance trajectory, its
/// summary and two plots into `<run>/analysis/`.
pub fn cmd_analyze(cfg: &ExperimentConfig, run_dir: &Path) -> Result<Analysis> {
    let dir = RunDir::open(run_dir);
    let (snapshots, fs_hz) = dir.load_snapshots()?;
    let traj = trajectory_with(&snapshots, cfg.bins, cfg.response, ExecMode::default())?;
    let summary = summarize(&traj)?;
    let out = run_dir.join(ANALYSIS_DIR);
    mkdir(&out)?;
    let paths = vec![
        out.join(TRAJECTORY_CSV),
        out.join(SUMMARY_CSV),
        out.join(JSD_SVG),
        out.join(RESPONSES_SVG),
    ];
    write(&paths[0], &traj.to_csv())?;
    write(&paths[1], &summary.to_csv())?;
    let title = format!("Distance from initialisation (mean final JSD {:.3})", summary.final_mean);
    write(&paths[2], &svg::jsd_svg(&traj, &title))?;
    let first = &snapshots[0];
    let last = snapshots.last().unwrap_or(first);
    let epochs = snapshots.len() - 1;
    let last_label = format!("epoch {epochs}");
    let overlay = svg::filterbank_svg(
        &[
            svg::Layer {
                filterbank: first,
                label: "initialisation",
            },
            svg::Layer {
                filterbank: last,
                label: &last_label,
            },
        ],
        fs_hz,
        "Filterbank before and after training",
    );
    write(&paths[3], &overlay)?;
    Ok(Analysis {
        trajectory: traj,
        summary,
        paths,
    })
}

/// Gradient check on `instances` random small problems seeded from
/// `cfg.seed`.
pub fn cmd_grad_check(cfg: &ExperimentConfig, instances: usize) -> Result<Vec<GradCheckReport>> {
    (0..instances as u64)
        .map(|i| {
            let (model, clip, label) = random_instance(cfg.seed.wrapping_add(i))?;
            grad_check(&model, &clip, label, &GradCheckOptions::default())
        })
        .collect()
}

/// Per-filter distance between two filterbank CSV files.
pub fn cmd_jsd(cfg: &ExperimentConfig, a: &Path, b: &Path) -> Result<Vec<f64>> {
    let read = |p: &Path| -> Result<GaborFilterbank> {
        let text = fs::read_to_string(p).map_err(|e| LeafError::io(p, e))?;
        Ok(GaborFilterbank::from_csv(&text)?.filterbank)
    };
    let (fa, fb) = (read(a)?, read(b)?);
    if fa.n_filters() != fb.n_filters() {
        return Err(LeafError::Snapshot(format!(
            "{} has {} filters, {} has {}",
            a.display(),
            fa.n_filters(),
            b.display(),
            fb.n_filters()
        )));
    }
    (0..fa.n_filters())
        .map(|n| {
            let p = filter_pmf_with(fa.eta[n], fa.sigma_bw[n], cfg.bins, cfg.response)?;
            let q = filter_pmf_with(fb.eta[n], fb.sigma_bw[n], cfg.bins, cfg.response)?;
            jsd(&p, &q)
        })
        .collect()
}
