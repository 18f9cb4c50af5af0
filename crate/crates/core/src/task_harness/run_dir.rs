//! On-disk layout of a training run:
//!
//! ```text
//! <run>/config.txt
//! <run>/metrics.csv
//! <run>/snapshots/epoch_000.csv ...
//! <run>/checkpoints/last.ckpt
//! <run>/MANIFEST            (only written when a run aborts)
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use super::MetricsRow;
use crate::diffengine::Checkpoint;
use crate::error::{LeafError, Result};
use crate::filterbank::GaborFilterbank;

pub const METRICS_FILE: &str = "metrics.csv";
pub const CONFIG_FILE: &str = "config.txt";
pub const MANIFEST_FILE: &str = "MANIFEST";
pub const SNAPSHOT_DIR: &str = "snapshots";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const CHECKPOINT_FILE: &str = "last.ckpt";

#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| LeafError::io(path, e))
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| LeafError::io(path, e))
}

impl RunDir {
    /// Creates a fresh run directory. An existing non-empty directory is
    /// refused unless `overwrite` is set, in which case it is cleared.
    pub fn create(root: &Path, overwrite: bool) -> Result<Self> {
        if root.exists() {
            let non_empty = fs::read_dir(root)
                .map_err(|e| LeafError::io(root, e))?
                .next()
                .is_some();
            if non_empty {
                if !overwrite {
                    return Err(LeafError::Config(format!(
                        "run directory {} already exists; pass --overwrite to replace it",
                        root.display()
                    )));
                }
                fs::remove_dir_all(root).map_err(|e| LeafError::io(root, e))?;
            }
        }
        mkdir(&root.join(SNAPSHOT_DIR))?;
        mkdir(&root.join(CHECKPOINT_DIR))?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn open(root: &Path) -> Self {
        Self {
            root: root.to_path_buf(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn snapshot_path(&self, epoch: usize) -> PathBuf {
        self.root.join(SNAPSHOT_DIR).join(format!("epoch_{epoch:03}.csv"))
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.root.join(CHECKPOINT_DIR).join(CHECKPOINT_FILE)
    }

    pub fn write_config(&self, text: &str) -> Result<()> {
        write(&self.root.join(CONFIG_FILE), text)
    }

    pub fn write_snapshot(&self, epoch: usize, fb: &GaborFilterbank, fs_hz: u32, comments: &[String]) -> Result<()> {
        write(&self.snapshot_path(epoch), &fb.to_csv(fs_hz, comments))
    }

    pub fn write_metrics(&self, rows: &[MetricsRow]) -> Result<()> {
        write(&self.root.join(METRICS_FILE), &MetricsRow::to_csv(rows))
    }

    /// Writes through a temporary file so an interrupted write never
    /// replaces the last good checkpoint.
    pub fn write_checkpoint(&self, ck: &Checkpoint) -> Result<()> {
        let path = self.checkpoint_path();
        let tmp = path.with_extension("tmp");
        write(&tmp, &ck.to_text())?;
        fs::rename(&tmp, &path).map_err(|e| LeafError::io(&path, e))
    }

    pub fn write_manifest(&self, text: &str) -> Result<()> {
        write(&self.root.join(MANIFEST_FILE), text)
    }

    /// Snapshots in epoch order, with the sample rate recorded in them.
    pub fn load_snapshots(&self) -> Result<(Vec<GaborFilterbank>, u32)> {
        let dir = self.root.join(SNAPSHOT_DIR);
        let mut found: Vec<(usize, PathBuf)> = Vec::new();
        if dir.is_dir() {
            for entry in fs::read_dir(&dir).map_err(|e| LeafError::io(&dir, e))? {
                let path = entry.map_err(|e| LeafError::io(&dir, e))?.path();
                let epoch = path
                    .file_name()
                    .and_then(|n| n.to_str())
                    .and_then(|n| n.strip_prefix("epoch_"))
                    .and_then(|n| n.strip_suffix(".csv"))
                    .and_then(|n| n.parse().ok());
                if let Some(e) = epoch {
                    found.push((e, path));
                }
            }
        }
        if found.is_empty() {
            return Err(LeafError::Snapshot(format!(
                "no filterbank snapshots under {}",
                dir.display()
            )));
        }
        found.sort();
        if let Some((i, (e, _))) = found.iter().enumerate().find(|(i, (e, _))| i != e) {
            return Err(LeafError::Snapshot(format!(
                "snapshot sequence has a gap: expected epoch {i}, found {e}"
            )));
        }
        let mut fs_hz = None;
        let mut out = Vec::with_capacity(found.len());
        for (_, path) in &found {
            let text = fs::read_to_string(path).map_err(|e| LeafError::io(path, e))?;
            let parsed = GaborFilterbank::from_csv(&text)?;
            if *fs_hz.get_or_insert(parsed.fs_hz) != parsed.fs_hz {
                return Err(LeafError::Snapshot(format!(
                    "{} was recorded at a different sample rate",
                    path.display()
                )));
            }
            out.push(parsed.filterbank);
        }
        Ok((out, fs_hz.unwrap_or(0)))
    }

    pub fn load_metrics(&self) -> Result<Vec<MetricsRow>> {
        let path = self.root.join(METRICS_FILE);
        let text = fs::read_to_string(&path).map_err(|e| LeafError::io(&path, e))?;
        MetricsRow::from_csv(&text)
    }
}
