//! Plain-text checkpoints: one `key = value` per line under a versioned
//! header. Floats are written in their shortest round-trip form, so a
//! reloaded checkpoint is bit-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{BackendModel, Layout, Model, OptimizerState, ParamVector};
use crate::error::{LeafError, Result};
use crate::filterbank::GaborFilterbank;
use crate::frontend::{FrontendParams, PcenParams};

pub const CHECKPOINT_HEADER: &str = "# leafkit checkpoint v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Number of completed epochs.
    pub epoch: usize,
    pub model: Model,
    pub optimizer: OptimizerState,
    /// Base seed; per-epoch generators are derived from it and the epoch.
    pub rng_seed: u64,
    /// Extra trainer state, written as `state.<key> = <value>`.
    pub state: BTreeMap<String, String>,
}

fn join(v: &[f64]) -> String {
    let mut s = String::with_capacity(v.len() * 20);
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "{x}");
    }
    s
}

fn split_floats(key: &str, v: &str) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| LeafError::Format(format!("checkpoint key `{key}`: bad number `{x}`")))
        })
        .collect()
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let m = &self.model;
        let f = &m.frontend;
        let l = m.layout();
        let o = &self.optimizer;
        let mut s = String::new();
        let _ = writeln!(s, "{CHECKPOINT_HEADER}");
        let _ = writeln!(s, "epoch = {}", self.epoch);
        let _ = writeln!(s, "rng.seed = {}", self.rng_seed);
        let _ = writeln!(s, "fs_hz = {}", m.fs_hz);
        let _ = writeln!(s, "kernel_width = {}", f.filterbank.kernel_width);
        let _ = writeln!(s, "stride = {}", f.stride);
        let _ = writeln!(s, "lp_width = {}", f.lp_width);
        let _ = writeln!(s, "pcen.eps = {}", f.pcen.eps);
        let _ = writeln!(s, "layout = {} {} {}", l.n_channels, l.hidden, l.classes);
        let _ = writeln!(s, "params = {}", join(&m.to_vector().values));
        let _ = writeln!(s, "adam.step = {}", o.step);
        let _ = writeln!(s, "adam.beta1 = {}", o.config.beta1);
        let _ = writeln!(s, "adam.beta2 = {}", o.config.beta2);
        let _ = writeln!(s, "adam.eps = {}", o.config.eps);
        let _ = writeln!(s, "adam.m = {}", join(&o.m));
        let _ = writeln!(s, "adam.v = {}", join(&o.v));
        for (k, v) in &self.state {
            let _ = writeln!(s, "state.{k} = {v}");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == CHECKPOINT_HEADER => {}
            Some(h) => {
                return Err(LeafError::Format(format!(
                    "unsupported checkpoint header `{h}`"
                )))
            }
            None => return Err(LeafError::Format("empty checkpoint".into())),
        }
        let mut kv = BTreeMap::new();
        let mut state = BTreeMap::new();
        for line in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| LeafError::Format(format!("checkpoint line without `=`: `{line}`")))?;
            let (k, v) = (k.trim(), v.trim());
            if let Some(sk) = k.strip_prefix("state.") {
                state.insert(sk.to_string(), v.to_string());
            } else if kv.insert(k.to_string(), v.to_string()).is_some() {
                return Err(LeafError::Format(format!("duplicate checkpoint key `{k}`")));
            }
        }
        let get = |k: &str| -> Result<&str> {
            kv.get(k)
                .map(String::as_str)
                .ok_or_else(|| LeafError::Format(format!("checkpoint is missing `{k}`")))
        };
        fn num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| LeafError::Format(format!("checkpoint key `{k}`: bad value `{v}`")))
        }
        let sizes: Vec<usize> = get("layout")?
            .split_whitespace()
            .map(|x| num("layout", x))
            .collect::<Result<_>>()?;
        let [n_channels, hidden, classes] = sizes[..] else {
            return Err(LeafError::Format("layout needs three sizes".into()));
        };
        let layout = Layout {
            n_channels,
            hidden,
            classes,
        };
        let values = split_floats("params", get("params")?)?;
        if values.len() != layout.len() {
            return Err(LeafError::Format(format!(
                "{} parameters for a layout of {}",
                values.len(),
                layout.len()
            )));
        }
        let kernel_width: usize = num("kernel_width", get("kernel_width")?)?;
        let n = n_channels;
        let filterbank = GaborFilterbank::new(vec![0.5; n], vec![10.0; n], kernel_width)?;
        let mut pcen = PcenParams::uniform(n, 0.5, 1.0, 0.5, 0.5)?;
        pcen.eps = num("pcen.eps", get("pcen.eps")?)?;
        let frontend = FrontendParams::new(
            filterbank,
            vec![1.0; n],
            pcen,
            num("stride", get("stride")?)?,
            num("lp_width", get("lp_width")?)?,
        )?;
        let backend = BackendModel {
            n_in: n,
            hidden,
            classes,
            w1: vec![0.0; hidden * n],
            b1: vec![0.0; hidden],
            w2: vec![0.0; classes * hidden],
            b2: vec![0.0; classes],
        };
        let mut model = Model::new(frontend, backend, num("fs_hz", get("fs_hz")?)?)?;
        model.load_vector(&ParamVector { layout, values })?;

        let mut optimizer = OptimizerState::new(layout.len());
        optimizer.step = num("adam.step", get("adam.step")?)?;
        optimizer.config.beta1 = num("adam.beta1", get("adam.beta1")?)?;
        optimizer.config.beta2 = num("adam.beta2", get("adam.beta2")?)?;
        optimizer.config.eps = num("adam.eps", get("adam.eps")?)?;
        optimizer.m = split_floats("adam.m", get("adam.m")?)?;
        optimizer.v = split_floats("adam.v", get("adam.v")?)?;
        if optimizer.m.len() != layout.len() || optimizer.v.len() != layout.len() {
            return Err(LeafError::Format("optimizer moments do not match the layout".into()));
        }
        Ok(Self {
            epoch: num("epoch", get("epoch")?)?,
            model,
            optimizer,
            rng_seed: num("rng.seed", get("rng.seed")?)?,
            state,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| LeafError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LeafError::io(path, e))?;
        Self::parse(&text)
    }
}
