//! Filter movement analysis: each filter's analytic frequency response is
//! treated as a probability mass function over a uniform grid on
//! [0, Nyquist], and distances between snapshots are Jensen-Shannon
//! distances with base-2 logarithms (bounded by [0, 1]).

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{LeafError, Result};
use crate::exec::ExecMode;
use crate::filterbank::{analytic_freq_response, GaborFilterbank};

pub const DEFAULT_BINS: usize = 1024;
pub const MIN_BINS: usize = 64;

/// Whether the pmf is built from the magnitude envelope or its square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResponseKind {
    #[default]
    Magnitude,
    Power,
}

impl ResponseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ResponseKind::Magnitude => "magnitude",
            ResponseKind::Power => "power",
        }
    }
}

impl FromStr for ResponseKind {
    type Err = LeafError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "magnitude" => Ok(ResponseKind::Magnitude),
            "power" => Ok(ResponseKind::Power),
            other => Err(LeafError::Config(format!("unknown response kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterPmf {
    probs: Vec<f64>,
}

impl FilterPmf {
    /// Normalizes non-negative weights into a pmf.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(LeafError::Param("pmf weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(LeafError::Param("pmf weights sum to zero".into()));
        }
        Ok(Self {
            probs: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn bins(&self) -> usize {
        self.probs.len()
    }
}

/// Bin centres `(i + 0.5) / bins` in eta units.
pub fn grid(bins: usize) -> Vec<f64> {
    (0..bins).map(|i| (i as f64 + 0.5) / bins as f64).collect()
}

pub fn filter_pmf(eta: f64, sigma_bw: f64, bins: usize) -> Result<FilterPmf> {
    filter_pmf_with(eta, sigma_bw, bins, ResponseKind::Magnitude)
}

pub fn filter_pmf_with(eta: f64, sigma_bw: f64, bins: usize, kind: ResponseKind) -> Result<FilterPmf> {
    if bins < MIN_BINS {
        return Err(LeafError::Param(format!("need at least {MIN_BINS} bins, got {bins}")));
    }
    let mut r = analytic_freq_response(eta, sigma_bw, &grid(bins))?;
    if kind == ResponseKind::Power {
        r.iter_mut().for_each(|v| *v *= *v);
    }
    FilterPmf::from_weights(r)
}

fn same_grid(a: &FilterPmf, b: &FilterPmf) -> Result<()> {
    if a.bins() != b.bins() {
        return Err(LeafError::Spec(format!(
            "pmfs live on different grids ({} vs {} bins)",
            a.bins(),
            b.bins()
        )));
    }
    Ok(())
}

/// `sum_x A(x) log2(A(x) / B(x))`, with `0 log 0 = 0`.
pub fn kl_divergence(a: &FilterPmf, b: &FilterPmf) -> Result<f64> {
    same_grid(a, b)?;
    let mut total = 0.0;
    for (i, (&p, &q)) in a.probs.iter().zip(&b.probs).enumerate() {
        if p > 0.0 {
            if q <= 0.0 {
                return Err(LeafError::Support(format!(
                    "bin {i} has mass {p} in A but none in B"
                )));
            }
            total += p * (p / q).log2();
        }
    }
    Ok(total.max(0.0))
}

/// Jensen-Shannon distance: square root of the mean KL divergence of `p`
/// and `q` from their mixture.
pub fn jsd(p: &FilterPmf, q: &FilterPmf) -> Result<f64> {
    same_grid(p, q)?;
    let mut total = 0.0;
    for (&a, &b) in p.probs.iter().zip(&q.probs) {
        // a / m is formed as 2a / (a + b): halving a subnormal sum can round
        // the mixture to zero. Swapping a and b swaps the two addends exactly.
        let s = a + b;
        let ta = if a > 0.0 { a * (2.0 * a / s).log2() } else { 0.0 };
        let tb = if b > 0.0 { b * (2.0 * b / s).log2() } else { 0.0 };
        total += ta + tb;
    }
    Ok((0.5 * total).clamp(0.0, 1.0).sqrt())
}

/// Per-epoch, per-filter distances from the first snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct JsdTrajectory {
    /// `rows[e][n]`: distance of filter `n` at epoch `e` from epoch 0.
    pub rows: Vec<Vec<f64>>,
}

impl JsdTrajectory {
    pub fn n_epochs(&self) -> usize {
        self.rows.len()
    }

    pub fn n_filters(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn epoch_means(&self) -> Vec<f64> {
        self.rows.iter().map(|r| mean(r)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,filter_index,jsd\n");
        for (e, row) in self.rows.iter().enumerate() {
            for (n, d) in row.iter().enumerate() {
                let _ = writeln!(out, "{e},{n},{d}");
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, line) in data_lines(text, "epoch,filter_index,jsd")? {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 {
                return Err(bad_line(i, line));
            }
            let e: usize = f[0].parse().map_err(|_| bad_line(i, line))?;
            let n: usize = f[1].parse().map_err(|_| bad_line(i, line))?;
            let d: f64 = f[2].parse().map_err(|_| bad_line(i, line))?;
            if e == rows.len() {
                rows.push(Vec::new());
            }
            if e + 1 != rows.len() || n != rows[e].len() {
                return Err(bad_line(i, line));
            }
            rows[e].push(d);
        }
        Ok(Self { rows })
    }
}

pub fn trajectory(snapshots: &[GaborFilterbank], bins: usize) -> Result<JsdTrajectory> {
    trajectory_with(snapshots, bins, ResponseKind::Magnitude, ExecMode::default())
}

pub fn trajectory_with(
    snapshots: &[GaborFilterbank],
    bins: usize,
    kind: ResponseKind,
    mode: ExecMode,
) -> Result<JsdTrajectory> {
    let first = snapshots
        .first()
        .ok_or_else(|| LeafError::Snapshot("no snapshots to analyse".into()))?;
    let n = first.n_filters();
    if let Some((e, s)) = snapshots.iter().enumerate().find(|(_, s)| s.n_filters() != n) {
        return Err(LeafError::Snapshot(format!(
            "snapshot {e} has {} filters, initialization has {n}",
            s.n_filters()
        )));
    }
    let init = (0..n)
        .map(|i| filter_pmf_with(first.eta[i], first.sigma_bw[i], bins, kind))
        .collect::<Result<Vec<_>>>()?;
    let rows = mode.map_slice(snapshots, |snap| -> Result<Vec<f64>> {
        (0..n)
            .map(|i| {
                if snap.eta[i] == first.eta[i] && snap.sigma_bw[i] == first.sigma_bw[i] {
                    return Ok(0.0);
                }
                let pmf = filter_pmf_with(snap.eta[i], snap.sigma_bw[i], bins, kind)?;
                jsd(&init[i], &pmf)
            })
            .collect()
    });
    Ok(JsdTrajectory {
        rows: rows.into_iter().collect::<Result<_>>()?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub final_mean: f64,
    pub final_row: Vec<f64>,
    pub max_filter: usize,
}

impl Summary {
    /// `filter_index,final_jsd` rows under a `# mean_final_jsd=` comment.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# mean_final_jsd={}\nfilter_index,final_jsd\n", self.final_mean);
        for (n, d) in self.final_row.iter().enumerate() {
            let _ = writeln!(out, "{n},{d}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut final_row = Vec::new();
        for (i, line) in data_lines(text, "filter_index,final_jsd")? {
            let (n, d) = line.split_once(',').ok_or_else(|| bad_line(i, line))?;
            let n: usize = n.parse().map_err(|_| bad_line(i, line))?;
            if n != final_row.len() {
                return Err(bad_line(i, line));
            }
            final_row.push(d.parse().map_err(|_| bad_line(i, line))?);
        }
        summarize(&JsdTrajectory {
            rows: vec![final_row],
        })
    }
}

pub fn summarize(traj: &JsdTrajectory) -> Result<Summary> {
    let last = traj
        .rows
        .last()
        .filter(|r| !r.is_empty())
        .ok_or_else(|| LeafError::Snapshot("empty trajectory".into()))?;
    let max_filter = last
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0;
    Ok(Summary {
        final_mean: mean(last),
        final_row: last.clone(),
        max_filter,
    })
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn data_lines<'a>(text: &'a str, header: &str) -> Result<Vec<(usize, &'a str)>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, h)) if h == header => Ok(lines.collect()),
        Some((i, h)) => Err(bad_line(i, h)),
        None => Err(LeafError::Format("empty CSV".into())),
    }
}

fn bad_line(i: usize, line: &str) -> LeafError {
    LeafError::Format(format!("line {}: cannot parse `{line}`", i + 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filterbank::sigma_f;

    fn pmf(v: &[f64]) -> FilterPmf {
        FilterPmf::from_weights(v.to_vec()).unwrap()
    }

    #[test]
    fn pmf_properties() {
        let p = filter_pmf(0.37, 9.0, 512).unwrap();
        assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(p.probs().iter().all(|&v| v >= 0.0));
        let q = filter_pmf(0.5, 30.0, 1024).unwrap();
        let argmax = q
            .probs()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!(argmax == 511 || argmax == 512);
        assert_eq!(filter_pmf(0.2, 5.0, 256).unwrap(), filter_pmf(0.2, 5.0, 256).unwrap());
        assert!(filter_pmf(0.2, 5.0, 32).is_err());
        assert!(matches!(filter_pmf(0.2, 0.0, 256), Err(LeafError::Param(_))));
    }

    #[test]
    fn kl_reference_values() {
        let a = pmf(&[0.3, 0.7]);
        assert_eq!(kl_divergence(&a, &a).unwrap(), 0.0);
        let kl = kl_divergence(&pmf(&[1.0, 0.0]), &pmf(&[0.5, 0.5])).unwrap();
        assert!((kl - 1.0).abs() < 1e-15);
        assert!(matches!(
            kl_divergence(&pmf(&[0.5, 0.5]), &pmf(&[1.0, 0.0])),
            Err(LeafError::Support(_))
        ));
    }

    #[test]
    fn jsd_reference_values() {
        let p = pmf(&[0.5, 0.5]);
        assert_eq!(jsd(&p, &p).unwrap(), 0.0);
        assert!((jsd(&pmf(&[1.0, 0.0]), &pmf(&[0.0, 1.0])).unwrap() - 1.0).abs() < 1e-15);
        // KL(P||M) = 0.20752, KL(Q||M) = 0.41504 bits for M = [0.75, 0.25].
        let d = jsd(&p, &pmf(&[1.0, 0.0])).unwrap();
        let hand = (0.5 * (0.207_518_749 + 0.415_037_499f64)).sqrt();
        assert!((d - hand).abs() < 1e-8);
        assert!((d - 0.5579).abs() < 1e-3);
    }

    #[test]
    fn subnormal_tails_do_not_saturate() {
        // One tail bin holds 5e-324 in q and exactly 0 in p.
        let a = filter_pmf(0.26707317073170733, 31.764405706668224, 1024).unwrap();
        let b = filter_pmf(0.26804755002012165, 31.772756627789423, 1024).unwrap();
        let d = jsd(&a, &b).unwrap();
        assert!(d < 0.1, "{d}");
        assert_eq!(d, jsd(&b, &a).unwrap());
    }

    proptest::proptest! {
        #[test]
        fn small_shift_matches_fisher_approximation(
            eta in 0.3f64..0.7,
            sigma_bw in 5.0f64..39.0,
            frac in 0.02f64..0.1,
        ) {
            // For a location shift d of a Gaussian with width s the JS
            // divergence is d^2 / (8 s^2) nats to leading order. Centres stay
            // four widths inside the grid so truncation does not matter.
            let sf = sigma_f(sigma_bw);
            let d = jsd(&filter_pmf(eta, sigma_bw, 1024).unwrap(), &filter_pmf(eta + frac * sf, sigma_bw, 1024).unwrap()).unwrap();
            let oracle = frac / (8.0 * std::f64::consts::LN_2).sqrt();
            proptest::prop_assert!((d - oracle).abs() < 0.03 * oracle, "{} vs {}", d, oracle);
        }
    }

    #[test]
    fn grid_mismatch_rejected() {
        assert!(jsd(&pmf(&[1.0, 0.0]), &pmf(&[0.2, 0.3, 0.5])).is_err());
    }

    #[test]
    fn trajectory_cases() {
        let fb = GaborFilterbank::new(vec![0.2, 0.5, 0.8], vec![10.0, 10.0, 10.0], 401).unwrap();
        let t = trajectory(std::slice::from_ref(&fb), 1024).unwrap();
        assert_eq!(t.rows, vec![vec![0.0; 3]]);

        let mut moved = fb.clone();
        moved.eta[1] += 2.0 * sigma_f(10.0);
        let t = trajectory(&[fb.clone(), fb.clone(), moved], 1024).unwrap();
        assert_eq!(t.rows[1], vec![0.0; 3]);
        assert_eq!(t.rows[2][0], 0.0);
        assert_eq!(t.rows[2][2], 0.0);
        assert!(t.rows[2][1] > 0.5, "{}", t.rows[2][1]);

        let short = GaborFilterbank::new(vec![0.2], vec![10.0], 401).unwrap();
        assert!(matches!(trajectory(&[fb, short], 1024), Err(LeafError::Snapshot(_))));
        assert!(matches!(trajectory(&[], 1024), Err(LeafError::Snapshot(_))));
    }

    #[test]
    fn summary_arithmetic_and_csv() {
        let s = summarize(&JsdTrajectory {
            rows: vec![vec![0.0, 0.0], vec![0.1, 0.3]],
        })
        .unwrap();
        assert!((s.final_mean - 0.2).abs() < 1e-15);
        assert_eq!(s.max_filter, 1);
        assert_eq!(Summary::from_csv(&s.to_csv()).unwrap(), s);
        let zero = summarize(&JsdTrajectory { rows: vec![vec![0.0; 4]] }).unwrap();
        assert_eq!(zero.final_mean, 0.0);
    }

    #[test]
    fn trajectory_csv_roundtrip() {
        let t = JsdTrajectory {
            rows: vec![vec![0.0, 0.0], vec![0.123_456_789, 1.0 / 3.0]],
        };
        assert_eq!(JsdTrajectory::from_csv(&t.to_csv()).unwrap(), t);
    }

    #[test]
    fn power_response_is_narrower() {
        let m = filter_pmf_with(0.5, 8.0, 1024, ResponseKind::Magnitude).unwrap();
        let p = filter_pmf_with(0.5, 8.0, 1024, ResponseKind::Power).unwrap();
        assert!(p.probs()[512] > m.probs()[512]);
    }
}
