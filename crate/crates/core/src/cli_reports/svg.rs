//! Small hand-written SVG plots.

use std::fmt::Write as _;

use crate::filterbank::GaborFilterbank;
use crate::sensitivity::JsdTrajectory;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

pub const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        let fix = |a: f64, b: f64| if b > a { (a, b) } else { (a, a + 1.0) };
        let (x0, x1) = fix(x0, x1);
        let (y0, y1) = fix(y0, y1);
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }

    fn points(&self, xs: impl Iterator<Item = (f64, f64)>) -> String {
        let mut s = String::new();
        for (i, (x, y)) in xs.enumerate() {
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{:.2},{:.2}", self.px(x), self.py(y));
        }
        s
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text class="title" x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str, ticks: usize) {
    let (l, r) = (LEFT, WIDTH - RIGHT);
    let (t, b) = (TOP, HEIGHT - BOTTOM);
    let _ = writeln!(
        out,
        r#"<path class="axes" d="M{l},{t} L{l},{b} L{r},{b}" fill="none" stroke="black"/>"#
    );
    for i in 0..=ticks {
        let fx = f.x0 + (f.x1 - f.x0) * i as f64 / ticks as f64;
        let fy = f.y0 + (f.y1 - f.y0) * i as f64 / ticks as f64;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            f.px(fx),
            b + 16.0,
            tick_label(fx)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            l - 6.0,
            f.py(fy) + 4.0,
            tick_label(fy)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (l + r) / 2.0,
        HEIGHT - 10.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        (t + b) / 2.0,
        (t + b) / 2.0,
        escape(ylabel)
    );
}

fn tick_label(v: f64) -> String {
    if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else if v.abs() >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.2}")
    }
}

/// One filterbank layer of a centre/bandwidth plot.
pub struct Layer<'a> {
    pub filterbank: &'a GaborFilterbank,
    pub label: &'a str,
}

/// Centre frequency per filter as a solid line with the FWHM band shaded
/// around it; several layers are overlaid in palette order.
pub fn filterbank_svg(layers: &[Layer<'_>], fs_hz: u32, title: &str) -> String {
    let nyquist = fs_hz as f64 / 2.0;
    let n_max = layers.iter().map(|l| l.filterbank.n_filters()).max().unwrap_or(1);
    let f = Frame::new(0.0, (n_max.max(2) - 1) as f64, 0.0, nyquist);
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &f, "filter index", "frequency (Hz)", 5);
    for (li, layer) in layers.iter().enumerate() {
        let fb = layer.filterbank;
        let color = PALETTE[li % PALETTE.len()];
        let n = fb.n_filters();
        let centre = |i: usize| fb.centre_hz(i, fs_hz);
        let half = |i: usize| fb.fwhm_hz(i, fs_hz) / 2.0;
        let upper = (0..n).map(|i| (i as f64, (centre(i) + half(i)).min(nyquist)));
        let lower = (0..n).rev().map(|i| (i as f64, (centre(i) - half(i)).max(0.0)));
        let _ = writeln!(
            out,
            r#"<polygon class="bandwidth" points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            f.points(upper.chain(lower))
        );
        let _ = writeln!(
            out,
            r#"<polyline class="centre" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            f.points((0..n).map(|i| (i as f64, centre(i))))
        );
        let _ = writeln!(
            out,
            r#"<text class="legend" x="{:.2}" y="{:.2}" fill="{color}">{}</text>"#,
            LEFT + 10.0,
            TOP + 14.0 + 16.0 * li as f64,
            escape(layer.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Per-filter distance from initialization over epochs, with the epoch mean
/// drawn thicker.
pub fn jsd_svg(traj: &JsdTrajectory, title: &str) -> String {
    let epochs = traj.n_epochs();
    let y_max = traj
        .rows
        .iter()
        .flatten()
        .copied()
        .fold(0.0f64, f64::max)
        .max(0.05);
    let f = Frame::new(0.0, (epochs.max(2) - 1) as f64, 0.0, (y_max * 1.1).min(1.0));
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &f, "epoch", "Jensen-Shannon distance", 5);
    for n in 0..traj.n_filters() {
        let _ = writeln!(
            out,
            r##"<polyline class="filter" points="{}" fill="none" stroke="#888888" stroke-opacity="0.6"/>"##,
            f.points(traj.rows.iter().enumerate().map(|(e, r)| (e as f64, r[n])))
        );
    }
    let means = traj.epoch_means();
    let _ = writeln!(
        out,
        r#"<polyline class="mean" points="{}" fill="none" stroke="{}" stroke-width="2.5"/>"#,
        f.points(means.iter().enumerate().map(|(e, m)| (e as f64, *m))),
        PALETTE[1]
    );
    out.push_str("</svg>\n");
    out
}
