//! CSV and SVG emission.
//!
//! Numbers are written with Rust's `Display` for `f64`, which is the shortest
//! decimal that round-trips. Lines end in LF.

use std::fmt::Write as _;
use std::path::Path;

use crate::algorithms::RunTrace;
use crate::error::{Error, Result};

pub const TRACE_HEADER: &str = "run_id,algo,objective,dim,N,I,eta,gamma,sigma,seed,t,\
f_avg_iterate,grad_norm_avg_iterate,consensus_max_dev,clip_fraction_window,comm_rounds_so_far";

pub const SUMMARY_HEADER: &str = "run_id,algo,objective,dim,N,I,eta,gamma,sigma,seed,T,\
iterations_to_target,comm_rounds_to_target,final_t,final_f,final_grad_norm,\
max_consensus_dev,clip_fraction,comm_rounds,diverged";

pub const SWEEP_HEADER: &str = "axis,value,eta,gamma,seeds,reached,\
mean_iterations_to_target,std_iterations_to_target,\
mean_comm_rounds_to_target,std_comm_rounds_to_target,\
mean_final_grad_norm,std_final_grad_norm,diverged,iterations_ratio,comm_ratio";

/// Columns shared by every row of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta {
    pub run_id: String,
    pub algo: String,
    pub objective: String,
    pub dim: usize,
    pub workers: usize,
    pub interval: usize,
    pub eta: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl TraceMeta {
    fn prefix(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.run_id,
            self.algo,
            self.objective,
            self.dim,
            self.workers,
            self.interval,
            self.eta,
            self.gamma,
            self.sigma,
            self.seed
        )
    }
}

pub(crate) fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn trace_csv(meta: &TraceMeta, trace: &RunTrace) -> String {
    let prefix = meta.prefix();
    let mut out = String::with_capacity(64 * (trace.records.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in &trace.records {
        let _ = writeln!(
            out,
            "{prefix},{},{},{},{},{},{}",
            r.t,
            r.f_avg_iterate,
            r.grad_norm_avg_iterate,
            r.consensus_max_dev,
            r.clip_fraction_window,
            r.comm_rounds_so_far
        );
    }
    out
}

/// One summary row per seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub meta: TraceMeta,
    pub iterations: usize,
    pub iterations_to_target: Option<usize>,
    pub comm_rounds_to_target: Option<usize>,
    pub final_t: usize,
    pub final_f: f64,
    pub final_grad_norm: f64,
    pub max_consensus_dev: f64,
    pub clip_fraction: f64,
    pub comm_rounds: usize,
    pub diverged: bool,
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.meta.prefix(),
            r.iterations,
            opt(r.iterations_to_target),
            opt(r.comm_rounds_to_target),
            r.final_t,
            r.final_f,
            r.final_grad_norm,
            r.max_consensus_dev,
            r.clip_fraction,
            r.comm_rounds,
            r.diverged
        );
    }
    out
}

/// Writes `contents` to `path`, creating parent directories.
pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartOptions {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 180.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders a static line chart: one polyline per series, or a single marker
/// for a one-point series.
pub fn svg_lines(series: &[Series], opts: &ChartOptions) -> Result<String> {
    if series.is_empty() {
        return Err(Error::Empty("series list"));
    }
    let ty = |y: f64| if opts.log_y { y.log10() } else { y };
    let visible = |&(x, y): &(f64, f64)| x.is_finite() && y.is_finite() && (!opts.log_y || y > 0.0);

    let pts: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .filter(|p| visible(p))
                .map(|&(x, y)| (x, ty(y)))
                .collect()
        })
        .collect();
    let all: Vec<(f64, f64)> = pts.iter().flatten().copied().collect();
    if all.is_empty() {
        return Err(Error::Empty("plottable points"));
    }
    let (mut x0, mut x1, mut y0, mut y1) = all.iter().fold(
        (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        ),
        |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
    );
    if x1 - x0 <= 0.0 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 <= 0.0 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w;
    let py = |y: f64| MARGIN_TOP + (1.0 - (y - y0) / (y1 - y0)) * plot_h;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        escape(&opts.title)
    );
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );

    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let ylab = if opts.log_y {
            format!("1e{yv:.1}")
        } else {
            format!("{yv:.3e}")
        };
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xv:.0}</text>"#,
            px(xv),
            HEIGHT - MARGIN_BOTTOM + 18.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{ylab}</text>"#,
            MARGIN_LEFT - 6.0,
            py(yv) + 4.0
        );
        let _ = writeln!(
            out,
            r##"<line x1="{MARGIN_LEFT}" y1="{y:.2}" x2="{x2}" y2="{y:.2}" stroke="#dddddd"/>"##,
            y = py(yv),
            x2 = MARGIN_LEFT + plot_w
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 16.0,
        escape(&opts.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{y:.2}" text-anchor="middle" transform="rotate(-90 18 {y:.2})">{}</text>"#,
        escape(&opts.y_label),
        y = MARGIN_TOP + plot_h / 2.0
    );

    for (k, (s, p)) in series.iter().zip(&pts).enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        match p.len() {
            0 => {}
            1 => {
                let _ = writeln!(
                    out,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                    px(p[0].0),
                    py(p[0].1)
                );
            }
            _ => {
                let coords: Vec<String> = p
                    .iter()
                    .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                    .collect();
                let _ = writeln!(
                    out,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    coords.join(" ")
                );
            }
        }
        let ly = MARGIN_TOP + 16.0 * k as f64 + 8.0;
        let lx = WIDTH - MARGIN_RIGHT + 12.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 18.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}">{}</text>"#,
            lx + 24.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Renders and writes a chart; nothing is written on error.
pub fn emit_svg_lines(series: &[Series], opts: &ChartOptions, path: &Path) -> Result<()> {
    let svg = svg_lines(series, opts)?;
    write_file(path, &svg)
}
