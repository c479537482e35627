//! Sweep summaries: rank probabilities against `λ` and
//! per-seed rank traces, as plain SVG.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::records::RunRecord;

/// Number of seeds drawn in the rank-trace panel.
pub const TRACE_SEEDS: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct LambdaSummary {
    pub lambda: f64,
    pub count: usize,
    /// Fraction of records with `rank ≤ dim_s_star`.
    pub prob_rank_le_d: f64,
    /// Fraction of records with `rank = dim_s_star`.
    pub prob_rank_eq_d: f64,
    pub mean_subspace_dist: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankTrace {
    pub seed: u64,
    /// `(λ, rank)` sorted by `λ`.
    pub points: Vec<(f64, usize)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportSummary {
    pub scenario: String,
    pub kernel: String,
    pub p: usize,
    pub dim_s_star: usize,
    pub per_lambda: Vec<LambdaSummary>,
    pub traces: Vec<RankTrace>,
}

impl ReportSummary {
    pub fn from_records(records: &[RunRecord]) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::InvalidInput("no records to summarize".into()))?;
        if let Some(other) = records
            .iter()
            .find(|r| r.scenario != first.scenario || r.kernel != first.kernel || r.p != first.p)
        {
            return Err(Error::InvalidInput(format!(
                "records mix groups ({} / {} and {} / {}); filter to a single scenario and kernel first",
                first.scenario, first.kernel, other.scenario, other.kernel
            )));
        }
        if records.iter().any(|r| r.dim_s_star != first.dim_s_star) {
            return Err(Error::InvalidInput("records disagree on dim_s_star".into()));
        }
        let d = first.dim_s_star;

        let mut by_lambda: BTreeMap<u64, Vec<&RunRecord>> = BTreeMap::new();
        let mut by_seed: BTreeMap<u64, Vec<(f64, usize)>> = BTreeMap::new();
        for r in records {
            // Positive floats order like their bit patterns.
            by_lambda.entry(r.lambda.to_bits()).or_default().push(r);
            by_seed.entry(r.seed).or_default().push((r.lambda, r.rank));
        }
        let per_lambda = by_lambda
            .values()
            .map(|group| {
                let count = group.len();
                let frac = |pred: &dyn Fn(&RunRecord) -> bool| {
                    group.iter().filter(|r| pred(r)).count() as f64 / count as f64
                };
                LambdaSummary {
                    lambda: group[0].lambda,
                    count,
                    prob_rank_le_d: frac(&|r| r.rank <= d),
                    prob_rank_eq_d: frac(&|r| r.rank == d),
                    mean_subspace_dist: group.iter().map(|r| r.subspace_dist_fro).sum::<f64>() / count as f64,
                }
            })
            .collect();
        let traces = by_seed
            .into_iter()
            .take(TRACE_SEEDS)
            .map(|(seed, mut points)| {
                points.sort_by(|a, b| a.0.total_cmp(&b.0));
                RankTrace { seed, points }
            })
            .collect();
        Ok(ReportSummary {
            scenario: first.scenario.clone(),
            kernel: first.kernel.clone(),
            p: first.p,
            dim_s_star: d,
            per_lambda,
            traces,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,count,prob_rank_le_d,prob_rank_eq_d,mean_subspace_dist\n");
        for s in &self.per_lambda {
            let _ = writeln!(
                out,
                "{:.16e},{},{:.16e},{:.16e},{:.16e}",
                s.lambda, s.count, s.prob_rank_le_d, s.prob_rank_eq_d, s.mean_subspace_dist
            );
        }
        out
    }
}

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 320.0;
const MARGIN_L: f64 = 56.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 28.0;
const MARGIN_B: f64 = 44.0;
const COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

/// Linear plot area with a log-scaled `λ` axis.
struct Axes {
    log_lo: f64,
    log_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Axes {
    fn new(lambdas: impl Iterator<Item = f64> + Clone, y_lo: f64, y_hi: f64) -> Self {
        let lo = lambdas.clone().fold(f64::INFINITY, f64::min).ln();
        let hi = lambdas.fold(f64::NEG_INFINITY, f64::max).ln();
        let (log_lo, log_hi) = if hi - lo < 1e-12 { (lo - 0.5, hi + 0.5) } else { (lo, hi) };
        let (y_lo, y_hi) = if y_hi - y_lo < 1e-12 { (y_lo - 0.5, y_hi + 0.5) } else { (y_lo, y_hi) };
        Axes {
            log_lo,
            log_hi,
            y_lo,
            y_hi,
        }
    }

    fn x(&self, lambda: f64) -> f64 {
        MARGIN_L + (lambda.ln() - self.log_lo) / (self.log_hi - self.log_lo) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN_B - (v - self.y_lo) / (self.y_hi - self.y_lo) * (HEIGHT - MARGIN_T - MARGIN_B)
    }

    fn frame(&self, svg: &mut String, title: &str, y_label: &str, lambdas: &[f64], y_ticks: &[f64]) {
        let (x0, x1) = (MARGIN_L, WIDTH - MARGIN_R);
        let (y0, y1) = (HEIGHT - MARGIN_B, MARGIN_T);
        let _ = writeln!(
            svg,
            r##"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="#000"/>"##,
            x1 - x0,
            y0 - y1
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{}</text>"#,
            WIDTH / 2.0,
            escape(title)
        );
        for &l in lambdas {
            let x = self.x(l);
            let _ = writeln!(
                svg,
                r##"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{:.2}" stroke="#000"/><text x="{x:.2}" y="{:.2}" text-anchor="middle" font-size="10">{}</text>"##,
                y0 + 4.0,
                y0 + 16.0,
                trim_float(l)
            );
        }
        for &t in y_ticks {
            let y = self.y(t);
            let _ = writeln!(
                svg,
                r##"<line x1="{x0}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end" font-size="10">{}</text>"##,
                x0 - 4.0,
                y + 3.5,
                trim_float(t)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">λ (log scale)</text>"#,
            (x0 + x1) / 2.0,
            HEIGHT - 8.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="14" y="{0}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {0})">{1}</text>"#,
            (y0 + y1) / 2.0,
            escape(y_label)
        );
    }
}

fn trim_float(v: f64) -> String {
    let s = format!("{v:.3}");
    match s.trim_end_matches('0').trim_end_matches('.') {
        "" => "0".to_string(),
        t => t.to_string(),
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn svg_open() -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n"
    )
}

fn polyline(points: &[(f64, f64)], color: &str, dashed: bool) -> String {
    let pts: Vec<String> = points.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let dash = if dashed { r#" stroke-dasharray="5,3""# } else { "" };
    format!(
        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"{dash}/>"#,
        pts.join(" ")
    )
}

fn legend(svg: &mut String, entries: &[(String, &str, bool)]) {
    for (k, (label, color, dashed)) in entries.iter().enumerate() {
        let y = MARGIN_T + 14.0 + 14.0 * k as f64;
        let x = WIDTH - MARGIN_R - 150.0;
        let _ = writeln!(svg, "{}", polyline(&[(x, y - 4.0), (x + 20.0, y - 4.0)], color, *dashed));
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{y:.2}" font-size="10">{}</text>"#,
            x + 24.0,
            escape(label)
        );
    }
}

/// Probability of `rank ≤ d` and of `rank = d` against `λ`.
pub fn prob_lowrank_svg(summary: &ReportSummary) -> String {
    let lambdas: Vec<f64> = summary.per_lambda.iter().map(|s| s.lambda).collect();
    let axes = Axes::new(lambdas.iter().copied(), 0.0, 1.0);
    let mut svg = svg_open();
    axes.frame(
        &mut svg,
        &format!("{} / {}", summary.scenario, summary.kernel),
        "empirical probability",
        &lambdas,
        &[0.0, 0.25, 0.5, 0.75, 1.0],
    );
    let d = summary.dim_s_star;
    let le: Vec<(f64, f64)> = summary
        .per_lambda
        .iter()
        .map(|s| (axes.x(s.lambda), axes.y(s.prob_rank_le_d)))
        .collect();
    let eq: Vec<(f64, f64)> = summary
        .per_lambda
        .iter()
        .map(|s| (axes.x(s.lambda), axes.y(s.prob_rank_eq_d)))
        .collect();
    let _ = writeln!(svg, "{}", polyline(&le, COLORS[0], false));
    let _ = writeln!(svg, "{}", polyline(&eq, COLORS[1], true));
    for (x, y) in &le {
        let _ = writeln!(svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{}"/>"#, COLORS[0]);
    }
    legend(
        &mut svg,
        &[
            (format!("P(rank ≤ {d})"), COLORS[0], false),
            (format!("P(rank = {d})"), COLORS[1], true),
        ],
    );
    svg.push_str("</svg>\n");
    svg
}

/// Step plot of rank against `λ`, one line per seed.
pub fn rank_traces_svg(summary: &ReportSummary) -> String {
    let lambdas: Vec<f64> = summary.per_lambda.iter().map(|s| s.lambda).collect();
    let max_rank = summary
        .traces
        .iter()
        .flat_map(|t| t.points.iter().map(|p| p.1))
        .max()
        .unwrap_or(0)
        .max(summary.dim_s_star);
    let axes = Axes::new(lambdas.iter().copied(), 0.0, max_rank as f64 * 1.08 + 0.5);
    let step = ((max_rank as f64 / 5.0).ceil()).max(1.0);
    let ticks: Vec<f64> = (0..)
        .map(|k| k as f64 * step)
        .take_while(|t| *t <= max_rank as f64)
        .collect();
    let mut svg = svg_open();
    axes.frame(
        &mut svg,
        &format!("{} / {}: rank of the minimizer", summary.scenario, summary.kernel),
        "rank",
        &lambdas,
        &ticks,
    );
    let mut entries = Vec::new();
    for (k, trace) in summary.traces.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut pts = Vec::with_capacity(2 * trace.points.len());
        for (i, &(l, r)) in trace.points.iter().enumerate() {
            let y = axes.y(r as f64);
            if i > 0 {
                pts.push((axes.x(l), pts.last().map(|p: &(f64, f64)| p.1).unwrap_or(y)));
            }
            pts.push((axes.x(l), y));
        }
        // Small vertical offsets keep coincident traces visible.
        let offset = (k as f64 - 2.0) * 1.2;
        let pts: Vec<(f64, f64)> = pts.into_iter().map(|(x, y)| (x, y + offset)).collect();
        let _ = writeln!(svg, "{}", polyline(&pts, color, false));
        entries.push((format!("seed {}", trace.seed), color, false));
    }
    legend(&mut svg, &entries);
    svg.push_str("</svg>\n");
    svg
}

/// Writes `prob_lowrank.svg`, `rank_traces.svg` and `summary.csv` into `out_dir`.
pub fn render_report(records: &[RunRecord], out_dir: &Path) -> Result<ReportSummary> {
    let summary = ReportSummary::from_records(records)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for (name, body) in [
        ("prob_lowrank.svg", prob_lowrank_svg(&summary)),
        ("rank_traces.svg", rank_traces_svg(&summary)),
        ("summary.csv", summary.to_csv()),
    ] {
        let path = out_dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(summary)
}
