//! Cross-seed summaries of run directories: confidence bands, a text table
//! and one SVG plot per environment.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io;
use std::path::{Path, PathBuf};

use rtrl_core::agents::area_under_curve;
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig};
use crate::log::{read_log, LogError};
use crate::runner::MANIFEST;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.96;

#[derive(Debug, Error)]
pub enum SummarizeError {
    #[error("no run directories given")]
    NoRuns,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Manifest { path: PathBuf, source: ConfigError },
    #[error("{path}: {source}")]
    Log { path: PathBuf, source: LogError },
    #[error("{0}: no seed logs")]
    Empty(PathBuf),
    #[error("{0}: learning curve needs at least two evaluations")]
    ShortCurve(PathBuf),
    #[error("condition `{0}`: evaluation grids do not overlap")]
    Disjoint(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub steps: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Curve {
    /// Linear interpolation; `x` must lie inside the evaluated range.
    fn at(&self, x: f64) -> f64 {
        let i = self.steps.partition_point(|&s| s < x);
        if i < self.steps.len() && self.steps[i] == x {
            return self.returns[i];
        }
        let (x0, x1) = (self.steps[i - 1], self.steps[i]);
        let (y0, y1) = (self.returns[i - 1], self.returns[i]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// Trapezoid area divided by the step span: the average evaluation
    /// return over training.
    pub fn auc(&self) -> f64 {
        let span = self.steps.last().unwrap() - self.steps[0];
        area_under_curve(&self.steps, &self.returns) / span
    }

    pub fn final_return(&self) -> f64 {
        *self.returns.last().unwrap()
    }
}

/// Mean and 95% confidence band over seeds at common evaluation steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub steps: Vec<f64>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub runs: usize,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Sample standard deviation; zero for a single value.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Put every curve on one grid. Identical grids are kept; otherwise the
/// grid with the fewest evaluations, cut to the range all curves cover,
/// is used and the rest are interpolated onto it. The second value says
/// whether resampling happened.
pub fn align(curves: &[Curve]) -> Option<(Vec<f64>, Vec<Vec<f64>>, bool)> {
    let first = &curves[0];
    if curves.iter().all(|c| c.steps == first.steps) {
        return Some((
            first.steps.clone(),
            curves.iter().map(|c| c.returns.clone()).collect(),
            false,
        ));
    }
    let lo = curves.iter().map(|c| c.steps[0]).fold(f64::MIN, f64::max);
    let hi = curves
        .iter()
        .map(|c| *c.steps.last().unwrap())
        .fold(f64::MAX, f64::min);
    let coarsest = curves.iter().min_by_key(|c| c.steps.len()).unwrap();
    let grid: Vec<f64> = coarsest
        .steps
        .iter()
        .copied()
        .filter(|s| (lo..=hi).contains(s))
        .collect();
    if grid.len() < 2 {
        return None;
    }
    let values = curves
        .iter()
        .map(|c| grid.iter().map(|&x| c.at(x)).collect())
        .collect();
    Some((grid, values, true))
}

pub fn band(steps: Vec<f64>, values: &[Vec<f64>]) -> Band {
    let n = values.len();
    let (mut m, mut lower, mut upper) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..steps.len() {
        let column: Vec<f64> = values.iter().map(|v| v[i]).collect();
        let mu = mean(&column);
        let half = Z95 * sample_std(&column) / (n as f64).sqrt();
        m.push(mu);
        lower.push(mu - half);
        upper.push(mu + half);
    }
    Band {
        steps,
        mean: m,
        lower,
        upper,
        runs: n,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionSummary {
    pub condition: String,
    pub env: String,
    pub band: Band,
    /// Per-seed values on the seed's own evaluation grid.
    pub final_returns: Vec<f64>,
    pub aucs: Vec<f64>,
}

impl ConditionSummary {
    pub fn from_curves(
        condition: &str,
        env: &str,
        curves: &[Curve],
    ) -> Result<(Self, bool), SummarizeError> {
        let (steps, values, resampled) =
            align(curves).ok_or_else(|| SummarizeError::Disjoint(condition.to_string()))?;
        Ok((
            Self {
                condition: condition.to_string(),
                env: env.to_string(),
                band: band(steps, &values),
                final_returns: curves.iter().map(Curve::final_return).collect(),
                aucs: curves.iter().map(Curve::auc).collect(),
            },
            resampled,
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    /// Sorted by median area under the curve, best first.
    pub conditions: Vec<ConditionSummary>,
    pub notes: Vec<String>,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> SummarizeError + '_ {
    move |source| SummarizeError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Seed logs of one run directory, ordered by seed.
pub fn read_run(dir: &Path) -> Result<(ExperimentConfig, Vec<Curve>), SummarizeError> {
    let manifest = dir.join(MANIFEST);
    let text = fs::read_to_string(&manifest).map_err(io_err(&manifest))?;
    let cfg = ExperimentConfig::parse(&text).map_err(|source| SummarizeError::Manifest {
        path: manifest.clone(),
        source,
    })?;
    let mut logs: Vec<(u64, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if let Some(seed) = name
            .strip_prefix("seed_")
            .and_then(|n| n.strip_suffix(".csv"))
        {
            if let Ok(seed) = seed.parse() {
                logs.push((seed, path));
            }
        }
    }
    if logs.is_empty() {
        return Err(SummarizeError::Empty(dir.to_path_buf()));
    }
    logs.sort();
    let mut curves = Vec::new();
    for (_, path) in logs {
        let file = File::open(&path).map_err(io_err(&path))?;
        let rows = read_log(file).map_err(|source| SummarizeError::Log {
            path: path.clone(),
            source,
        })?;
        if rows.len() < 2 {
            return Err(SummarizeError::ShortCurve(path));
        }
        curves.push(Curve {
            steps: rows.iter().map(|r| r.record.step as f64).collect(),
            returns: rows.iter().map(|r| r.record.episode_return).collect(),
        });
    }
    Ok((cfg, curves))
}

/// Pool the seeds of all directories by condition.
pub fn summarize(dirs: &[PathBuf]) -> Result<Summary, SummarizeError> {
    if dirs.is_empty() {
        return Err(SummarizeError::NoRuns);
    }
    let mut groups: BTreeMap<String, (String, Vec<Curve>)> = BTreeMap::new();
    for dir in dirs {
        let (cfg, curves) = read_run(dir)?;
        groups
            .entry(cfg.condition())
            .or_insert_with(|| (cfg.env.to_string(), Vec::new()))
            .1
            .extend(curves);
    }
    let mut conditions = Vec::new();
    let mut notes = Vec::new();
    for (condition, (env, curves)) in groups {
        let (summary, resampled) = ConditionSummary::from_curves(&condition, &env, &curves)?;
        if resampled {
            notes.push(format!(
                "{condition}: evaluation grids differ; resampled to the coarsest grid ({} points)",
                summary.band.steps.len()
            ));
        }
        conditions.push(summary);
    }
    conditions.sort_by(|a, b| median(&b.aucs).total_cmp(&median(&a.aucs)));
    Ok(Summary { conditions, notes })
}

pub fn table(summary: &Summary) -> String {
    let mut out = String::new();
    let width = summary
        .conditions
        .iter()
        .map(|c| c.condition.len())
        .max()
        .unwrap_or(0)
        .max(9);
    writeln!(
        out,
        "{:<width$}  {:>4}  {:>12}  {:>12}  {:>12}  {:>12}",
        "condition", "runs", "final mean", "final median", "auc mean", "auc median"
    )
    .unwrap();
    for c in &summary.conditions {
        writeln!(
            out,
            "{:<width$}  {:>4}  {:>12.3}  {:>12.3}  {:>12.3}  {:>12.3}",
            c.condition,
            c.band.runs,
            mean(&c.final_returns),
            median(&c.final_returns),
            mean(&c.aucs),
            median(&c.aucs)
        )
        .unwrap();
    }
    if !summary.notes.is_empty() {
        out.push('\n');
        for n in &summary.notes {
            writeln!(out, "note: {n}").unwrap();
        }
    }
    out.push_str(
        "\nauc is the trapezoid area under the evaluation-return curve divided by its step span.\n",
    );
    out
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// Mean curves with shaded 95% bands for every condition on one
/// environment.
pub fn svg(env: &str, conditions: &[&ConditionSummary]) -> String {
    let (w, h, margin) = (640.0, 400.0, 60.0);
    let xs = conditions.iter().flat_map(|c| c.band.steps.iter().copied());
    let (x_lo, x_hi) = xs.fold((f64::MAX, f64::MIN), |(lo, hi), x| (lo.min(x), hi.max(x)));
    let ys = conditions
        .iter()
        .flat_map(|c| c.band.lower.iter().chain(&c.band.upper).copied());
    let (mut y_lo, mut y_hi) = ys.fold((f64::MAX, f64::MIN), |(lo, hi), y| (lo.min(y), hi.max(y)));
    if y_hi - y_lo < 1e-12 {
        y_lo -= 1.0;
        y_hi += 1.0;
    }
    let x_span = (x_hi - x_lo).max(1.0);
    let px = |x: f64| margin + (x - x_lo) / x_span * (w - 2.0 * margin);
    let py = |y: f64| h - margin - (y - y_lo) / (y_hi - y_lo) * (h - 2.0 * margin);
    let points = |s: &[f64], v: &[f64]| {
        s.iter()
            .zip(v)
            .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{env}</text>"#,
        w / 2.0
    )
    .unwrap();
    writeln!(
        out,
        r#"<polyline points="{m},{m} {m},{b} {r},{b}" fill="none" stroke="black"/>"#,
        m = margin,
        b = h - margin,
        r = w - margin
    )
    .unwrap();
    for (label, x, y, anchor) in [
        (format!("{x_lo}"), margin, h - margin + 16.0, "start"),
        (format!("{x_hi}"), w - margin, h - margin + 16.0, "end"),
        (format!("{y_lo:.1}"), margin - 4.0, h - margin, "end"),
        (format!("{y_hi:.1}"), margin - 4.0, margin + 4.0, "end"),
    ] {
        writeln!(
            out,
            r#"<text x="{x}" y="{y}" text-anchor="{anchor}">{label}</text>"#
        )
        .unwrap();
    }
    writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">environment steps</text>"#,
        w / 2.0,
        h - 20.0
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">return</text>"#,
        h / 2.0,
        h / 2.0
    )
    .unwrap();
    for (i, c) in conditions.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let b = &c.band;
        let rev_steps: Vec<f64> = b.steps.iter().rev().copied().collect();
        let rev_lower: Vec<f64> = b.lower.iter().rev().copied().collect();
        writeln!(
            out,
            r#"<polygon points="{} {}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            points(&b.steps, &b.upper),
            points(&rev_steps, &rev_lower)
        )
        .unwrap();
        writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            points(&b.steps, &b.mean)
        )
        .unwrap();
        let ly = margin + 16.0 * i as f64;
        writeln!(
            out,
            r#"<text x="{}" y="{ly}" text-anchor="end" fill="{color}">{} (n={})</text>"#,
            w - margin,
            c.condition,
            b.runs
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

/// Write `summary.txt` and `<env>.svg` files into `out`; returns the
/// paths written.
pub fn write_outputs(summary: &Summary, out: &Path) -> Result<Vec<PathBuf>, SummarizeError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut written = Vec::new();
    let path = out.join("summary.txt");
    fs::write(&path, table(summary)).map_err(io_err(&path))?;
    written.push(path);
    let mut envs: Vec<&str> = summary.conditions.iter().map(|c| c.env.as_str()).collect();
    envs.sort();
    envs.dedup();
    for env in envs {
        let group: Vec<&ConditionSummary> =
            summary.conditions.iter().filter(|c| c.env == env).collect();
        let path = out.join(format!("{env}.svg"));
        fs::write(&path, svg(env, &group)).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}
