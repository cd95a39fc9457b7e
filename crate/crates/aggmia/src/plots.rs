//! Static SVG figures: AUC CDFs per classifier, privacy-loss box plots per
//! group size and privacy gain against ε per mechanism.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::results::{ResultRow, BEST};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    Cdf,
    Box,
    Line,
}

impl PlotKind {
    pub const ALL: [PlotKind; 3] = [PlotKind::Cdf, PlotKind::Box, PlotKind::Line];

    pub fn name(self) -> &'static str {
        match self {
            PlotKind::Cdf => "cdf",
            PlotKind::Box => "box",
            PlotKind::Line => "line",
        }
    }
}

impl FromStr for PlotKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        PlotKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| format!("unknown plot kind '{s}'"))
    }
}

/// Empirical CDF as sorted `(value, fraction <= value)` steps.
pub fn ecdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
    for (i, x) in v.into_iter().enumerate() {
        let f = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 = f,
            _ => out.push((x, f)),
        }
    }
    out
}

/// Linearly interpolated percentile of sorted data, `p` in `[0, 1]`.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Minimum, lower quartile, median, upper quartile and maximum.
pub fn five_numbers(values: &[f64]) -> Option<[f64; 5]> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some([v[0], percentile(&v, 0.25), percentile(&v, 0.5), percentile(&v, 0.75), v[v.len() - 1]])
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

struct Canvas {
    svg: String,
    x: (f64, f64),
    y: (f64, f64),
}

impl Canvas {
    fn new(title: &str, xlabel: &str, ylabel: &str, x: (f64, f64), y: (f64, f64)) -> Self {
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(svg, r#"<text x="{}" y="18" text-anchor="middle">{}</text>"#, (LEFT + W - RIGHT) / 2.0, esc(title));
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            (LEFT + W - RIGHT) / 2.0,
            H - 10.0,
            esc(xlabel)
        );
        let _ = writeln!(
            svg,
            r#"<text x="15" y="{0}" text-anchor="middle" transform="rotate(-90 15 {0})">{1}</text>"#,
            (TOP + H - BOTTOM) / 2.0,
            esc(ylabel)
        );
        let _ = writeln!(
            svg,
            r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            W - LEFT - RIGHT,
            H - TOP - BOTTOM
        );
        Canvas { svg, x, y }
    }

    fn px(&self, x: f64) -> f64 {
        let span = self.x.1 - self.x.0;
        let t = if span > 0.0 { (x - self.x.0) / span } else { 0.5 };
        LEFT + t * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        let span = self.y.1 - self.y.0;
        let t = if span > 0.0 { (y - self.y.0) / span } else { 0.5 };
        H - BOTTOM - t * (H - TOP - BOTTOM)
    }

    fn y_ticks(&mut self, ticks: &[f64]) {
        for &t in ticks {
            let y = self.py(t);
            let _ = writeln!(self.svg, r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#, LEFT - 4.0);
            let _ = writeln!(self.svg, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, fmt_tick(t));
        }
    }

    fn x_tick(&mut self, x: f64, label: &str) {
        let px = self.px(x);
        let base = H - BOTTOM;
        let _ = writeln!(self.svg, r#"<line x1="{px:.2}" y1="{base}" x2="{px:.2}" y2="{}" stroke="black"/>"#, base + 4.0);
        let _ = writeln!(self.svg, r#"<text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#, base + 18.0, esc(label));
    }

    fn polyline(&mut self, pts: &[(f64, f64)], color: &str) {
        let mut d = String::new();
        for (x, y) in pts {
            let _ = write!(d, "{:.2},{:.2} ", self.px(*x), self.py(*y));
        }
        let _ = writeln!(self.svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, d.trim_end());
    }

    fn legend(&mut self, i: usize, label: &str, color: &str) {
        let x = W - RIGHT + 12.0;
        let y = TOP + 10.0 + 18.0 * i as f64;
        let _ = writeln!(self.svg, r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="3"/>"#, x + 18.0);
        let _ = writeln!(self.svg, r#"<text x="{}" y="{}">{}</text>"#, x + 24.0, y + 4.0, esc(label));
    }

    fn finish(mut self) -> String {
        self.svg.push_str("</svg>\n");
        self.svg
    }
}

fn fmt_tick(t: f64) -> String {
    if t == t.trunc() && t.abs() < 1e6 {
        format!("{t:.0}")
    } else {
        format!("{t}")
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn raw_rows(rows: &[ResultRow]) -> impl Iterator<Item = &ResultRow> {
    rows.iter().filter(|r| r.is_raw())
}

/// CDF of per-target AUC for each classifier on raw aggregates.
pub fn cdf_svg(rows: &[ResultRow]) -> Result<String> {
    let mut by: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in raw_rows(rows) {
        by.entry(r.classifier.as_str()).or_default().push(r.auc);
    }
    if by.is_empty() {
        return Err(Error::EmptySelection("no raw-aggregate rows for the AUC CDF".into()));
    }
    let mut c = Canvas::new("CDF of AUC per target", "AUC", "fraction of targets", (0.0, 1.0), (0.0, 1.0));
    c.y_ticks(&[0.0, 0.25, 0.5, 0.75, 1.0]);
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        c.x_tick(t, &fmt_tick(t));
    }
    for (i, (name, aucs)) in by.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut pts = vec![(0.0, 0.0)];
        let mut prev = 0.0;
        for (x, f) in ecdf(aucs) {
            pts.push((x, prev));
            pts.push((x, f));
            prev = f;
        }
        pts.push((1.0, 1.0));
        c.polyline(&pts, color);
        c.legend(i, name, color);
    }
    Ok(c.finish())
}

/// Box plot of the best classifier's privacy loss for each group size.
pub fn box_svg(rows: &[ResultRow]) -> Result<String> {
    let mut by: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in raw_rows(rows).filter(|r| r.classifier == BEST) {
        by.entry(r.m).or_default().push(r.pl);
    }
    if by.is_empty() {
        return Err(Error::EmptySelection("no BEST rows on raw aggregates for the PL box plot".into()));
    }
    let n = by.len() as f64;
    let mut c = Canvas::new("Privacy loss per group size", "m", "PL", (0.0, n), (0.0, 1.0));
    c.y_ticks(&[0.0, 0.25, 0.5, 0.75, 1.0]);
    for (i, (m, pls)) in by.iter().enumerate() {
        let [lo, q1, med, q3, hi] = five_numbers(pls).expect("non-empty group");
        let center = i as f64 + 0.5;
        c.x_tick(center, &m.to_string());
        let (x0, x1) = (c.px(center - 0.25), c.px(center + 0.25));
        let xc = c.px(center);
        let _ = writeln!(
            c.svg,
            r#"<line x1="{xc:.2}" y1="{:.2}" x2="{xc:.2}" y2="{:.2}" stroke="black"/>"#,
            c.py(lo),
            c.py(hi)
        );
        let _ = writeln!(
            c.svg,
            r##"<rect x="{x0:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#9ecae1" stroke="black"/>"##,
            c.py(q3),
            x1 - x0,
            c.py(q1) - c.py(q3)
        );
        let _ = writeln!(
            c.svg,
            r#"<line x1="{x0:.2}" y1="{0:.2}" x2="{x1:.2}" y2="{0:.2}" stroke="black" stroke-width="2"/>"#,
            c.py(med)
        );
    }
    Ok(c.finish())
}

/// Mean privacy gain of the best classifier against ε, one line per
/// mechanism and adversary mode, with ε on a log axis.
pub fn line_svg(rows: &[ResultRow]) -> Result<String> {
    let mut by: BTreeMap<(String, String), BTreeMap<u64, (f64, f64, usize)>> = BTreeMap::new();
    for r in rows.iter().filter(|r| !r.is_raw() && r.classifier == BEST) {
        let (Some(eps), Some(pg)) = (r.epsilon, r.pg) else { continue };
        let e = by.entry((r.mechanism.clone(), r.mode.clone())).or_default().entry(eps.to_bits()).or_insert((eps, 0.0, 0));
        e.1 += pg;
        e.2 += 1;
    }
    if by.is_empty() {
        return Err(Error::EmptySelection("no mechanism rows for the PG plot".into()));
    }
    let all_eps: Vec<f64> = by.values().flat_map(|m| m.values().map(|v| v.0)).collect();
    let lo = all_eps.iter().copied().fold(f64::INFINITY, f64::min).log10();
    let hi = all_eps.iter().copied().fold(f64::NEG_INFINITY, f64::max).log10();
    let mut c = Canvas::new("Privacy gain against epsilon", "epsilon", "mean PG", (lo, hi), (0.0, 1.0));
    c.y_ticks(&[0.0, 0.25, 0.5, 0.75, 1.0]);
    let mut ticks: Vec<f64> = all_eps.clone();
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    for t in ticks {
        c.x_tick(t.log10(), &format!("{t}"));
    }
    for (i, ((mech, mode), points)) in by.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut pts: Vec<(f64, f64)> = points.values().map(|(e, s, n)| (e.log10(), s / *n as f64)).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        c.polyline(&pts, color);
        c.legend(i, &format!("{mech} {mode}"), color);
    }
    Ok(c.finish())
}

pub fn render(rows: &[ResultRow], kind: PlotKind) -> Result<String> {
    match kind {
        PlotKind::Cdf => cdf_svg(rows),
        PlotKind::Box => box_svg(rows),
        PlotKind::Line => line_svg(rows),
    }
}

/// Writes `<kind>.svg` files into `dir` and returns their paths.
pub fn emit_plots(rows: &[ResultRow], kinds: &[PlotKind], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    kinds
        .iter()
        .map(|&k| {
            let svg = render(rows, k)?;
            let path = dir.join(format!("{}.svg", k.name()));
            fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
            Ok(path)
        })
        .collect()
}
