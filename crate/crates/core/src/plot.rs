//! SVG line charts of grid results.
//!
//! One polyline per (metric, combination of the two non-axis parameters).
//! Output depends only on the input cells, so identical results produce
//! byte-identical files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{config_err, data_err, Error, Result};
use crate::experiments::CellResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XAxis {
    Window,
    StayProb,
    Exponent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Mse,
    Bias,
    Variance,
}

impl FromStr for XAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "window" => Ok(XAxis::Window),
            "stay_prob" => Ok(XAxis::StayProb),
            "exponent" => Ok(XAxis::Exponent),
            other => Err(config_err!(
                "unknown x axis {other:?}; expected window, stay_prob or exponent"
            )),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(Metric::Mse),
            "bias" => Ok(Metric::Bias),
            "variance" => Ok(Metric::Variance),
            other => Err(config_err!(
                "unknown metric {other:?}; expected mse, bias or variance"
            )),
        }
    }
}

impl XAxis {
    fn label(self) -> &'static str {
        match self {
            XAxis::Window => "window size T",
            XAxis::StayProb => "stay probability",
            XAxis::Exponent => "curve exponent",
        }
    }

    fn value(self, c: &CellResult) -> f64 {
        match self {
            XAxis::Window => c.window as f64,
            XAxis::StayProb => c.stay_prob,
            XAxis::Exponent => c.exponent,
        }
    }

    /// Human-readable description of the parameters held fixed along a series.
    fn series_key(self, c: &CellResult) -> String {
        match self {
            XAxis::Window => format!("p^{} q={}", c.exponent, c.stay_prob),
            XAxis::StayProb => format!("p^{} T={}", c.exponent, c.window),
            XAxis::Exponent => format!("q={} T={}", c.stay_prob, c.window),
        }
    }

    /// Sort key matching `series_key`.
    fn series_order(self, c: &CellResult) -> (u64, u64) {
        let bits = |x: f64| x.to_bits();
        match self {
            XAxis::Window => (bits(c.exponent), bits(c.stay_prob)),
            XAxis::StayProb => (bits(c.exponent), c.window as u64),
            XAxis::Exponent => (bits(c.stay_prob), c.window as u64),
        }
    }
}

impl Metric {
    fn name(self) -> &'static str {
        match self {
            Metric::Mse => "mse",
            Metric::Bias => "bias",
            Metric::Variance => "variance",
        }
    }

    fn value(self, c: &CellResult) -> f64 {
        match self {
            Metric::Mse => c.mse,
            Metric::Bias => c.bias,
            Metric::Variance => c.variance,
        }
    }
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 220.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

/// Round tick positions covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn fmt_tick(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.abs() >= 1e4 || x.abs() < 1e-3 {
        format!("{x:.1e}")
    } else {
        let s = format!("{x:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = (hi - lo) * 0.05;
        (lo - pad, hi + pad)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        (lo - pad, hi + pad)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Renders the chart as an SVG document.
pub fn render_svg(cells: &[CellResult], x_axis: XAxis, metrics: &[Metric]) -> Result<String> {
    if cells.is_empty() {
        return Err(data_err!("no cells to plot"));
    }
    if metrics.is_empty() {
        return Err(config_err!("at least one metric is required"));
    }

    let mut groups: BTreeMap<(u64, u64), Vec<&CellResult>> = BTreeMap::new();
    for c in cells {
        groups.entry(x_axis.series_order(c)).or_default().push(c);
    }
    let mut series = Vec::new();
    for &metric in metrics {
        for group in groups.values() {
            let mut points: Vec<(f64, f64)> = group
                .iter()
                .map(|c| (x_axis.value(c), metric.value(c)))
                .collect();
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            series.push(Series {
                label: format!("{} {}", metric.name(), x_axis.series_key(group[0])),
                points,
            });
        }
    }

    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in all {
        x_lo = x_lo.min(x);
        x_hi = x_hi.max(x);
        y_lo = y_lo.min(y);
        y_hi = y_hi.max(y);
    }
    if !(y_lo.is_finite() && y_hi.is_finite()) {
        return Err(data_err!("non-finite values cannot be plotted"));
    }
    let (x_lo, x_hi) = padded(x_lo, x_hi);
    let (y_lo, y_hi) = padded(y_lo, y_hi);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |y: f64| TOP + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );

    for t in ticks(x_lo, x_hi) {
        let x = sx(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 20.0,
            fmt_tick(t)
        );
    }
    for t in ticks(y_lo, y_hi) {
        let y = sy(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT,
            LEFT + plot_w,
            LEFT - 6.0,
            y + 4.0,
            fmt_tick(t)
        );
    }
    let y_label = metrics
        .iter()
        .map(|m| m.name())
        .collect::<Vec<_>>()
        .join(" / ");
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0,
        x_axis.label()
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{y_label}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="series" data-label="{}" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            escape(&s.label),
            pts.join(" ")
        );
        for &(x, y) in &s.points {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                sx(x),
                sy(y)
            );
        }
        let ly = TOP + 10.0 + i as f64 * 18.0;
        let lx = LEFT + plot_w + 15.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_plot(
    cells: &[CellResult],
    x_axis: XAxis,
    metrics: &[Metric],
    path: impl AsRef<Path>,
) -> Result<()> {
    let svg = render_svg(cells, x_axis, metrics)?;
    std::fs::write(path, svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cells(exponent: f64, q: f64) -> Vec<CellResult> {
        (0..=10)
            .map(|w| {
                let e = [2.0 + 0.01 * w as f64, 2.2 - 0.02 * w as f64];
                CellResult::from_estimates(exponent, q, w, 100, &e, 2.0)
            })
            .collect()
    }

    fn polylines(svg: &str) -> usize {
        svg.matches("<polyline").count()
    }

    #[test]
    fn one_series_per_parameter_combination() {
        let svg = render_svg(&cells(1.8, 0.95), XAxis::Window, &[Metric::Mse]).unwrap();
        assert_eq!(polylines(&svg), 1);
        assert!(svg.contains("window size T"));
        let mut two = cells(1.8, 0.95);
        two.extend(cells(1.8, 0.5));
        let svg = render_svg(&two, XAxis::Window, &[Metric::Mse]).unwrap();
        assert_eq!(polylines(&svg), 2);
    }

    #[test]
    fn overlaid_metrics() {
        let svg = render_svg(
            &cells(1.8, 0.95),
            XAxis::Window,
            &[Metric::Bias, Metric::Variance],
        )
        .unwrap();
        assert_eq!(polylines(&svg), 2);
        assert!(svg.contains("bias / variance"));
    }

    #[test]
    fn single_point_and_empty_input() {
        let one = &cells(1.0, 0.9)[..1];
        let svg = render_svg(one, XAxis::Window, &[Metric::Mse]).unwrap();
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(render_svg(&[], XAxis::Window, &[Metric::Mse]).is_err());
    }

    #[test]
    fn deterministic() {
        let c = cells(0.6, 0.8);
        assert_eq!(
            render_svg(&c, XAxis::Window, &[Metric::Mse]).unwrap(),
            render_svg(&c, XAxis::Window, &[Metric::Mse]).unwrap()
        );
    }

    #[test]
    fn tick_positions() {
        assert_eq!(ticks(0.0, 10.0), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        assert!(ticks(-0.5, 10.5).contains(&0.0));
        assert_eq!(fmt_tick(0.25), "0.25");
    }
}
