use std::fmt::Write;
use std::path::Path;

use crate::error::{Error, Result};

use super::metrics::{read_metrics, EpisodeMetrics};

pub const ROLLING_WINDOW: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Score,
    Reward,
}

impl PlotKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "score" => Ok(PlotKind::Score),
            "reward" => Ok(PlotKind::Reward),
            _ => Err(Error::Usage(format!(
                "unknown plot kind '{s}' (score|reward)"
            ))),
        }
    }

    fn value(self, m: &EpisodeMetrics) -> f64 {
        match self {
            PlotKind::Score => m.score as f64,
            PlotKind::Reward => m.cumulative_reward,
        }
    }

    fn label(self) -> &'static str {
        match self {
            PlotKind::Score => "Score",
            PlotKind::Reward => "Cumulative reward",
        }
    }
}

/// Trailing mean over at most `window` values.
pub fn rolling_mean(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

const W: f64 = 800.0;
const H: f64 = 400.0;
const MARGIN: f64 = 50.0;

/// Per-episode series with its rolling mean as an SVG document.
pub fn render_svg(rows: &[EpisodeMetrics], kind: PlotKind) -> String {
    let ys: Vec<f64> = rows.iter().map(|m| kind.value(m)).collect();
    let mean = rolling_mean(&ys, ROLLING_WINDOW);
    let (lo, hi) = ys
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| {
            (a.min(y), b.max(y))
        });
    let (lo, hi) = if ys.is_empty() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    };
    let span_x = (ys.len().max(2) - 1) as f64;
    let px = |i: usize| MARGIN + i as f64 / span_x * (W - 2.0 * MARGIN);
    let py = |y: f64| H - MARGIN - (y - lo) / (hi - lo) * (H - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{MARGIN} {top} V{bottom} H{right}" stroke="black" fill="none"/>"#,
        top = MARGIN,
        bottom = H - MARGIN,
        right = W - MARGIN
    );
    let _ = writeln!(
        s,
        r#"<text x="{x}" y="{y}" text-anchor="middle" font-size="14">Episode</text>"#,
        x = W / 2.0,
        y = H - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{y}" font-size="14" transform="rotate(-90 14 {y})" text-anchor="middle">{}</text>"#,
        kind.label(),
        y = H / 2.0
    );
    for (v, y) in [(lo, H - MARGIN), (hi, MARGIN)] {
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{y:.2}" font-size="11" text-anchor="end">{v:.2}</text>"#,
            x = MARGIN - 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{x}" y="{y}" font-size="11" text-anchor="end">{n}</text>"#,
        x = W - MARGIN,
        y = H - MARGIN + 16.0,
        n = ys.len().saturating_sub(1)
    );

    let series = |s: &mut String, vals: &[f64], colour: &str, class: &str| match vals {
        [] => {}
        [v] => {
            let _ = writeln!(
                s,
                r#"<circle class="{class}" cx="{:.2}" cy="{:.2}" r="3" fill="{colour}"/>"#,
                px(0),
                py(*v)
            );
        }
        _ => {
            let pts: Vec<String> = vals
                .iter()
                .enumerate()
                .map(|(i, &v)| format!("{:.2},{:.2}", px(i), py(v)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline class="{class}" points="{}" fill="none" stroke="{colour}" stroke-width="1"/>"#,
                pts.join(" ")
            );
        }
    };
    series(&mut s, &ys, "#9ecae1", "raw");
    series(&mut s, &mean, "#08519c", "rolling");
    s.push_str("</svg>\n");
    s
}

pub fn plot_file(metrics: &Path, kind: PlotKind, out: &Path) -> Result<()> {
    let rows = read_metrics(metrics)?;
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 2,
            message: "no data rows".into(),
        });
    }
    let svg = render_svg(&rows, kind);
    std::fs::write(out, svg).map_err(|e| Error::io(out, e))
}
