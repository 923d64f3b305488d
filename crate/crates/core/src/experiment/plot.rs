//! Standalone SVG line charts with error bars.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::ResultRow;
use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

#[derive(Clone, Debug, PartialEq)]
pub struct PlotStyle {
    pub title: String,
    pub x_label: String,
    /// Logarithmic x axis; needs positive sweep values.
    pub log_x: bool,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e6 {
        format!("{v:.0}")
    } else if v.abs() >= 1e-2 {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.1e}")
    }
}

pub fn render_svg(rows: &[ResultRow], style: &PlotStyle) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::InvalidInput(
            "nothing to plot: no result rows".into(),
        ));
    }
    let log_x = style.log_x && rows.iter().all(|r| r.swept > 0.0);
    let xv = |x: f64| if log_x { x.log10() } else { x };

    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in rows {
        x0 = x0.min(xv(r.swept));
        x1 = x1.max(xv(r.swept));
        for (m, s) in [(r.cnn_mean, r.cnn_std), (r.stokes_mean, r.stokes_std)] {
            y0 = y0.min(m - s);
            y1 = y1.max(m + s);
        }
    }
    if !(x0.is_finite() && x1.is_finite() && y0.is_finite() && y1.is_finite()) {
        return Err(Error::NumericalFailure(
            "non-finite value in plot rows".into(),
        ));
    }
    if x1 - x0 < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    let pad = ((y1 - y0) * 0.05).max(1e-3);
    y0 -= pad;
    y1 += pad;

    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (xv(x) - x0) / (x1 - x0) * pw;
    let py = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(&style.title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );

    for i in 0..=5 {
        let y = y0 + (y1 - y0) * i as f64 / 5.0;
        let yy = py(y);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{y:.4}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            yy + 4.0
        );
    }
    let mut xs: Vec<f64> = rows.iter().map(|r| r.swept).collect();
    xs.dedup();
    let stride = xs.len().div_ceil(12).max(1);
    for x in xs.iter().step_by(stride) {
        let xx = px(*x);
        let _ = writeln!(
            s,
            r#"<line x1="{xx:.2}" y1="{:.2}" x2="{xx:.2}" y2="{:.2}" stroke="black"/><text x="{xx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0,
            tick_label(*x)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 18.0,
        escape(&style.x_label),
        if log_x { " (log scale)" } else { "" }
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">mean fidelity</text>"#,
        TOP + ph / 2.0
    );

    let series: [(&str, &str, &str, fn(&ResultRow) -> (f64, f64)); 2] = [
        ("CNN", "#c0392b", "", |r| (r.cnn_mean, r.cnn_std)),
        ("Stokes", "#1e8449", r#" stroke-dasharray="6 4""#, |r| {
            (r.stokes_mean, r.stokes_std)
        }),
    ];
    for (k, (name, color, dash, get)) in series.iter().enumerate() {
        let pts: Vec<String> = rows
            .iter()
            .map(|r| format!("{:.2},{:.2}", px(r.swept), py(get(r).0)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
            pts.join(" ")
        );
        for r in rows {
            let (m, sd) = get(r);
            let (xx, yy) = (px(r.swept), py(m));
            if sd > 0.0 {
                let (ya, yb) = (py(m - sd), py(m + sd));
                let _ = writeln!(
                    s,
                    r#"<path d="M{xx:.2} {ya:.2}V{yb:.2}M{:.2} {ya:.2}h8M{:.2} {yb:.2}h8" stroke="{color}"/>"#,
                    xx - 4.0,
                    xx - 4.0
                );
            }
            let _ = writeln!(
                s,
                r#"<circle cx="{xx:.2}" cy="{yy:.2}" r="3" fill="{color}"/>"#
            );
        }
        let ly = TOP + 14.0 + 16.0 * k as f64;
        let lx = LEFT + pw - 110.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="1.5"{dash}/><text x="{:.2}" y="{:.2}">{name}</text>"#,
            lx + 24.0,
            lx + 30.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Write the chart to `path`. Empty input is an error and leaves no file.
pub fn emit_plot(rows: &[ResultRow], path: &Path, style: &PlotStyle) -> Result<()> {
    let svg = render_svg(rows, style)?;
    fs::write(path, svg)?;
    Ok(())
}
