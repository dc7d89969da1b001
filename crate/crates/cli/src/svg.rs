//! Native SVG line/scatter plots — no external plotting dependency.
//!
//! The studies only need simple charts: one polyline per series with
//! point markers, optional log-log scaling, axis ticks, and a legend.
//! Rendering is a pure function of its inputs, so plot files are as
//! reproducible as the CSVs they accompany.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// Axis scaling: raw coordinates or both axes log10-transformed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axes {
    Linear,
    LogLog,
}

/// One plotted curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const M_LEFT: f64 = 84.0;
const M_RIGHT: f64 = 24.0;
const M_TOP: f64 = 44.0;
const M_BOTTOM: f64 = 62.0;
const PALETTE: [&str; 6] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Render a chart to SVG text.
pub fn render_plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    axes: Axes,
    series: &[Series],
) -> Result<String> {
    if series.is_empty() {
        bail!("plot needs at least one series");
    }
    for s in series {
        if s.points.is_empty() {
            bail!("series `{}` has no points", s.label);
        }
        for &(x, y) in &s.points {
            if !(x.is_finite() && y.is_finite()) {
                bail!("non-finite point ({x}, {y}) in series `{}`", s.label);
            }
            if axes == Axes::LogLog && (x <= 0.0 || y <= 0.0) {
                bail!(
                    "non-positive value under log axes: ({x}, {y}) in series `{}`",
                    s.label
                );
            }
        }
    }

    let t = |v: f64| match axes {
        Axes::Linear => v,
        Axes::LogLog => v.log10(),
    };
    let back = |v: f64| match axes {
        Axes::Linear => v,
        Axes::LogLog => 10f64.powf(v),
    };

    let mut x_lo = f64::INFINITY;
    let mut x_hi = f64::NEG_INFINITY;
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in &s.points {
            x_lo = x_lo.min(t(x));
            x_hi = x_hi.max(t(x));
            y_lo = y_lo.min(t(y));
            y_hi = y_hi.max(t(y));
        }
    }
    let (x_lo, x_hi) = pad_range(x_lo, x_hi);
    let (y_lo, y_hi) = pad_range(y_lo, y_hi);

    let px = |v: f64| M_LEFT + (t(v) - x_lo) / (x_hi - x_lo) * (WIDTH - M_LEFT - M_RIGHT);
    let py = |v: f64| HEIGHT - M_BOTTOM - (t(v) - y_lo) / (y_hi - y_lo) * (HEIGHT - M_TOP - M_BOTTOM);

    let mut out = String::with_capacity(4096);
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r##"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="26" font-size="16" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        xml_escape(title)
    );

    // Gridlines and tick labels at five even positions per axis.
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let gx = M_LEFT + f * (WIDTH - M_LEFT - M_RIGHT);
        let gy = HEIGHT - M_BOTTOM - f * (HEIGHT - M_TOP - M_BOTTOM);
        let _ = writeln!(
            out,
            r##"<line x1="{gx:.2}" y1="{}" x2="{gx:.2}" y2="{}" stroke="#dddddd" stroke-width="1"/>"##,
            M_TOP,
            HEIGHT - M_BOTTOM
        );
        let _ = writeln!(
            out,
            r##"<line x1="{}" y1="{gy:.2}" x2="{}" y2="{gy:.2}" stroke="#dddddd" stroke-width="1"/>"##,
            M_LEFT,
            WIDTH - M_RIGHT
        );
        let xv = back(x_lo + f * (x_hi - x_lo));
        let yv = back(y_lo + f * (y_hi - y_lo));
        let _ = writeln!(
            out,
            r#"<text x="{gx:.2}" y="{}" font-size="11" text-anchor="middle">{}</text>"#,
            HEIGHT - M_BOTTOM + 18.0,
            fmt_tick(xv)
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
            M_LEFT - 8.0,
            gy + 4.0,
            fmt_tick(yv)
        );
    }

    // Axis frame.
    let _ = writeln!(
        out,
        r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#333333" stroke-width="1"/>"##,
        M_LEFT,
        M_TOP,
        WIDTH - M_LEFT - M_RIGHT,
        HEIGHT - M_TOP - M_BOTTOM
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">{}</text>"#,
        (M_LEFT + WIDTH - M_RIGHT) / 2.0,
        HEIGHT - 16.0,
        xml_escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="20" y="{0}" font-size="13" text-anchor="middle" transform="rotate(-90 20 {0})">{1}</text>"#,
        (M_TOP + HEIGHT - M_BOTTOM) / 2.0,
        xml_escape(y_label)
    );

    // Series: polyline plus a marker per point.
    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let coords: Vec<String> =
            s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            coords.join(" ")
        );
        for &(x, y) in &s.points {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                px(x),
                py(y)
            );
        }
    }

    // Legend, top-right inside the frame.
    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let ly = M_TOP + 16.0 + 16.0 * si as f64;
        let lx = WIDTH - M_RIGHT - 150.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 22.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="12">{}</text>"#,
            lx + 28.0,
            ly + 4.0,
            xml_escape(&s.label)
        );
    }

    out.push_str("</svg>\n");
    Ok(out)
}

/// Render and write a chart, surfacing I/O errors with the path.
pub fn write_svg_plot(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    axes: Axes,
    series: &[Series],
) -> Result<()> {
    let svg = render_plot(title, x_label, y_label, axes, series)?;
    std::fs::write(path, svg).with_context(|| format!("writing {}", path.display()))
}

/// Structural XML well-formedness check: balanced, properly nested tags
/// with quoted attributes, exactly one root element, and no stray `&` or
/// `<` in text content. Not a validator, but enough to catch every way a
/// string-built SVG can go wrong.
pub fn check_well_formed(xml: &str) -> Result<()> {
    let bytes = xml.as_bytes();
    let mut stack: Vec<String> = Vec::new();
    let mut roots = 0usize;
    let mut i = 0usize;
    while i < bytes.len() {
        if bytes[i] == b'<' {
            if xml[i..].starts_with("<?") {
                let end = xml[i..]
                    .find("?>")
                    .ok_or_else(|| anyhow::anyhow!("unterminated processing instruction"))?;
                i += end + 2;
                continue;
            }
            let close = bytes[i + 1..].first() == Some(&b'/');
            let name_start = if close { i + 2 } else { i + 1 };
            let mut j = name_start;
            while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'-') {
                j += 1;
            }
            if j == name_start {
                bail!("empty tag name at byte {i}");
            }
            let name = &xml[name_start..j];
            // Scan to the closing '>' of this tag, honoring quotes.
            let mut in_quote = false;
            let mut self_closing = false;
            while j < bytes.len() {
                match bytes[j] {
                    b'"' => in_quote = !in_quote,
                    b'>' if !in_quote => break,
                    b'<' if !in_quote => bail!("raw `<` inside tag `{name}`"),
                    b'/' if !in_quote => self_closing = true,
                    _ => {}
                }
                j += 1;
            }
            if j >= bytes.len() {
                bail!("unterminated tag `{name}`");
            }
            if in_quote {
                bail!("unterminated attribute value in tag `{name}`");
            }
            if close {
                match stack.pop() {
                    Some(open) if open == name => {}
                    Some(open) => bail!("mismatched tags: `<{open}>` closed by `</{name}>`"),
                    None => bail!("closing tag `</{name}>` with nothing open"),
                }
            } else if self_closing {
                if stack.is_empty() {
                    roots += 1;
                }
            } else {
                if stack.is_empty() {
                    roots += 1;
                }
                stack.push(name.to_string());
            }
            i = j + 1;
        } else {
            match bytes[i] {
                b'>' => bail!("raw `>` in text content at byte {i}"),
                b'&' => {
                    const ENTITIES: [&str; 5] = ["&amp;", "&lt;", "&gt;", "&quot;", "&apos;"];
                    if !ENTITIES.iter().any(|e| xml[i..].starts_with(e)) {
                        bail!("raw `&` in text content at byte {i}");
                    }
                    i += 1;
                }
                _ => {}
            }
            i += 1;
        }
    }
    if let Some(open) = stack.pop() {
        bail!("tag `<{open}>` never closed");
    }
    if roots != 1 {
        bail!("expected exactly one root element, found {roots}");
    }
    Ok(())
}

/// Pad a (possibly degenerate) data range so every point sits strictly
/// inside the frame.
fn pad_range(lo: f64, hi: f64) -> (f64, f64) {
    let span = hi - lo;
    if span == 0.0 {
        (lo - 1.0, hi + 1.0)
    } else {
        (lo - 0.05 * span, hi + 0.05 * span)
    }
}

fn fmt_tick(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        return "0".to_string();
    }
    if !(1e-3..1e4).contains(&a) {
        return format!("{v:.1e}");
    }
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
        .replace('\'', "&apos;")
}
