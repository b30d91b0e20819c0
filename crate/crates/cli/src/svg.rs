//! Minimal SVG charts. Every bar and point carries its value in a
//! `data-value` attribute so charts can be checked against their source.

use std::fmt::Write;

use spikeguard::attack::NoisePoint;

const PLOT_H: f64 = 200.0;
const MARGIN: f64 = 40.0;
const BAR_W: f64 = 12.0;
const GROUP_GAP: f64 = 16.0;

/// Name, stroke colour and `(magnitude, accuracy)` points.
type Series<'a> = (&'a str, &'a str, Vec<(f64, f64)>);

/// Height in pixels of a bar for `accuracy` in `[0, 1]`.
pub fn bar_height(accuracy: f64) -> f64 {
    accuracy * PLOT_H
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn open(out: &mut String, width: f64, height: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(out, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(
        out,
        r##"<line x1="{MARGIN}" y1="{y}" x2="{x2}" y2="{y}" stroke="#000"/>"##,
        y = MARGIN + PLOT_H,
        x2 = width - MARGIN / 2.0
    );
    let _ = writeln!(
        out,
        r##"<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{y}" stroke="#000"/>"##,
        y = MARGIN + PLOT_H
    );
}

/// Grouped bars: one group per spatial radius, one bar per temporal threshold.
/// `cells` are `(s, t_ms, accuracy)` in search order.
pub fn grid_chart(model: &str, cells: &[(u32, f64, f64)]) -> String {
    let mut spatial: Vec<u32> = Vec::new();
    let mut temporal: Vec<f64> = Vec::new();
    for &(s, t, _) in cells {
        if !spatial.contains(&s) {
            spatial.push(s);
        }
        if !temporal.contains(&t) {
            temporal.push(t);
        }
    }
    let label = escape(model);
    let group_w = temporal.len() as f64 * BAR_W + GROUP_GAP;
    let width = 2.0 * MARGIN + spatial.len() as f64 * group_w;
    let height = PLOT_H + 2.0 * MARGIN;
    let mut out = String::new();
    open(
        &mut out,
        width,
        height,
        &format!("Threat model {model}: accuracy per (s, t)"),
    );
    for &(s, t, acc) in cells {
        let gi = spatial.iter().position(|&v| v == s).unwrap_or(0);
        let ti = temporal.iter().position(|&v| v == t).unwrap_or(0);
        let x = MARGIN + GROUP_GAP / 2.0 + gi as f64 * group_w + ti as f64 * BAR_W;
        let h = bar_height(acc);
        let shade = 40 + (ti * 180 / temporal.len().max(1)) as u32;
        let _ = writeln!(
            out,
            r#"<rect class="bar" data-model="{label}" data-s="{s}" data-t-ms="{t}" data-value="{acc}" x="{x}" y="{y}" width="{w}" height="{h}" fill="rgb({shade},90,160)"/>"#,
            y = MARGIN + PLOT_H - h,
            w = BAR_W - 2.0,
        );
    }
    for (gi, s) in spatial.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text x="{x}" y="{y}" font-size="10" text-anchor="middle">s={s}</text>"#,
            x = MARGIN
                + GROUP_GAP / 2.0
                + gi as f64 * group_w
                + temporal.len() as f64 * BAR_W / 2.0,
            y = MARGIN + PLOT_H + 14.0
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Accuracy against noise magnitude, unfiltered and (if present) filtered.
pub fn noise_chart(kind: &str, points: &[&NoisePoint]) -> String {
    let max_m = points.iter().map(|p| p.magnitude).fold(0.0f64, f64::max);
    let plot_w = 320.0;
    let width = plot_w + 2.0 * MARGIN;
    let height = PLOT_H + 2.0 * MARGIN;
    let px = |m: f64| MARGIN + if max_m > 0.0 { m / max_m * plot_w } else { 0.0 };
    let py = |a: f64| MARGIN + PLOT_H - bar_height(a);
    let mut out = String::new();
    open(
        &mut out,
        width,
        height,
        &format!("Accuracy under {kind} noise"),
    );
    let series: [Series; 2] = [
        (
            "unfiltered",
            "#c0392b",
            points
                .iter()
                .map(|p| (p.magnitude, p.unfiltered_accuracy))
                .collect(),
        ),
        (
            "filtered",
            "#2471a3",
            points
                .iter()
                .filter_map(|p| p.filtered_accuracy.map(|a| (p.magnitude, a)))
                .collect(),
        ),
    ];
    for (name, color, pts) in &series {
        if pts.is_empty() {
            continue;
        }
        let path: Vec<String> = pts
            .iter()
            .map(|&(m, a)| format!("{},{}", px(m), py(a)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline class="series" data-series="{name}" points="{}" fill="none" stroke="{color}"/>"#,
            path.join(" ")
        );
        for &(m, a) in pts {
            let _ = writeln!(
                out,
                r#"<circle class="point" data-series="{name}" data-magnitude="{m}" data-value="{a}" cx="{}" cy="{}" r="3" fill="{color}"/>"#,
                px(m),
                py(a)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
