//! Minimal SVG renderings of decision curves and best-strategy maps.

use std::fmt::Write;

use crate::dca::CurvePoint;
use crate::format::sig6;

const PALETTE: [&str; 8] = [
    "#4d4d4d", "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d",
];

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const PAD_L: f64 = 64.0;
const PAD_R: f64 = 160.0;
const PAD_T: f64 = 24.0;
const PAD_B: f64 = 48.0;

fn header(out: &mut String) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn strategy_labels(points: &[CurvePoint]) -> Vec<String> {
    points
        .first()
        .map(|p| p.nb.iter().map(|(s, _)| s.label()).collect())
        .unwrap_or_default()
}

fn legend(out: &mut String, labels: &[String], swatch: impl Fn(usize) -> String) {
    for (i, l) in labels.iter().enumerate() {
        let y = PAD_T + 14.0 + 18.0 * i as f64;
        let x = WIDTH - PAD_R + 16.0;
        let _ = writeln!(out, "{}", swatch(i).replace("{x}", &x.to_string()).replace("{y}", &(y - 9.0).to_string()));
        let _ = writeln!(out, r#"<text x="{}" y="{y}">{}</text>"#, x + 18.0, escape(l));
    }
}

/// Net benefit against the primary threshold, one line per strategy.
/// Non-estimable points break the line.
pub fn curve_svg(points: &[CurvePoint], x_label: &str) -> String {
    let labels = strategy_labels(points);
    let values: Vec<f64> = points.iter().flat_map(|p| p.nb.iter().filter_map(|(_, v)| *v)).collect();
    let (mut y_lo, mut y_hi) = values
        .iter()
        .fold((0.0f64, 0.0f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    if y_hi - y_lo < 1e-9 {
        y_lo -= 0.05;
        y_hi += 0.05;
    }
    let x_lo = points.first().map_or(0.0, |p| p.t_primary);
    let x_hi = points.last().map_or(1.0, |p| p.t_primary).max(x_lo + 1e-9);
    let plot_w = WIDTH - PAD_L - PAD_R;
    let plot_h = HEIGHT - PAD_T - PAD_B;
    let sx = |x: f64| PAD_L + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |y: f64| PAD_T + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let mut out = String::new();
    header(&mut out);
    let _ = writeln!(
        out,
        r##"<rect x="{PAD_L}" y="{PAD_T}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#999"/>"##
    );
    let _ = writeln!(
        out,
        r##"<line x1="{PAD_L}" x2="{}" y1="{z}" y2="{z}" stroke="#ccc" stroke-dasharray="4 3"/>"##,
        PAD_L + plot_w,
        z = sy(0.0)
    );
    for (v, anchor) in [(y_lo, "end"), (y_hi, "end")] {
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="{anchor}">{}</text>"#, PAD_L - 6.0, sy(v) + 4.0, sig6(v));
    }
    for v in [x_lo, x_hi] {
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, sx(v), HEIGHT - PAD_B + 16.0, sig6(v));
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, PAD_L + plot_w / 2.0, HEIGHT - 10.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text transform="translate(16 {}) rotate(-90)" text-anchor="middle">net benefit</text>"#,
        PAD_T + plot_h / 2.0
    );

    for (k, _) in labels.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let mut segment: Vec<String> = Vec::new();
        let flush = |segment: &mut Vec<String>, out: &mut String| {
            if segment.len() > 1 {
                let _ = writeln!(out, r#"<polyline fill="none" stroke="{colour}" stroke-width="1.8" points="{}"/>"#, segment.join(" "));
            } else if let Some(p) = segment.first() {
                let (x, y) = p.split_once(',').unwrap_or(("0", "0"));
                let _ = writeln!(out, r#"<circle cx="{x}" cy="{y}" r="2" fill="{colour}"/>"#);
            }
            segment.clear();
        };
        for p in points {
            match p.nb.get(k).and_then(|(_, v)| *v) {
                Some(v) => segment.push(format!("{:.2},{:.2}", sx(p.t_primary), sy(v))),
                None => flush(&mut segment, &mut out),
            }
        }
        flush(&mut segment, &mut out);
    }
    legend(&mut out, &labels, |i| {
        format!(
            r#"<rect x="{{x}}" y="{{y}}" width="12" height="10" fill="{}"/>"#,
            PALETTE[i % PALETTE.len()]
        )
    });
    out.push_str("</svg>\n");
    out
}

/// Grid coloured by the best strategy; hatched cells are not estimable.
pub fn heatmap_svg(grid: &[Vec<CurvePoint>], x_label: &str, y_label: &str) -> String {
    let labels = grid.first().map(|r| strategy_labels(r)).unwrap_or_default();
    let rows = grid.len().max(1);
    let cols = grid.first().map_or(1, |r| r.len().max(1));
    let plot_w = WIDTH - PAD_L - PAD_R;
    let plot_h = HEIGHT - PAD_T - PAD_B;
    let cw = plot_w / rows as f64;
    let ch = plot_h / cols as f64;

    let mut out = String::new();
    header(&mut out);
    let _ = writeln!(
        out,
        r##"<defs><pattern id="hatch" width="6" height="6" patternUnits="userSpaceOnUse" patternTransform="rotate(45)"><rect width="6" height="6" fill="#eee"/><line x1="0" y1="0" x2="0" y2="6" stroke="#888" stroke-width="2"/></pattern></defs>"##
    );
    // Primary axis runs along x, shared axis up the y direction.
    for (i, row) in grid.iter().enumerate() {
        for (j, p) in row.iter().enumerate() {
            let fill = match &p.best {
                Some(b) => {
                    let k = labels.iter().position(|l| *l == b.label()).unwrap_or(0);
                    PALETTE[k % PALETTE.len()].to_string()
                }
                None => "url(#hatch)".to_string(),
            };
            let x = PAD_L + i as f64 * cw;
            let y = PAD_T + plot_h - (j + 1) as f64 * ch;
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{cw:.2}" height="{ch:.2}" fill="{fill}"><title>{} {} {}</title></rect>"#,
                sig6(p.t_primary),
                sig6(p.t_shared),
                p.best.as_ref().map_or("not estimable".to_string(), |b| b.label())
            );
        }
    }
    if let (Some(first), Some(last)) = (grid.first().and_then(|r| r.first()), grid.last().and_then(|r| r.last())) {
        let _ = writeln!(out, r#"<text x="{PAD_L}" y="{}">{}</text>"#, HEIGHT - PAD_B + 16.0, sig6(first.t_primary));
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, PAD_L + plot_w, HEIGHT - PAD_B + 16.0, sig6(last.t_primary));
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, PAD_L - 6.0, PAD_T + plot_h, sig6(first.t_shared));
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, PAD_L - 6.0, PAD_T + 10.0, sig6(last.t_shared));
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, PAD_L + plot_w / 2.0, HEIGHT - 10.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text transform="translate(16 {}) rotate(-90)" text-anchor="middle">{}</text>"#,
        PAD_T + plot_h / 2.0,
        escape(y_label)
    );
    let mut legend_labels = labels.clone();
    legend_labels.push("not estimable".into());
    let n = labels.len();
    legend(&mut out, &legend_labels, |i| {
        let fill = if i == n { "url(#hatch)".to_string() } else { PALETTE[i % PALETTE.len()].to_string() };
        format!(r#"<rect x="{{x}}" y="{{y}}" width="12" height="10" fill="{fill}"/>"#)
    });
    out.push_str("</svg>\n");
    out
}
