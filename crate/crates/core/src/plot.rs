//! SVG renderings of Hilbert grids, Betti dots, significance masks and
//! distance series. Output only; nothing here parses SVG.

use std::fmt::Write as _;

use crate::bipersistence::{BettiGrid, HilbertGrid};

const CELL: f64 = 24.0;
const MARGIN: f64 = 40.0;

/// Grayscale heat map of a Hilbert grid (darker is larger), function index
/// left to right and scale index bottom to top. Optional green (`xi0`) and
/// red (`xi1`) dots with area proportional to the Betti number, and red
/// outlines around pixels flagged in `mask`.
pub fn hilbert_svg(h: &HilbertGrid, betti: Option<&BettiGrid>, mask: Option<&[bool]>) -> String {
    let (m, n) = (h.grid().m(), h.grid().n());
    let width = 2.0 * MARGIN + m as f64 * CELL;
    let height = 2.0 * MARGIN + n as f64 * CELL;
    let max = h.max_value().max(1) as f64;
    let x = |i: usize| MARGIN + i as f64 * CELL;
    let y = |j: usize| MARGIN + (n - 1 - j) as f64 * CELL;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(out, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    for i in 0..m {
        for j in 0..n {
            let v = h.get(i, j) as f64;
            let shade = (255.0 - 215.0 * v / max).round() as u8;
            let _ = writeln!(
                out,
                r#"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="rgb({shade},{shade},{shade})"><title>({i},{j}) {v}</title></rect>"#,
                x(i),
                y(j)
            );
        }
    }
    if let Some(b) = betti {
        for i in 0..m.min(b.grid().m()) {
            for j in 0..n.min(b.grid().n()) {
                for (v, color, dx) in [(b.xi0(i, j), "green", 0.35), (b.xi1(i, j), "red", 0.65)] {
                    if v > 0 {
                        let r = 3.0 * (v as f64).sqrt();
                        let _ = writeln!(
                            out,
                            r#"<circle cx="{}" cy="{}" r="{r}" fill="{color}" fill-opacity="0.8"/>"#,
                            x(i) + dx * CELL,
                            y(j) + 0.5 * CELL
                        );
                    }
                }
            }
        }
    }
    if let Some(mask) = mask {
        for (k, _) in mask.iter().enumerate().filter(|(_, &s)| s) {
            let (i, j) = (k / n, k % n);
            let _ = writeln!(
                out,
                r#"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="none" stroke="red" stroke-width="2"/>"#,
                x(i),
                y(j)
            );
        }
    }
    let (a0, a1) = h.grid().func_range();
    let (e0, e1) = h.grid().scale_range();
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="{}" font-size="11">function {a0} .. {a1}</text>"#,
        height - MARGIN / 3.0
    );
    let _ = writeln!(
        out,
        r#"<text x="4" y="{}" font-size="11" transform="rotate(-90 4 {})">scale {e0} .. {e1}</text>"#,
        height - MARGIN,
        height - MARGIN
    );
    out.push_str("</svg>\n");
    out
}

/// Step plot of `(x, y)` points, e.g. distance against replacement count.
pub fn series_svg(points: &[(f64, f64)], x_label: &str, y_label: &str) -> String {
    let (w, hgt) = (640.0, 400.0);
    let xmax = points.iter().map(|p| p.0).fold(1e-12, f64::max);
    let ymax = points.iter().map(|p| p.1).fold(1e-12, f64::max);
    let px = |x: f64| MARGIN + x / xmax * (w - 2.0 * MARGIN);
    let py = |y: f64| hgt - MARGIN - y / ymax * (hgt - 2.0 * MARGIN);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{hgt}" viewBox="0 0 {w} {hgt}">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{hgt}" fill="white"/>"#);
    let path: Vec<String> = points.iter().map(|&(x, y)| format!("{},{}", px(x), py(y))).collect();
    let _ = writeln!(
        out,
        r#"<polyline points="{}" fill="none" stroke="black" stroke-width="1.5"/>"#,
        path.join(" ")
    );
    for &(x, y) in points {
        let _ = writeln!(out, r#"<circle cx="{}" cy="{}" r="2.5" fill="steelblue"/>"#, px(x), py(y));
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="12">{x_label} (max {xmax})</text>"#,
        w / 2.0 - 60.0,
        hgt - 8.0
    );
    let _ = writeln!(out, r#"<text x="4" y="20" font-size="12">{y_label} (max {ymax})</text>"#);
    out.push_str("</svg>\n");
    out
}
