//! Deterministic SVG 1.1 emission for scatter plots, dendrograms, and
//! projected 3-D embeddings. Byte output is a pure function of the input:
//! coordinates are formatted with fixed precision and elements are written
//! in input order.

use std::fmt::Write as _;
use std::path::Path;

use crate::analysis::Dendrogram;
use crate::error::Result;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 40.0;

/// Fixed categorical palette; label k uses color k mod len.
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

pub enum SvgPlot<'a> {
    /// 2-D points with optional per-point labels (colors).
    Scatter { points: &'a [Vec<f64>], labels: Option<&'a [usize]> },
    /// Merge tree drawn with leaves on the x-axis and height upward.
    Dendrogram(&'a Dendrogram),
    /// 3-D points drawn via a fixed isometric projection.
    Mds3dProjection { points: &'a [Vec<f64>], labels: Option<&'a [usize]> },
}

fn fmt(v: f64) -> String {
    format!("{:.3}", v)
}

fn header(out: &mut String) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    );
    let _ = write!(out, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n");
    // Plot frame.
    let _ = write!(
        out,
        "<rect x=\"{m}\" y=\"{m}\" width=\"{w}\" height=\"{h}\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n",
        m = MARGIN,
        w = WIDTH - 2.0 * MARGIN,
        h = HEIGHT - 2.0 * MARGIN
    );
}

/// Affine map from data bounds to the plot frame (y inverted).
fn mapper(points: &[Vec<f64>], xi: usize, yi: usize) -> impl Fn(f64, f64) -> (f64, f64) {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        x0 = x0.min(p[xi]);
        x1 = x1.max(p[xi]);
        y0 = y0.min(p[yi]);
        y1 = y1.max(p[yi]);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let dx = (x1 - x0).max(1e-12);
    let dy = (y1 - y0).max(1e-12);
    move |x: f64, y: f64| {
        let px = MARGIN + (x - x0) / dx * (WIDTH - 2.0 * MARGIN);
        let py = HEIGHT - MARGIN - (y - y0) / dy * (HEIGHT - 2.0 * MARGIN);
        (px, py)
    }
}

fn scatter_2d(out: &mut String, pts: &[(f64, f64)], labels: Option<&[usize]>) {
    for (i, &(x, y)) in pts.iter().enumerate() {
        let color = labels
            .map(|l| PALETTE[l[i] % PALETTE.len()])
            .unwrap_or(PALETTE[0]);
        let _ = write!(
            out,
            "<circle cx=\"{}\" cy=\"{}\" r=\"2.5\" fill=\"{}\"/>\n",
            fmt(x),
            fmt(y),
            color
        );
    }
}

/// Renders the plot and writes it to `path`.
pub fn emit_svg(plot: &SvgPlot, path: &Path) -> Result<()> {
    let bytes = render_svg(plot);
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Renders the plot to its exact byte content.
pub fn render_svg(plot: &SvgPlot) -> String {
    let mut out = String::new();
    header(&mut out);
    match plot {
        SvgPlot::Scatter { points, labels } => {
            let map = mapper(points, 0, 1.min(points.first().map_or(1, |p| p.len() - 1)));
            let pts: Vec<(f64, f64)> = points
                .iter()
                .map(|p| map(p[0], if p.len() > 1 { p[1] } else { 0.0 }))
                .collect();
            scatter_2d(&mut out, &pts, *labels);
        }
        SvgPlot::Mds3dProjection { points, labels } => {
            // Isometric projection: u = x - z/sqrt(2), v = y - z/sqrt(2).
            let s = 1.0 / 2f64.sqrt();
            let projected: Vec<Vec<f64>> = points
                .iter()
                .map(|p| {
                    let z = if p.len() > 2 { p[2] } else { 0.0 };
                    vec![p[0] - s * z, if p.len() > 1 { p[1] } else { 0.0 } - s * z]
                })
                .collect();
            let map = mapper(&projected, 0, 1);
            let pts: Vec<(f64, f64)> = projected.iter().map(|p| map(p[0], p[1])).collect();
            scatter_2d(&mut out, &pts, *labels);
        }
        SvgPlot::Dendrogram(dend) => {
            // Leaf order: left-to-right recursion over the merge tree.
            let n = dend.n;
            let mut order = Vec::with_capacity(n);
            if n > 0 {
                let root = if n == 1 { 0 } else { n + dend.merges.len() - 1 };
                let mut stack = vec![root];
                while let Some(c) = stack.pop() {
                    if c < n {
                        order.push(c);
                    } else {
                        let (a, b, _) = dend.merges[c - n];
                        stack.push(b);
                        stack.push(a);
                    }
                }
            }
            let mut leaf_x = vec![0.0; n];
            for (pos, &leaf) in order.iter().enumerate() {
                leaf_x[leaf] = if n == 1 {
                    0.5
                } else {
                    pos as f64 / (n - 1) as f64
                };
            }
            let max_h = dend
                .merges
                .iter()
                .map(|m| m.2)
                .filter(|h| h.is_finite())
                .fold(0.0f64, f64::max)
                .max(1e-12);
            // Cluster id -> (x position, current height).
            let mut pos: Vec<(f64, f64)> = leaf_x.iter().map(|&x| (x, 0.0)).collect();
            let map = |x: f64, h: f64| -> (f64, f64) {
                (
                    MARGIN + x * (WIDTH - 2.0 * MARGIN),
                    HEIGHT - MARGIN - (h / max_h).min(1.0) * (HEIGHT - 2.0 * MARGIN),
                )
            };
            for &(a, b, h) in &dend.merges {
                let (xa, ha) = pos[a];
                let (xb, hb) = pos[b];
                let hh = if h.is_finite() { h } else { max_h };
                let (pxa, pya) = map(xa, ha);
                let (pxb, pyb) = map(xb, hb);
                let (_, py) = map(xa, hh);
                let _ = write!(
                    &mut out,
                    "<path d=\"M {} {} L {} {} L {} {} L {} {}\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n",
                    fmt(pxa), fmt(pya), fmt(pxa), fmt(py), fmt(pxb), fmt(py), fmt(pxb), fmt(pyb)
                );
                pos.push(((xa + xb) / 2.0, hh));
            }
        }
    }
    out.push_str("</svg>\n");
    out
}
