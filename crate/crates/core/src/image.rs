//! Image segmentation on joint spatial-range features.
//!
//! Pixels become 5-d features (row, col, L*, u*, v*). Each pixel owns a
//! cluster point T(x) that drifts to the mean of a bandwidth-limited
//! neighborhood; the spatial filter is the transformed distance
//! sqrt(|x_i^s - x_j^s|^2 + lambda * d_cov^2(Sigma(x_j), Sigma(T))),
//! which at lambda = 0 is plain mean shift. Converged cluster points are
//! joined into clusters by connected components under both bandwidths.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::psd::{bures_distance, SymMatrix};

/// Raster image, row-major, values in [0,255].
#[derive(Debug, Clone)]
pub struct PixelGrid {
    pub width: usize,
    pub height: usize,
    /// 1 (gray) or 3 (RGB).
    pub channels: usize,
    pub values: Vec<f64>,
}

impl PixelGrid {
    pub fn new(width: usize, height: usize, channels: usize, values: Vec<f64>) -> Self {
        assert!(width > 0 && height > 0, "dimensions must be positive");
        assert!(channels == 1 || channels == 3, "1 or 3 channels");
        assert_eq!(values.len(), width * height * channels);
        assert!(values.iter().all(|v| (0.0..=255.0).contains(v)));
        PixelGrid { width, height, channels, values }
    }

    fn rgb(&self, idx: usize) -> [f64; 3] {
        if self.channels == 1 {
            let g = self.values[idx];
            [g, g, g]
        } else {
            [
                self.values[idx * 3],
                self.values[idx * 3 + 1],
                self.values[idx * 3 + 2],
            ]
        }
    }
}

/// Segmentation parameters: spatial bandwidth (pixels), range bandwidth
/// (L*u*v* units), anisotropy weight, and the convergence controls.
#[derive(Debug, Clone)]
pub struct SegConfig {
    pub eps_s: f64,
    pub eps_r: f64,
    pub lambda: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl SegConfig {
    pub fn new(eps_s: f64, eps_r: f64, lambda: f64) -> Result<Self> {
        assert!(eps_s > 0.0 && eps_r > 0.0, "bandwidths must be positive");
        if lambda < 0.0 {
            return Err(Error::NegativeLambda(lambda));
        }
        Ok(SegConfig { eps_s, eps_r, lambda, max_iter: 50, tol: 1e-3 })
    }
}

/// Per-pixel feature: spatial (row, col) and range (L*, u*, v*).
#[derive(Debug, Clone, Copy)]
pub struct PixelFeature {
    pub s: [f64; 2],
    pub r: [f64; 3],
}

fn srgb_to_linear(c: f64) -> f64 {
    let c = c / 255.0;
    if c > 0.04045 {
        ((c + 0.055) / 1.055).powf(2.4)
    } else {
        c / 12.92
    }
}

/// D65 reference white in the u'v' chromaticity plane.
const UN_PRIME: f64 = 0.19783982;
const VN_PRIME: f64 = 0.46833630;

fn rgb_to_luv(rgb: [f64; 3]) -> [f64; 3] {
    let r = srgb_to_linear(rgb[0]);
    let g = srgb_to_linear(rgb[1]);
    let b = srgb_to_linear(rgb[2]);
    // sRGB D65 linear transform (Y of white = 1).
    let x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    let y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    let z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;

    let l = if y > (6.0f64 / 29.0).powi(3) {
        116.0 * y.cbrt() - 16.0
    } else {
        (29.0f64 / 3.0).powi(3) * y
    };
    let denom = x + 15.0 * y + 3.0 * z;
    let (u, v) = if denom > 1e-12 {
        (
            13.0 * l * (4.0 * x / denom - UN_PRIME),
            13.0 * l * (9.0 * y / denom - VN_PRIME),
        )
    } else {
        (0.0, 0.0)
    };
    [l, u, v]
}

/// Converts the image to 5-d features: spatial coordinates in pixel units
/// and L*u*v* range values (grayscale treated as (g,g,g)).
pub fn to_luv(grid: &PixelGrid) -> Vec<PixelFeature> {
    let mut out = Vec::with_capacity(grid.width * grid.height);
    for row in 0..grid.height {
        for col in 0..grid.width {
            let idx = row * grid.width + col;
            out.push(PixelFeature {
                s: [row as f64, col as f64],
                r: rgb_to_luv(grid.rgb(idx)),
            });
        }
    }
    out
}

#[inline]
fn range_dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// Spatial covariance of the given feature subset (uniform weights).
fn spatial_cov(features: &[PixelFeature], idxs: &[usize]) -> SymMatrix {
    let n = idxs.len() as f64;
    let mut mean = [0.0f64; 2];
    for &j in idxs {
        mean[0] += features[j].s[0];
        mean[1] += features[j].s[1];
    }
    mean[0] /= n;
    mean[1] /= n;
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for &j in idxs {
        let dx = features[j].s[0] - mean[0];
        let dy = features[j].s[1] - mean[1];
        a += dx * dx;
        b += dx * dy;
        c += dy * dy;
    }
    let mut m = SymMatrix::zeros(2);
    m.set(0, 0, a / n);
    m.set(0, 1, b / n);
    m.set(1, 1, c / n);
    m
}

/// Result of a segmentation run.
#[derive(Debug, Clone)]
pub struct Segmentation {
    /// Cluster label per pixel, row-major, 0-based by first appearance.
    pub labels: Vec<usize>,
    pub cluster_count: usize,
    /// Converged cluster point per pixel (spatial then range).
    pub cluster_points: Vec<[f64; 5]>,
}

/// Segments the image. Steps: (1) initial spatial covariance per pixel
/// over its (eps_s, eps_r)-neighborhood; (2) per-pixel cluster-point
/// iteration with the transformed spatial filter — the Euclidean term uses
/// the FIXED original x_i^s and neighbor covariances stay at their initial
/// values, only the center's Sigma(T) evolves; (3) connected components of
/// converged points under both bandwidths.
pub fn segment(grid: &PixelGrid, cfg: &SegConfig) -> Result<Segmentation> {
    let features = to_luv(grid);
    let n = features.len();
    let (w, h) = (grid.width, grid.height);
    let eps_s2 = cfg.eps_s * cfg.eps_s;
    let eps_r2 = cfg.eps_r * cfg.eps_r;

    // Fixed spatial windows: all pixels within eps_s of each pixel.
    let rad = cfg.eps_s.floor() as i64;
    let idx_of = |row: i64, col: i64| (row as usize) * w + col as usize;
    let window = |i: usize| -> Vec<usize> {
        let (row, col) = ((i / w) as i64, (i % w) as i64);
        let mut out = Vec::new();
        for dr in -rad..=rad {
            let rr = row + dr;
            if rr < 0 || rr >= h as i64 {
                continue;
            }
            for dc in -rad..=rad {
                let cc = col + dc;
                if cc < 0 || cc >= w as i64 {
                    continue;
                }
                if (dr * dr + dc * dc) as f64 <= eps_s2 {
                    out.push(idx_of(rr, cc));
                }
            }
        }
        out
    };

    // Step 1: initial per-pixel spatial covariances over the plain
    // (eps_s, eps_r)-neighborhood of x_i.
    let init_covs: Vec<SymMatrix> = (0..n)
        .into_par_iter()
        .map(|i| {
            let idxs: Vec<usize> = window(i)
                .into_iter()
                .filter(|&j| range_dist2(&features[i].r, &features[j].r) <= eps_r2)
                .collect();
            spatial_cov(&features, &idxs)
        })
        .collect();

    // Step 2: iterate cluster points.
    let run_pixel = |i: usize| -> Result<[f64; 5]> {
        let win = window(i);
        let xi_s = features[i].s;
        let mut t_s = xi_s;
        let mut t_r = features[i].r;
        let mut sigma_t = init_covs[i].clone();
        for _ in 0..cfg.max_iter {
            let mut members: Vec<usize> = Vec::new();
            for &j in &win {
                if range_dist2(&t_r, &features[j].r) > eps_r2 {
                    continue;
                }
                let ds2 = (xi_s[0] - features[j].s[0]).powi(2)
                    + (xi_s[1] - features[j].s[1]).powi(2);
                let d2 = if cfg.lambda == 0.0 {
                    ds2
                } else {
                    let dc = bures_distance(&init_covs[j], &sigma_t, None)?;
                    ds2 + cfg.lambda * dc * dc
                };
                if d2 <= eps_s2 {
                    members.push(j);
                }
            }
            if members.is_empty() {
                break;
            }
            let m = members.len() as f64;
            let mut new_s = [0.0; 2];
            let mut new_r = [0.0; 3];
            for &j in &members {
                new_s[0] += features[j].s[0];
                new_s[1] += features[j].s[1];
                for c in 0..3 {
                    new_r[c] += features[j].r[c];
                }
            }
            new_s[0] /= m;
            new_s[1] /= m;
            new_r.iter_mut().for_each(|v| *v /= m);
            if cfg.lambda != 0.0 {
                sigma_t = spatial_cov(&features, &members);
            }
            let movement = ((new_s[0] - t_s[0]).powi(2)
                + (new_s[1] - t_s[1]).powi(2)
                + range_dist2(&new_r, &t_r))
            .sqrt();
            t_s = new_s;
            t_r = new_r;
            if movement < cfg.tol {
                break;
            }
        }
        Ok([t_s[0], t_s[1], t_r[0], t_r[1], t_r[2]])
    };
    let cluster_points: Result<Vec<[f64; 5]>> =
        (0..n).into_par_iter().map(run_pixel).collect();
    let cluster_points = cluster_points?;

    // Step 3: connected components of converged points.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let a = &cluster_points[i];
            let b = &cluster_points[j];
            let ds2 = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
            if ds2 > eps_s2 {
                continue;
            }
            let dr2 = (a[2] - b[2]).powi(2) + (a[3] - b[3]).powi(2) + (a[4] - b[4]).powi(2);
            if dr2 <= eps_r2 {
                let (ra, rb) = (find(&mut parent, i), find(&mut parent, j));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut labels = vec![usize::MAX; n];
    let mut next = 0usize;
    let mut names = std::collections::HashMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        labels[i] = *names.entry(r).or_insert_with(|| {
            let l = next;
            next += 1;
            l
        });
    }
    Ok(Segmentation { labels, cluster_count: next, cluster_points })
}

/// Plain mean-shift segmentation: the same procedure with the covariance
/// term absent. Produces labels identical to `segment` at lambda = 0.
pub fn segment_ms(grid: &PixelGrid, eps_s: f64, eps_r: f64) -> Result<Segmentation> {
    let cfg = SegConfig::new(eps_s, eps_r, 0.0)?;
    segment(grid, &cfg)
}

/// Paints each cluster with the mean original color and writes PPM (P3).
pub fn write_segmented(grid: &PixelGrid, labels: &[usize], path: &Path) -> Result<()> {
    assert_eq!(labels.len(), grid.width * grid.height);
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut sums = vec![[0.0f64; 3]; k];
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        let c = grid.rgb(i);
        for ch in 0..3 {
            sums[l][ch] += c[ch];
        }
        counts[l] += 1;
    }
    let mut out = format!("P3\n{} {}\n255\n", grid.width, grid.height);
    for &l in labels {
        let n = counts[l].max(1) as f64;
        let px: Vec<String> = (0..3)
            .map(|ch| format!("{}", (sums[l][ch] / n).round() as u32))
            .collect();
        out.push_str(&px.join(" "));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads plain-text PGM (P2) or PPM (P3) with maxval 255.
pub fn read_pnm(path: &Path) -> Result<PixelGrid> {
    let text = std::fs::read_to_string(path)?;
    parse_pnm(&text)
}

pub fn parse_pnm(text: &str) -> Result<PixelGrid> {
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split_whitespace())
        .map(str::to_string)
        .collect::<Vec<_>>()
        .into_iter();
    let magic = tokens.next().ok_or(Error::Parse { line: 1, msg: "empty file".into() })?;
    let channels = match magic.as_str() {
        "P2" => 1,
        "P3" => 3,
        other => {
            return Err(Error::Parse { line: 1, msg: format!("unsupported magic {other:?}") })
        }
    };
    let mut next_num = |what: &str| -> Result<usize> {
        tokens
            .next()
            .ok_or(Error::Parse { line: 0, msg: format!("missing {what}") })?
            .parse::<usize>()
            .map_err(|_| Error::Parse { line: 0, msg: format!("bad {what}") })
    };
    let width = next_num("width")?;
    let height = next_num("height")?;
    let maxval = next_num("maxval")?;
    if maxval != 255 {
        return Err(Error::Parse { line: 0, msg: format!("maxval {maxval} unsupported") });
    }
    let count = width * height * channels;
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        values.push(next_num("pixel value")? as f64);
    }
    Ok(PixelGrid::new(width, height, channels, values))
}

/// Writes the grid back out as P2 (gray) or P3 (color).
pub fn write_pnm(grid: &PixelGrid, path: &Path) -> Result<()> {
    let magic = if grid.channels == 1 { "P2" } else { "P3" };
    let mut out = format!("{magic}\n{} {}\n255\n", grid.width, grid.height);
    for px in grid.values.chunks(grid.channels) {
        let vals: Vec<String> = px.iter().map(|v| format!("{}", v.round() as u32)).collect();
        out.push_str(&vals.join(" "));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
