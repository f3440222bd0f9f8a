//! Weighted point clouds, distance matrices and localized statistics.
//!
//! A cloud carries a probability measure over its points. Localization of
//! the measure at a point (truncation to an epsilon-ball, or reweighting by
//! a smooth radial profile) yields the per-point means and covariances the
//! re-metrization iterations are built from.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::psd::SymMatrix;

/// Point cloud with a probability measure over its points.
#[derive(Debug, Clone)]
pub struct WeightedCloud {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
    dim: usize,
}

impl WeightedCloud {
    /// Builds a cloud; weights must be positive and are renormalized to sum
    /// to one.
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        assert!(!points.is_empty(), "cloud must be nonempty");
        assert_eq!(points.len(), weights.len(), "one weight per point");
        let dim = points[0].len();
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { left: dim, right: p.len() });
            }
        }
        let total: f64 = weights.iter().sum();
        if !(total > 1e-300) || weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::DegenerateMeasure { total });
        }
        let weights = weights.iter().map(|w| w / total).collect();
        Ok(WeightedCloud { points, weights, dim })
    }

    /// Uniform measure 1/n on the given points.
    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0; n])
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn points_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.points
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Largest pairwise Euclidean distance (O(n^2); used for tolerances).
    pub fn diameter(&self) -> f64 {
        let mut d = 0.0f64;
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                d = d.max(euclidean(&self.points[i], &self.points[j]));
            }
        }
        d
    }
}

#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Symmetric nonnegative matrix with zero diagonal. Entries may be +inf
/// for pairs a pruned sweep skipped.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    pub fn zeros(n: usize) -> Self {
        DistanceMatrix { n, entries: vec![0.0; n * n] }
    }

    /// All off-diagonal entries set to `fill` (e.g. +inf sentinels).
    pub fn filled(n: usize, fill: f64) -> Self {
        let mut m = DistanceMatrix { n, entries: vec![fill; n * n] };
        for i in 0..n {
            m.entries[i * n + i] = 0.0;
        }
        m
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// Sets both (i,j) and (j,i).
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(v >= 0.0 || v.is_infinite());
        self.entries[i * self.n + j] = v;
        self.entries[j * self.n + i] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn max_finite(&self) -> f64 {
        self.entries
            .iter()
            .filter(|v| v.is_finite())
            .fold(0.0f64, |m, &v| m.max(v))
    }

    /// (largest finite entry, smallest strict-upper-triangle entry) in one
    /// pass; +inf sentinels can win the minimum only when every
    /// off-diagonal entry is a sentinel. (0, +inf) for n < 2.
    pub fn finite_extremes(&self) -> (f64, f64) {
        let mut max = 0.0f64;
        let mut min = f64::INFINITY;
        for i in 0..self.n {
            for &v in &self.entries[i * self.n + i + 1..(i + 1) * self.n] {
                if v.is_finite() && v > max {
                    max = v;
                }
                if v < min {
                    min = v;
                }
            }
        }
        (max, min)
    }
}

/// Pairwise Euclidean distances.
pub fn euclidean_distance_matrix(cloud: &WeightedCloud) -> DistanceMatrix {
    let n = cloud.len();
    let mut d = DistanceMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            d.set(i, j, euclidean(cloud.point(i), cloud.point(j)));
        }
    }
    d
}

/// Closed epsilon-ball around index i: { j : D[i][j] <= eps }. Always
/// contains i itself.
pub fn epsilon_neighborhood(d: &DistanceMatrix, i: usize, eps: f64) -> Vec<usize> {
    d.row(i)
        .iter()
        .enumerate()
        .filter(|(_, &v)| v <= eps)
        .map(|(j, _)| j)
        .collect()
}

/// Weight-renormalized mean of the points indexed by `idxs`.
pub fn localized_mean(cloud: &WeightedCloud, idxs: &[usize]) -> Result<Vec<f64>> {
    assert!(!idxs.is_empty(), "index set must be nonempty");
    let total: f64 = idxs.iter().map(|&j| cloud.weight(j)).sum();
    if total < 1e-300 {
        return Err(Error::DegenerateMeasure { total });
    }
    let mut mean = vec![0.0; cloud.dim()];
    for &j in idxs {
        let w = cloud.weight(j) / total;
        for (m, x) in mean.iter_mut().zip(cloud.point(j)) {
            *m += w * x;
        }
    }
    Ok(mean)
}

/// Weight-renormalized scatter of the indexed points about `mean`.
pub fn localized_covariance(cloud: &WeightedCloud, idxs: &[usize], mean: &[f64]) -> Result<SymMatrix> {
    assert!(!idxs.is_empty(), "index set must be nonempty");
    let m = cloud.dim();
    let total: f64 = idxs.iter().map(|&j| cloud.weight(j)).sum();
    if total < 1e-300 {
        return Err(Error::DegenerateMeasure { total });
    }
    let mut cov = SymMatrix::zeros(m);
    let mut diff = vec![0.0; m];
    for &j in idxs {
        let w = cloud.weight(j) / total;
        for (d, (x, mu)) in diff.iter_mut().zip(cloud.point(j).iter().zip(mean)) {
            *d = x - mu;
        }
        for a in 0..m {
            for b in a..m {
                let v = cov.get(a, b) + w * diff[a] * diff[b];
                cov.set(a, b, v);
            }
        }
    }
    Ok(cov)
}

/// Weighted localized statistics in one pass (same index set and weights).
pub fn localized_mean_cov_weighted(
    cloud: &WeightedCloud,
    idxs: &[usize],
    weights: &[f64],
) -> Result<(Vec<f64>, SymMatrix)> {
    assert_eq!(idxs.len(), weights.len());
    let m = cloud.dim();
    let total: f64 = weights.iter().sum();
    if total < 1e-300 {
        return Err(Error::DegenerateMeasure { total });
    }
    let mut mean = vec![0.0; m];
    for (&j, &w) in idxs.iter().zip(weights) {
        for (mu, x) in mean.iter_mut().zip(cloud.point(j)) {
            *mu += (w / total) * x;
        }
    }
    let mut cov = SymMatrix::zeros(m);
    let mut diff = vec![0.0; m];
    for (&j, &w) in idxs.iter().zip(weights) {
        for (d, (x, mu)) in diff.iter_mut().zip(cloud.point(j).iter().zip(&mean)) {
            *d = x - mu;
        }
        let w = w / total;
        for a in 0..m {
            for b in a..m {
                let v = cov.get(a, b) + w * diff[a] * diff[b];
                cov.set(a, b, v);
            }
        }
    }
    Ok((mean, cov))
}

/// Radial profile of a smooth localization kernel, evaluated at
/// r = d^2 / eps^2.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    /// f(r) = e^{-r/2}
    Gaussian,
    /// f(r) = 1 for r <= 1, else 0 (reproduces truncation localization).
    Indicator,
    /// Piecewise-linear interpolation of (r, f(r)) samples, sorted by r;
    /// clamped to the boundary values outside the sampled range.
    Sampled(Vec<(f64, f64)>),
}

impl Profile {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Profile::Gaussian => (-r / 2.0).exp(),
            Profile::Indicator => {
                if r <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Profile::Sampled(samples) => {
                assert!(!samples.is_empty(), "sampled profile must be nonempty");
                if r <= samples[0].0 {
                    return samples[0].1;
                }
                if r >= samples[samples.len() - 1].0 {
                    return samples[samples.len() - 1].1;
                }
                let k = samples.partition_point(|(x, _)| *x <= r);
                let (x0, y0) = samples[k - 1];
                let (x1, y1) = samples[k];
                if x1 == x0 {
                    y0
                } else {
                    y0 + (y1 - y0) * (r - x0) / (x1 - x0)
                }
            }
        }
    }
}

/// How the measure is localized at a point.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    /// Renormalized restriction to the closed eps-ball.
    Truncation { eps: f64 },
    /// Global reweighting by f(d^2/eps^2); the normalizing constant of the
    /// kernel cancels under renormalization.
    Smooth { eps: f64, profile: Profile },
}

impl KernelSpec {
    pub fn eps(&self) -> f64 {
        match self {
            KernelSpec::Truncation { eps } | KernelSpec::Smooth { eps, .. } => *eps,
        }
    }
}

/// Localizes the cloud's measure at point i under the current metric.
/// Returns the support indices and weights renormalized to sum to one.
pub fn kernel_localization(
    cloud: &WeightedCloud,
    base: &DistanceMatrix,
    i: usize,
    kernel: &KernelSpec,
) -> Result<(Vec<usize>, Vec<f64>)> {
    match kernel {
        KernelSpec::Truncation { eps } => {
            let idxs = epsilon_neighborhood(base, i, *eps);
            let total: f64 = idxs.iter().map(|&j| cloud.weight(j)).sum();
            if total < 1e-300 {
                return Err(Error::DegenerateMeasure { total });
            }
            let weights = idxs.iter().map(|&j| cloud.weight(j) / total).collect();
            Ok((idxs, weights))
        }
        KernelSpec::Smooth { eps, profile } => {
            let n = cloud.len();
            let mut idxs = Vec::with_capacity(n);
            let mut weights = Vec::with_capacity(n);
            let mut total = 0.0;
            for j in 0..n {
                let d = base.get(i, j);
                let w = if d.is_finite() {
                    cloud.weight(j) * profile.eval((d * d) / (eps * eps))
                } else {
                    0.0
                };
                if w > 0.0 {
                    idxs.push(j);
                    weights.push(w);
                    total += w;
                }
            }
            if total < 1e-300 {
                return Err(Error::DegenerateMeasure { total });
            }
            for w in weights.iter_mut() {
                *w /= total;
            }
            Ok((idxs, weights))
        }
    }
}

/// Merges groups of points that are mutually within `tol` under `d` and
/// whose distance profiles to the rest of the cloud agree within `tol`
/// (so their neighborhoods coincide at every scale). Merging is transitive
/// over that relation and done in a single pass, not iterated to a
/// fixpoint. Returns the reduced cloud, its distance matrix, and the
/// old-index -> new-index map. Merged weight is the sum of member weights;
/// the merged coordinate is the weighted mean of members.
pub fn merge_collocated(
    cloud: &WeightedCloud,
    d: &DistanceMatrix,
    tol: f64,
) -> Result<(WeightedCloud, DistanceMatrix, Vec<usize>)> {
    let n = cloud.len();
    assert_eq!(d.len(), n, "distance matrix must match the cloud");

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }

    for i in 0..n {
        let row = d.row(i);
        for (j, &dij) in row.iter().enumerate().take(n).skip(i + 1) {
            if dij > tol {
                continue;
            }
            // Already in the same group via transitivity; the row check
            // could only re-union them.
            if find(&mut parent, i) == find(&mut parent, j) {
                continue;
            }
            let rows_match = (0..n).all(|k| {
                if k == i || k == j {
                    return true;
                }
                let a = d.get(i, k);
                let b = d.get(j, k);
                (a.is_infinite() && b.is_infinite()) || (a - b).abs() <= tol
            });
            if rows_match {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }

    let mut remap = vec![usize::MAX; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        if remap[r] == usize::MAX {
            remap[r] = groups.len();
            groups.push(Vec::new());
        }
        remap[i] = remap[r];
        groups[remap[i]].push(i);
    }

    let m = groups.len();
    let mut points = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for g in &groups {
        let w: f64 = g.iter().map(|&i| cloud.weight(i)).sum();
        let mut p = vec![0.0; cloud.dim()];
        for &i in g {
            let f = cloud.weight(i) / w;
            for (a, b) in p.iter_mut().zip(cloud.point(i)) {
                *a += f * b;
            }
        }
        points.push(p);
        weights.push(w);
    }

    let mut dm = DistanceMatrix::zeros(m);
    for a in 0..m {
        for b in (a + 1)..m {
            // Representative distance: members agree within tol by
            // construction, so the first members stand in for the group.
            dm.set(a, b, d.get(groups[a][0], groups[b][0]));
        }
    }

    let merged = WeightedCloud::new(points, weights)?;
    Ok((merged, dm, remap))
}

/// Reads a point cloud from CSV. One row per point; a header row is
/// auto-detected (non-numeric first field). With a header, a final column
/// named `weight` (case-insensitive) supplies weights; otherwise all
/// columns are coordinates and the measure is uniform.
pub fn read_cloud_csv(path: &Path) -> Result<WeightedCloud> {
    let file = std::fs::File::open(path)?;
    parse_cloud_csv(std::io::BufReader::new(file))
}

pub fn parse_cloud_csv<R: BufRead>(reader: R) -> Result<WeightedCloud> {
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut weight_col = false;
    let mut saw_header = false;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if points.is_empty() && !saw_header && fields[0].parse::<f64>().is_err() {
            saw_header = true;
            weight_col = fields
                .last()
                .map(|f| f.eq_ignore_ascii_case("weight"))
                .unwrap_or(false);
            continue;
        }
        let mut vals = Vec::with_capacity(fields.len());
        for f in &fields {
            vals.push(f.parse::<f64>().map_err(|_| Error::Parse {
                line: lineno + 1,
                msg: format!("not a number: {f:?}"),
            })?);
        }
        if weight_col {
            let w = vals.pop().ok_or(Error::Parse {
                line: lineno + 1,
                msg: "missing weight column".into(),
            })?;
            weights.push(w);
        }
        points.push(vals);
    }
    if points.is_empty() {
        return Err(Error::Parse { line: 0, msg: "no data rows".into() });
    }
    if weight_col {
        WeightedCloud::new(points, weights)
    } else {
        WeightedCloud::uniform(points)
    }
}

/// Writes a cloud as CSV with an `x1..xm[,weight]` header.
pub fn write_cloud_csv(path: &Path, cloud: &WeightedCloud, include_weights: bool) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<String> = (1..=cloud.dim()).map(|i| format!("x{i}")).collect();
    if include_weights {
        writeln!(out, "{},weight", header.join(","))?;
    } else {
        writeln!(out, "{}", header.join(","))?;
    }
    for i in 0..cloud.len() {
        let coords: Vec<String> = cloud.point(i).iter().map(|v| format!("{v}")).collect();
        if include_weights {
            writeln!(out, "{},{}", coords.join(","), cloud.weight(i))?;
        } else {
            writeln!(out, "{}", coords.join(","))?;
        }
    }
    Ok(())
}

/// Writes a distance matrix as headerless CSV, one row per line; +inf
/// sentinels are written as `inf`.
pub fn write_distance_csv(path: &Path, d: &DistanceMatrix) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for i in 0..d.len() {
        let row: Vec<String> = d
            .row(i)
            .iter()
            .map(|v| if v.is_infinite() { "inf".to_string() } else { format!("{v}") })
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Reads a square distance matrix written by [`write_distance_csv`].
pub fn read_distance_csv(path: &Path) -> Result<DistanceMatrix> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for f in line.split(',').map(str::trim) {
            let v = if f.eq_ignore_ascii_case("inf") {
                f64::INFINITY
            } else {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    msg: format!("not a number: {f:?}"),
                })?
            };
            row.push(v);
        }
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Parse { line: 0, msg: "matrix must be square and nonempty".into() });
    }
    let mut d = DistanceMatrix::zeros(n);
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate().skip(i + 1) {
            d.set(i, j, v);
        }
    }
    Ok(d)
}
