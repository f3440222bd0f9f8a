//! Analysis utilities shared by the experiment pipelines: single-linkage
//! clustering, classical MDS, k-NN classification, rank correlation, the
//! 1-D ellipsoid-radius oracle, and ARI cluster agreement.

use crate::error::{Error, Result};
use crate::measure::DistanceMatrix;
use crate::psd::{sym_eigen, SymMatrix};

/// Agglomerative merge tree. Leaves are 0..n-1; the merge created at step t
/// gets cluster id n+t. Heights are nondecreasing.
#[derive(Debug, Clone)]
pub struct Dendrogram {
    pub n: usize,
    /// (cluster-a, cluster-b, height), n-1 entries.
    pub merges: Vec<(usize, usize, f64)>,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Exact single-linkage clustering: merge order and heights are those of a
/// minimum spanning tree of the distance graph (Prim, dense O(n^2)).
pub fn single_linkage(d: &DistanceMatrix) -> Dendrogram {
    let n = d.len();
    assert!(n >= 1);
    if n == 1 {
        return Dendrogram { n, merges: Vec::new() };
    }

    // Prim's MST over the complete graph.
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut best_from = vec![0usize; n];
    in_tree[0] = true;
    for j in 1..n {
        best[j] = d.get(0, j);
    }
    let mut edges: Vec<(f64, usize, usize)> = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let mut pick = usize::MAX;
        let mut pd = f64::INFINITY;
        for j in 0..n {
            if !in_tree[j] && best[j] < pd {
                pd = best[j];
                pick = j;
            }
        }
        // Disconnected under +inf sentinels: connect at +inf.
        if pick == usize::MAX {
            pick = (0..n).find(|&j| !in_tree[j]).unwrap();
            pd = f64::INFINITY;
        }
        edges.push((pd, best_from[pick], pick));
        in_tree[pick] = true;
        for j in 0..n {
            if !in_tree[j] && d.get(pick, j) < best[j] {
                best[j] = d.get(pick, j);
                best_from[j] = pick;
            }
        }
    }
    edges.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    // Kruskal-style assembly of the merge tree over the sorted MST edges.
    let mut uf = UnionFind::new(n);
    let mut cluster_of_root = (0..n).collect::<Vec<usize>>();
    let mut merges = Vec::with_capacity(n - 1);
    let mut next_id = n;
    for (h, a, b) in edges {
        let (ra, rb) = (uf.find(a), uf.find(b));
        let (ca, cb) = (cluster_of_root[ra], cluster_of_root[rb]);
        uf.union(ra, rb);
        let root = uf.find(ra);
        cluster_of_root[root] = next_id;
        merges.push((ca.min(cb), ca.max(cb), h));
        next_id += 1;
    }
    Dendrogram { n, merges }
}

/// Flat labels given by removing the k-1 highest merges. Labels are
/// 0..k-1 in order of first appearance.
pub fn cut_dendrogram(d: &Dendrogram, k: usize) -> Vec<usize> {
    assert!(k >= 1 && k <= d.n, "k must be in 1..=n");
    let mut uf = UnionFind::new(d.n);
    for &(a, b, _) in d.merges.iter().take(d.n - k) {
        // Map internal cluster ids back to any leaf representative.
        let leaf = |mut c: usize| -> usize {
            while c >= d.n {
                c = d.merges[c - d.n].0;
            }
            c
        };
        uf.union(leaf(a), leaf(b));
    }
    let mut labels = vec![usize::MAX; d.n];
    let mut next = 0;
    let mut name = std::collections::HashMap::new();
    for i in 0..d.n {
        let r = uf.find(i);
        let l = *name.entry(r).or_insert_with(|| {
            let l = next;
            next += 1;
            l
        });
        labels[i] = l;
    }
    labels
}

/// Classical (Torgerson) MDS: eigendecomposition of the double-centered
/// squared-distance matrix; negative eigenvalues truncate to zero.
/// Axes are ordered by descending eigenvalue and each axis is flipped so
/// its first nonzero coordinate is nonnegative, making output
/// deterministic.
pub fn classical_mds(d: &DistanceMatrix, dims: usize) -> Result<Vec<Vec<f64>>> {
    let n = d.len();
    assert!(n >= dims && dims >= 1, "need at least `dims` points");
    let mut sq = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let v = d.get(i, j);
            sq[i * n + j] = v * v;
        }
    }
    let row_mean: Vec<f64> = (0..n)
        .map(|i| sq[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64)
        .collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    let mut b = SymMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            b.set(i, j, -0.5 * (sq[i * n + j] - row_mean[i] - row_mean[j] + grand));
        }
    }
    let eig = sym_eigen(&b)?;
    let mut coords = vec![vec![0.0; dims]; n];
    for c in 0..dims {
        let l = eig.values[c].max(0.0).sqrt();
        for i in 0..n {
            coords[i][c] = l * eig.vectors[c][i];
        }
        // Deterministic orientation.
        if let Some(first) = (0..n).find(|&i| coords[i][c].abs() > 1e-12) {
            if coords[first][c] < 0.0 {
                for row in coords.iter_mut() {
                    row[c] = -row[c];
                }
            }
        }
    }
    Ok(coords)
}

/// k-NN prediction from one distance row per test point (distances to the
/// training points). Ties in the vote are broken by the smaller summed
/// distance of the tied class's voters, then by the lower label.
pub fn knn_classify(dist_rows: &[Vec<f64>], train_labels: &[usize], k: usize) -> Vec<usize> {
    assert!(k >= 1 && k % 2 == 1, "k must be odd and positive");
    assert!(k <= train_labels.len(), "k must not exceed the training size");
    dist_rows
        .iter()
        .map(|row| {
            assert_eq!(row.len(), train_labels.len());
            let mut idx: Vec<usize> = (0..row.len()).collect();
            idx.sort_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap().then(a.cmp(&b)));
            let mut votes: std::collections::BTreeMap<usize, (usize, f64)> =
                std::collections::BTreeMap::new();
            for &i in idx.iter().take(k) {
                let e = votes.entry(train_labels[i]).or_insert((0, 0.0));
                e.0 += 1;
                e.1 += row[i];
            }
            *votes
                .iter()
                .max_by(|(la, (ca, sa)), (lb, (cb, sb))| {
                    ca.cmp(cb)
                        .then(sb.partial_cmp(sa).unwrap())
                        .then(lb.cmp(la))
                })
                .unwrap()
                .0
        })
        .collect()
}

/// Fractional ranks with average ranks for ties.
fn ranks(a: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[i].partial_cmp(&a[j]).unwrap());
    let mut r = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && a[idx[j + 1]] == a[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation: Pearson correlation of fractional ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    assert_eq!(a.len(), b.len());
    assert!(a.len() >= 2, "need at least two pairs");
    let ra = ranks(a);
    let rb = ranks(b);
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok(sab / (saa * sbb).sqrt())
}

/// 1-D density profile with derivatives, anchored at x0, for predicting
/// the limiting transformed-ball radius.
pub struct EllipsoidOracle1D<'a> {
    pub f: &'a dyn Fn(f64) -> f64,
    pub fp: &'a dyn Fn(f64) -> f64,
    pub fpp: &'a dyn Fn(f64) -> f64,
    pub x0: f64,
}

/// Limiting rescaled ball radius a0 = sqrt(12 / (12 + h'(x0)^2)) where
/// h = (-5 f'^2 + 2 f f'') / (15 f^2), the relative second-order term of
/// the window variance (1/3)eps^2 (1 + h eps^2 + ...); h' is taken by
/// central differences
/// with relative step 1e-5.
pub fn predicted_ellipsoid_radius_1d(o: &EllipsoidOracle1D) -> Result<f64> {
    let h = |x: f64| -> Result<f64> {
        let fx = (o.f)(x);
        if fx <= 0.0 {
            return Err(Error::DegenerateMeasure { total: fx });
        }
        let fp = (o.fp)(x);
        let fpp = (o.fpp)(x);
        Ok((-5.0 * fp * fp + 2.0 * fx * fpp) / (15.0 * fx * fx))
    };
    let step = 1e-5 * o.x0.abs().max(1.0);
    let hp = (h(o.x0 + step)? - h(o.x0 - step)?) / (2.0 * step);
    Ok((12.0 / (12.0 + hp * hp)).sqrt())
}

/// Adjusted Rand index between two labelings.
pub fn cluster_agreement(labels_a: &[usize], labels_b: &[usize]) -> f64 {
    assert_eq!(labels_a.len(), labels_b.len());
    let n = labels_a.len();
    if n == 0 {
        return 1.0;
    }
    let ka = labels_a.iter().max().unwrap() + 1;
    let kb = labels_b.iter().max().unwrap() + 1;
    let mut table = vec![0u64; ka * kb];
    let mut row = vec![0u64; ka];
    let mut col = vec![0u64; kb];
    for (&a, &b) in labels_a.iter().zip(labels_b) {
        table[a * kb + b] += 1;
        row[a] += 1;
        col[b] += 1;
    }
    let c2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let sum_ij: f64 = table.iter().map(|&x| c2(x)).sum();
    let sum_a: f64 = row.iter().map(|&x| c2(x)).sum();
    let sum_b: f64 = col.iter().map(|&x| c2(x)).sum();
    let total = c2(n as u64);
    let expected = sum_a * sum_b / total;
    let max_index = 0.5 * (sum_a + sum_b);
    if (max_index - expected).abs() < 1e-12 {
        // Degenerate partitions (e.g. both all-singletons or all-one).
        return if (sum_ij - expected).abs() < 1e-12 { 1.0 } else { 0.0 };
    }
    (sum_ij - expected) / (max_index - expected)
}
