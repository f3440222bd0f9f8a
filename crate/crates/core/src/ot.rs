//! Exact discrete optimal transport, the distance-updating transform built
//! on it, and plain mean shift.
//!
//! The OT solver is a transportation (network) simplex on integer-scaled
//! masses and costs, so optima are exact up to the documented 1e-7 relative
//! rounding of the scaling. No entropic regularization: these routines act
//! as correctness oracles and must not carry smoothing bias.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measure::{
    epsilon_neighborhood, euclidean, euclidean_distance_matrix, DistanceMatrix, WeightedCloud,
};

/// Mass and cost quantization unit for the integer min-cost flow.
/// Introduces at most ~1e-7 relative error in reported distances.
const SCALE: f64 = 1e9;
const SCALE_I: i64 = 1_000_000_000;

/// Probability measure supported on indices of a shared cloud.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    pub indices: Vec<usize>,
    pub masses: Vec<f64>,
}

impl DiscreteMeasure {
    /// Builds a measure, renormalizing positive masses to sum to one.
    pub fn new(indices: Vec<usize>, masses: Vec<f64>) -> Result<Self> {
        assert_eq!(indices.len(), masses.len());
        assert!(!indices.is_empty(), "support must be nonempty");
        let total: f64 = masses.iter().sum();
        if !(total > 1e-300) || masses.iter().any(|m| !(*m > 0.0)) {
            return Err(Error::DegenerateMeasure { total });
        }
        Ok(DiscreteMeasure {
            indices,
            masses: masses.iter().map(|m| m / total).collect(),
        })
    }

    pub fn dirac(index: usize) -> Self {
        DiscreteMeasure { indices: vec![index], masses: vec![1.0] }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Coupling between two discrete measures, stored dense row-major
/// (|supp mu| x |supp nu|).
#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<f64>,
}

impl TransportPlan {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.entries[i * self.cols..(i + 1) * self.cols].iter().sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                s[j] += self.get(i, j);
            }
        }
        s
    }
}

/// Exact OT optimum together with the optimal dual potentials (in original
/// cost units), which certify optimality via complementary slackness.
#[derive(Debug, Clone)]
pub struct OtSolution {
    pub distance: f64,
    pub plan: TransportPlan,
    pub dual_u: Vec<f64>,
    pub dual_v: Vec<f64>,
}

/// Rounds masses to integers summing exactly to SCALE (largest-remainder
/// apportionment).
fn quantize_masses(masses: &[f64]) -> Vec<i64> {
    let mut q: Vec<i64> = masses.iter().map(|m| (m * SCALE).floor() as i64).collect();
    let mut frac: Vec<(usize, f64)> = masses
        .iter()
        .enumerate()
        .map(|(i, m)| (i, m * SCALE - (m * SCALE).floor()))
        .collect();
    let deficit = SCALE_I - q.iter().sum::<i64>();
    frac.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for k in 0..deficit.max(0) as usize {
        q[frac[k % frac.len()].0] += 1;
    }
    q
}

struct Basis {
    /// Basic arcs as (source, sink, flow).
    arcs: Vec<(usize, usize, i64)>,
    /// Node -> incident basic-arc ids. Sources are 0..m, sinks m..m+n.
    adj: Vec<Vec<usize>>,
    m: usize,
}

impl Basis {
    fn add_arc(&mut self, i: usize, j: usize, flow: i64) -> usize {
        let id = self.arcs.len();
        self.arcs.push((i, j, flow));
        self.adj[i].push(id);
        self.adj[self.m + j].push(id);
        id
    }

    fn remove_arc(&mut self, id: usize) {
        let (i, j, _) = self.arcs[id];
        self.adj[i].retain(|&a| a != id);
        self.adj[self.m + j].retain(|&a| a != id);
        // Keep ids stable by tombstoning.
        self.arcs[id].2 = -1;
        self.arcs[id].0 = usize::MAX;
    }
}

/// Solves min sum pi_ij c_ij subject to the transportation constraints, on
/// integer data, by the transportation simplex. Returns (flows on basic
/// arcs as a dense matrix, dual potentials).
fn transportation_simplex(
    supply: &[i64],
    demand: &[i64],
    cost: &[i64],
    n_cols: usize,
) -> (Vec<i64>, Vec<i64>, Vec<i64>) {
    let m = supply.len();
    let n = n_cols;

    // Northwest-corner initial basis: always m+n-1 arcs, degenerate zeros
    // inserted when a row and column are exhausted together.
    let mut basis = Basis { arcs: Vec::new(), adj: vec![Vec::new(); m + n], m };
    {
        let mut s = supply.to_vec();
        let mut d = demand.to_vec();
        let (mut i, mut j) = (0usize, 0usize);
        loop {
            let f = s[i].min(d[j]);
            basis.add_arc(i, j, f);
            s[i] -= f;
            d[j] -= f;
            if i + 1 == m && j + 1 == n {
                break;
            }
            if s[i] == 0 && i + 1 < m {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    let mut u = vec![0i64; m];
    let mut v = vec![0i64; n];
    let mut in_basis = vec![false; m * n];
    for &(i, j, _) in &basis.arcs {
        in_basis[i * n + j] = true;
    }

    // parent arc id per node for cycle recovery.
    let mut parent = vec![usize::MAX; m + n];
    let mut order = Vec::with_capacity(m + n);
    let max_pivots = 200usize.max(50 * (m + n));
    let mut pivots = 0usize;

    loop {
        // Duals from the basis tree: u[0] = 0, propagate c = u + v.
        parent.iter_mut().for_each(|p| *p = usize::MAX);
        order.clear();
        let mut visited = vec![false; m + n];
        visited[0] = true;
        order.push(0usize);
        u[0] = 0;
        let mut head = 0;
        while head < order.len() {
            let node = order[head];
            head += 1;
            for &aid in &basis.adj[node] {
                let (ai, aj, _) = basis.arcs[aid];
                let other = if node == ai { m + aj } else { ai };
                if !visited[other] {
                    visited[other] = true;
                    parent[other] = aid;
                    order.push(other);
                    let c = cost[ai * n + aj];
                    if other >= m {
                        v[other - m] = c - u[ai];
                    } else {
                        u[other] = c - v[if node >= m { node - m } else { aj }];
                    }
                }
            }
        }

        // Entering arc: most negative reduced cost (Dantzig), switching to
        // Bland's rule if pivoting drags on, to break degenerate cycling.
        let bland = pivots > max_pivots;
        let mut best: Option<(usize, usize, i64)> = None;
        'scan: for i in 0..m {
            let ui = u[i];
            for j in 0..n {
                if in_basis[i * n + j] {
                    continue;
                }
                let r = cost[i * n + j] - ui - v[j];
                if r < 0 {
                    match &best {
                        _ if bland => {
                            best = Some((i, j, r));
                            break 'scan;
                        }
                        Some((_, _, br)) if r >= *br => {}
                        _ => best = Some((i, j, r)),
                    }
                }
            }
        }
        let (ei, ej) = match best {
            None => break,
            Some((i, j, _)) => (i, j),
        };
        pivots += 1;

        // Unique basis-tree path from source ei to sink ej closes the
        // cycle with the entering arc. Walk parents to the root from both
        // endpoints and splice.
        let path_to_root = |mut node: usize| -> Vec<usize> {
            let mut p = vec![node];
            while parent[node] != usize::MAX {
                let aid = parent[node];
                let (ai, aj, _) = basis.arcs[aid];
                node = if node == ai { m + aj } else { ai };
                p.push(node);
            }
            p
        };
        let pa = path_to_root(ei);
        let pb = path_to_root(m + ej);
        // Find lowest common node.
        let in_pa: std::collections::HashSet<usize> = pa.iter().copied().collect();
        let mut k = 0;
        while k < pb.len() && !in_pa.contains(&pb[k]) {
            k += 1;
        }
        let lca = pb[k];
        let cycle_nodes: Vec<usize> = pa
            .iter()
            .take_while(|&&x| x != lca)
            .copied()
            .chain(std::iter::once(lca))
            .chain(pb[..k].iter().rev().copied())
            .collect();

        // Cycle arcs alternate sign starting with + on the entering arc
        // (ei -> ej). Traverse consecutive node pairs to find basis arcs.
        let mut minus_arcs: Vec<usize> = Vec::new();
        let mut plus_arcs: Vec<usize> = Vec::new();
        let mut sign_plus = false; // first tree arc after entering is minus
        let mut theta = i64::MAX;
        for w in cycle_nodes.windows(2).chain(std::iter::once(
            &[cycle_nodes[cycle_nodes.len() - 1], cycle_nodes[0]][..],
        )) {
            let (a, b) = (w[0], w[1]);
            // The closing pair (last, first) = (m+ej ... ei) is the
            // entering arc; all others are tree arcs.
            if (a == ei && b == m + ej) || (b == ei && a == m + ej) {
                // entering arc handled separately
                sign_plus = false;
                continue;
            }
            let aid = *basis.adj[a]
                .iter()
                .find(|&&x| {
                    let (ai, aj, _) = basis.arcs[x];
                    (ai == a && m + aj == b) || (ai == b && m + aj == a)
                })
                .expect("cycle arc must be basic");
            if sign_plus {
                plus_arcs.push(aid);
            } else {
                minus_arcs.push(aid);
                theta = theta.min(basis.arcs[aid].2);
            }
            sign_plus = !sign_plus;
        }

        // Apply the pivot.
        for &aid in &plus_arcs {
            basis.arcs[aid].2 += theta;
        }
        let mut leaving = usize::MAX;
        for &aid in &minus_arcs {
            basis.arcs[aid].2 -= theta;
            if leaving == usize::MAX && basis.arcs[aid].2 == 0 {
                leaving = aid;
            }
        }
        let (li, lj, _) = basis.arcs[leaving];
        in_basis[li * n + lj] = false;
        basis.remove_arc(leaving);
        in_basis[ei * n + ej] = true;
        basis.add_arc(ei, ej, theta);
    }

    let mut flow = vec![0i64; m * n];
    for &(i, j, f) in &basis.arcs {
        if i != usize::MAX && f > 0 {
            flow[i * n + j] = f;
        }
    }
    (flow, u, v)
}

/// Exact optimal transport between discrete measures under the given
/// ground-cost matrix (|mu| x |nu|, in distance units). `p` selects the
/// Wasserstein order (cost entries are raised to p internally).
pub fn discrete_ot(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &[f64],
    p: u32,
) -> Result<OtSolution> {
    assert!(p == 1 || p == 2, "only orders 1 and 2 are supported");
    let m = mu.len();
    let n = nu.len();
    assert_eq!(cost.len(), m * n, "cost matrix shape mismatch");
    let s_mu: f64 = mu.masses.iter().sum();
    let s_nu: f64 = nu.masses.iter().sum();
    if (s_mu - s_nu).abs() > 1e-9 {
        return Err(Error::InfeasibleMarginals((s_mu - s_nu).abs()));
    }
    for &c in cost {
        assert!(c >= 0.0 && c.is_finite(), "costs must be finite and nonnegative");
    }

    let supply = quantize_masses(&mu.masses);
    let demand = quantize_masses(&nu.masses);
    let powed: Vec<f64> = cost
        .iter()
        .map(|&c| if p == 1 { c } else { c * c })
        .collect();
    let cmax = powed.iter().cloned().fold(0.0f64, f64::max).max(1e-300);
    // Scale so integer costs carry ~9 significant digits of the largest.
    let cscale = SCALE / cmax;
    let icost: Vec<i64> = powed.iter().map(|&c| (c * cscale).round() as i64).collect();

    let (flow, iu, iv) = transportation_simplex(&supply, &demand, &icost, n);

    let mut entries = vec![0.0; m * n];
    let mut obj = 0.0f64;
    for i in 0..m {
        for j in 0..n {
            let f = flow[i * n + j];
            if f > 0 {
                let mass = f as f64 / SCALE;
                entries[i * n + j] = mass;
                obj += mass * powed[i * n + j];
            }
        }
    }
    let distance = if p == 1 { obj } else { obj.sqrt() };
    Ok(OtSolution {
        distance,
        plan: TransportPlan { rows: m, cols: n, entries },
        dual_u: iu.iter().map(|&x| x as f64 / cscale).collect(),
        dual_v: iv.iter().map(|&x| x as f64 / cscale).collect(),
    })
}

/// Default support-size guard for the per-pair OT sweep.
pub const WT_DEFAULT_CAP: usize = 1500;

/// One distance-update step: d'(x_i, x_j) is the order-p Wasserstein
/// distance between the truncation-localized measures at i and j, with the
/// current D as ground cost. Points never move.
pub fn wt_step(
    cloud: &WeightedCloud,
    d: &DistanceMatrix,
    eps: f64,
    p: u32,
    cap: usize,
) -> Result<DistanceMatrix> {
    let n = cloud.len();
    if n > cap {
        return Err(Error::SizeGuard { n, cap });
    }
    let measures: Result<Vec<DiscreteMeasure>> = (0..n)
        .map(|i| {
            let idxs = epsilon_neighborhood(d, i, eps);
            let masses = idxs.iter().map(|&j| cloud.weight(j)).collect();
            DiscreteMeasure::new(idxs, masses)
        })
        .collect();
    let measures = measures?;

    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let computed: Result<Vec<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let mi = &measures[i];
            let mj = &measures[j];
            let mut cost = Vec::with_capacity(mi.len() * mj.len());
            for &a in &mi.indices {
                for &b in &mj.indices {
                    cost.push(d.get(a, b));
                }
            }
            Ok(discrete_ot(mi, mj, &cost, p)?.distance)
        })
        .collect();
    let computed = computed?;

    let mut out = DistanceMatrix::zeros(n);
    for (&(i, j), &v) in pairs.iter().zip(&computed) {
        out.set(i, j, v);
    }
    Ok(out)
}

/// Iterated distance-update transform starting from the Euclidean metric.
/// With `frozen_neighborhoods`, localization supports are taken from the
/// initial metric at every step; by default they track the updated metric.
pub fn wt_iterate(
    cloud: &WeightedCloud,
    eps: f64,
    p: u32,
    steps: usize,
    cap: usize,
    frozen_neighborhoods: bool,
) -> Result<Vec<DistanceMatrix>> {
    let base = euclidean_distance_matrix(cloud);
    let mut trajectory = vec![base];
    for _ in 0..steps {
        let current = trajectory.last().unwrap();
        let neigh_source = if frozen_neighborhoods { &trajectory[0] } else { current };
        let next = if frozen_neighborhoods {
            wt_step_with_sources(cloud, current, neigh_source, eps, p, cap)?
        } else {
            wt_step(cloud, current, eps, p, cap)?
        };
        trajectory.push(next);
    }
    Ok(trajectory)
}

fn wt_step_with_sources(
    cloud: &WeightedCloud,
    cost_d: &DistanceMatrix,
    neigh_d: &DistanceMatrix,
    eps: f64,
    p: u32,
    cap: usize,
) -> Result<DistanceMatrix> {
    let n = cloud.len();
    if n > cap {
        return Err(Error::SizeGuard { n, cap });
    }
    let measures: Result<Vec<DiscreteMeasure>> = (0..n)
        .map(|i| {
            let idxs = epsilon_neighborhood(neigh_d, i, eps);
            let masses = idxs.iter().map(|&j| cloud.weight(j)).collect();
            DiscreteMeasure::new(idxs, masses)
        })
        .collect();
    let measures = measures?;
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let computed: Result<Vec<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (mi, mj) = (&measures[i], &measures[j]);
            let mut cost = Vec::with_capacity(mi.len() * mj.len());
            for &a in &mi.indices {
                for &b in &mj.indices {
                    cost.push(cost_d.get(a, b));
                }
            }
            Ok(discrete_ot(mi, mj, &cost, p)?.distance)
        })
        .collect();
    let computed = computed?;
    let mut out = DistanceMatrix::zeros(n);
    for (&(i, j), &v) in pairs.iter().zip(&computed) {
        out.set(i, j, v);
    }
    Ok(out)
}

/// Shifts every point to the weighted mean of its Euclidean eps-ball;
/// weights are untouched.
pub fn mean_shift_step(cloud: &WeightedCloud, eps: f64) -> Result<WeightedCloud> {
    let n = cloud.len();
    let points: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut total = 0.0;
            let mut mean = vec![0.0; cloud.dim()];
            for j in 0..n {
                if euclidean(cloud.point(i), cloud.point(j)) <= eps {
                    let w = cloud.weight(j);
                    total += w;
                    for (m, x) in mean.iter_mut().zip(cloud.point(j)) {
                        *m += w * x;
                    }
                }
            }
            mean.iter_mut().for_each(|m| *m /= total);
            mean
        })
        .collect();
    WeightedCloud::new(points, cloud.weights().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gt::{gt_iterate, GTConfig, GaussianMeasure, Variant};
    use crate::measure::{localized_covariance, localized_mean};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn dirac_to_dirac() {
        let mu = DiscreteMeasure::dirac(0);
        let nu = DiscreteMeasure::dirac(1);
        let sol = discrete_ot(&mu, &nu, &[2.5], 2).unwrap();
        assert!((sol.distance - 2.5).abs() < 1e-7);
        assert_eq!(sol.plan.entries, vec![1.0]);
    }

    #[test]
    fn square_corners_permutation() {
        // mu on left corners, nu on right corners of a unit square.
        let mu = DiscreteMeasure::new(vec![0, 1], vec![0.5, 0.5]).unwrap();
        let nu = DiscreteMeasure::new(vec![2, 3], vec![0.5, 0.5]).unwrap();
        // cost[(i,j)]: matching side costs 1, diagonal sqrt(2).
        let r2 = 2.0f64.sqrt();
        let cost = vec![1.0, r2, r2, 1.0];
        let sol = discrete_ot(&mu, &nu, &cost, 2).unwrap();
        assert!((sol.distance - 1.0).abs() < 1e-7);
        assert!((sol.plan.get(0, 0) - 0.5).abs() < 1e-9);
        assert!((sol.plan.get(1, 1) - 0.5).abs() < 1e-9);
        assert!(sol.plan.get(0, 1) < 1e-12);
    }

    #[test]
    fn parallel_segments_discretized() {
        // Uniform 201-point discretizations of [0,1]x{0} and [0,1]x{1}:
        // the exact W2 distance between the continuous measures is 1.
        let k = 201;
        let xs: Vec<f64> = (0..k).map(|i| i as f64 / (k - 1) as f64).collect();
        let mu = DiscreteMeasure::new((0..k).collect(), vec![1.0; k]).unwrap();
        let nu = DiscreteMeasure::new((0..k).collect(), vec![1.0; k]).unwrap();
        let mut cost = Vec::with_capacity(k * k);
        for &a in &xs {
            for &b in &xs {
                cost.push(((a - b) * (a - b) + 1.0).sqrt());
            }
        }
        let sol = discrete_ot(&mu, &nu, &cost, 2).unwrap();
        assert!((sol.distance - 1.0).abs() < 0.01, "got {}", sol.distance);
    }

    #[test]
    fn marginals_and_slackness_on_random_instances() {
        let mut rng = StdRng::seed_from_u64(99);
        for _ in 0..100 {
            let m = rng.gen_range(1..=12);
            let n = rng.gen_range(1..=12);
            let mu = DiscreteMeasure::new(
                (0..m).collect(),
                (0..m).map(|_| rng.gen_range(0.05..1.0)).collect(),
            )
            .unwrap();
            let nu = DiscreteMeasure::new(
                (0..n).collect(),
                (0..n).map(|_| rng.gen_range(0.05..1.0)).collect(),
            )
            .unwrap();
            let cost: Vec<f64> = (0..m * n).map(|_| rng.gen_range(0.0..5.0)).collect();
            let p = if rng.gen_bool(0.5) { 1 } else { 2 };
            let sol = discrete_ot(&mu, &nu, &cost, p).unwrap();

            for (a, b) in sol.plan.row_sums().iter().zip(&mu.masses) {
                assert!((a - b).abs() < 1e-8);
            }
            for (a, b) in sol.plan.col_sums().iter().zip(&nu.masses) {
                assert!((a - b).abs() < 1e-8);
            }
            // Complementary slackness in the p-powered cost.
            let powed: Vec<f64> = cost.iter().map(|&c| if p == 1 { c } else { c * c }).collect();
            let tol = 1e-6 * powed.iter().cloned().fold(1.0, f64::max);
            for i in 0..m {
                for j in 0..n {
                    let r = powed[i * n + j] - sol.dual_u[i] - sol.dual_v[j];
                    assert!(r > -tol, "dual infeasible: {r}");
                    if sol.plan.get(i, j) > 1e-9 {
                        assert!(r.abs() < tol, "slackness violated: {r}");
                    }
                }
            }
        }
    }

    #[test]
    fn w2_dominates_w1() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let m = rng.gen_range(2..=10);
            let n = rng.gen_range(2..=10);
            let mu = DiscreteMeasure::new(
                (0..m).collect(),
                (0..m).map(|_| rng.gen_range(0.1..1.0)).collect(),
            )
            .unwrap();
            let nu = DiscreteMeasure::new(
                (0..n).collect(),
                (0..n).map(|_| rng.gen_range(0.1..1.0)).collect(),
            )
            .unwrap();
            let cost: Vec<f64> = (0..m * n).map(|_| rng.gen_range(0.0..3.0)).collect();
            let d1 = discrete_ot(&mu, &nu, &cost, 1).unwrap().distance;
            let d2 = discrete_ot(&mu, &nu, &cost, 2).unwrap().distance;
            assert!(d2 >= d1 - 1e-7, "w2 {d2} < w1 {d1}");
        }
    }

    #[test]
    fn gaussian_summary_lower_bounds_w2() {
        let mut rng = StdRng::seed_from_u64(21);
        for _ in 0..50 {
            let na = rng.gen_range(2..=8);
            let nb = rng.gen_range(2..=8);
            let pts: Vec<Vec<f64>> = (0..na + nb)
                .map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
                .collect();
            let cloud = WeightedCloud::uniform(pts.clone()).unwrap();
            let ia: Vec<usize> = (0..na).collect();
            let ib: Vec<usize> = (na..na + nb).collect();
            let mu = DiscreteMeasure::new(ia.clone(), vec![1.0; na]).unwrap();
            let nu = DiscreteMeasure::new(ib.clone(), vec![1.0; nb]).unwrap();
            let mut cost = Vec::new();
            for &a in &ia {
                for &b in &ib {
                    cost.push(euclidean(&pts[a], &pts[b]));
                }
            }
            let w2 = discrete_ot(&mu, &nu, &cost, 2).unwrap().distance;
            let ma = localized_mean(&cloud, &ia).unwrap();
            let ca = localized_covariance(&cloud, &ia, &ma).unwrap();
            let mb = localized_mean(&cloud, &ib).unwrap();
            let cb = localized_covariance(&cloud, &ib, &mb).unwrap();
            let g = crate::gt::gaussian_w2(
                &GaussianMeasure { mean: ma, cov: ca },
                &GaussianMeasure { mean: mb, cov: cb },
            )
            .unwrap();
            assert!(g <= w2 + 1e-7, "gaussian {g} > w2 {w2}");
        }
    }

    #[test]
    fn wt_identity_on_isolated_points() {
        let cloud = WeightedCloud::uniform(vec![vec![0.0], vec![10.0], vec![25.0]]).unwrap();
        let d = euclidean_distance_matrix(&cloud);
        let out = wt_step(&cloud, &d, 1.0, 2, WT_DEFAULT_CAP).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((out.get(i, j) - d.get(i, j)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn wt_zero_for_identical_neighborhoods() {
        // Two coincident points share the same neighborhood and masses.
        let cloud =
            WeightedCloud::uniform(vec![vec![0.0], vec![0.0], vec![0.4]]).unwrap();
        let d = euclidean_distance_matrix(&cloud);
        let out = wt_step(&cloud, &d, 1.0, 2, WT_DEFAULT_CAP).unwrap();
        assert!(out.get(0, 1) < 1e-7);
    }

    #[test]
    fn wt_respects_size_guard() {
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let cloud = WeightedCloud::uniform(pts).unwrap();
        let d = euclidean_distance_matrix(&cloud);
        assert!(matches!(
            wt_step(&cloud, &d, 1.0, 2, 4),
            Err(Error::SizeGuard { n: 5, cap: 4 })
        ));
    }

    #[test]
    fn mean_shift_cases() {
        let iso = WeightedCloud::uniform(vec![vec![0.0], vec![100.0]]).unwrap();
        let out = mean_shift_step(&iso, 1.0).unwrap();
        assert_eq!(out.point(0), &[0.0]);

        let pair = WeightedCloud::uniform(vec![vec![0.0], vec![1.0]]).unwrap();
        let out = mean_shift_step(&pair, 2.0).unwrap();
        assert_eq!(out.point(0), &[0.5]);
        assert_eq!(out.point(1), &[0.5]);

        let tri = WeightedCloud::uniform(vec![vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let out = mean_shift_step(&tri, 1.0).unwrap();
        assert_eq!(out.point(0), &[0.5]);
        assert_eq!(out.point(1), &[1.0]);
        assert_eq!(out.point(2), &[1.5]);
    }

    #[test]
    fn lambda_zero_iteration_matches_mean_shift() {
        let mut rng = StdRng::seed_from_u64(4);
        let pts: Vec<Vec<f64>> = (0..30)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let cloud = WeightedCloud::uniform(pts).unwrap();
        let eps = 0.5;
        let cfg = GTConfig::new(eps, 0.0, 3, Variant::Full).unwrap();
        let (traj, _) = gt_iterate(&cloud, &cfg).unwrap();

        let mut ms = cloud.clone();
        for step in 1..=3 {
            ms = mean_shift_step(&ms, eps).unwrap();
            for i in 0..cloud.len() {
                for d in 0..2 {
                    assert!(
                        (ms.point(i)[d] - traj[step].cloud.point(i)[d]).abs() < 1e-12,
                        "step {step} point {i}"
                    );
                }
            }
        }
    }
}
