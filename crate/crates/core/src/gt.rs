//! The Gaussian-transform distance and its iterative re-metrization.
//!
//! Each point of a weighted cloud is replaced by a Gaussian whose mean and
//! covariance summarize its localized neighborhood; the cloud's metric is
//! then replaced by the closed-form W2 distance between those Gaussians
//! (with the covariance term weighted by lambda). Iterating this —
//! shifting points to their localized means and re-deriving the metric —
//! contracts clusters while preserving anisotropic structure.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measure::{
    self, euclidean, kernel_localization, merge_collocated, DistanceMatrix, KernelSpec,
    WeightedCloud,
};
use crate::psd::{bures_distance, SymMatrix};

/// Sweep strategy for the pairwise distance pass.
///
/// The pruned variants exploit the Euclidean lower bound of the transformed
/// distance: a pair farther than eps apart in Euclidean terms cannot lie in
/// any eps-ball of the new metric, so its entry is left at +inf.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Every ordered pair computed.
    Full,
    /// Euclidean prefilter; both orientations of a pair computed.
    V1,
    /// Euclidean prefilter; each pair computed once (symmetry).
    V2,
    /// V1 plus collocated-point merging after each iteration.
    V3,
    /// V2 plus collocated-point merging after each iteration.
    V4,
}

impl Variant {
    pub fn prunes(self) -> bool {
        !matches!(self, Variant::Full)
    }

    pub fn half_sweep(self) -> bool {
        matches!(self, Variant::V2 | Variant::V4)
    }

    pub fn merges(self) -> bool {
        matches!(self, Variant::V3 | Variant::V4)
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "full" => Ok(Variant::Full),
            "v1" => Ok(Variant::V1),
            "v2" => Ok(Variant::V2),
            "v3" => Ok(Variant::V3),
            "v4" => Ok(Variant::V4),
            other => Err(format!("unknown variant {other:?} (full|v1|v2|v3|v4)")),
        }
    }
}

/// Parameters of the transform.
#[derive(Debug, Clone)]
pub struct GTConfig {
    pub eps: f64,
    pub lambda: f64,
    pub iterations: usize,
    pub variant: Variant,
    pub kernel: KernelSpec,
    /// Covariance cross-term approximation rank; `None` = exact.
    pub top_k: Option<usize>,
}

impl GTConfig {
    pub fn new(eps: f64, lambda: f64, iterations: usize, variant: Variant) -> Result<Self> {
        if lambda < 0.0 {
            return Err(Error::NegativeLambda(lambda));
        }
        assert!(eps > 0.0, "eps must be positive");
        Ok(GTConfig {
            eps,
            lambda,
            iterations,
            variant,
            kernel: KernelSpec::Truncation { eps },
            top_k: None,
        })
    }

    pub fn with_kernel(mut self, kernel: KernelSpec) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn with_top_k(mut self, top_k: Option<usize>) -> Self {
        self.top_k = top_k;
        self
    }
}

/// Gaussian with explicit mean and covariance.
#[derive(Debug, Clone)]
pub struct GaussianMeasure {
    pub mean: Vec<f64>,
    pub cov: SymMatrix,
}

/// Closed-form W2 distance between Gaussians:
/// sqrt(|m1-m2|^2 + bures(S1,S2)^2).
pub fn gaussian_w2(g1: &GaussianMeasure, g2: &GaussianMeasure) -> Result<f64> {
    if g1.mean.len() != g2.mean.len() {
        return Err(Error::DimensionMismatch { left: g1.mean.len(), right: g2.mean.len() });
    }
    let loc = euclidean(&g1.mean, &g2.mean);
    let cov = bures_distance(&g1.cov, &g2.cov, None)?;
    Ok((loc * loc + cov * cov).sqrt())
}

/// Transformed distance: sqrt(|x1-x2|^2 + lambda * bures(S1,S2)^2).
pub fn gt_distance(
    x1: &[f64],
    x2: &[f64],
    s1: &SymMatrix,
    s2: &SymMatrix,
    lambda: f64,
    top_k: Option<usize>,
) -> Result<f64> {
    if lambda < 0.0 {
        return Err(Error::NegativeLambda(lambda));
    }
    if x1.len() != x2.len() {
        return Err(Error::DimensionMismatch { left: x1.len(), right: x2.len() });
    }
    let loc = euclidean(x1, x2);
    if lambda == 0.0 {
        return Ok(loc);
    }
    let cov = bures_distance(s1, s2, top_k)?;
    Ok((loc * loc + lambda * cov * cov).sqrt())
}

/// One snapshot of the iteration: cloud, its current metric, and the
/// covariance field the metric was derived from.
#[derive(Debug, Clone)]
pub struct GTState {
    pub cloud: WeightedCloud,
    pub dist: DistanceMatrix,
    pub covs: Vec<SymMatrix>,
    pub iteration: usize,
    /// Old-index -> new-index maps from each merge performed so far.
    pub remaps: Vec<Vec<usize>>,
    /// Wall time spent producing this state (zero for the seed state copy).
    pub elapsed: std::time::Duration,
}

impl GTState {
    /// Composes the merge history: index in the original cloud -> index in
    /// this state's cloud.
    pub fn trace_index(&self, original: usize) -> usize {
        self.remaps.iter().fold(original, |i, r| r[i])
    }
}

/// Pairwise transformed distances for the given cloud and covariance field.
/// Pruned variants leave pairs beyond eps (Euclidean) at +inf.
pub fn gt_distance_matrix(
    cloud: &WeightedCloud,
    covs: &[SymMatrix],
    cfg: &GTConfig,
) -> Result<DistanceMatrix> {
    let n = cloud.len();
    if covs.len() != n {
        return Err(Error::MissingCovariances);
    }
    let prune = cfg.variant.prunes();
    let half = cfg.variant.half_sweep();
    let eps = cfg.eps;

    let rows: Result<Vec<Vec<(usize, f64)>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let start = if half { i + 1 } else { 0 };
            let mut row = Vec::new();
            for j in start..n {
                if j == i {
                    continue;
                }
                if prune && euclidean(cloud.point(i), cloud.point(j)) > eps {
                    continue;
                }
                let d = gt_distance(
                    cloud.point(i),
                    cloud.point(j),
                    &covs[i],
                    &covs[j],
                    cfg.lambda,
                    cfg.top_k,
                )?;
                row.push((j, d));
            }
            Ok(row)
        })
        .collect();
    let rows = rows?;

    let mut m = if prune {
        DistanceMatrix::filled(n, f64::INFINITY)
    } else {
        DistanceMatrix::zeros(n)
    };
    for (i, row) in rows.iter().enumerate() {
        for &(j, d) in row {
            m.set(i, j, d);
        }
    }
    Ok(m)
}

/// Localizes the measure at every point of the state and returns per-point
/// (support, weights) pairs under the state's current metric.
fn localize_all(state: &GTState, kernel: &KernelSpec) -> Result<Vec<(Vec<usize>, Vec<f64>)>> {
    (0..state.cloud.len())
        .into_par_iter()
        .map(|i| kernel_localization(&state.cloud, &state.dist, i, kernel))
        .collect()
}

fn covariances_for(
    cloud: &WeightedCloud,
    neighborhoods: &[(Vec<usize>, Vec<f64>)],
) -> Result<Vec<SymMatrix>> {
    neighborhoods
        .par_iter()
        .map(|(idxs, w)| Ok(measure::localized_mean_cov_weighted(cloud, idxs, w)?.1))
        .collect()
}

/// Runs the iterative transform. The trajectory holds the initial
/// re-metrized state (iteration 0) followed by one state per iteration;
/// the final state is a clone of the last entry.
pub fn gt_iterate(cloud: &WeightedCloud, cfg: &GTConfig) -> Result<(Vec<GTState>, GTState)> {
    assert!(!cloud.is_empty(), "cloud must be nonempty");

    // Iteration 0: localize under the Euclidean base distance and replace
    // it by the transformed metric.
    let t0 = std::time::Instant::now();
    let base = measure::euclidean_distance_matrix(cloud);
    let seed = GTState {
        cloud: cloud.clone(),
        dist: base,
        covs: Vec::new(),
        iteration: 0,
        remaps: Vec::new(),
        elapsed: std::time::Duration::ZERO,
    };
    let neigh0 = localize_all(&seed, &cfg.kernel)?;
    let covs0 = covariances_for(cloud, &neigh0)?;
    let d0 = gt_distance_matrix(cloud, &covs0, cfg)?;
    let mut state = GTState {
        cloud: cloud.clone(),
        dist: d0,
        covs: covs0,
        iteration: 0,
        remaps: Vec::new(),
        elapsed: t0.elapsed(),
    };

    let mut trajectory = vec![state.clone()];

    for it in 1..=cfg.iterations {
        let t_it = std::time::Instant::now();
        // Neighborhood membership (and weights) frozen under the current
        // metric; points shift to their localized means.
        let neigh = localize_all(&state, &cfg.kernel)?;
        let shifted_points: Result<Vec<Vec<f64>>> = neigh
            .par_iter()
            .map(|(idxs, w)| {
                Ok(measure::localized_mean_cov_weighted(&state.cloud, idxs, w)?.0)
            })
            .collect();
        let shifted =
            WeightedCloud::new(shifted_points?, state.cloud.weights().to_vec())?;

        // Covariances: frozen neighborhoods, scatter over shifted coords.
        let covs = covariances_for(&shifted, &neigh)?;
        let dist = gt_distance_matrix(&shifted, &covs, cfg)?;

        let mut next = GTState {
            cloud: shifted,
            dist,
            covs,
            iteration: it,
            remaps: state.remaps.clone(),
            elapsed: std::time::Duration::ZERO,
        };

        if cfg.variant.merges() {
            // Largest finite transformed distance sets the collocation
            // scale; the Euclidean diameter is only needed as a fallback
            // when every off-diagonal entry is the +inf sentinel. The
            // quadratic merge pass only runs when the smallest pair
            // distance shows there is something to merge.
            let (max_d, min_d) = next.dist.finite_extremes();
            let scale = if max_d > 0.0 {
                max_d
            } else {
                next.cloud.diameter()
            };
            let tol = 1e-9 * scale;
            if min_d <= tol {
                let (merged, dist, remap) =
                    merge_collocated(&next.cloud, &next.dist, tol)?;
                if merged.len() < next.cloud.len() {
                    // Covariances carry over via the group representatives:
                    // merged members had identical distance profiles, so
                    // their neighborhoods (and scatter) coincide within tol.
                    let mut covs = vec![SymMatrix::zeros(merged.dim()); merged.len()];
                    for old in (0..next.cloud.len()).rev() {
                        covs[remap[old]] = next.covs[old].clone();
                    }
                    next = GTState {
                        cloud: merged,
                        dist,
                        covs,
                        iteration: it,
                        remaps: next.remaps,
                        elapsed: std::time::Duration::ZERO,
                    };
                    next.remaps.push(remap);
                }
            }
        }

        next.elapsed = t_it.elapsed();
        trajectory.push(next.clone());
        state = next;
    }

    Ok((trajectory, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::epsilon_neighborhood;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn grid(nx: usize, ny: usize, pitch: f64) -> WeightedCloud {
        let mut pts = Vec::new();
        for i in 0..nx {
            for j in 0..ny {
                pts.push(vec![i as f64 * pitch, j as f64 * pitch]);
            }
        }
        WeightedCloud::uniform(pts).unwrap()
    }

    #[test]
    fn w2_identical_and_dirac() {
        let g = GaussianMeasure {
            mean: vec![1.0, 2.0],
            cov: SymMatrix::from_diag(&[0.5, 0.3]),
        };
        assert!(gaussian_w2(&g, &g).unwrap() < 1e-7);

        let d1 = GaussianMeasure { mean: vec![0.0, 0.0], cov: SymMatrix::zeros(2) };
        let d2 = GaussianMeasure { mean: vec![3.0, 4.0], cov: SymMatrix::zeros(2) };
        assert!((gaussian_w2(&d1, &d2).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn w2_parallel_unit_segments() {
        // Uniform measures on [0,1]x{0} and [0,1]x{1} as Gaussians with the
        // segment covariance: only the vertical offset contributes.
        let cov = SymMatrix::new(2, vec![1.0 / 12.0, 0.0, 0.0, 0.0]).unwrap();
        let g1 = GaussianMeasure { mean: vec![0.5, 0.0], cov: cov.clone() };
        let g2 = GaussianMeasure { mean: vec![0.5, 1.0], cov };
        assert!((gaussian_w2(&g1, &g2).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distance_lambda_zero_and_equal_covs() {
        let s1 = SymMatrix::from_diag(&[0.7, 0.1]);
        let s2 = SymMatrix::from_diag(&[0.0, 2.0]);
        let x1 = [0.0, 0.0];
        let x2 = [3.0, 4.0];
        assert_eq!(gt_distance(&x1, &x2, &s1, &s2, 0.0, None).unwrap(), 5.0);
        let d = gt_distance(&x1, &x2, &s1, &s1, 7.0, None).unwrap();
        assert!((d - 5.0).abs() < 1e-7);
    }

    #[test]
    fn distance_rotated_segment_covariances() {
        let s1 = SymMatrix::new(2, vec![1.0 / 12.0, 0.0, 0.0, 0.0]).unwrap();
        let s2 = SymMatrix::new(2, vec![0.0, 0.0, 0.0, 1.0 / 12.0]).unwrap();
        let x = [0.3, -0.2];
        let d = gt_distance(&x, &x, &s1, &s2, 1.0, None).unwrap();
        assert!((d - (1.0f64 / 6.0).sqrt()).abs() < 1e-9, "got {d}");
    }

    #[test]
    fn distance_rejects_negative_lambda() {
        let s = SymMatrix::identity(2);
        let r = gt_distance(&[0.0, 0.0], &[1.0, 0.0], &s, &s, -0.5, None);
        assert!(matches!(r, Err(Error::NegativeLambda(_))));
    }

    #[test]
    fn lambda_scaling_identity() {
        // Scaling both covariances by lambda inside the Bures term equals
        // weighting the squared Bures term by lambda outside.
        let mut rng = StdRng::seed_from_u64(9);
        for _ in 0..20 {
            let mk = |rng: &mut StdRng| {
                let a: f64 = rng.gen_range(0.1..2.0);
                let b: f64 = rng.gen_range(-0.5..0.5);
                let c: f64 = rng.gen_range(0.1..2.0);
                SymMatrix::new(2, vec![a, b * (a * c).sqrt(), b * (a * c).sqrt(), c]).unwrap()
            };
            let s1 = mk(&mut rng);
            let s2 = mk(&mut rng);
            let lambda: f64 = rng.gen_range(0.0..5.0);
            let x1 = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let x2 = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let outer = gt_distance(&x1, &x2, &s1, &s2, lambda, None).unwrap();
            let inner = gt_distance(
                &x1,
                &x2,
                &s1.scaled(lambda),
                &s2.scaled(lambda),
                1.0,
                None,
            )
            .unwrap();
            assert!((outer - inner).abs() < 1e-9, "outer {outer} inner {inner}");
        }
    }

    #[test]
    fn matrix_lambda_zero_is_euclidean_on_computed_pairs() {
        let c = grid(5, 5, 1.0);
        let covs = vec![SymMatrix::identity(2); 25];
        let cfg = GTConfig::new(1.5, 0.0, 0, Variant::V1).unwrap();
        let m = gt_distance_matrix(&c, &covs, &cfg).unwrap();
        let e = measure::euclidean_distance_matrix(&c);
        for i in 0..25 {
            for j in 0..25 {
                if m.get(i, j).is_finite() {
                    assert!((m.get(i, j) - e.get(i, j)).abs() < 1e-12);
                } else {
                    assert!(e.get(i, j) > 1.5);
                }
            }
        }
    }

    #[test]
    fn isolated_pair_gets_sentinel() {
        let c = WeightedCloud::uniform(vec![vec![0.0, 0.0], vec![10.0, 0.0]]).unwrap();
        let covs = vec![SymMatrix::zeros(2); 2];
        let cfg = GTConfig::new(1.0, 1.0, 0, Variant::V1).unwrap();
        let m = gt_distance_matrix(&c, &covs, &cfg).unwrap();
        assert!(m.get(0, 1) > 1.0 && m.get(0, 1).is_infinite());
        assert_eq!(epsilon_neighborhood(&m, 0, 1.0), vec![0]);
    }

    #[test]
    fn pruned_neighborhoods_match_full() {
        let c = grid(12, 12, 0.4);
        let cfg_full = GTConfig::new(1.0, 2.0, 0, Variant::Full).unwrap();
        let base = measure::euclidean_distance_matrix(&c);
        let covs: Vec<SymMatrix> = (0..c.len())
            .map(|i| {
                let idxs = epsilon_neighborhood(&base, i, 1.0);
                let mean = measure::localized_mean(&c, &idxs).unwrap();
                measure::localized_covariance(&c, &idxs, &mean).unwrap()
            })
            .collect();
        let full = gt_distance_matrix(&c, &covs, &cfg_full).unwrap();
        for variant in [Variant::V1, Variant::V2] {
            let cfg = GTConfig::new(1.0, 2.0, 0, variant).unwrap();
            let pruned = gt_distance_matrix(&c, &covs, &cfg).unwrap();
            for i in 0..c.len() {
                assert_eq!(
                    epsilon_neighborhood(&full, i, 1.0),
                    epsilon_neighborhood(&pruned, i, 1.0),
                    "variant {variant:?} row {i}"
                );
            }
        }
    }

    #[test]
    fn euclidean_lower_bound_holds() {
        let mut rng = StdRng::seed_from_u64(17);
        let pts: Vec<Vec<f64>> = (0..40)
            .map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
            .collect();
        let c = WeightedCloud::uniform(pts).unwrap();
        let cfg = GTConfig::new(1.0, 3.0, 2, Variant::Full).unwrap();
        let (traj, _) = gt_iterate(&c, &cfg).unwrap();
        for s in &traj {
            for i in 0..s.cloud.len() {
                for j in 0..s.cloud.len() {
                    let e = euclidean(s.cloud.point(i), s.cloud.point(j));
                    assert!(s.dist.get(i, j) >= e - 1e-9);
                }
            }
        }
    }

    #[test]
    fn all_near_points_collapse_to_mean() {
        let c = WeightedCloud::new(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![0.5, 0.25, 0.25],
        )
        .unwrap();
        let cfg = GTConfig::new(100.0, 1.0, 1, Variant::Full).unwrap();
        let (_, fin) = gt_iterate(&c, &cfg).unwrap();
        for i in 0..3 {
            assert!((fin.cloud.point(i)[0] - 0.25).abs() < 1e-12);
            assert!((fin.cloud.point(i)[1] - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn merging_variant_collapses_and_conserves_weight() {
        let c = WeightedCloud::uniform(vec![
            vec![0.0, 0.0],
            vec![0.1, 0.0],
            vec![0.0, 0.1],
            vec![10.0, 10.0],
        ])
        .unwrap();
        let cfg = GTConfig::new(1.0, 1.0, 3, Variant::V4).unwrap();
        let (_, fin) = gt_iterate(&c, &cfg).unwrap();
        assert!(fin.cloud.len() <= 2, "expected merge, n = {}", fin.cloud.len());
        let total: f64 = fin.cloud.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(fin.trace_index(0), fin.trace_index(1));
        assert_ne!(fin.trace_index(0), fin.trace_index(3));
    }

    #[test]
    fn variants_agree_after_remap() {
        let mut rng = StdRng::seed_from_u64(29);
        let pts: Vec<Vec<f64>> = (0..60)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let c = WeightedCloud::uniform(pts).unwrap();
        let eps = 0.6;
        let full = gt_iterate(&c, &GTConfig::new(eps, 2.0, 2, Variant::Full).unwrap()).unwrap().1;
        for variant in [Variant::V1, Variant::V2, Variant::V3, Variant::V4] {
            let fin = gt_iterate(&c, &GTConfig::new(eps, 2.0, 2, variant).unwrap()).unwrap().1;
            for i in 0..c.len() {
                let fi = fin.trace_index(i);
                for d in 0..2 {
                    assert!(
                        (fin.cloud.point(fi)[d] - full.cloud.point(i)[d]).abs() < 1e-9,
                        "variant {variant:?} point {i}"
                    );
                }
            }
            // Neighborhood structure under eps agrees with the full sweep.
            for i in 0..c.len() {
                let fi = fin.trace_index(i);
                let full_nb: Vec<usize> = epsilon_neighborhood(&full.dist, i, eps)
                    .into_iter()
                    .map(|j| fin.trace_index(j))
                    .collect();
                let mut full_nb: Vec<usize> = full_nb;
                full_nb.sort_unstable();
                full_nb.dedup();
                let pruned_nb = epsilon_neighborhood(&fin.dist, fi, eps);
                assert_eq!(full_nb, pruned_nb, "variant {variant:?} point {i}");
            }
        }
    }
}
