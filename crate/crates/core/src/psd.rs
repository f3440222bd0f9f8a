//! Dense symmetric / positive semi-definite matrix kernels.
//!
//! Everything here operates on small matrices (point-cloud dimension,
//! typically 2..8), so the decompositions favour robustness over
//! asymptotic speed: cyclic Jacobi for symmetric eigenproblems and power
//! iteration with deflation for spectra of PSD products.

use crate::error::{Error, Result};

const SYMMETRY_REL_TOL: f64 = 1e-12;
/// Absolute clamp threshold for tiny negative eigenvalues of unit-scaled input.
const CLAMP_TOL: f64 = 1e-9;
/// Below this (on unit-scaled input) a negative eigenvalue is a hard failure.
const PSD_FAIL_TOL: f64 = -1e-6;

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    /// Builds a symmetric matrix, rejecting input whose asymmetry exceeds
    /// a relative tolerance of 1e-12.
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        assert_eq!(entries.len(), dim * dim, "entry count must be dim*dim");
        let scale = entries.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let mut max_asym = 0.0f64;
        for i in 0..dim {
            for j in (i + 1)..dim {
                max_asym = max_asym.max((entries[i * dim + j] - entries[j * dim + i]).abs());
            }
        }
        if max_asym > SYMMETRY_REL_TOL * scale {
            return Err(Error::NotSymmetric { max_asym });
        }
        let mut m = SymMatrix { dim, entries };
        // Symmetrize exactly so downstream arithmetic sees one value per pair.
        for i in 0..dim {
            for j in (i + 1)..dim {
                let avg = 0.5 * (m.entries[i * dim + j] + m.entries[j * dim + i]);
                m.entries[i * dim + j] = avg;
                m.entries[j * dim + i] = avg;
            }
        }
        Ok(m)
    }

    pub fn zeros(dim: usize) -> Self {
        SymMatrix { dim, entries: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.entries[i * dim + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, v) in diag.iter().enumerate() {
            m.entries[i * diag.len() + i] = *v;
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.dim + j] = v;
        self.entries[j * self.dim + i] = v;
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        SymMatrix {
            dim: self.dim,
            entries: self.entries.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        SymMatrix {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        SymMatrix {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// Full spectral decomposition of a symmetric matrix.
///
/// Eigenvalues are sorted descending; `vectors[k]` is the eigenvector
/// (column) paired with `values[k]`.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

impl EigenPair {
    /// V diag(values) V^T as a symmetric matrix.
    pub fn reconstruct(&self) -> SymMatrix {
        let dim = self.values.len();
        let mut m = SymMatrix::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                let mut s = 0.0;
                for k in 0..dim {
                    s += self.values[k] * self.vectors[k][i] * self.vectors[k][j];
                }
                m.set(i, j, s);
            }
        }
        m
    }
}

/// Spectral decomposition by cyclic Jacobi rotations.
pub fn sym_eigen(m: &SymMatrix) -> Result<EigenPair> {
    let n = m.dim;
    let mut a = m.entries.clone();
    // v is column-major accumulation of rotations: v[c][r].
    let mut v = vec![vec![0.0; n]; n];
    for (c, col) in v.iter_mut().enumerate() {
        col[c] = 1.0;
    }

    let scale = m.frobenius_norm().max(1.0);
    let tol = 1e-15 * scale;
    let max_sweeps = 64;

    for _ in 0..max_sweeps {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i * n + j] * a[i * n + j];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= tol / (n as f64) {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[p][k];
                    let vkq = v[q][k];
                    v[p][k] = c * vkp - s * vkq;
                    v[q][k] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap());

    Ok(EigenPair {
        values: order.iter().map(|&i| diag[i]).collect(),
        vectors: order.iter().map(|&i| v[i].clone()).collect(),
    })
}

/// PSD square root via spectral decomposition; tiny negative eigenvalues
/// are clamped to zero.
pub fn psd_sqrt(m: &SymMatrix) -> Result<SymMatrix> {
    let scale = m.trace().max(1.0);
    let eig = sym_eigen(m)?;
    let mut values = Vec::with_capacity(eig.values.len());
    for &l in &eig.values {
        if l / scale < PSD_FAIL_TOL {
            return Err(Error::NotPsd { eigenvalue: l });
        }
        values.push(l.max(0.0).sqrt());
    }
    Ok(EigenPair { values, vectors: eig.vectors }.reconstruct())
}

/// Dense general product of two symmetric matrices (result is not in
/// general symmetric), row-major.
fn product(a: &SymMatrix, b: &SymMatrix) -> Vec<f64> {
    let n = a.dim;
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a.get(i, k);
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                p[i * n + j] += aik * b.get(k, j);
            }
        }
    }
    p
}

fn mat_vec(m: &[f64], n: usize, x: &[f64], out: &mut [f64]) {
    for i in 0..n {
        let mut s = 0.0;
        let row = &m[i * n..(i + 1) * n];
        for j in 0..n {
            s += row[j] * x[j];
        }
        out[i] = s;
    }
}

fn mat_vec_t(m: &[f64], n: usize, x: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..n {
        let xi = x[i];
        if xi == 0.0 {
            continue;
        }
        let row = &m[i * n..(i + 1) * n];
        for j in 0..n {
            out[j] += row[j] * xi;
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Deterministic start vector that is unlikely to be orthogonal to the
/// dominant eigenvector.
fn seed_vector(n: usize, k: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let t = ((i + 1) * 2654435761usize.wrapping_add(k * 40503)) as f64;
            1.0 + 0.5 * (t % 97.0) / 97.0
        })
        .collect()
}

/// Dominant eigenpair of a general matrix with real nonnegative spectrum.
/// Returns (eigenvalue, right eigenvector) or None if it did not settle.
fn dominant_pair(m: &[f64], n: usize, max_iter: usize, tol: f64, seed: usize) -> Option<(f64, Vec<f64>)> {
    let mut v = seed_vector(n, seed);
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut mv = vec![0.0; n];
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        mat_vec(m, n, &v, &mut mv);
        let nmv = norm(&mv);
        if nmv <= tol {
            // v is (numerically) in the kernel: eigenvalue 0.
            return Some((0.0, v));
        }
        let rayleigh: f64 = v.iter().zip(&mv).map(|(a, b)| a * b).sum();
        let mut resid = 0.0f64;
        for i in 0..n {
            resid += (mv[i] - rayleigh * v[i]).powi(2);
        }
        lambda = rayleigh;
        for i in 0..n {
            v[i] = mv[i] / nmv;
        }
        if resid.sqrt() <= tol * lambda.abs().max(1.0) {
            return Some((lambda, v));
        }
    }
    let _ = lambda;
    None
}

/// Top-k eigenvalues of a square matrix with real nonnegative spectrum
/// (e.g. a product of PSD matrices), by power iteration with deflation.
pub fn top_k_eigenvalues(m: &[f64], dim: usize, k: usize, max_iter: usize, tol: f64) -> Result<Vec<f64>> {
    assert!(k <= dim, "k must not exceed the dimension");
    let mut work = m.to_vec();
    let mut values = Vec::with_capacity(k);
    let scale = work.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    let mut u = vec![0.0; dim];

    for step in 0..k {
        let rem_norm = work.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rem_norm <= tol * scale {
            values.resize(k, 0.0);
            break;
        }
        let (lambda, v) = match dominant_pair(&work, dim, max_iter, tol, step) {
            Some(p) => p,
            None => {
                return Err(Error::Convergence {
                    iterations: max_iter,
                    residual: rem_norm,
                    best: values,
                })
            }
        };
        values.push(lambda);
        if step + 1 == k {
            break;
        }
        if lambda == 0.0 {
            values.resize(k, 0.0);
            break;
        }
        // Two-sided deflation: remove lambda * v u^T / (u^T v) with u the
        // left eigenvector, so the remaining spectrum is untouched.
        let mut ut = vec![0.0; dim];
        let mut ok = false;
        let start = seed_vector(dim, step + 17);
        let nu = norm(&start);
        u.copy_from_slice(&start);
        u.iter_mut().for_each(|x| *x /= nu);
        for _ in 0..max_iter {
            mat_vec_t(&work, dim, &u, &mut ut);
            let nmu = norm(&ut);
            if nmu <= tol {
                break;
            }
            let mut resid = 0.0f64;
            let rl: f64 = u.iter().zip(&ut).map(|(a, b)| a * b).sum();
            for i in 0..dim {
                resid += (ut[i] - rl * u[i]).powi(2);
            }
            for i in 0..dim {
                u[i] = ut[i] / nmu;
            }
            if resid.sqrt() <= tol * rl.abs().max(1.0) {
                ok = true;
                break;
            }
        }
        let uv: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
        if !ok || uv.abs() < 1e-10 {
            return Err(Error::Convergence {
                iterations: max_iter,
                residual: uv.abs(),
                best: values,
            });
        }
        let f = lambda / uv;
        for i in 0..dim {
            for j in 0..dim {
                work[i * dim + j] -= f * v[i] * u[j];
            }
        }
    }
    values.truncate(k);
    values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(values)
}

fn sum_sqrt_clamped(values: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for &l in values {
        if l < PSD_FAIL_TOL {
            return Err(Error::NotPsd { eigenvalue: l });
        }
        total += l.max(0.0).sqrt();
    }
    Ok(total)
}

/// Deterministic total order on matrices: trace first, then entries.
fn canonical_le(a: &SymMatrix, b: &SymMatrix) -> bool {
    match a.trace().total_cmp(&b.trace()) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => {
            for (x, y) in a.entries.iter().zip(b.entries.iter()) {
                match x.total_cmp(y) {
                    std::cmp::Ordering::Less => return true,
                    std::cmp::Ordering::Greater => return false,
                    std::cmp::Ordering::Equal => {}
                }
            }
            true
        }
    }
}

/// tr((A^1/2 B A^1/2)^1/2) computed as the sum of square roots of the
/// eigenvalues of the (generally non-symmetric) product A*B.
///
/// The spectrum is obtained by power iteration with deflation; if deflation
/// stalls the computation falls back to the symmetrized form
/// sqrt(A) B sqrt(A) and a full Jacobi decomposition.
pub fn trace_sqrt_product(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch { left: a.dim, right: b.dim });
    }
    let n = a.dim;
    if n == 0 {
        return Ok(0.0);
    }
    // Closed forms for the dimensions the point-cloud pipelines live in.
    // dim 1: sqrt(ab). dim 2: the two eigenvalues of AB satisfy
    // l1+l2 = tr(AB), l1*l2 = det(A)det(B), so
    // (sqrt(l1)+sqrt(l2))^2 = tr(AB) + 2 sqrt(det(A)det(B)).
    if n == 1 {
        let p = a.get(0, 0) * b.get(0, 0);
        if p < PSD_FAIL_TOL * a.get(0, 0).abs().max(b.get(0, 0).abs()).max(1.0) {
            return Err(Error::NotPsd { eigenvalue: p });
        }
        return Ok(p.max(0.0).sqrt());
    }
    if n == 2 {
        let s = a.trace().max(b.trace()).max(1.0);
        let (a00, a01, a11) = (a.get(0, 0) / s, a.get(0, 1) / s, a.get(1, 1) / s);
        let (b00, b01, b11) = (b.get(0, 0) / s, b.get(0, 1) / s, b.get(1, 1) / s);
        let tr_ab = a00 * b00 + 2.0 * a01 * b01 + a11 * b11;
        let det = (a00 * a11 - a01 * a01) * (b00 * b11 - b01 * b01);
        if det < PSD_FAIL_TOL || tr_ab < PSD_FAIL_TOL {
            return Err(Error::NotPsd { eigenvalue: det.min(tr_ab) });
        }
        let sq = (tr_ab + 2.0 * det.max(0.0).sqrt()).max(0.0);
        return Ok(s * sq.sqrt());
    }
    // Canonical argument order: spec(AB) = spec(BA), so pick one order
    // deterministically to make the result bitwise symmetric in (A, B).
    let (a, b) = if canonical_le(a, b) { (a, b) } else { (b, a) };
    // Unit-scale so the clamp thresholds are meaningful for any magnitude.
    let s = a.trace().max(b.trace()).max(1.0);
    let sa = a.scaled(1.0 / s);
    let sb = b.scaled(1.0 / s);
    let p = product(&sa, &sb);
    match top_k_eigenvalues(&p, n, n, 1500, 1e-14) {
        Ok(mut values) => {
            // The largest eigenvalues come out of deflation most accurately;
            // pin the smallest to the exact trace identity sum = tr(AB).
            let tr_p: f64 = (0..n).map(|i| p[i * n + i]).sum();
            let head: f64 = values[..n - 1].iter().sum();
            values[n - 1] = tr_p - head;
            for v in values.iter_mut() {
                if *v > -CLAMP_TOL && *v < 0.0 {
                    *v = 0.0;
                }
            }
            Ok(s * sum_sqrt_clamped(&values)?)
        }
        Err(Error::Convergence { .. }) => {
            let ra = psd_sqrt(&sa)?;
            let rab = product(&ra, &sb);
            let n2 = n;
            let mut sym = vec![0.0; n2 * n2];
            for i in 0..n2 {
                for k in 0..n2 {
                    let x = rab[i * n2 + k];
                    if x == 0.0 {
                        continue;
                    }
                    for j in 0..n2 {
                        sym[i * n2 + j] += x * ra.get(k, j);
                    }
                }
            }
            // Round-off asymmetry only; force symmetric before decomposing.
            for i in 0..n2 {
                for j in (i + 1)..n2 {
                    let avg = 0.5 * (sym[i * n2 + j] + sym[j * n2 + i]);
                    sym[i * n2 + j] = avg;
                    sym[j * n2 + i] = avg;
                }
            }
            let m = SymMatrix { dim: n2, entries: sym };
            let eig = sym_eigen(&m)?;
            Ok(s * sum_sqrt_clamped(&eig.values)?)
        }
        Err(e) => Err(e),
    }
}

/// Bures distance between PSD matrices.
///
/// With `top_k` given, the cross term is approximated by the `top_k`
/// largest eigenvalues of A*B obtained by power iteration.
pub fn bures_distance(a: &SymMatrix, b: &SymMatrix, top_k: Option<usize>) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch { left: a.dim, right: b.dim });
    }
    let cross = match top_k {
        None => trace_sqrt_product(a, b)?,
        Some(k) => {
            assert!(k >= 1 && k <= a.dim, "top_k must be in 1..=dim");
            let s = a.trace().max(b.trace()).max(1.0);
            let sa = a.scaled(1.0 / s);
            let sb = b.scaled(1.0 / s);
            let p = product(&sa, &sb);
            let mut values = top_k_eigenvalues(&p, a.dim, k, 500, 1e-12)?;
            for v in values.iter_mut() {
                if *v > -CLAMP_TOL && *v < 0.0 {
                    *v = 0.0;
                }
            }
            s * sum_sqrt_clamped(&values)?
        }
    };
    Ok((a.trace() + b.trace() - 2.0 * cross).max(0.0).sqrt())
}
