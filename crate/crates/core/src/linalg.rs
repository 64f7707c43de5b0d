//! Sparse assembly helpers, direct factorization, smallest singular values by
//! inverse subspace iteration, and small dense Hermitian routines.

use faer::linalg::solvers::{Solve, SolveCore};
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::C64;

pub type SpMat = SparseColMat<usize, C64>;

/// Coordinate-format accumulator; duplicates are summed on build.
#[derive(Debug, Clone, Default)]
pub struct Triplets {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, C64)>,
}

impl Triplets {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: C64) {
        self.entries.push((i, j, v));
    }

    /// Appends `s · other`.
    pub fn add_scaled(&mut self, other: &Triplets, s: C64) {
        if s == C64::new(0.0, 0.0) {
            return;
        }
        self.entries
            .extend(other.entries.iter().map(|&(i, j, v)| (i, j, s * v)));
    }

    pub fn build(&self) -> Result<SpMat> {
        let t: Vec<Triplet<usize, usize, C64>> = self
            .entries
            .iter()
            .map(|&(i, j, v)| Triplet::new(i, j, v))
            .collect();
        SparseColMat::try_new_from_triplets(self.rows, self.cols, &t)
            .map_err(|e| Error::AssemblyFailure(format!("sparse matrix construction: {e:?}")))
    }

    /// y = A x without building the matrix.
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.rows];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }
}

pub fn matvec(a: &SpMat, x: &[C64]) -> Vec<C64> {
    let mut y = vec![C64::new(0.0, 0.0); a.nrows()];
    let (cp, ri, vals) = (a.col_ptr(), a.row_idx(), a.val());
    for j in 0..a.ncols() {
        let xj = x[j];
        for p in cp[j]..cp[j + 1] {
            y[ri[p]] += vals[p] * xj;
        }
    }
    y
}

/// y = Aᴴ x.
pub fn matvec_adjoint(a: &SpMat, x: &[C64]) -> Vec<C64> {
    let (cp, ri, vals) = (a.col_ptr(), a.row_idx(), a.val());
    (0..a.ncols())
        .map(|j| (cp[j]..cp[j + 1]).map(|p| vals[p].conj() * x[ri[p]]).sum())
        .collect()
}

pub fn norm2(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// xᴴ y.
pub fn dot(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

fn to_col(x: &[C64]) -> Mat<C64> {
    Mat::from_fn(x.len(), 1, |i, _| x[i])
}

fn from_col(m: &Mat<C64>) -> Vec<C64> {
    (0..m.nrows()).map(|i| m[(i, 0)]).collect()
}

/// Sparse LU with fill-reducing ordering.
pub struct Factorization {
    pub matrix: SpMat,
    lu: Lu<usize, C64>,
}

impl Factorization {
    pub fn new(matrix: SpMat) -> Result<Self> {
        let lu = matrix.sp_lu().map_err(|e| Error::SingularSystem {
            sigma_rel: 0.0,
            detail: format!("LU failed: {e:?}"),
        })?;
        Ok(Self { matrix, lu })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        from_col(&self.lu.solve(&to_col(b)))
    }

    /// Solves Aᴴ x = b.
    pub fn solve_adjoint(&self, b: &[C64]) -> Vec<C64> {
        let mut y = to_col(b);
        self.lu
            .solve_transpose_in_place_with_conj(Conj::Yes, y.as_mut());
        from_col(&y)
    }

    /// |A x − b| / |b|.
    pub fn relative_residual(&self, x: &[C64], b: &[C64]) -> f64 {
        let ax = matvec(&self.matrix, x);
        let r: Vec<C64> = ax.iter().zip(b).map(|(a, b)| a - b).collect();
        norm2(&r) / norm2(b).max(f64::MIN_POSITIVE)
    }
}

/// Result of inverse subspace iteration on the diagonally scaled matrix
/// S⁻¹AS⁻¹.
#[derive(Debug, Clone)]
pub struct SingularEstimate {
    /// Smallest singular values, ascending.
    pub sigma: Vec<f64>,
    /// Upper bound of the largest singular value, sqrt(‖A‖₁‖A‖∞).
    pub sigma_max_bound: f64,
    /// Right singular vectors in unscaled coordinates (x = S⁻¹ y), unit S-norm.
    pub vectors: Vec<Vec<C64>>,
}

impl SingularEstimate {
    pub fn relative(&self) -> f64 {
        self.sigma[0] / self.sigma_max_bound
    }
}

/// sqrt(‖B‖₁‖B‖∞) for B = S⁻¹AS⁻¹.
pub fn scaled_norm_bound(a: &SpMat, scale: &[f64]) -> f64 {
    let (cp, ri, vals) = (a.col_ptr(), a.row_idx(), a.val());
    let mut rows = vec![0.0; a.nrows()];
    let mut max_col: f64 = 0.0;
    for j in 0..a.ncols() {
        let mut c = 0.0;
        for p in cp[j]..cp[j + 1] {
            let v = vals[p].norm() / (scale[ri[p]] * scale[j]);
            c += v;
            rows[ri[p]] += v;
        }
        max_col = max_col.max(c);
    }
    (max_col * rows.iter().copied().fold(0.0, f64::max)).sqrt()
}

/// Smallest `count` singular values of S⁻¹AS⁻¹ by inverse subspace iteration
/// on (BᴴB)⁻¹ with Rayleigh–Ritz, using the existing factorization of A.
pub fn smallest_singulars(
    fact: &Factorization,
    scale: &[f64],
    count: usize,
    iterations: usize,
    seed: u64,
) -> SingularEstimate {
    let n = fact.dim();
    let p = count.min(n).max(1);
    let guard = if p < n { (p + 2).min(n) } else { p };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<Vec<C64>> = (0..guard)
        .map(|_| {
            (0..n)
                .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect()
        })
        .collect();
    orthonormalize(&mut x);
    let apply_inv = |y: &[C64]| -> Vec<C64> {
        // B⁻¹B⁻ᴴ y with B⁻¹ = S A⁻¹ S and B⁻ᴴ = S A⁻ᴴ S.
        let t: Vec<C64> = y.iter().zip(scale).map(|(v, s)| v * s).collect();
        let t = fact.solve_adjoint(&t);
        let t: Vec<C64> = t.iter().zip(scale).map(|(v, s)| v * s * s).collect();
        let t = fact.solve(&t);
        t.iter().zip(scale).map(|(v, s)| v * s).collect()
    };
    for _ in 0..iterations {
        x = x.iter().map(|v| apply_inv(v)).collect();
        orthonormalize(&mut x);
    }
    // Rayleigh–Ritz for BᴴB on span(x).
    let bx: Vec<Vec<C64>> = x
        .iter()
        .map(|v| {
            let t: Vec<C64> = v.iter().zip(scale).map(|(a, s)| a / s).collect();
            let t = matvec(&fact.matrix, &t);
            t.iter().zip(scale).map(|(a, s)| a / s).collect()
        })
        .collect();
    let g: Vec<Vec<C64>> = (0..guard)
        .map(|i| (0..guard).map(|j| dot(&bx[i], &bx[j])).collect())
        .collect();
    let (vals, vecs) = hermitian_eigen(&g);
    let mut sigma = Vec::new();
    let mut vectors = Vec::new();
    for (idx, lam) in vals.iter().enumerate().take(p) {
        sigma.push(lam.max(0.0).sqrt());
        let mut y = vec![C64::new(0.0, 0.0); n];
        for (c, xv) in vecs[idx].iter().zip(&x) {
            for (yi, xi) in y.iter_mut().zip(xv) {
                *yi += c * xi;
            }
        }
        vectors.push(y.iter().zip(scale).map(|(a, s)| a / s).collect());
    }
    SingularEstimate {
        sigma,
        sigma_max_bound: scaled_norm_bound(&fact.matrix, scale),
        vectors,
    }
}

/// Modified Gram–Schmidt, twice.
pub fn orthonormalize(x: &mut [Vec<C64>]) {
    for _ in 0..2 {
        for i in 0..x.len() {
            for j in 0..i {
                let c = dot(&x[j], &x[i]);
                let (a, b) = x.split_at_mut(i);
                for (bi, aj) in b[0].iter_mut().zip(&a[j]) {
                    *bi -= c * aj;
                }
            }
            let nrm = norm2(&x[i]);
            if nrm > 0.0 {
                for v in x[i].iter_mut() {
                    *v /= nrm;
                }
            }
        }
    }
}

pub type Dense = Vec<Vec<C64>>;

fn to_mat(a: &Dense) -> Mat<C64> {
    Mat::from_fn(a.len(), a.first().map_or(0, |r| r.len()), |i, j| a[i][j])
}

/// Eigenvalues (ascending) and eigenvectors (as columns, returned as rows of
/// the output list) of a Hermitian matrix.
pub fn hermitian_eigen(a: &Dense) -> (Vec<f64>, Vec<Vec<C64>>) {
    let n = a.len();
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    // Symmetrize to remove round-off asymmetry.
    let m = Mat::from_fn(n, n, |i, j| 0.5 * (a[i][j] + a[j][i].conj()));
    let e = m
        .self_adjoint_eigen(Side::Lower)
        .expect("hermitian eigensolver");
    let s = e.S().column_vector();
    let u = e.U();
    let vals = (0..n).map(|i| s[i].re).collect();
    let vecs = (0..n)
        .map(|j| (0..n).map(|i| u[(i, j)]).collect())
        .collect();
    (vals, vecs)
}

/// Solves B x = λ G x for Hermitian B and Hermitian positive definite G.
/// Returns eigenvalues ascending and G-orthonormal eigenvectors.
pub fn generalized_hermitian(b: &Dense, g: &Dense) -> Result<(Vec<f64>, Vec<Vec<C64>>)> {
    let n = g.len();
    let (gv, gu) = hermitian_eigen(g);
    let gmax = gv.iter().copied().fold(0.0, f64::max);
    if gv.iter().any(|v| *v <= 1e-14 * gmax) {
        return Err(Error::InvalidParameter(
            "Gram matrix is not positive definite".into(),
        ));
    }
    // W = G^{-1/2}
    let w: Dense = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    (0..n)
                        .map(|l| gu[l][i] * gu[l][j].conj() / gv[l].sqrt())
                        .sum()
                })
                .collect()
        })
        .collect();
    let c = mat_mul(&mat_mul(&w, b), &w);
    let (vals, vecs) = hermitian_eigen(&c);
    let out = vecs
        .iter()
        .map(|y| {
            (0..n)
                .map(|i| (0..n).map(|j| w[i][j] * y[j]).sum())
                .collect()
        })
        .collect();
    Ok((vals, out))
}

pub fn mat_mul(a: &Dense, b: &Dense) -> Dense {
    let (n, m, p) = (a.len(), b.len(), b.first().map_or(0, |r| r.len()));
    (0..n)
        .map(|i| {
            (0..p)
                .map(|j| (0..m).map(|l| a[i][l] * b[l][j]).sum())
                .collect()
        })
        .collect()
}

/// Solves a small dense system by partial-pivoting LU.
pub fn dense_solve(a: &Dense, b: &[C64]) -> Vec<C64> {
    let lu = to_mat(a).partial_piv_lu();
    from_col(&lu.solve(&to_col(b)))
}

/// 2-norm condition number of a small dense matrix.
pub fn condition_number(a: &Dense) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    let s = to_mat(a).singular_values().expect("svd");
    let (mx, mn) = (
        s.iter().copied().fold(0.0, f64::max),
        s.iter().copied().fold(f64::INFINITY, f64::min),
    );
    if mn == 0.0 {
        f64::INFINITY
    } else {
        mx / mn
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize, shift: f64) -> Triplets {
        let mut t = Triplets::new(n, n);
        for i in 0..n {
            t.push(i, i, C64::new(2.0 - shift, 0.1));
            if i + 1 < n {
                t.push(i, i + 1, C64::new(-1.0, 0.0));
                t.push(i + 1, i, C64::new(-1.0, 0.0));
            }
        }
        t
    }

    #[test]
    fn solve_and_adjoint() {
        let t = tridiag(30, 0.3);
        let f = Factorization::new(t.build().unwrap()).unwrap();
        let b: Vec<C64> = (0..30).map(|i| C64::new(i as f64, 1.0)).collect();
        let x = f.solve(&b);
        assert!(f.relative_residual(&x, &b) < 1e-13);
        let y = f.solve_adjoint(&b);
        let r: Vec<C64> = matvec_adjoint(&f.matrix, &y)
            .iter()
            .zip(&b)
            .map(|(a, b)| a - b)
            .collect();
        assert!(norm2(&r) < 1e-12 * norm2(&b));
        assert_eq!(t.apply(&x), matvec(&f.matrix, &x));
    }

    #[test]
    fn smallest_singular_matches_dense_svd() {
        let n = 40;
        let t = tridiag(n, 1.95);
        let a = t.build().unwrap();
        let f = Factorization::new(a.clone()).unwrap();
        let scale = vec![1.0; n];
        let est = smallest_singulars(&f, &scale, 2, 30, 7);
        let dense: Dense = (0..n)
            .map(|i| {
                let mut e = vec![C64::new(0.0, 0.0); n];
                e[i] = C64::new(1.0, 0.0);
                matvec(&a, &e)
            })
            .collect();
        // rows of `dense` are columns of A; singular values are the same.
        let s = to_mat(&dense).singular_values().unwrap();
        let mut s: Vec<f64> = s.into_iter().collect();
        s.sort_by(f64::total_cmp);
        assert!(
            (est.sigma[0] - s[0]).abs() < 1e-10 * s[0].max(1e-3),
            "{} vs {}",
            est.sigma[0],
            s[0]
        );
        assert!(
            (est.sigma[1] - s[1]).abs() < 1e-8,
            "{} vs {}",
            est.sigma[1],
            s[1]
        );
        assert!(est.sigma_max_bound >= s[n - 1]);
    }

    #[test]
    fn generalized_problem() {
        let b: Dense = vec![
            vec![C64::new(2.0, 0.0), C64::new(0.0, 1.0)],
            vec![C64::new(0.0, -1.0), C64::new(-1.0, 0.0)],
        ];
        let g: Dense = vec![
            vec![C64::new(2.0, 0.0), C64::new(0.5, 0.0)],
            vec![C64::new(0.5, 0.0), C64::new(1.0, 0.0)],
        ];
        let (vals, vecs) = generalized_hermitian(&b, &g).unwrap();
        for (l, x) in vals.iter().zip(&vecs) {
            let bx: Vec<C64> = (0..2)
                .map(|i| (0..2).map(|j| b[i][j] * x[j]).sum())
                .collect();
            let gx: Vec<C64> = (0..2)
                .map(|i| (0..2).map(|j| g[i][j] * x[j]).sum())
                .collect();
            for i in 0..2 {
                assert!((bx[i] - gx[i] * l).norm() < 1e-12);
            }
            assert!((dot(x, &gx).re - 1.0).abs() < 1e-12);
        }
        let c = condition_number(&g);
        assert!(c > 1.0 && c.is_finite());
        let x = dense_solve(&g, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        assert!((g[0][0] * x[0] + g[0][1] * x[1] - 1.0).norm() < 1e-14);
    }
}
