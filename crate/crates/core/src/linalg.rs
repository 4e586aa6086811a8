//! Dense complex linear algebra used throughout the crate.
//!
//! Thin wrappers over `nalgebra` that fix the conventions the rest of the
//! code relies on: Hermitian eigenvalues sorted ascending, singular values
//! sorted descending, and condition-number guarded solves.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

/// Condition number beyond which guarded inversions refuse to proceed.
pub const COND_LIMIT: f64 = 1e12;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(r: usize, c: usize) -> CMat {
    CMat::zeros(r, c)
}

/// Real matrix from row-major data.
pub fn from_real_rows(rows: usize, cols: usize, data: &[f64]) -> CMat {
    assert_eq!(data.len(), rows * cols);
    CMat::from_fn(rows, cols, |i, j| cr(data[i * cols + j]))
}

pub fn diag(values: &[C64]) -> CMat {
    let n = values.len();
    CMat::from_fn(n, n, |i, j| if i == j { values[i] } else { C64::default() })
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * cr(0.5)
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermEig {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl HermEig {
    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }
}

pub fn herm_eig(m: &CMat) -> HermEig {
    let n = m.nrows();
    if n == 0 {
        return HermEig {
            values: vec![],
            vectors: zeros(0, 0),
        };
    }
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, col| eig.eigenvectors[(r, order[col])]);
    HermEig { values, vectors }
}

/// Apply `f` to the eigenvalues of a Hermitian matrix.
pub fn herm_fn(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let e = herm_eig(m);
    let n = m.nrows();
    let mut scaled = e.vectors.clone();
    for j in 0..n {
        let s = cr(f(e.values[j]));
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    scaled * e.vectors.adjoint()
}

/// Principal square root of a Hermitian PSD matrix. Eigenvalues in
/// `[-neg_tol, 0)` are clamped to zero; anything more negative is an error.
pub fn herm_sqrt_psd(m: &CMat, neg_tol: f64) -> Result<CMat> {
    let e = herm_eig(m);
    if e.min() < -neg_tol {
        return Err(Error::Indefinite(e.min()));
    }
    Ok(herm_fn(m, |x| x.max(0.0).sqrt()))
}

/// Factor `L` with `Q = L^H L` for Hermitian PSD `Q` (eigen-based, so it is
/// defined for semidefinite `Q` as well).
pub fn eigen_factor(q: &CMat) -> CMat {
    let e = herm_eig(q);
    let n = q.nrows();
    let mut l = e.vectors.adjoint();
    for i in 0..n {
        let s = cr(e.values[i].max(0.0).sqrt());
        for j in 0..n {
            l[(i, j)] *= s;
        }
    }
    l
}

pub fn eigenvalues(m: &CMat) -> Vec<C64> {
    let n = m.nrows();
    if n == 0 {
        return vec![];
    }
    if n == 1 {
        return vec![m[(0, 0)]];
    }
    let schur = Schur::try_new(m.clone(), 1e-15, 10_000)
        .or_else(|| Schur::try_new(m.clone(), 1e-12, 100_000))
        .expect("complex Schur iteration did not converge");
    let (_, t) = schur.unpack();
    (0..n).map(|i| t[(i, i)]).collect()
}

pub fn spectral_radius(m: &CMat) -> f64 {
    eigenvalues(m).iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Singular values, descending.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return vec![];
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn sigma_max(m: &CMat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn condition_number(m: &CMat) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

/// Solve `a x = b`, refusing when `a` is numerically singular. Returns the
/// observed condition number on failure.
pub fn solve_guarded(a: &CMat, b: &CMat) -> std::result::Result<CMat, f64> {
    let cond = condition_number(a);
    if !cond.is_finite() || cond > COND_LIMIT {
        return Err(cond);
    }
    a.clone().lu().solve(b).ok_or(f64::INFINITY)
}

/// Plain LU solve for matrices known to be well conditioned.
pub fn solve(a: &CMat, b: &CMat) -> Option<CMat> {
    a.clone().lu().solve(b)
}

/// Orthonormal basis (columns) for the range of `m`, rank decided relative
/// to the largest singular value.
pub fn range_basis(m: &CMat, rtol: f64) -> CMat {
    if m.ncols() == 0 || m.nrows() == 0 {
        return zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().fold(0.0_f64, |a, &b| a.max(b));
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| smax > 0.0 && svd.singular_values[i] > rtol * smax)
        .collect();
    CMat::from_fn(m.nrows(), keep.len(), |r, j| u[(r, keep[j])])
}

/// Upper-triangular Schur form `m = u t u^H`.
#[derive(Debug, Clone)]
pub struct SchurForm {
    pub u: CMat,
    pub t: CMat,
}

impl SchurForm {
    pub fn new(m: &CMat) -> SchurForm {
        let n = m.nrows();
        if n == 0 {
            return SchurForm {
                u: zeros(0, 0),
                t: zeros(0, 0),
            };
        }
        let schur = Schur::try_new(m.clone(), 1e-15, 10_000)
            .or_else(|| Schur::try_new(m.clone(), 1e-12, 100_000))
            .expect("complex Schur iteration did not converge");
        let (u, mut t) = schur.unpack();
        for j in 0..n {
            for i in (j + 1)..n {
                t[(i, j)] = C64::default();
            }
        }
        SchurForm { u, t }
    }

    /// Solve `(I - lambda t) y = rhs` by back substitution.
    pub fn shifted_solve(&self, lambda: C64, rhs: &CMat) -> CMat {
        let n = self.t.nrows();
        let mut y = rhs.clone();
        for col in 0..rhs.ncols() {
            for i in (0..n).rev() {
                let mut acc = y[(i, col)];
                for k in (i + 1)..n {
                    acc += lambda * self.t[(i, k)] * y[(k, col)];
                }
                y[(i, col)] = acc / (C64::new(1.0, 0.0) - lambda * self.t[(i, i)]);
            }
        }
        y
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Grid point `exp(2 pi i j / n)`.
pub fn circle_point(j: usize, n: usize) -> (f64, C64) {
    let t = 2.0 * std::f64::consts::PI * (j as f64) / (n as f64);
    (t, C64::from_polar(1.0, t))
}
