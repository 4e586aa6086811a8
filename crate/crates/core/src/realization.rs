//! State-space realizations of strictly co-analytic rational symbols
//! `G₋(λ) = C (λI − A)⁻¹ B` and the Stein equations for their Gramians.
//!
//! The controllability Gramian `P` solves `P = A P A* + B B*` and the
//! observability Gramian `Q` solves `Q = A* Q A + C* C`. In state
//! coordinates the range of the Hankel operator is `Cⁿ` with inner product
//! `⟨x, y⟩ = y* Q x`; everything downstream either works in that metric or
//! in the Euclidean coordinates `ξ = L x` where `Q = L* L`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json::{matrix_from_json, matrix_to_json, MatrixJson};
use crate::linalg::{self, cr, eye, max_abs, CMat, C64};

/// Default absolute (max-abs) tolerance on Stein residuals.
pub const STEIN_TOL: f64 = 1e-10;

/// Largest state dimension solved through the vectorized Kronecker system.
/// Bigger problems use the doubling iteration.
pub const KRONECKER_MAX_N: usize = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RealizationJson", into = "RealizationJson")]
pub struct Realization {
    a: CMat,
    b: CMat,
    c: CMat,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RealizationJson {
    #[serde(rename = "A")]
    a: MatrixJson,
    #[serde(rename = "B")]
    b: MatrixJson,
    #[serde(rename = "C")]
    c: MatrixJson,
}

impl TryFrom<RealizationJson> for Realization {
    type Error = Error;

    fn try_from(j: RealizationJson) -> Result<Self> {
        Realization::new(
            matrix_from_json("A", &j.a)?,
            matrix_from_json("B", &j.b)?,
            matrix_from_json("C", &j.c)?,
        )
    }
}

impl From<Realization> for RealizationJson {
    fn from(r: Realization) -> Self {
        RealizationJson {
            a: matrix_to_json(&r.a),
            b: matrix_to_json(&r.b),
            c: matrix_to_json(&r.c),
        }
    }
}

impl Realization {
    /// Validates shapes and `r_spec(A) < 1`.
    pub fn new(a: CMat, b: CMat, c: CMat) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::Dimension(format!("A must be square and non-empty, got {:?}", a.shape())));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(Error::Dimension(format!("B must be {n}×p with p ≥ 1, got {:?}", b.shape())));
        }
        if c.ncols() != n || c.nrows() == 0 {
            return Err(Error::Dimension(format!("C must be q×{n} with q ≥ 1, got {:?}", c.shape())));
        }
        let radius = linalg::spectral_radius(&a);
        if radius >= 1.0 {
            return Err(Error::NotStable { radius });
        }
        Ok(Realization { a, b, c })
    }

    /// Real-valued realization from row-major slices.
    pub fn from_real(n: usize, p: usize, q: usize, a: &[f64], b: &[f64], c: &[f64]) -> Result<Self> {
        if a.len() != n * n || b.len() != n * p || c.len() != q * n {
            return Err(Error::Dimension("slice lengths do not match n, p, q".into()));
        }
        Realization::new(
            linalg::from_real_rows(n, n, a),
            linalg::from_real_rows(n, p, b),
            linalg::from_real_rows(q, n, c),
        )
    }

    pub fn a(&self) -> &CMat {
        &self.a
    }

    pub fn b(&self) -> &CMat {
        &self.b
    }

    pub fn c(&self) -> &CMat {
        &self.c
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    /// Number of input channels `p`.
    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    /// Number of output channels `q`.
    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn spectral_radius(&self) -> f64 {
        linalg::spectral_radius(&self.a)
    }

    /// `C (λI − A)⁻¹ B`.
    pub fn eval_coanalytic(&self, lambda: C64) -> Result<CMat> {
        let n = self.states();
        let resolvent = eye(n) * lambda - &self.a;
        let x = linalg::solve_guarded(&resolvent, &self.b)
            .map_err(|cond| Error::SingularResolvent { lambda, cond })?;
        Ok(&self.c * x)
    }

    /// Markov parameter `C A^j B`, the Fourier coefficient of `z^{-(j+1)}`.
    pub fn markov(&self, j: usize) -> CMat {
        let mut x = self.b.clone();
        for _ in 0..j {
            x = &self.a * x;
        }
        &self.c * x
    }

    /// Block-diagonal direct sum `G₁ ⊕ G₂`.
    pub fn direct_sum(&self, other: &Realization) -> Realization {
        let block = |x: &CMat, y: &CMat| {
            let mut out = CMat::zeros(x.nrows() + y.nrows(), x.ncols() + y.ncols());
            out.view_mut((0, 0), x.shape()).copy_from(x);
            out.view_mut(x.shape(), y.shape()).copy_from(y);
            out
        };
        Realization {
            a: block(&self.a, &other.a),
            b: block(&self.b, &other.b),
            c: block(&self.c, &other.c),
        }
    }
}

/// Solve `X = A X A* + M` for stable `A`. The result is symmetrized when `M`
/// is Hermitian.
pub fn solve_stein(a: &CMat, m: &CMat) -> Result<CMat> {
    let n = a.nrows();
    if a.ncols() != n || m.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "Stein equation needs square A and M of equal size, got {:?} and {:?}",
            a.shape(),
            m.shape()
        )));
    }
    let radius = linalg::spectral_radius(a);
    if radius >= 1.0 {
        return Err(Error::NotStable { radius });
    }
    let x = if n <= KRONECKER_MAX_N {
        stein_kronecker(a, m)?
    } else {
        stein_doubling(a, m)?
    };
    let hermitian_rhs = max_abs(&(m - m.adjoint())) <= 1e-14 * max_abs(m).max(1.0);
    Ok(if hermitian_rhs { linalg::hermitian_part(&x) } else { x })
}

// Column-major vec: vec(A X A*) = (conj(A) ⊗ A) vec(X).
fn stein_kronecker(a: &CMat, m: &CMat) -> Result<CMat> {
    let n = a.nrows();
    let op = eye(n * n) - linalg::kron(&a.map(|z| z.conj()), a);
    let rhs = CMat::from_column_slice(n * n, 1, m.as_slice());
    let v = linalg::solve_guarded(&op, &rhs)
        .map_err(|cond| Error::Stein(format!("Kronecker system singular (condition {cond:.3e})")))?;
    Ok(CMat::from_column_slice(n, n, v.as_slice()))
}

// X_{k+1} = X_k + A_k X_k A_k*, A_{k+1} = A_k².
fn stein_doubling(a: &CMat, m: &CMat) -> Result<CMat> {
    let mut x = m.clone();
    let mut ak = a.clone();
    for _ in 0..64 {
        let inc = &ak * &x * ak.adjoint();
        x += &inc;
        ak = &ak * &ak;
        if max_abs(&ak) < 1e-18 || max_abs(&inc) <= 1e-17 * max_abs(&x) {
            return Ok(x);
        }
    }
    Err(Error::Stein("doubling iteration did not converge".into()))
}

/// Max-abs residual of `X = A X A* + M`.
pub fn stein_residual(a: &CMat, m: &CMat, x: &CMat) -> f64 {
    max_abs(&(x - a * x * a.adjoint() - m))
}

/// Controllability and observability Gramians plus the metric factor.
#[derive(Debug, Clone)]
pub struct GramianPair {
    /// `P = A P A* + B B*`.
    pub p: CMat,
    /// `Q = A* Q A + C* C`.
    pub q: CMat,
    pub residual_p: f64,
    pub residual_q: f64,
    /// `Q = L* L`.
    pub l: CMat,
    pub controllable: bool,
    pub observable: bool,
}

impl GramianPair {
    pub fn is_minimal(&self) -> bool {
        self.controllable && self.observable
    }

    /// Solve `Q x = y`.
    pub fn q_solve(&self, y: &CMat) -> Result<CMat> {
        linalg::solve_guarded(&self.q, y)
            .map_err(|cond| Error::NonMinimal(format!("observability Gramian singular (condition {cond:.3e})")))
    }
}

/// Relative rank tolerance used for the minimality flags.
pub const MINIMALITY_RTOL: f64 = 1e-12;

pub fn gramians(r: &Realization) -> Result<GramianPair> {
    gramians_with_tol(r, STEIN_TOL)
}

pub fn gramians_with_tol(r: &Realization, tol: f64) -> Result<GramianPair> {
    let a = r.a();
    let bb = r.b() * r.b().adjoint();
    let cc = r.c().adjoint() * r.c();
    let p = solve_stein(a, &bb)?;
    let ah = a.adjoint();
    let q = solve_stein(&ah, &cc)?;
    let residual_p = stein_residual(a, &bb, &p);
    let residual_q = stein_residual(&ah, &cc, &q);
    if residual_p > tol || residual_q > tol {
        return Err(Error::Stein(format!(
            "residuals {residual_p:.3e} / {residual_q:.3e} exceed tolerance {tol:.1e}"
        )));
    }
    let l = linalg::eigen_factor(&q);
    let controllable = full_rank(&p, MINIMALITY_RTOL);
    let observable = full_rank(&q, MINIMALITY_RTOL);
    Ok(GramianPair {
        p,
        q,
        residual_p,
        residual_q,
        l,
        controllable,
        observable,
    })
}

fn full_rank(m: &CMat, rtol: f64) -> bool {
    let s = linalg::singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) => hi > 0.0 && lo > rtol * hi,
        _ => false,
    }
}

/// Minimality via Gramian ranks: `σ_min > rtol·σ_max` for both `P` and `Q`.
pub fn check_minimal(_r: &Realization, gp: &GramianPair, rtol: f64) -> bool {
    full_rank(&gp.p, rtol) && full_rank(&gp.q, rtol)
}

/// Rescale `A` so that its spectral radius equals `target` (used by tests and
/// random instance generators).
pub fn rescale_to_radius(a: &CMat, target: f64) -> CMat {
    let r = linalg::spectral_radius(a);
    if r == 0.0 {
        a.clone()
    } else {
        a * cr(target / r)
    }
}
