//! The ladder `M_k = H²_p ⊖ z^k q H²_p` for a scalar polynomial `q`.
//!
//! Every element of `M_k` (per channel) is `N(z)/d(z)` with `deg N < k + deg q`
//! and `d(z) = Π (1 − conj(a_i) z)` over the roots `a_i` of `q`. The basis is
//! the monomials `1, z, …, z^{k−1}` followed by `z^k φ_i`, where `φ_i` are the
//! Takenaka–Malmquist functions of the roots. All basis data are kept as
//! exact polynomial coefficients over the shared denominator, so inner
//! products, shifts, point values and `f(A)` are computed without sampling.
//!
//! Channel ordering: basis index `i·p + s` is scalar function `i` in channel `s`.

use crate::error::{Error, Result};
use crate::hankel::validate_roots;
use crate::linalg::{self, cr, eye, CMat, C64};
use crate::realization::{solve_stein, GramianPair, Realization};

/// Default cap on `m = p·(k + deg q)`.
pub const MAX_BASIS_DIM: usize = 512;

/// Polynomial helpers on ascending coefficient vectors.
pub mod poly {
    use super::*;

    pub fn mul(a: &[C64], b: &[C64]) -> Vec<C64> {
        if a.is_empty() || b.is_empty() {
            return vec![];
        }
        let mut out = vec![C64::default(); a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        out
    }

    pub fn eval(p: &[C64], z: C64) -> C64 {
        p.iter().rev().fold(C64::default(), |acc, &c| acc * z + c)
    }

    pub fn eval_matrix(p: &[C64], a: &CMat) -> CMat {
        let n = a.nrows();
        p.iter().rev().fold(CMat::zeros(n, n), |acc, &c| acc * a + eye(n) * c)
    }

    /// `Π (1 − conj(a_i) z)`.
    pub fn reflected(roots: &[C64]) -> Vec<C64> {
        roots.iter().fold(vec![cr(1.0)], |acc, a| mul(&acc, &[cr(1.0), -a.conj()]))
    }

    /// `Π (z − a_i)`.
    pub fn monic(roots: &[C64]) -> Vec<C64> {
        roots.iter().fold(vec![cr(1.0)], |acc, &a| mul(&acc, &[-a, cr(1.0)]))
    }

    /// First `len` Taylor coefficients of `num / den` (`den[0] ≠ 0`).
    pub fn taylor(num: &[C64], den: &[C64], len: usize) -> Vec<C64> {
        let mut out = vec![C64::default(); len];
        for j in 0..len {
            let mut acc = num.get(j).copied().unwrap_or_default();
            for l in 1..den.len().min(j + 1) {
                acc -= den[l] * out[j - l];
            }
            out[j] = acc / den[0];
        }
        out
    }
}

/// `z^shift · numerator(z) / denominator(z)` with the denominator's roots
/// outside the closed unit disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalFunction {
    pub numerator: Vec<C64>,
    pub denominator: Vec<C64>,
    pub shift: usize,
}

impl RationalFunction {
    pub fn eval(&self, z: C64) -> C64 {
        z.powu(self.shift as u32) * poly::eval(&self.numerator, z) / poly::eval(&self.denominator, z)
    }

    pub fn taylor(&self, len: usize) -> Vec<C64> {
        let mut out = vec![C64::default(); len];
        if self.shift < len {
            let t = poly::taylor(&self.numerator, &self.denominator, len - self.shift);
            out[self.shift..].copy_from_slice(&t);
        }
        out
    }

    /// `f(A) = Σ f_j A^j`, evaluated as `A^shift · N(A) · d(A)⁻¹`.
    pub fn eval_matrix(&self, a: &CMat) -> CMat {
        let n = a.nrows();
        let den = poly::eval_matrix(&self.denominator, a);
        let num = poly::eval_matrix(&self.numerator, a);
        let mut shifted = eye(n);
        for _ in 0..self.shift {
            shifted = &shifted * a;
        }
        let inv = linalg::solve(&den, &eye(n)).expect("denominator roots lie outside the closed disk");
        shifted * num * inv
    }
}

/// Orthonormal basis of `M_k ⊗ Cᵖ` and its compressions.
#[derive(Debug, Clone)]
pub struct LadderBasis {
    pub q_roots: Vec<C64>,
    pub k: usize,
    pub p: usize,
    /// Shared denominator `d(z)`.
    pub denominator: Vec<C64>,
    /// The `k + deg q` scalar basis functions.
    pub functions: Vec<RationalFunction>,
    /// Column `i`: coefficients of function `i` in `{z^t / d(z)}`.
    pub coeffs: CMat,
    /// Scalar compressions (size `k + deg q`).
    pub qm_scalar: CMat,
    pub emat_scalar: CMat,
    /// Compression of `P_M S` to `M` (`m × m`).
    pub qm: CMat,
    /// `S*|_M = Qm*`.
    pub sstar: CMat,
    /// Coordinates of the constants `E` (`m × p`).
    pub emat: CMat,
    /// `Qm* Qm`. For `k ≥ 1` this is the orthogonal projection onto
    /// `S* M = M_{k−1}`.
    pub rm: CMat,
}

impl LadderBasis {
    pub fn scalar_dim(&self) -> usize {
        self.functions.len()
    }

    pub fn dim(&self) -> usize {
        self.functions.len() * self.p
    }

    /// Scalar basis values at `z`.
    pub fn scalar_values(&self, z: C64) -> Vec<C64> {
        let d = poly::eval(&self.denominator, z);
        let mut zt = cr(1.0);
        let mut row = vec![C64::default(); self.scalar_dim()];
        for t in 0..self.coeffs.nrows() {
            for (i, v) in row.iter_mut().enumerate() {
                *v += self.coeffs[(t, i)] * zt;
            }
            zt *= z;
        }
        row.iter().map(|v| v / d).collect()
    }

    /// `p × m` matrix whose column `i·p + s` is basis function `i·p + s` at `z`.
    pub fn values(&self, z: C64) -> CMat {
        let row = self.scalar_values(z);
        let p = self.p;
        let mut out = CMat::zeros(p, self.dim());
        for (i, v) in row.iter().enumerate() {
            for s in 0..p {
                out[(s, i * p + s)] = *v;
            }
        }
        out
    }

    /// Gram matrix of the scalar basis from exact coefficient inner products.
    pub fn gram(&self) -> CMat {
        let t = toeplitz_gram(&self.denominator, self.coeffs.nrows(), 0);
        linalg::hermitian_part(&(self.coeffs.adjoint() * t * &self.coeffs))
    }

    /// Taylor coefficients of `Σ_i coords_i b_i` (channel-major rows `p × len`).
    pub fn taylor_of(&self, coords: &CMat, len: usize) -> CMat {
        let p = self.p;
        let mut out = CMat::zeros(p, len);
        for (i, f) in self.functions.iter().enumerate() {
            let t = f.taylor(len);
            for s in 0..p {
                let w = coords[(i * p + s, 0)];
                for j in 0..len {
                    out[(s, j)] += w * t[j];
                }
            }
        }
        out
    }
}

/// Taylor coefficients of `1/d` have autocorrelation `ρ(τ) = Σ u_{j+τ} conj(u_j)`,
/// obtained from the Stein equation of the companion recursion.
fn autocorrelation(den: &[C64], max_lag: usize) -> Vec<C64> {
    let mut d = den.to_vec();
    while d.len() > 1 && d.last().is_some_and(|z| z.norm() == 0.0) {
        d.pop();
    }
    debug_assert!((d[0] - cr(1.0)).norm() < 1e-15);
    let deg = d.len() - 1;
    if deg == 0 {
        let mut rho = vec![C64::default(); max_lag + 1];
        rho[0] = cr(1.0);
        return rho;
    }
    let mut f = CMat::zeros(deg, deg);
    for l in 0..deg {
        f[(0, l)] = -d[l + 1];
    }
    for i in 1..deg {
        f[(i, i - 1)] = cr(1.0);
    }
    let mut e1 = CMat::zeros(deg, 1);
    e1[(0, 0)] = cr(1.0);
    let x = solve_stein(&f, &(&e1 * e1.adjoint())).expect("companion matrix of reflected roots is stable");
    let mut v = x * &e1;
    let mut rho = Vec::with_capacity(max_lag + 1);
    for _ in 0..=max_lag {
        rho.push(v[(0, 0)]);
        v = &f * v;
    }
    rho
}

/// `T[b, a] = ⟨z^{a+offset}/d, z^b/d⟩ = ρ(b − a − offset)` for `a, b < len`.
fn toeplitz_gram(den: &[C64], len: usize, offset: usize) -> CMat {
    let rho = autocorrelation(den, len + offset + 1);
    CMat::from_fn(len, len, |b, a| {
        let tau = b as isize - a as isize - offset as isize;
        if tau >= 0 {
            rho[tau as usize]
        } else {
            rho[(-tau) as usize].conj()
        }
    })
}

pub fn build_ladder(q_roots: &[C64], k: usize, p: usize) -> Result<LadderBasis> {
    build_ladder_capped(q_roots, k, p, MAX_BASIS_DIM)
}

pub fn build_ladder_capped(q_roots: &[C64], k: usize, p: usize, cap: usize) -> Result<LadderBasis> {
    validate_roots(q_roots)?;
    if p == 0 {
        return Err(Error::InvalidInput("channel count p must be positive".into()));
    }
    let d = q_roots.len();
    let r = k + d;
    if r == 0 {
        return Err(Error::InvalidInput("k + deg q must be at least 1".into()));
    }
    if r * p > cap {
        return Err(Error::BasisTooLarge { m: r * p, cap });
    }

    let den = poly::reflected(q_roots);
    let mut functions = Vec::with_capacity(r);
    for j in 0..k {
        functions.push(RationalFunction {
            numerator: den.clone(),
            denominator: den.clone(),
            shift: j,
        });
    }
    for (i, a) in q_roots.iter().enumerate() {
        let scale = cr((1.0 - a.norm_sqr()).sqrt());
        let blaschke_num = poly::monic(&q_roots[..i]);
        let tail = poly::reflected(&q_roots[i + 1..]);
        let numerator: Vec<C64> = poly::mul(&blaschke_num, &tail).into_iter().map(|c| c * scale).collect();
        functions.push(RationalFunction {
            numerator,
            denominator: den.clone(),
            shift: k,
        });
    }

    let coeffs = CMat::from_fn(r, r, |t, i| {
        let f = &functions[i];
        t.checked_sub(f.shift)
            .and_then(|idx| f.numerator.get(idx).copied())
            .unwrap_or_default()
    });
    let t1 = toeplitz_gram(&den, r, 1);
    let qm_scalar = coeffs.adjoint() * t1 * &coeffs;
    let emat_scalar = CMat::from_fn(r, 1, |i, _| functions[i].eval(C64::default()).conj());

    let ip = eye(p);
    let qm = linalg::kron(&qm_scalar, &ip);
    let sstar = qm.adjoint();
    let emat = linalg::kron(&emat_scalar, &ip);
    let rm = linalg::hermitian_part(&(&sstar * &qm));
    Ok(LadderBasis {
        q_roots: q_roots.to_vec(),
        k,
        p,
        denominator: den,
        functions,
        coeffs,
        qm_scalar,
        emat_scalar,
        qm,
        sstar,
        emat,
        rm,
    })
}

/// State coordinates of `W b_i` for every basis vector: column `i·p + s` is
/// `f_i(A) B e_s`.
pub fn w_on_basis(r: &Realization, lb: &LadderBasis) -> Result<CMat> {
    if r.inputs() != lb.p {
        return Err(Error::Dimension(format!(
            "ladder has p = {} channels, realization has {} inputs",
            lb.p,
            r.inputs()
        )));
    }
    let a = r.a();
    let n = r.states();
    let p = lb.p;
    let den = poly::eval_matrix(&lb.denominator, a);
    let mut y = linalg::solve_guarded(&den, r.b())
        .map_err(|cond| Error::Inconsistent(format!("d(A) singular (condition {cond:.3e})")))?;
    let rdim = lb.scalar_dim();
    let mut out = CMat::zeros(n, rdim * p);
    for t in 0..lb.coeffs.nrows() {
        for i in 0..rdim {
            let w = lb.coeffs[(t, i)];
            if w != C64::default() {
                let mut block = out.view_mut((0, i * p), (n, p));
                block += &y * w;
            }
        }
        y = a * y;
    }
    Ok(out)
}

/// `γ_M = ‖H|_M‖` and the Gram matrix `G_H = Hmat* Q Hmat` of the restriction.
pub fn restricted_norm(hmat: &CMat, gp: &GramianPair, lb: &LadderBasis) -> Result<(f64, CMat)> {
    if hmat.ncols() != lb.dim() || hmat.nrows() != gp.q.nrows() {
        return Err(Error::Dimension(format!(
            "Hmat is {:?}, expected {}×{}",
            hmat.shape(),
            gp.q.nrows(),
            lb.dim()
        )));
    }
    let gh = linalg::hermitian_part(&(hmat.adjoint() * &gp.q * hmat));
    let gamma = linalg::herm_eig(&gh).max().max(0.0).sqrt();
    if gamma <= 1e-13 {
        log::warn!("restricted Hankel operator is numerically zero (gamma = {gamma:.3e})");
    }
    Ok((gamma, gh))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, max_abs};
    use crate::realization::gramians;
    use proptest::prelude::*;

    fn inner(a: &[C64], b: &[C64]) -> C64 {
        a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
    }

    #[test]
    fn monomial_ladder() {
        let lb = build_ladder(&[], 2, 1).unwrap();
        assert_eq!(lb.dim(), 2);
        let expect_q = CMat::from_row_slice(2, 2, &[cr(0.0), cr(0.0), cr(1.0), cr(0.0)]);
        assert!(max_abs(&(&lb.qm - expect_q)) < 1e-15);
        assert!(max_abs(&(&lb.emat - CMat::from_column_slice(2, 1, &[cr(1.0), cr(0.0)]))) < 1e-15);
    }

    #[test]
    fn single_root_model_space() {
        let a = c(0.4, -0.3);
        let lb = build_ladder(&[a], 0, 1).unwrap();
        assert_eq!(lb.dim(), 1);
        assert!((lb.sstar[(0, 0)] - a.conj()).norm() < 1e-14);
        let v = lb.functions[0].eval(cr(0.2));
        let expect = (1.0 - a.norm_sqr()).sqrt() / (cr(1.0) - a.conj() * 0.2);
        assert!((v - expect).norm() < 1e-15);
        // S*φ = conj(a) φ coefficient by coefficient.
        let t = lb.functions[0].taylor(40);
        for j in 0..39 {
            assert!((t[j + 1] - a.conj() * t[j]).norm() < 1e-15);
        }
    }

    #[test]
    fn constants_ladder_has_zero_shift() {
        let lb = build_ladder(&[], 1, 2).unwrap();
        assert_eq!(lb.dim(), 2);
        assert!(max_abs(&lb.qm) < 1e-15);
        assert!(max_abs(&lb.rm) < 1e-15);
    }

    #[test]
    fn bad_ladders_rejected() {
        assert!(matches!(build_ladder(&[cr(1.0)], 1, 1), Err(Error::RootOutsideDisk { .. })));
        assert!(build_ladder(&[], 0, 1).is_err());
        assert!(matches!(
            build_ladder_capped(&[], 10, 2, 16),
            Err(Error::BasisTooLarge { m: 20, cap: 16 })
        ));
    }

    #[test]
    fn autocorrelation_matches_series() {
        let roots = [c(0.9, 0.0), c(-0.5, 0.4), c(-0.5, 0.4)];
        let den = poly::reflected(&roots);
        let u = poly::taylor(&[cr(1.0)], &den, 2000);
        let rho = autocorrelation(&den, 6);
        for tau in 0..6 {
            let direct: C64 = (0..2000 - tau).map(|j| u[j + tau] * u[j].conj()).sum();
            assert!((direct - rho[tau]).norm() < 1e-11 * rho[0].norm(), "tau {tau}");
        }
    }

    #[test]
    fn w_columns_monomials() {
        let r = Realization::from_real(1, 1, 1, &[0.5], &[1.0], &[1.0]).unwrap();
        let lb = build_ladder(&[], 2, 1).unwrap();
        let h = w_on_basis(&r, &lb).unwrap();
        assert!((h[(0, 0)] - cr(1.0)).norm() < 1e-15);
        assert!((h[(0, 1)] - cr(0.5)).norm() < 1e-15);

        let r0 = Realization::from_real(1, 1, 1, &[0.0], &[2.0], &[1.0]).unwrap();
        let lb = build_ladder(&[c(0.3, 0.1)], 1, 1).unwrap();
        let h = w_on_basis(&r0, &lb).unwrap();
        for i in 0..lb.dim() {
            let f0 = lb.functions[i].eval(C64::default());
            assert!((h[(0, i)] - f0 * 2.0).norm() < 1e-14);
        }
    }

    #[test]
    fn restricted_norm_examples() {
        let r = Realization::from_real(1, 1, 1, &[0.5], &[1.0], &[1.0]).unwrap();
        let gp = gramians(&r).unwrap();
        let lb1 = build_ladder(&[], 1, 1).unwrap();
        let (g1, _) = restricted_norm(&w_on_basis(&r, &lb1).unwrap(), &gp, &lb1).unwrap();
        assert!((g1 - 2.0 / 3f64.sqrt()).abs() < 1e-14);

        let lb2 = build_ladder(&[], 2, 1).unwrap();
        let (g2, gh) = restricted_norm(&w_on_basis(&r, &lb2).unwrap(), &gp, &lb2).unwrap();
        assert!((g2 - (5.0f64 / 3.0).sqrt()).abs() < 1e-14);
        let expect = CMat::from_row_slice(2, 2, &[cr(1.0), cr(0.5), cr(0.5), cr(0.25)]) * cr(4.0 / 3.0);
        assert!(max_abs(&(gh - expect)) < 1e-14);

        let mut prev = 0.0;
        for k in 1..40 {
            let lb = build_ladder(&[], k, 1).unwrap();
            let (g, _) = restricted_norm(&w_on_basis(&r, &lb).unwrap(), &gp, &lb).unwrap();
            assert!(g >= prev - 1e-14 && g <= 4.0 / 3.0 + 1e-14);
            prev = g;
        }
        assert!((prev - 4.0 / 3.0).abs() < 1e-12);
    }

    fn root_strategy() -> impl Strategy<Value = C64> {
        (0.0f64..0.95, 0.0f64..std::f64::consts::TAU).prop_map(|(r, t)| C64::from_polar(r, t))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn ladder_invariants(
            roots in proptest::collection::vec(root_strategy(), 0..4),
            k in 0usize..6,
            p in 1usize..3,
        ) {
            prop_assume!(k + roots.len() >= 1);
            let lb = build_ladder(&roots, k, p).unwrap();
            let r = lb.scalar_dim();
            // Orthonormality by exact inner products.
            prop_assert!(max_abs(&(lb.gram() - eye(r))) < 1e-12);
            // Partial isometry and projection; S M_{k-1} ⊂ M_k needs k ≥ 1.
            if k >= 1 {
                prop_assert!(max_abs(&(&lb.rm * &lb.rm - &lb.rm)) < 1e-11);
                prop_assert!(max_abs(&(&lb.sstar * &lb.emat)) < 1e-12);
            }
            // Constants lie in M_{k-1} = span{1, …, z^{k-2}} ⊕ z^{k-1}(H² ⊖ qH²) for k ≥ 2.
            if k >= 2 {
                prop_assert!(max_abs(&(&lb.rm * &lb.emat - &lb.emat)) < 1e-12);
            }
            // S* consistency on Taylor coefficients.
            let len = 600;
            for i in 0..r {
                let own = lb.functions[i].taylor(len + 1);
                let mut rebuilt = vec![C64::default(); len];
                for j in 0..r {
                    let t = lb.functions[j].taylor(len);
                    for (x, y) in rebuilt.iter_mut().zip(&t) {
                        *x += lb.sstar[(j * p, i * p)] * y;
                    }
                }
                for l in 0..len {
                    prop_assert!((rebuilt[l] - own[l + 1]).norm() < 1e-12);
                }
            }
            // Gram by truncated coefficients agrees.
            let taylors: Vec<Vec<C64>> = lb.functions.iter().map(|f| f.taylor(1500)).collect();
            for i in 0..r {
                for j in 0..r {
                    let g = inner(&taylors[j], &taylors[i]);
                    let expect = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((g - cr(expect)).norm() < 1e-11);
                }
            }
        }
    }
}
