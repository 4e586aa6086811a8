//! Hankel norm, maximizing vectors, the uniqueness conditions and the
//! convergence-rate predictor.
//!
//! With `Q = L* L`, the Hermitian matrix `K = L P L*` is unitarily similar to
//! `W W*` on the range of the Hankel operator, so `‖H‖² = λ_max(K)` and the
//! top eigenvectors of `K` give the maximizing vectors. A maximizing vector
//! `f = W* x` has value `f(0) = B* Q x` at the origin.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::json::{complex_list_to_json, matrix_to_json, MatrixJson};
use crate::linalg::{self, cr, eye, CMat, C64};
use crate::realization::{GramianPair, Realization};

/// Default relative eigenvalue gap used to decide the multiplicity of `‖H‖`.
pub const GAP_RTOL: f64 = 1e-8;

/// Values at the origin of unit-norm maximizing vectors below this are zero.
pub const VALUE_AT_ZERO_TOL: f64 = 1e-8;

const DEGENERATE_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Serialize)]
pub struct HankelReport {
    pub gamma: f64,
    pub multiplicity: usize,
    /// Columns `x_i` (state coordinates) with `W* x_i` orthonormal maximizing vectors.
    #[serde(serialize_with = "ser_matrix")]
    pub max_vectors: CMat,
    /// Columns `B* Q x_i`: the maximizing vectors evaluated at 0.
    #[serde(serialize_with = "ser_matrix")]
    pub eval0: CMat,
    /// No nonzero maximizing vector lies in `S·H²` (first half of the uniqueness condition).
    pub no_max_vector_in_shift_range: bool,
    /// Maximizing-vector space has dimension `p` (second half).
    pub dimension_matches_inputs: bool,
    pub c2_holds: bool,
    /// Some eigenvalue sits just below the multiplicity threshold.
    pub ambiguous_multiplicity: bool,
    /// Finite rank holds for every state-space symbol.
    pub c1_holds: bool,
}

fn ser_matrix<S: serde::Serializer>(m: &CMat, s: S) -> std::result::Result<S::Ok, S::Error> {
    let j: MatrixJson = matrix_to_json(m);
    serde::Serialize::serialize(&j, s)
}

/// `L P L*`, whose eigenvalues are the squared Hankel singular values.
pub fn hankel_form(gp: &GramianPair) -> CMat {
    linalg::hermitian_part(&(&gp.l * &gp.p * gp.l.adjoint()))
}

pub fn hankel_norm(gp: &GramianPair) -> Result<f64> {
    let top = linalg::herm_eig(&hankel_form(gp)).max().max(0.0);
    let gamma = top.sqrt();
    if gamma <= DEGENERATE_TOL {
        return Err(Error::DegenerateHankel(gamma));
    }
    Ok(gamma)
}

/// `C A^{i+j} B`, the `(i, j)` block of the Hankel matrix.
pub fn hankel_block(r: &Realization, i: usize, j: usize) -> CMat {
    r.markov(i + j)
}

pub fn check_conditions(r: &Realization, gp: &GramianPair, gap_rtol: f64) -> Result<HankelReport> {
    let eig = linalg::herm_eig(&hankel_form(gp));
    let mu_max = eig.max();
    let gamma = mu_max.max(0.0).sqrt();
    if gamma <= DEGENERATE_TOL {
        return Err(Error::DegenerateHankel(gamma));
    }
    let n = r.states();
    let top: Vec<usize> = (0..n).filter(|&i| eig.values[i] >= (1.0 - gap_rtol) * mu_max).collect();
    let ambiguous = (0..n).any(|i| {
        let v = eig.values[i];
        v >= (1.0 - 2.0 * gap_rtol) * mu_max && v < (1.0 - gap_rtol) * mu_max
    });
    if ambiguous {
        log::warn!("Hankel norm multiplicity is ambiguous at gap tolerance {gap_rtol:.1e}");
    }

    // x_i = P L* v_i / μ^{3/2} makes W* x_i orthonormal.
    let pl = &gp.p * gp.l.adjoint();
    let mut max_vectors = CMat::zeros(n, top.len());
    for (col, &i) in top.iter().enumerate() {
        let v = eig.vectors.column(i);
        let x = &pl * v * cr(eig.values[i].powf(-1.5));
        max_vectors.set_column(col, &x.column(0));
    }
    let eval0 = r.b().adjoint() * &gp.q * &max_vectors;

    let m = top.len();
    let p = r.inputs();
    let sv = linalg::singular_values(&eval0);
    let injective = m <= p && sv.len() >= m && sv[m - 1] > VALUE_AT_ZERO_TOL;
    let dimension_ok = m == p;
    Ok(HankelReport {
        gamma,
        multiplicity: m,
        max_vectors,
        eval0,
        no_max_vector_in_shift_range: injective,
        dimension_matches_inputs: dimension_ok,
        c2_holds: injective && dimension_ok,
        ambiguous_multiplicity: ambiguous,
        c1_holds: true,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RatePredictor {
    #[serde(serialize_with = "ser_roots")]
    pub q_roots: Vec<C64>,
    pub x0_dim: usize,
    /// Spectral radius of the co-analytic shift compressed to `W·(q H²)`.
    pub z0_radius: f64,
    pub z_radius: f64,
}

fn ser_roots<S: serde::Serializer>(v: &[C64], s: S) -> std::result::Result<S::Ok, S::Error> {
    serde::Serialize::serialize(&complex_list_to_json(v), s)
}

pub fn validate_roots(roots: &[C64]) -> Result<()> {
    match roots.iter().find(|z| !(z.norm() < 1.0) || !z.re.is_finite() || !z.im.is_finite()) {
        Some(&root) => Err(Error::RootOutsideDisk { root }),
        None => Ok(()),
    }
}

/// `q(A) = Π (A − a_i I)`.
pub fn poly_of_matrix(a: &CMat, roots: &[C64]) -> CMat {
    let n = a.nrows();
    roots.iter().fold(eye(n), |acc, &root| acc * (a - eye(n) * root))
}

fn krylov(a: &CMat, start: &CMat) -> CMat {
    let n = a.nrows();
    let w = start.ncols();
    let mut k = CMat::zeros(n, n * w);
    let mut block = start.clone();
    for j in 0..n {
        k.view_mut((0, j * w), (n, w)).copy_from(&block);
        block = a * block;
    }
    k
}

pub fn rate_predictor(r: &Realization, q_roots: &[C64]) -> Result<RatePredictor> {
    validate_roots(q_roots)?;
    let a = r.a();
    let qa = poly_of_matrix(a, q_roots);
    let plain = krylov(a, r.b());
    let scale = linalg::sigma_max(&plain) * q_roots.iter().map(|z| 1.0 + z.norm()).product::<f64>();
    let kq = krylov(a, &(qa * r.b()));
    let sv = linalg::singular_values(&kq);
    let threshold = 1e-10 * scale;
    let rank = sv.iter().filter(|&&s| s > threshold).count();
    let z0_radius = if rank == 0 {
        0.0
    } else {
        let basis = linalg::range_basis(&kq, threshold / sv[0].max(f64::MIN_POSITIVE));
        let compressed = basis.adjoint() * a * &basis;
        linalg::spectral_radius(&compressed)
    };
    Ok(RatePredictor {
        q_roots: q_roots.to_vec(),
        x0_dim: rank,
        z0_radius,
        z_radius: r.spectral_radius(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::diag;
    use crate::realization::gramians;

    fn scalar(a: f64, c: f64) -> Realization {
        Realization::from_real(1, 1, 1, &[a], &[1.0], &[c]).unwrap()
    }

    // σ_max of the N×N block-truncated Hankel matrix.
    fn truncated_hankel_norm(r: &Realization, n: usize) -> f64 {
        let (q, p) = (r.outputs(), r.inputs());
        let mut h = CMat::zeros(q * n, p * n);
        for i in 0..n {
            for j in 0..n {
                h.view_mut((i * q, j * p), (q, p)).copy_from(&hankel_block(r, i, j));
            }
        }
        linalg::sigma_max(&h)
    }

    #[test]
    fn norm_examples() {
        let r = scalar(0.5, 1.0);
        let gp = gramians(&r).unwrap();
        let gamma = hankel_norm(&gp).unwrap();
        assert!((gamma - 4.0 / 3.0).abs() < 1e-14);
        assert!((truncated_hankel_norm(&r, 60) - gamma).abs() < 1e-12);

        let gp = gramians(&scalar(0.0, -2.5)).unwrap();
        assert!((hankel_norm(&gp).unwrap() - 2.5).abs() < 1e-14);
    }

    #[test]
    fn zero_symbol_is_degenerate() {
        let gp = gramians(&scalar(0.5, 0.0)).unwrap();
        assert!(matches!(hankel_norm(&gp), Err(Error::DegenerateHankel(_))));
    }

    #[test]
    fn hankel_block_values() {
        let r = scalar(0.5, 1.0);
        assert_eq!(hankel_block(&r, 0, 0)[(0, 0)], cr(1.0));
        assert_eq!(hankel_block(&r, 1, 2)[(0, 0)], cr(0.125));
        let r0 = scalar(0.0, 1.0);
        assert_eq!(hankel_block(&r0, 0, 1)[(0, 0)], cr(0.0));
    }

    #[test]
    fn scalar_conditions() {
        let r = scalar(0.5, 1.0);
        let gp = gramians(&r).unwrap();
        let rep = check_conditions(&r, &gp, GAP_RTOL).unwrap();
        assert_eq!(rep.multiplicity, 1);
        assert!(rep.eval0[(0, 0)].norm() > 0.1);
        assert!(rep.c2_holds);
        // Maximizing vector of 1/(z-a) is proportional to 1/(1-az): f(0)² = 1 - a².
        assert!((rep.eval0[(0, 0)].norm() - 0.75f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn duplicated_channel_has_full_multiplicity() {
        let s = scalar(0.5, 1.0);
        let r = s.direct_sum(&s);
        let gp = gramians(&r).unwrap();
        assert!((hankel_norm(&gp).unwrap() - 4.0 / 3.0).abs() < 1e-13);
        let rep = check_conditions(&r, &gp, GAP_RTOL).unwrap();
        assert_eq!(rep.multiplicity, 2);
        assert!(rep.c2_holds);
    }

    #[test]
    fn distinct_channels_fail_c2() {
        let r = scalar(0.5, 1.0).direct_sum(&scalar(0.3, 0.1));
        let gp = gramians(&r).unwrap();
        let rep = check_conditions(&r, &gp, GAP_RTOL).unwrap();
        assert_eq!(rep.multiplicity, 1);
        assert!(!rep.c2_holds);
        assert!(rep.no_max_vector_in_shift_range);
        assert!(!rep.dimension_matches_inputs);
    }

    #[test]
    fn predictor_kills_slow_mode() {
        let r = Realization::from_real(2, 1, 1, &[0.9, 0.0, 0.0, 0.3], &[1.0, 1.0], &[1.0, 1.0]).unwrap();
        let pred = rate_predictor(&r, &[cr(0.9)]).unwrap();
        assert_eq!(pred.x0_dim, 1);
        assert!((pred.z0_radius - 0.3).abs() < 1e-12);
        assert!((pred.z_radius - 0.9).abs() < 1e-12);

        let pred = rate_predictor(&r, &[]).unwrap();
        assert_eq!(pred.x0_dim, 2);
        assert!((pred.z0_radius - 0.9).abs() < 1e-12);

        let pred = rate_predictor(&r, &[cr(0.9), cr(0.3)]).unwrap();
        assert_eq!(pred.x0_dim, 0);
        assert_eq!(pred.z0_radius, 0.0);
    }

    #[test]
    fn predictor_rejects_roots_outside_disk() {
        let r = scalar(0.5, 1.0);
        assert!(matches!(rate_predictor(&r, &[cr(1.0)]), Err(Error::RootOutsideDisk { .. })));
    }

    #[test]
    fn poly_of_diagonal_matrix() {
        let q = poly_of_matrix(&diag(&[cr(0.9), cr(0.3)]), &[cr(0.9)]);
        assert!((q[(0, 0)]).norm() < 1e-15);
        assert!((q[(1, 1)] - cr(-0.6)).norm() < 1e-15);
    }
}
