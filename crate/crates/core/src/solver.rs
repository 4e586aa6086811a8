//! Central optimal solutions of the full and the restricted Nehari problems.
//!
//! Operators on the state space `X ≅ Cⁿ` (metric `Q`) are written through
//! the coordinate dictionary
//!
//! | operator | state matrix |
//! |---|---|
//! | `Z` | `A` |
//! | `Z*` | `Q⁻¹ A* Q` |
//! | `W W*` | `P Q` |
//! | `Π H W*` | `C P Q` |
//! | `E* W*` | `B* Q` |
//! | `W E` | `B` |
//! | `Π O` | `C` |
//!
//! Restricted problems live on a [`LadderBasis`]: `W b_i` is column `i` of
//! `Hmat`, `Π H b_i = C·Hmat_i` and `W P_M W* ↦ Hmat Hmat* Q`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hankel::HankelReport;
use crate::json::{complex_list_to_json, matrix_to_json, MatrixJson};
use crate::linalg::{self, cr, eye, CMat, SchurForm, C64, COND_LIMIT};
use crate::realization::{solve_stein, GramianPair, Realization};
use crate::subspace::{build_ladder, restricted_norm, w_on_basis, LadderBasis};

/// Slack on `r_spec(Λ) ≤ 1`.
pub const SPECTRAL_SLACK: f64 = 1e-10;

/// Eigenvalues of `γ² − G_H` below `−NEG_RTOL·γ²` mean the data are inconsistent.
pub const NEG_RTOL: f64 = 1e-12;

/// Relative Hankel singular value below which composite states are dropped.
pub const MINIMALIZE_RTOL: f64 = 1e-10;

/// `Λ = (γ² − Qm* G_H Qm)⁻¹ Qm* (γ² − G_H)`.
pub fn lambda_matrix(gh: &CMat, qm: &CMat, gamma: f64) -> Result<CMat> {
    let m = gh.nrows();
    let qs = qm.adjoint();
    if linalg::max_abs(gh) == 0.0 {
        return Ok(qs);
    }
    let g2 = gamma * gamma;
    let d0sq = linalg::hermitian_part(&(eye(m) * cr(g2) - &qs * gh * qm));
    let eig = linalg::herm_eig(&d0sq);
    if eig.min() <= g2 / COND_LIMIT {
        return Err(Error::DefectSingular { min_eig: eig.min() });
    }
    let rhs = &qs * (eye(m) * cr(g2) - gh);
    linalg::solve_guarded(&d0sq, &rhs).map_err(|_| Error::DefectSingular { min_eig: eig.min() })
}

/// Analytic state-space form `G(λ) = D + λ C (I − λF)⁻¹ B`.
#[derive(Debug, Clone)]
pub struct AnalyticRealization {
    pub d: CMat,
    pub c: CMat,
    pub f: CMat,
    pub b: CMat,
}

impl AnalyticRealization {
    pub fn states(&self) -> usize {
        self.f.nrows()
    }

    pub fn eval(&self, lambda: C64) -> Result<CMat> {
        let n = self.states();
        if n == 0 {
            return Ok(self.d.clone());
        }
        let x = linalg::solve_guarded(&(eye(n) - &self.f * lambda), &self.b)
            .map_err(|cond| Error::SingularResolvent { lambda, cond })?;
        Ok(&self.d + &self.c * x * lambda)
    }

    /// `self · other` (apply `other` first).
    pub fn series(&self, other: &AnalyticRealization) -> AnalyticRealization {
        let (n1, n2) = (self.states(), other.states());
        let mut f = CMat::zeros(n1 + n2, n1 + n2);
        f.view_mut((0, 0), (n1, n1)).copy_from(&self.f);
        f.view_mut((0, n1), (n1, n2)).copy_from(&(&self.b * &other.c));
        f.view_mut((n1, n1), (n2, n2)).copy_from(&other.f);
        let p = other.b.ncols();
        let mut b = CMat::zeros(n1 + n2, p);
        b.view_mut((0, 0), (n1, p)).copy_from(&(&self.b * &other.d));
        b.view_mut((n1, 0), (n2, p)).copy_from(&other.b);
        let q = self.c.nrows();
        let mut c = CMat::zeros(q, n1 + n2);
        c.view_mut((0, 0), (q, n1)).copy_from(&self.c);
        c.view_mut((0, n1), (q, n2)).copy_from(&(&self.d * &other.c));
        AnalyticRealization {
            d: &self.d * &other.d,
            c,
            f,
            b,
        }
    }

    /// Square-root balanced truncation dropping Hankel singular values below
    /// `rtol·σ_1`. Requires `r_spec(F) < 1`.
    pub fn minimalized(&self, rtol: f64) -> Result<AnalyticRealization> {
        let n = self.states();
        if n == 0 {
            return Ok(self.clone());
        }
        let wc = solve_stein(&self.f, &(&self.b * self.b.adjoint()))?;
        let wo = solve_stein(&self.f.adjoint(), &(self.c.adjoint() * &self.c))?;
        let lc = linalg::eigen_factor(&wc).adjoint();
        let lo = linalg::eigen_factor(&wo).adjoint();
        let svd = (lo.adjoint() * &lc).svd(true, true);
        let u = svd.u.expect("requested");
        let vt = svd.v_t.expect("requested");
        let s = &svd.singular_values;
        // Exact pole-zero cancellations leave singular values at rounding
        // level, so the threshold also scales with the size of the data.
        let scale = s
            .iter()
            .fold(linalg::sigma_max(&self.d), |a, &b| a.max(b))
            .max(linalg::sigma_max(&self.c) * linalg::sigma_max(&self.b));
        let keep: Vec<usize> = (0..s.len()).filter(|&i| scale > 0.0 && s[i] > rtol * scale).collect();
        let r = keep.len();
        let tl = CMat::from_fn(r, n, |i, j| u[(j, keep[i])].conj() / s[keep[i]].sqrt());
        let tl = tl * lo.adjoint();
        let tr = CMat::from_fn(n, r, |i, j| vt[(keep[j], i)].conj() / s[keep[j]].sqrt());
        let tr = &lc * tr;
        Ok(AnalyticRealization {
            d: self.d.clone(),
            c: &self.c * &tr,
            f: &tl * &self.f * &tr,
            b: tl * &self.b,
        })
    }
}

/// `(I − λ M)⁻¹ rhs` through a precomputed Schur form.
#[derive(Debug, Clone)]
struct Resolvent {
    schur: SchurForm,
}

impl Resolvent {
    fn new(m: &CMat) -> Self {
        Resolvent {
            schur: SchurForm::new(m),
        }
    }

    fn radius(&self) -> f64 {
        (0..self.schur.t.nrows()).fold(0.0, |acc, i| acc.max(self.schur.t[(i, i)].norm()))
    }

    /// Returns `(left·U, U*·right)` so that `left (I − λM)⁻¹ right` is
    /// `left_u · solve(λ, right_u)`.
    fn sandwich(&self, left: &CMat, right: &CMat) -> (CMat, CMat) {
        (left * &self.schur.u, self.schur.u.adjoint() * right)
    }

    fn solve(&self, lambda: C64, right_u: &CMat) -> Result<CMat> {
        let n = self.schur.t.nrows();
        for i in 0..n {
            let d = cr(1.0) - lambda * self.schur.t[(i, i)];
            if d.norm() < 1.0 / COND_LIMIT {
                return Err(Error::SingularResolvent {
                    lambda,
                    cond: 1.0 / d.norm(),
                });
            }
        }
        Ok(self.schur.shifted_solve(lambda, right_u))
    }
}

/// Matrices of the state-space route: `Δ`, `Ξ` and the terms built from them.
#[derive(Debug, Clone)]
pub struct StateData {
    pub delta: CMat,
    pub xi: CMat,
    pub zstar: CMat,
    pub cpq: CMat,
    pub bq: CMat,
    /// `L Δ L⁻¹`, Hermitian PSD.
    pub delta_euclid: CMat,
    /// `T = Z* Δ⁻¹ Ξ`.
    pub t: CMat,
    pub t_radius: f64,
}

#[derive(Debug, Clone)]
struct StateRoute {
    data: StateData,
    /// `K = A* Q Δ⁻¹ B`, so `Z* Δ⁻¹ W E = Q⁻¹ K`.
    k: CMat,
    ah: Resolvent,
    cp_u: CMat,
    bh_u: CMat,
    uh_k: CMat,
    t_res: Resolvent,
    bq_u: CMat,
    uh_qinv_k: CMat,
}

impl StateRoute {
    /// `ww` is the state-coordinate form of `W P W*` without the trailing `Q`
    /// (`P` for the full problem, `Hmat R Hmat*` for a restriction); `Δ` uses
    /// `wrw` and `Ξ` uses `ww`.
    fn new(r: &Realization, gp: &GramianPair, gamma: f64, wrw: &CMat, ww: &CMat, k_label: usize) -> Result<Self> {
        let n = r.states();
        let (a, b, c) = (r.a(), r.b(), r.c());
        let g2 = gamma * gamma;
        let q = &gp.q;
        let ah = a.adjoint();

        let awa = a * wrw * &ah;
        let delta_euclid = linalg::hermitian_part(&(eye(n) * cr(g2) - &gp.l * &awa * gp.l.adjoint()));
        let eig = linalg::herm_eig(&delta_euclid);
        let cond = if eig.min() > 0.0 { eig.max() / eig.min() } else { f64::INFINITY };
        if eig.min() < -NEG_RTOL * g2 {
            return Err(Error::Indefinite(eig.min()));
        }
        if cond > COND_LIMIT {
            return Err(Error::DeltaSingular { k: k_label, cond });
        }
        let delta = eye(n) * cr(g2) - &awa * q;
        let xi = eye(n) * cr(g2) - ww * q;
        let dinv_b = linalg::solve_guarded(&delta, b).map_err(|cond| Error::DeltaSingular { k: k_label, cond })?;
        let k = &ah * q * dinv_b;
        let zstar = gp.q_solve(&(&ah * q))?;
        let dinv_xi = linalg::solve_guarded(&delta, &xi).map_err(|cond| Error::DeltaSingular { k: k_label, cond })?;
        let t = &zstar * dinv_xi;
        let qinv_k = gp.q_solve(&k)?;

        let ah_res = Resolvent::new(&ah);
        let cp = c * &gp.p;
        let (cp_u, uh_k) = ah_res.sandwich(&cp, &k);
        let bh_u = b.adjoint() * &ah_res.schur.u;
        let t_res = Resolvent::new(&t);
        let bq = b.adjoint() * q;
        let (bq_u, uh_qinv_k) = t_res.sandwich(&bq, &qinv_k);
        let t_radius = t_res.radius();
        Ok(StateRoute {
            data: StateData {
                delta,
                xi,
                zstar,
                cpq: cp * q,
                bq,
                delta_euclid,
                t,
                t_radius,
            },
            k,
            ah: ah_res,
            cp_u,
            bh_u,
            uh_k,
            t_res,
            bq_u,
            uh_qinv_k,
        })
    }

    /// `(I − λA*)⁻¹ K` in Schur coordinates, plus `N₁(λ)` and `M₁(λ)`.
    fn first_terms(&self, lambda: C64) -> Result<(CMat, CMat, CMat)> {
        let y = self.ah.solve(lambda, &self.uh_k)?;
        let n1 = -(&self.cp_u * &y);
        let p = self.uh_k.ncols();
        let m1 = eye(p) + &self.bh_u * &y * lambda;
        Ok((y, n1, m1))
    }

    /// `M₁(λ)⁻¹ = I − λ B*Q (I − λT)⁻¹ Q⁻¹ K`, valid when `r_spec(T) < 1`.
    fn m1_inverse(&self, lambda: C64) -> Result<CMat> {
        let y = self.t_res.solve(lambda, &self.uh_qinv_k)?;
        let p = self.uh_qinv_k.ncols();
        Ok(eye(p) - &self.bq_u * y * lambda)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolutionKind {
    Restricted { k: usize, q_roots: Vec<C64> },
    Full,
}

#[derive(Debug, Clone)]
struct RestrictedParts {
    r: Realization,
    lb: LadderBasis,
    hmat: CMat,
    gh: CMat,
    chm: CMat,
    lam_e: CMat,
    sstar: Resolvent,
    chm_u: CMat,
    eh_u: CMat,
    uh_lam_e: CMat,
    state: StateRoute,
    /// `R Hmat* K` (coordinates of `R_M W* Z* Δ⁻¹ W E` against the basis).
    rm_hh_k: CMat,
    /// `A·W h` with `h = (I − R_M) W* Z* Δ⁻¹ W E`.
    a_wh: CMat,
}

#[derive(Debug, Clone)]
struct FullParts {
    r: Realization,
    state: StateRoute,
}

#[derive(Debug, Clone)]
enum Parts {
    Restricted(Box<RestrictedParts>),
    Full(Box<FullParts>),
}

/// A central optimal solution with its evaluators.
#[derive(Debug, Clone)]
pub struct CentralSolution {
    pub gamma: f64,
    pub kind: SolutionKind,
    pub lambda_m: Option<CMat>,
    pub realization_2n: Option<AnalyticRealization>,
    parts: Parts,
}

impl CentralSolution {
    pub fn state_data(&self) -> &StateData {
        match &self.parts {
            Parts::Restricted(rp) => &rp.state.data,
            Parts::Full(fp) => &fp.state.data,
        }
    }

    pub fn realization(&self) -> &Realization {
        match &self.parts {
            Parts::Restricted(rp) => &rp.r,
            Parts::Full(fp) => &fp.r,
        }
    }

    pub fn ladder(&self) -> Option<&LadderBasis> {
        match &self.parts {
            Parts::Restricted(rp) => Some(&rp.lb),
            Parts::Full(_) => None,
        }
    }

    pub fn hmat(&self) -> Option<&CMat> {
        match &self.parts {
            Parts::Restricted(rp) => Some(&rp.hmat),
            Parts::Full(_) => None,
        }
    }

    pub fn gram_h(&self) -> Option<&CMat> {
        match &self.parts {
            Parts::Restricted(rp) => Some(&rp.gh),
            Parts::Full(_) => None,
        }
    }

    /// `Φ₊(λ)` on the closed disk, through `N(λ) M(λ)⁻¹`.
    pub fn eval(&self, lambda: C64) -> Result<CMat> {
        let (n, m) = self.eval_nm(lambda)?;
        right_divide(&n, &m, lambda)
    }

    /// `N(λ)` and `M(λ)`. Restricted: the finite `S*` resolvent on `M`.
    /// Full: the state-space closed form.
    pub fn eval_nm(&self, lambda: C64) -> Result<(CMat, CMat)> {
        match &self.parts {
            Parts::Restricted(rp) => {
                let y = rp.sstar.solve(lambda, &rp.uh_lam_e)?;
                let n = &rp.chm_u * &y;
                let m = eye(rp.lb.p) - &rp.eh_u * y * lambda;
                Ok((n, m))
            }
            Parts::Full(fp) => {
                let (_, n1, m1) = fp.state.first_terms(lambda)?;
                Ok((n1, m1))
            }
        }
    }

    /// `Φ₊(λ) = C Hmat (I − λΛ)⁻¹ Λ E`. Restricted only, and only where the
    /// resolvent of `Λ` is well conditioned (the open disk in general).
    pub fn eval_lambda_route(&self, lambda: C64) -> Result<CMat> {
        let Parts::Restricted(rp) = &self.parts else {
            return Err(Error::InvalidInput("the Λ route exists only for restricted problems".into()));
        };
        let lam = self.lambda_m.as_ref().expect("restricted solutions carry Λ");
        let m = lam.nrows();
        let y = linalg::solve_guarded(&(eye(m) - lam * lambda), &rp.lam_e)
            .map_err(|cond| Error::SingularResolvent { lambda, cond })?;
        Ok(&rp.chm * y)
    }

    /// `N = N₁ + N₂`, `M = M₁ + M₂` from state-space data; the correction
    /// terms vanish for the full problem.
    pub fn eval_split(&self, lambda: C64) -> Result<(CMat, CMat)> {
        match &self.parts {
            Parts::Full(fp) => {
                let (_, n1, m1) = fp.state.first_terms(lambda)?;
                Ok((n1, m1))
            }
            Parts::Restricted(rp) => {
                let st = &rp.state;
                let (y, n1, m1) = st.first_terms(lambda)?;
                let h = &st.bh_u * &y - rp.lb.values(lambda) * &rp.rm_hh_k;
                let n = rp.r.states();
                let shifted = rp.r.a() - eye(n) * lambda;
                let rhs = &rp.a_wh - rp.r.b() * &h * lambda;
                let x = linalg::solve_guarded(&shifted, &rhs)
                    .map_err(|cond| Error::SingularResolvent { lambda, cond })?;
                let n2 = rp.r.c() * x;
                let m2 = -(h * lambda);
                Ok((n1 + n2, m1 + m2))
            }
        }
    }

    pub fn eval_corollary(&self, lambda: C64) -> Result<CMat> {
        let (n, m) = self.eval_split(lambda)?;
        right_divide(&n, &m, lambda)
    }

    /// `M₁(λ)` and its closed-form inverse, when `r_spec(Z* Δ⁻¹ Ξ) < 1`.
    pub fn m1_pair(&self, lambda: C64) -> Result<Option<(CMat, CMat)>> {
        let st = match &self.parts {
            Parts::Restricted(rp) => &rp.state,
            Parts::Full(fp) => &fp.state,
        };
        if st.data.t_radius >= 1.0 {
            return Ok(None);
        }
        let (_, _, m1) = st.first_terms(lambda)?;
        Ok(Some((m1, st.m1_inverse(lambda)?)))
    }

    /// `max(‖P² − P‖, ‖P − P*‖)` for `P_F = D Qm (D°²)⁻¹ Qm* D`.
    pub fn projection_defect(&self) -> Result<f64> {
        let Parts::Restricted(rp) = &self.parts else {
            return Ok(0.0);
        };
        let m = rp.gh.nrows();
        let g2 = self.gamma * self.gamma;
        let qm = &rp.lb.qm;
        let d = linalg::herm_sqrt_psd(&(eye(m) * cr(g2) - &rp.gh), NEG_RTOL * g2)?;
        let d0sq = eye(m) * cr(g2) - qm.adjoint() * &rp.gh * qm;
        let mid = linalg::solve_guarded(&d0sq, &(qm.adjoint() * &d))
            .map_err(|_| Error::DefectSingular { min_eig: 0.0 })?;
        let pf = &d * qm * mid;
        let idem = linalg::max_abs(&(&pf * &pf - &pf));
        let sa = linalg::max_abs(&(&pf - pf.adjoint()));
        Ok(idem.max(sa))
    }

    /// `Φ₊` on the grid `exp(2πij/N)`.
    pub fn grid(&self, n_grid: usize) -> Result<Vec<(f64, C64, CMat)>> {
        (0..n_grid)
            .map(|j| {
                let (t, z) = linalg::circle_point(j, n_grid);
                self.eval(z).map(|v| (t, z, v)).map_err(|e| e.at(z))
            })
            .collect()
    }

    pub fn to_json(&self) -> SolutionJson {
        let sd = self.state_data();
        let (kind, k, q_roots) = match &self.kind {
            SolutionKind::Full => ("full", None, None),
            SolutionKind::Restricted { k, q_roots } => ("restricted", Some(*k), Some(complex_list_to_json(q_roots))),
        };
        SolutionJson {
            gamma: self.gamma,
            kind,
            k,
            q_roots,
            lambda_m: self.lambda_m.as_ref().map(matrix_to_json),
            state: StateJson {
                delta: matrix_to_json(&sd.delta),
                xi: matrix_to_json(&sd.xi),
                zstar: matrix_to_json(&sd.zstar),
                cpq: matrix_to_json(&sd.cpq),
                bq: matrix_to_json(&sd.bq),
                t_spectral_radius: sd.t_radius,
            },
            realization_2n: self.realization_2n.as_ref().map(|ar| AnalyticJson {
                d: matrix_to_json(&ar.d),
                c: matrix_to_json(&ar.c),
                f: matrix_to_json(&ar.f),
                b: matrix_to_json(&ar.b),
            }),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StateJson {
    #[serde(rename = "Delta")]
    pub delta: MatrixJson,
    #[serde(rename = "Xi")]
    pub xi: MatrixJson,
    #[serde(rename = "Zstar")]
    pub zstar: MatrixJson,
    #[serde(rename = "CPQ")]
    pub cpq: MatrixJson,
    #[serde(rename = "BQ")]
    pub bq: MatrixJson,
    pub t_spectral_radius: f64,
}

/// `Φ₊(λ) = D + λ C (I − λF)⁻¹ B`.
#[derive(Debug, Clone, Serialize)]
pub struct AnalyticJson {
    #[serde(rename = "D")]
    pub d: MatrixJson,
    #[serde(rename = "C")]
    pub c: MatrixJson,
    #[serde(rename = "F")]
    pub f: MatrixJson,
    #[serde(rename = "B")]
    pub b: MatrixJson,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionJson {
    pub gamma: f64,
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_roots: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_m: Option<MatrixJson>,
    pub state: StateJson,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub realization_2n: Option<AnalyticJson>,
}

fn right_divide(n: &CMat, m: &CMat, lambda: C64) -> Result<CMat> {
    let x = linalg::solve_guarded(&m.adjoint(), &n.adjoint())
        .map_err(|cond| Error::SingularDenominator { lambda, cond })?;
    Ok(x.adjoint())
}

/// Central solution of the problem restricted to `M_k` for the polynomial
/// with roots `q_roots`.
pub fn solve_restricted(r: &Realization, gp: &GramianPair, q_roots: &[C64], k: usize) -> Result<CentralSolution> {
    if k == 0 {
        return Err(Error::InvalidInput(
            "k must be at least 1 so that the constants lie in M_k".into(),
        ));
    }
    let lb = build_ladder(q_roots, k, r.inputs())?;
    let hmat = w_on_basis(r, &lb)?;
    let (gamma, gh) = restricted_norm(&hmat, gp, &lb)?;
    if gamma == 0.0 {
        return Err(Error::DegenerateHankel(gamma));
    }

    let hr = &hmat * &lb.rm * hmat.adjoint();
    let hh = &hmat * hmat.adjoint();
    let state = StateRoute::new(r, gp, gamma, &hr, &hh, k)?;

    let lam = lambda_matrix(&gh, &lb.qm, gamma)?;
    let radius = linalg::spectral_radius(&lam);
    if radius > 1.0 + SPECTRAL_SLACK {
        return Err(Error::Inconsistent(format!("r_spec(Λ) = {radius:.6e} exceeds 1")));
    }
    let chm = r.c() * &hmat;
    let lam_e = &lam * &lb.emat;
    let sstar = Resolvent::new(&lb.sstar);
    let (chm_u, uh_lam_e) = sstar.sandwich(&chm, &lam_e);
    let eh_u = lb.emat.adjoint() * &sstar.schur.u;

    let hh_k = hmat.adjoint() * &state.k;
    let rm_hh_k = &lb.rm * &hh_k;
    let wh = &gp.p * &state.k - &hmat * &rm_hh_k;
    let a_wh = r.a() * wh;

    Ok(CentralSolution {
        gamma,
        kind: SolutionKind::Restricted {
            k,
            q_roots: q_roots.to_vec(),
        },
        lambda_m: Some(lam),
        realization_2n: None,
        parts: Parts::Restricted(Box::new(RestrictedParts {
            r: r.clone(),
            lb,
            hmat,
            gh,
            chm,
            lam_e,
            sstar,
            chm_u,
            eh_u,
            uh_lam_e,
            state,
            rm_hh_k,
            a_wh,
        })),
    })
}

/// The unique optimal solution of the full problem under the uniqueness
/// condition, with its composite realization.
pub fn solve_full_nehari(r: &Realization, gp: &GramianPair, report: &HankelReport) -> Result<CentralSolution> {
    if !report.c2_holds {
        return Err(Error::ConditionFailure(format!(
            "multiplicity {}, inputs {}, no maximizing vector in zH²: {}",
            report.multiplicity,
            r.inputs(),
            report.no_max_vector_in_shift_range
        )));
    }
    if !gp.is_minimal() {
        return Err(Error::NonMinimal("realization is not minimal".into()));
    }
    let gamma = report.gamma;
    let state = StateRoute::new(r, gp, gamma, &gp.p, &gp.p, 0).map_err(|e| match e {
        Error::DeltaSingular { cond, .. } => Error::Inconsistent(format!(
            "Δ is singular (condition {cond:.3e}) although the uniqueness condition holds"
        )),
        other => other,
    })?;
    if state.data.t_radius >= 1.0 {
        return Err(Error::Inconsistent(format!(
            "r_spec(Z* Δ⁻¹ Ξ) = {:.6e} is not below 1",
            state.data.t_radius
        )));
    }

    let ah = r.a().adjoint();
    let cp = r.c() * &gp.p;
    let n_part = AnalyticRealization {
        d: -(&cp * &state.k),
        c: -cp,
        f: ah.clone(),
        b: &ah * &state.k,
    };
    let p = r.inputs();
    let m_inv = AnalyticRealization {
        d: eye(p),
        c: -state.data.bq.clone(),
        f: state.data.t.clone(),
        b: gp.q_solve(&state.k)?,
    };
    let composite = n_part.series(&m_inv);
    let composite = match composite.minimalized(MINIMALIZE_RTOL) {
        Ok(min) => min,
        Err(e) => {
            log::warn!("composite realization kept at full size: {e}");
            composite
        }
    };

    Ok(CentralSolution {
        gamma,
        kind: SolutionKind::Full,
        lambda_m: None,
        realization_2n: Some(composite),
        parts: Parts::Full(Box::new(FullParts { r: r.clone(), state })),
    })
}

#[derive(Debug, Clone)]
enum PsiSource {
    Basis { lb: LadderBasis, coords: CMat },
    State { bh: CMat, ah: CMat, qx: CMat },
}

/// Scalar-input quotient `Φ = Hψ / ψ` built from a maximizing vector `ψ`.
#[derive(Debug, Clone)]
pub struct AakQuotient {
    r: Realization,
    /// `Hψ = C (zI − A)⁻¹ hx`.
    hx: CMat,
    psi: PsiSource,
    pub multiplicity: usize,
}

impl AakQuotient {
    pub fn psi(&self, z: C64) -> Result<C64> {
        match &self.psi {
            PsiSource::Basis { lb, coords } => {
                let row = lb.scalar_values(z);
                Ok(row.iter().enumerate().map(|(i, v)| v * coords[(i, 0)]).sum())
            }
            PsiSource::State { bh, ah, qx } => {
                let n = ah.nrows();
                let x = linalg::solve_guarded(&(eye(n) - ah * z), qx)
                    .map_err(|cond| Error::SingularResolvent { lambda: z, cond })?;
                Ok((bh * x)[(0, 0)])
            }
        }
    }

    pub fn h_psi(&self, z: C64) -> Result<CMat> {
        let n = self.r.states();
        let x = linalg::solve_guarded(&(eye(n) * z - self.r.a()), &self.hx)
            .map_err(|cond| Error::SingularResolvent { lambda: z, cond })?;
        Ok(self.r.c() * x)
    }

    /// The optimal error function `G₋ + Φ₊`.
    pub fn phi(&self, z: C64) -> Result<CMat> {
        let psi = self.psi(z)?;
        if psi.norm() < 1e-12 {
            return Err(Error::PsiZeroOnCircle { t: z.arg() });
        }
        Ok(self.h_psi(z)? / psi)
    }

    pub fn phi_plus(&self, z: C64) -> Result<CMat> {
        Ok(self.phi(z)? - self.r.eval_coanalytic(z)?)
    }

    /// Reject quotients whose `ψ` nearly vanishes at some grid point.
    pub fn check_circle(&self, n_grid: usize) -> Result<()> {
        let vals: Vec<(f64, f64)> = (0..n_grid)
            .map(|j| {
                let (t, z) = linalg::circle_point(j, n_grid);
                self.psi(z).map(|v| (t, v.norm()))
            })
            .collect::<Result<_>>()?;
        let top = vals.iter().fold(0.0_f64, |a, v| a.max(v.1));
        match vals.iter().find(|v| v.1 <= 1e-8 * top) {
            Some(&(t, _)) => Err(Error::PsiZeroOnCircle { t }),
            None => Ok(()),
        }
    }
}

fn require_scalar_input(r: &Realization) -> Result<()> {
    if r.inputs() != 1 {
        return Err(Error::InvalidInput(format!(
            "the quotient formula needs one input channel, got {}",
            r.inputs()
        )));
    }
    Ok(())
}

/// Quotient for the restriction to `M_k`, from the top eigenvector of `G_H`.
pub fn aak_quotient_restricted(r: &Realization, gp: &GramianPair, q_roots: &[C64], k: usize) -> Result<AakQuotient> {
    require_scalar_input(r)?;
    let lb = build_ladder(q_roots, k, 1)?;
    let hmat = w_on_basis(r, &lb)?;
    let (_, gh) = restricted_norm(&hmat, gp, &lb)?;
    let eig = linalg::herm_eig(&gh);
    let top = eig.max();
    let multiplicity = eig.values.iter().filter(|&&v| v >= (1.0 - 1e-8) * top).count();
    if multiplicity > 1 {
        log::warn!("restricted maximizing vector is not unique (multiplicity {multiplicity})");
    }
    let m = gh.nrows();
    let coords = eig.vectors.columns(m - 1, 1).into_owned();
    Ok(AakQuotient {
        r: r.clone(),
        hx: &hmat * &coords,
        psi: PsiSource::Basis { lb, coords },
        multiplicity,
    })
}

/// Quotient for the full problem: `ψ = W* x`, `Hψ = O P Q x`.
pub fn aak_quotient_full(r: &Realization, gp: &GramianPair, report: &HankelReport) -> Result<AakQuotient> {
    require_scalar_input(r)?;
    if report.multiplicity > 1 {
        log::warn!("maximizing vector is not unique (multiplicity {})", report.multiplicity);
    }
    let x = report.max_vectors.columns(0, 1).into_owned();
    let qx = &gp.q * &x;
    Ok(AakQuotient {
        r: r.clone(),
        hx: &gp.p * &qx,
        psi: PsiSource::State {
            bh: r.b().adjoint(),
            ah: r.a().adjoint(),
            qx,
        },
        multiplicity: report.multiplicity,
    })
}
