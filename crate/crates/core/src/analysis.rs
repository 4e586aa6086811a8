//! Sup norms on the circle, optimality certificates and convergence sweeps.

use serde::Serialize;

use crate::error::{Error, ErrorClass, Result};
use crate::hankel::{rate_predictor, HankelReport};
use crate::json::{complex_list_to_json, fmt_sig};
use crate::linalg::{self, CMat, C64};
use crate::realization::{GramianPair, Realization};
use crate::solver::{solve_full_nehari, solve_restricted, CentralSolution};
use crate::subspace::LadderBasis;

pub const DEFAULT_GRID: usize = 4096;
pub const DEFAULT_FLOOR: f64 = 1e-11;
pub const DEFAULT_MARGIN: f64 = 0.1;
/// Minimum number of points above the floor for a rate fit.
pub const MIN_FIT_POINTS: usize = 4;

/// `max_j σ_max(f(e^{2πij/N}))`.
pub fn supnorm_on_circle(f: impl Fn(C64) -> Result<CMat>, n_grid: usize) -> Result<f64> {
    let mut best = 0.0_f64;
    for j in 0..n_grid {
        let (_, z) = linalg::circle_point(j, n_grid);
        let v = f(z).map_err(|e| e.at(z))?;
        best = best.max(linalg::sigma_max(&v));
    }
    Ok(best)
}

/// `G₋ + Φ₊`, the optimal error function of a solution.
pub fn error_function(sol: &CentralSolution, z: C64) -> Result<CMat> {
    Ok(sol.realization().eval_coanalytic(z)? + sol.eval(z)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub gamma: f64,
    /// `sqrt(λ_max)` of the quadrature Gram matrix.
    pub norm: f64,
    pub residual: f64,
    pub n_fft: usize,
    /// Halving the grid moved the norm by more than `tol`.
    pub underresolved: bool,
}

fn gram_norm(phi: &impl Fn(C64) -> Result<CMat>, lb: &LadderBasis, n: usize) -> Result<f64> {
    let m = lb.dim();
    let mut gram = CMat::zeros(m, m);
    for j in 0..n {
        let (_, z) = linalg::circle_point(j, n);
        let v = phi(z).map_err(|e| e.at(z))? * lb.values(z);
        gram += v.adjoint() * v;
    }
    gram /= linalg::cr(n as f64);
    Ok(linalg::herm_eig(&gram).max().max(0.0).sqrt())
}

/// Trapezoid estimate of `‖Φ‖_M = sup_{f∈M} ‖Φ f‖ / ‖f‖` compared with `γ_M`.
pub fn optimality_certificate(
    phi: impl Fn(C64) -> Result<CMat>,
    lb: &LadderBasis,
    gamma_m: f64,
    n_fft: usize,
    tol: f64,
) -> Result<Certificate> {
    let norm = gram_norm(&phi, lb, n_fft)?;
    let coarse = gram_norm(&phi, lb, n_fft / 2)?;
    let underresolved = (norm - coarse).abs() > tol;
    if underresolved {
        log::warn!("optimality certificate under-resolved at N = {n_fft}");
    }
    Ok(Certificate {
        gamma: gamma_m,
        norm,
        residual: (norm - gamma_m).abs(),
        n_fft,
        underresolved,
    })
}

/// Certificate of a restricted solution on its own ladder.
pub fn restricted_certificate(sol: &CentralSolution, n_fft: usize, tol: f64) -> Result<Certificate> {
    let lb = sol
        .ladder()
        .ok_or_else(|| Error::InvalidInput("certificate needs a restricted solution".into()))?;
    let states = sol.realization().states();
    if n_fft < 8 * (lb.dim() + states) {
        return Err(Error::InvalidInput(format!(
            "N_fft = {n_fft} is below 8·(m + n) = {}",
            8 * (lb.dim() + states)
        )));
    }
    optimality_certificate(|z| error_function(sol, z), lb, sol.gamma, n_fft, tol)
}

/// Extremes of `σ_max(G₋ + Φ₊)` on the grid; for the full problem the
/// supremum equals `γ`, and for one input and one output the error is all-pass.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorBound {
    pub gamma: f64,
    pub sup: f64,
    pub inf: f64,
    pub n_grid: usize,
}

impl ErrorBound {
    pub fn sup_deviation(&self) -> f64 {
        (self.sup - self.gamma).abs()
    }

    pub fn allpass_deviation(&self) -> f64 {
        self.sup_deviation().max((self.inf - self.gamma).abs())
    }
}

pub fn error_bound(sol: &CentralSolution, n_grid: usize) -> Result<ErrorBound> {
    let mut sup = 0.0_f64;
    let mut inf = f64::INFINITY;
    for j in 0..n_grid {
        let (_, z) = linalg::circle_point(j, n_grid);
        let s = linalg::sigma_max(&error_function(sol, z).map_err(|e| e.at(z))?);
        sup = sup.max(s);
        inf = inf.min(s);
    }
    Ok(ErrorBound {
        gamma: sol.gamma,
        sup,
        inf,
        n_grid,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRecord {
    pub k: usize,
    pub gamma_k: Option<f64>,
    pub sup_err: Option<f64>,
    pub delta_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub q_roots: Vec<[f64; 2]>,
    pub k_range: [usize; 2],
    pub n_grid: usize,
    pub gamma: f64,
    pub records: Vec<SweepRecord>,
    pub floor: f64,
    pub margin: f64,
    pub fit_points: usize,
    /// Least-squares slope of `log sup_err` against `k`.
    pub fitted_slope: Option<f64>,
    /// Fitted `L` in `sup_err ≈ L·e^{slope·k}`.
    pub fitted_l: Option<f64>,
    pub max_fit_residual: Option<f64>,
    pub fit_inconclusive: bool,
    pub z0_radius: f64,
    pub predicted_log_rate: f64,
    /// `fitted_slope ≤ predicted_log_rate + margin`.
    pub slope_within_margin: Option<bool>,
    pub gamma_monotone: bool,
    /// Geometric-mean step ratio of `delta_gap` over the last usable `k`.
    pub delta_gap_ratio: Option<f64>,
    /// Same for `|γ_k² − γ²|`.
    pub gamma_gap_ratio: Option<f64>,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(fmt_sig).unwrap_or_default();
        let mut out = String::from("k,gamma_k,sup_err,delta_gap\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.k,
                opt(r.gamma_k),
                opt(r.sup_err),
                opt(r.delta_gap)
            ));
        }
        out
    }

    pub fn usable(&self) -> impl Iterator<Item = &SweepRecord> {
        self.records.iter().filter(|r| r.skipped.is_none())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub n_grid: usize,
    pub floor: f64,
    pub margin: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            n_grid: DEFAULT_GRID,
            floor: DEFAULT_FLOOR,
            margin: DEFAULT_MARGIN,
        }
    }
}

/// Least-squares line through `(x, y)`: `(slope, intercept, max |residual|)`.
pub fn linear_fit(points: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let resid = points.iter().fold(0.0_f64, |a, p| a.max((p.1 - icpt - slope * p.0).abs()));
    Some((slope, icpt, resid))
}

/// Per-step geometric-mean ratio over the last `count` entries above `floor`.
fn tail_ratio(series: &[(usize, f64)], floor: f64, count: usize) -> Option<f64> {
    let above: Vec<&(usize, f64)> = series.iter().filter(|v| v.1 > floor).collect();
    if above.len() < 2 {
        return None;
    }
    let tail = &above[above.len().saturating_sub(count)..];
    let (first, last) = (tail.first()?, tail.last()?);
    let steps = (last.0 - first.0) as f64;
    Some((last.1 / first.1).powf(1.0 / steps))
}

/// Solve the restricted problems for `k = 1..=k_max` and measure their
/// distance to the full solution.
pub fn convergence_sweep(
    r: &Realization,
    gp: &GramianPair,
    report: &HankelReport,
    q_roots: &[C64],
    k_max: usize,
    opts: SweepOptions,
) -> Result<SweepReport> {
    let full = solve_full_nehari(r, gp, report)?;
    let reference = full.grid(opts.n_grid)?;
    let delta_full = full.state_data().delta_euclid.clone();
    let predictor = rate_predictor(r, q_roots)?;
    let g2 = full.gamma * full.gamma;

    let mut records = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        match solve_restricted(r, gp, q_roots, k) {
            Ok(sol) => {
                let mut sup = 0.0_f64;
                for (_, z, phi) in &reference {
                    let v = sol.eval(*z).map_err(|e| e.at(*z))?;
                    sup = sup.max(linalg::sigma_max(&(v - phi)));
                }
                let gap = linalg::sigma_max(&(&sol.state_data().delta_euclid - &delta_full));
                records.push(SweepRecord {
                    k,
                    gamma_k: Some(sol.gamma),
                    sup_err: Some(sup),
                    delta_gap: Some(gap),
                    skipped: None,
                });
            }
            Err(e) if e.class() == ErrorClass::Numerical => {
                log::info!("k = {k} skipped: {e}");
                records.push(SweepRecord {
                    k,
                    gamma_k: None,
                    sup_err: None,
                    delta_gap: None,
                    skipped: Some(e.to_string()),
                });
            }
            Err(e) => return Err(e),
        }
    }

    let fit_pts: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| r.sup_err.filter(|&s| s > opts.floor).map(|s| (r.k as f64, s.ln())))
        .collect();
    let fit = if fit_pts.len() >= MIN_FIT_POINTS { linear_fit(&fit_pts) } else { None };
    let predicted = predictor.z0_radius.ln();
    let gammas: Vec<f64> = records.iter().filter_map(|r| r.gamma_k).collect();
    let gamma_monotone = gammas.windows(2).all(|w| w[1] >= w[0] - 1e-12 * full.gamma)
        && gammas.iter().all(|&g| g <= full.gamma * (1.0 + 1e-12));
    let delta_series: Vec<(usize, f64)> = records.iter().filter_map(|r| r.delta_gap.map(|d| (r.k, d))).collect();
    let gamma_series: Vec<(usize, f64)> = records
        .iter()
        .filter_map(|r| r.gamma_k.map(|g| (r.k, (g2 - g * g).abs())))
        .collect();

    Ok(SweepReport {
        q_roots: complex_list_to_json(q_roots),
        k_range: [1, k_max],
        n_grid: opts.n_grid,
        gamma: full.gamma,
        records,
        floor: opts.floor,
        margin: opts.margin,
        fit_points: fit_pts.len(),
        fitted_slope: fit.map(|f| f.0),
        fitted_l: fit.map(|f| f.1.exp()),
        max_fit_residual: fit.map(|f| f.2),
        fit_inconclusive: fit.is_none(),
        z0_radius: predictor.z0_radius,
        predicted_log_rate: predicted,
        slope_within_margin: fit.map(|f| f.0 <= predicted + opts.margin),
        gamma_monotone,
        delta_gap_ratio: tail_ratio(&delta_series, opts.floor * g2, 5),
        gamma_gap_ratio: tail_ratio(&gamma_series, opts.floor * g2, 5),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hankel::{check_conditions, GAP_RTOL};
    use crate::linalg::{cr, eye};
    use crate::realization::gramians;
    use crate::subspace::build_ladder;

    fn scalar(a: f64) -> (Realization, GramianPair, HankelReport) {
        let r = Realization::from_real(1, 1, 1, &[a], &[1.0], &[1.0]).unwrap();
        let gp = gramians(&r).unwrap();
        let rep = check_conditions(&r, &gp, GAP_RTOL).unwrap();
        (r, gp, rep)
    }

    #[test]
    fn supnorm_examples() {
        let s = supnorm_on_circle(|_| Ok(eye(2) * cr(-0.25)), 64).unwrap();
        assert!((s - 0.25).abs() < 1e-15);
        let s = supnorm_on_circle(|z| Ok(CMat::from_element(1, 1, -cr(1.0) / (cr(2.0) + z) + cr(2.0 / 3.0))), 4096)
            .unwrap();
        assert!((s - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn allpass_error_for_scalar() {
        let (r, gp, rep) = scalar(0.5);
        let sol = solve_full_nehari(&r, &gp, &rep).unwrap();
        let eb = error_bound(&sol, 4096).unwrap();
        assert!(eb.allpass_deviation() < 1e-12);
    }

    #[test]
    fn certificate_k1_is_geometric_series() {
        let (r, gp, _) = scalar(0.5);
        let sol = solve_restricted(&r, &gp, &[], 1).unwrap();
        let cert = restricted_certificate(&sol, 256, 1e-8).unwrap();
        assert!((cert.norm - 2.0 / 3f64.sqrt()).abs() < 1e-10);
        assert!(cert.residual < 1e-8);
        assert!(restricted_certificate(&sol, 8, 1e-8).is_err());
    }

    #[test]
    fn certificate_full_on_constants() {
        let (r, gp, rep) = scalar(0.5);
        let sol = solve_full_nehari(&r, &gp, &rep).unwrap();
        let lb = build_ladder(&[], 1, 1).unwrap();
        let cert = optimality_certificate(|z| error_function(&sol, z), &lb, 4.0 / 3.0, 512, 1e-8).unwrap();
        assert!(cert.residual < 1e-10);
    }

    #[test]
    fn short_sweep_is_inconclusive() {
        let (r, gp, rep) = scalar(0.9);
        let rpt = convergence_sweep(&r, &gp, &rep, &[], 2, SweepOptions { n_grid: 256, ..Default::default() }).unwrap();
        assert!(rpt.fit_inconclusive);
        assert_eq!(rpt.records.len(), 2);
        assert!(rpt.to_csv().starts_with("k,gamma_k,sup_err,delta_gap\n1,"));
    }

    #[test]
    fn fit_recovers_line() {
        let pts: Vec<(f64, f64)> = (1..10).map(|k| (k as f64, 0.3 - 0.7 * k as f64)).collect();
        let (s, b, res) = linear_fit(&pts).unwrap();
        assert!((s + 0.7).abs() < 1e-12 && (b - 0.3).abs() < 1e-12 && res < 1e-12);
    }
}
