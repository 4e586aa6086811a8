//! Seeded random instances shared by the integration tests.

#![allow(dead_code)]

use nehari_core::linalg::{self, eye, CMat, C64};
use nehari_core::realization::rescale_to_radius;
use nehari_core::{check_conditions, gramians, GramianPair, HankelReport, Realization};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, r: usize, c: usize) -> CMat {
    CMat::from_fn(r, c, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

pub struct Instance {
    pub r: Realization,
    pub gp: GramianPair,
    pub report: HankelReport,
}

fn finish(r: Realization) -> Option<Instance> {
    let gp = gramians(&r).ok()?;
    if !gp.is_minimal() {
        return None;
    }
    let report = check_conditions(&r, &gp, 1e-8).ok()?;
    report.c2_holds.then_some(Instance { r, gp, report })
}

/// Scalar symbol of degree `n` with spectral radius in `[0.2, 0.9]`, scaled
/// to unit Hankel norm.
pub fn random_scalar(rng: &mut impl Rng, n: usize) -> Instance {
    loop {
        let radius = rng.gen_range(0.2..0.9);
        let a = rescale_to_radius(&random_matrix(rng, n, n), radius);
        let b = random_matrix(rng, n, 1);
        let c = random_matrix(rng, 1, n);
        if let Some(inst) = normalized(a, b, c) {
            return inst;
        }
    }
}

fn normalized(a: CMat, b: CMat, c: CMat) -> Option<Instance> {
    let r = Realization::new(a.clone(), b.clone(), c.clone()).ok()?;
    let gp = gramians(&r).ok()?;
    let gamma = nehari_core::hankel_norm(&gp).ok()?;
    let r = Realization::new(a, b, c / linalg::cr(gamma)).ok()?;
    finish(r)
}

/// `diag(g, g)` with the second copy in different state coordinates.
pub fn random_block(rng: &mut impl Rng, n: usize) -> Instance {
    loop {
        let g = random_scalar(rng, n);
        let t = eye(n) + random_matrix(rng, n, n) * linalg::cr(0.3);
        let Some(tinv) = linalg::solve(&t, &eye(n)) else { continue };
        let twin = Realization::new(&t * g.r.a() * &tinv, &t * g.r.b(), g.r.c() * &tinv);
        let Ok(twin) = twin else { continue };
        if let Some(inst) = finish(g.r.direct_sum(&twin)) {
            return inst;
        }
    }
}

/// The 50 scalar and 10 block instances used by the route checks.
pub fn route_instances(seed: u64) -> Vec<Instance> {
    let mut rng = rng(seed);
    let mut out: Vec<Instance> = (0..50)
        .map(|i| random_scalar(&mut rng, 1 + i % 6))
        .collect();
    out.extend((0..10).map(|i| random_block(&mut rng, 1 + i % 3)));
    out
}
