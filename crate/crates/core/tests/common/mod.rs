#![allow(dead_code)]

use std::f64::consts::PI;

use dendrite_taper::model::{PhysicalParams, TaperProfile};
use dendrite_taper::optimize::project_taper;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn desk(g_s: f64) -> PhysicalParams {
    PhysicalParams::new(1.0, 1.0, 1.0, g_s, 2.0 * PI).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Admissible, non-constant taper on non-uniform nodes.
pub fn random_profile(rng: &mut impl Rng, ell: f64, a0: f64, s: f64) -> TaperProfile {
    loop {
        let n = rng.gen_range(3..20);
        let mut cuts: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(0.0..ell)).collect();
        cuts.sort_by(f64::total_cmp);
        let mut x = vec![0.0];
        x.extend(cuts);
        x.push(ell);
        x.dedup_by(|b, a| *b - *a < 1e-3 * ell);
        if *x.last().unwrap() != ell {
            continue;
        }
        let amp = rng.gen_range(0.05..1.0);
        let r: Vec<f64> = x.iter().map(|_| a0 * (1.0 + amp * rng.gen::<f64>())).collect();
        let a = project_taper(&x, &r, a0, s).unwrap();
        if a.distance_to_constant(a0) > 1e-3 {
            return a;
        }
    }
}
