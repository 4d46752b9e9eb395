#![allow(dead_code)]

use chemobound_core::constants::{BoundConstants, GnConstants};
use chemobound_core::exponents::{resolve_eta, DomainSpec, ExponentConfig, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Sampled {
    pub params: ModelParams,
    pub cfg: ExponentConfig,
    pub gn: GnConstants,
}

impl Sampled {
    pub fn constants(&self) -> BoundConstants {
        BoundConstants::assemble(&self.cfg, &self.params, &self.gn, None, None).unwrap()
    }
}

/// Draws admissible configurations by rejection from broad ranges.
pub fn admissible_configs(count: usize, seed: u64) -> Vec<Sampled> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let n: u32 = rng.gen_range(1..=4);
        let eta = if n >= 3 {
            resolve_eta(n, None).unwrap()
        } else {
            rng.gen_range(1.1..1.9)
        };
        let m1 = rng.gen_range(0.3..3.0);
        let m2 = rng.gen_range(1.0..4.0);
        let q = 1.0 / (eta - 1.0) + rng.gen_range(0.05..8.0);
        let p = rng.gen_range(1.5..30.0);
        let dom = DomainSpec::ball_with_measure(rng.gen_range(0.3..3.0), n).unwrap();
        let chi = rng.gen_range(0.1..3.0);
        let alpha = rng.gen_range(0.2..2.0);
        let params = ModelParams::new(n, m1, m2, chi, alpha, dom).unwrap();
        let Ok(cfg) = ExponentConfig::derive(&params, p, q, eta) else { continue };
        if !cfg.is_admissible() {
            continue;
        }
        let gn = GnConstants::supplied(rng.gen_range(0.5..3.0), rng.gen_range(0.5..3.0)).unwrap();
        // configs whose constants leave the f64 range are covered separately
        if BoundConstants::assemble(&cfg, &params, &gn, None, None).is_err() {
            continue;
        }
        out.push(Sampled { params, cfg, gn });
    }
    out
}

pub fn worked_params() -> ModelParams {
    let dom = DomainSpec::ball_with_measure(1.0, 3).unwrap();
    ModelParams::new(3, 1.0, 2.0, 1.0, 1.0, dom).unwrap()
}

pub fn worked() -> (ModelParams, ExponentConfig, BoundConstants) {
    let params = worked_params();
    let cfg = ExponentConfig::derive(&params, 4.0, 4.0, 1.5).unwrap();
    let gn = GnConstants::supplied(1.0, 1.0).unwrap();
    let bc = BoundConstants::assemble(&cfg, &params, &gn, None, None).unwrap();
    (params, cfg, bc)
}
