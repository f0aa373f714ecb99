#![allow(dead_code)]

use mrfmotion::{FieldState, FramePair, GrayImage, HyperParams, Lattice, Observation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_frames(rng: &mut ChaCha8Rng, w: usize, h: usize, hi: u8) -> FramePair {
    let mut img = || GrayImage::new(w, h, (0..w * h).map(|_| rng.gen_range(0..=hi)).collect()).unwrap();
    let prev = img();
    let curr = img();
    FramePair::new(prev, curr).unwrap()
}

pub fn instance(seed: u64, w: usize, h: usize, max_speed: i32, hi: u8) -> Observation {
    let mut r = rng(seed);
    Observation::new(random_frames(&mut r, w, h, hi), max_speed).unwrap()
}

pub fn random_fields(rng: &mut ChaCha8Rng, lattice: &Lattice) -> FieldState {
    let mut f = FieldState::zeros(lattice);
    for i in 0..lattice.num_sites() {
        let sup = lattice.support(i);
        f.d[i] = sup.get(rng.gen_range(0..sup.len()));
        f.s[i] = rng.gen_range(0..=1);
    }
    for b in f.l.iter_mut() {
        *b = rng.gen_range(0..=1);
    }
    f
}

/// Moderate parameters under which no single configuration dominates a tiny
/// posterior.
pub fn random_params(rng: &mut ChaCha8Rng) -> HyperParams {
    HyperParams {
        b: rng.gen_range(0.005..0.05),
        lambda_d: rng.gen_range(0.2..1.2),
        lambda_s: rng.gen_range(0.2..1.2),
        alpha_l: rng.gen_range(1.0..20.0),
        beta_d: rng.gen_range(0.5..3.0),
        t_s: rng.gen_range(-1.0..2.0),
        ..HyperParams::zhang(1.0)
    }
}
