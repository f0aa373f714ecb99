//! Fixtures shared by the criterion benches in `benches/`.

use mrfmotion::ct::CtConfig;
use mrfmotion::learning::{LearningConfig, LearningMode};
use mrfmotion::mcmc::SamplerConfig;
use mrfmotion::meanfield::AnnealSchedule;
use mrfmotion::{generate, HyperParams, Observation, Scene, SceneSpec};

/// Lattice sides timed by default: N = 100, 400, 900.
pub const SIDES: [usize; 3] = [10, 20, 30];

pub fn scene(side: usize) -> Scene {
    generate(&SceneSpec::square(side)).expect("square scenes are valid")
}

pub fn observation(side: usize) -> Observation {
    scene(side).observation()
}

/// Fixed-budget mean-field schedule: every sweep runs, no early stop.
pub fn fixed_schedule() -> AnnealSchedule {
    let ct = CtConfig::default();
    AnnealSchedule::mpm(ct.mf_iters).with_guard(false).with_epsilon(0.0)
}

pub fn params() -> HyperParams {
    HyperParams::zhang(CtConfig::default().mu)
}

/// One learning step at the shared budgets.
pub fn one_step(mode: LearningMode) -> LearningConfig {
    let ct = CtConfig::default();
    LearningConfig {
        steps: 1,
        mf_iters: ct.mf_iters,
        mf_epsilon: 0.0,
        sampler: SamplerConfig::full(ct.sweeps, ct.burn_in, ct.seed),
        init: params(),
        ..LearningConfig::new(mode)
    }
}
