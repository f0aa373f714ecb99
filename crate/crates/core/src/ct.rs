//! Wall-clock cost of the estimation procedures as a function of lattice size.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::learning::{run_learning, LearningConfig, LearningError, LearningMode};
use crate::mcmc::SamplerConfig;
use crate::meanfield::{self, AnnealSchedule, MeanFieldState};
use crate::params::HyperParams;
use crate::scenes::{generate, SceneSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Procedure {
    /// Fixed number of mean-field sweeps at the ad-hoc parameters.
    Zhang,
    Hybrid,
    SimpleMcmc,
}

impl Procedure {
    pub const ALL: [Procedure; 3] = [Procedure::Zhang, Procedure::Hybrid, Procedure::SimpleMcmc];

    pub fn name(self) -> &'static str {
        match self {
            Procedure::Zhang => "zhang",
            Procedure::Hybrid => "hybrid",
            Procedure::SimpleMcmc => "simple_mcmc",
        }
    }
}

/// Shared budgets. Every procedure runs `mf_iters` mean-field sweeps per
/// solve without early stopping; the learning procedures add
/// `learning_steps` steps of `sweeps` sampler sweeps each.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CtConfig {
    pub mf_iters: usize,
    pub learning_steps: usize,
    pub sweeps: usize,
    pub burn_in: usize,
    pub repetitions: usize,
    pub mu: f64,
    pub seed: u64,
}

impl Default for CtConfig {
    fn default() -> Self {
        CtConfig {
            mf_iters: 50,
            learning_steps: 1,
            sweeps: SamplerConfig::DEFAULT_SWEEPS,
            burn_in: SamplerConfig::DEFAULT_BURN_IN,
            repetitions: 3,
            mu: 21.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CtRow {
    pub procedure: Procedure,
    pub n: usize,
    pub seconds: f64,
}

fn run_once(procedure: Procedure, spec: &SceneSpec, cfg: &CtConfig) -> Result<f64, LearningError> {
    let scene = generate(spec).map_err(|e| LearningError { step: 0, cause: e.into() })?;
    let obs = scene.observation();
    let params = HyperParams::zhang(cfg.mu);
    let schedule = AnnealSchedule::mpm(cfg.mf_iters).with_guard(false).with_epsilon(0.0);
    let start = Instant::now();
    match procedure {
        Procedure::Zhang => {
            meanfield::solve(&obs, &params, &schedule, MeanFieldState::max_entropy(obs.lattice()))
                .map_err(|r| LearningError { step: 0, cause: Box::new(r).into() })?;
        }
        Procedure::Hybrid | Procedure::SimpleMcmc => {
            let mode = if procedure == Procedure::Hybrid { LearningMode::Hybrid } else { LearningMode::SimpleMcmc };
            let lc = LearningConfig {
                steps: cfg.learning_steps,
                mf_iters: cfg.mf_iters,
                mf_epsilon: 0.0,
                sampler: SamplerConfig::full(cfg.sweeps, cfg.burn_in, cfg.seed),
                init: params,
                ..LearningConfig::new(mode)
            };
            run_learning(&obs, &lc, None, &mut |_| {})?;
        }
    }
    Ok(start.elapsed().as_secs_f64())
}

/// Median over `repetitions` timed runs, after one untimed warm-up, for
/// each `side x side` lattice. Scene generation is not timed.
pub fn measure_ct(sides: &[usize], procedure: Procedure, cfg: &CtConfig) -> Result<Vec<CtRow>, LearningError> {
    let mut rows = Vec::with_capacity(sides.len());
    for &side in sides {
        let spec = SceneSpec { seed: cfg.seed, ..SceneSpec::square(side) };
        run_once(procedure, &spec, cfg)?;
        let mut times = (0..cfg.repetitions.max(1))
            .map(|_| run_once(procedure, &spec, cfg))
            .collect::<Result<Vec<_>, _>>()?;
        times.sort_by(f64::total_cmp);
        rows.push(CtRow { procedure, n: side * side, seconds: times[times.len() / 2] });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_tiny_size() {
        let cfg = CtConfig { repetitions: 1, sweeps: 10, burn_in: 2, ..CtConfig::default() };
        for p in Procedure::ALL {
            let rows = measure_ct(&[6], p, &cfg).unwrap();
            assert_eq!(rows.len(), 1);
            assert_eq!(rows[0].n, 36);
            assert!(rows[0].seconds > 0.0);
        }
    }
}
