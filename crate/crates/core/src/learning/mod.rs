//! Hyper-parameter learning by Euler steps along the posterior expectations of
//! the conjugate statistics.
//!
//! Each step estimates `<C>` either under mean-field environments
//! ([`LearningMode::Hybrid`]) or under the full posterior
//! ([`LearningMode::SimpleMcmc`]), moves every learnable parameter by
//! `dt * <C>`, clips at the configured floors, and re-solves the mean-field
//! equations for the new MPM estimate.

pub mod hybrid;
pub mod stats;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use hybrid::{block_expectations, exact_block_expectations, BlockEstimate};
pub use stats::{conjugate_stats, conjugate_stats_of, BetaDForm, ConjugateStats, Param};

use crate::error::ModelError;
use crate::field::FieldState;
use crate::frames::Observation;
use crate::mcmc::{self, batch_means, KernelTable, McmcError, SamplerConfig};
use crate::meanfield::{self, AnnealSchedule, DivergenceReport, MeanFieldState};
use crate::metrics;
use crate::params::HyperParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearningMode {
    Hybrid,
    SimpleMcmc,
}

/// Sign convention of the update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowDirection {
    /// `Xi <- Xi + dt <C>`, the discretised form used in practice.
    #[default]
    Euler,
    /// `Xi <- Xi - dt <C>`, the continuous-time flow as written.
    Negative,
}

impl FlowDirection {
    pub fn sign(self) -> f64 {
        match self {
            FlowDirection::Euler => 1.0,
            FlowDirection::Negative => -1.0,
        }
    }
}

/// Lower bounds per learnable parameter; `None` leaves it unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamFloors {
    pub b: Option<f64>,
    pub lambda_d: Option<f64>,
    pub lambda_s: Option<f64>,
    pub alpha_l: Option<f64>,
    pub beta_d: Option<f64>,
    pub t_s: Option<f64>,
}

impl ParamFloors {
    pub fn get(&self, param: Param) -> Option<f64> {
        match param {
            Param::B => self.b,
            Param::LambdaD => self.lambda_d,
            Param::LambdaS => self.lambda_s,
            Param::AlphaL => self.alpha_l,
            Param::BetaD => self.beta_d,
            Param::TS => self.t_s,
        }
    }
}

impl Default for ParamFloors {
    fn default() -> Self {
        ParamFloors {
            b: Some(1e-4),
            lambda_d: Some(1e-4),
            lambda_s: Some(1e-4),
            alpha_l: Some(0.0),
            beta_d: Some(1e-4),
            t_s: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningConfig {
    pub mode: LearningMode,
    pub dt: f64,
    pub steps: usize,
    /// Mean-field sweep budget per step.
    pub mf_iters: usize,
    pub mf_epsilon: f64,
    /// Sweep budget, burn-in and seed of the per-step sampler.
    pub sampler: SamplerConfig,
    pub init: HyperParams,
    pub floors: ParamFloors,
    pub direction: FlowDirection,
    pub beta_d_form: BetaDForm,
}

impl LearningConfig {
    pub fn new(mode: LearningMode) -> Self {
        LearningConfig {
            mode,
            dt: 0.001,
            steps: 50,
            mf_iters: 50,
            mf_epsilon: AnnealSchedule::DEFAULT_EPSILON,
            sampler: SamplerConfig::default(),
            init: HyperParams::learning_init(),
            floors: ParamFloors::default(),
            direction: FlowDirection::default(),
            beta_d_form: BetaDForm::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.sampler.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), LearningError> {
        let bad = |msg: String| LearningError { step: 0, cause: LearningFailure::Config(msg) };
        if !(self.dt >= 0.0 && self.dt.is_finite()) {
            return Err(bad(format!("dt must be a non-negative number, got {}", self.dt)));
        }
        if self.mf_iters == 0 {
            return Err(bad("mf_iters must be positive".into()));
        }
        self.sampler.validate().map_err(|e| bad(e.to_string()))?;
        self.init.validate().map_err(|e| bad(e.to_string()))?;
        Ok(())
    }

    fn schedule(&self) -> AnnealSchedule {
        AnnealSchedule::mpm(self.mf_iters)
            .with_guard(false)
            .with_epsilon(self.mf_epsilon)
    }
}

/// One line of a learning trajectory. Step 0 is the initial snapshot and
/// carries no statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub step: usize,
    pub params: HyperParams,
    pub stats: Option<ConjugateStats>,
    pub std_err: Option<ConjugateStats>,
    pub k: Option<f64>,
    pub l: Option<f64>,
    /// Cumulative wall-clock seconds since the run started.
    pub ct_seconds: f64,
    pub seed: u64,
    /// Parameters held at their floor by this step.
    pub clipped: Vec<Param>,
    pub mf_iterations: usize,
    pub mf_converged: bool,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum LearningFailure {
    #[error(transparent)]
    Divergence(#[from] Box<DivergenceReport>),
    #[error(transparent)]
    Sampler(#[from] McmcError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid learning configuration: {0}")]
    Config(String),
}

#[derive(Clone, Debug, PartialEq, Error)]
#[error("learning aborted at step {step}: {cause}")]
pub struct LearningError {
    pub step: usize,
    pub cause: LearningFailure,
}

/// `Xi + sign * dt * <C>` for every learnable parameter, clipped at floors.
pub fn apply_update(
    params: &HyperParams,
    stats: &ConjugateStats,
    dt: f64,
    direction: FlowDirection,
    floors: &ParamFloors,
) -> (HyperParams, Vec<Param>) {
    let mut next = *params;
    let mut clipped = Vec::new();
    for param in Param::ALL {
        let mut v = param.get(params) + direction.sign() * dt * stats.get(param);
        if let Some(lo) = floors.get(param) {
            if v < lo {
                v = lo;
                clipped.push(param);
            }
        }
        param.set(&mut next, v);
    }
    (next, clipped)
}

/// Per-step generator: the run seed on stream `step`.
pub fn step_rng(seed: u64, step: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step as u64);
    rng
}

/// Full-posterior heat-bath estimate of `<C>` from `chain`, which is
/// advanced in place.
pub fn full_posterior_expectations(
    obs: &Observation,
    p: &HyperParams,
    sweeps: usize,
    burn_in: usize,
    form: BetaDForm,
    chain: &mut FieldState,
    rng: &mut ChaCha8Rng,
) -> Result<BlockEstimate, McmcError> {
    SamplerConfig::full(sweeps, burn_in, 0).validate()?;
    chain.validate(obs.lattice())?;
    let kernel = KernelTable::new(p.beta_d, obs.lattice().max_speed());
    let (mut costs, mut scratch) = (Vec::new(), Vec::new());
    let mut traces: [Vec<f64>; 6] = Default::default();
    for t in 0..sweeps {
        mcmc::sweep_full_with(obs, p, p.beta, &kernel, chain, rng, &mut costs, &mut scratch)?;
        if t >= burn_in {
            let c = conjugate_stats_of(obs, &*chain, p, form).to_array();
            for (trace, v) in traces.iter_mut().zip(c) {
                trace.push(v);
            }
        }
    }
    let mut mean = [0.0; 6];
    let mut se = [0.0; 6];
    for k in 0..6 {
        (mean[k], se[k]) = batch_means(&traces[k]);
    }
    Ok(BlockEstimate { stats: ConjugateStats::from_array(mean), std_err: ConjugateStats::from_array(se) })
}

/// Stateful learning run: keeps the mean-field solution (and, for the
/// simple mode, the Markov chain) warm between steps.
pub struct Learner<'a> {
    obs: &'a Observation,
    config: LearningConfig,
    params: HyperParams,
    mf: MeanFieldState,
    mf_iterations: usize,
    mf_converged: bool,
    chain: FieldState,
    step: usize,
    started: Instant,
}

impl<'a> Learner<'a> {
    /// Solves the mean-field equations at the initial parameters.
    pub fn new(obs: &'a Observation, config: LearningConfig) -> Result<Self, LearningError> {
        config.validate()?;
        let started = Instant::now();
        let params = config.init.with_beta(1.0);
        let sol = meanfield::solve(obs, &params, &config.schedule(), MeanFieldState::max_entropy(obs.lattice()))
            .map_err(|r| LearningError { step: 0, cause: Box::new(r).into() })?;
        let chain = meanfield::quantize(obs.lattice(), &sol.state);
        Ok(Learner {
            obs,
            config,
            params,
            mf: sol.state,
            mf_iterations: sol.iterations,
            mf_converged: sol.converged,
            chain,
            step: 0,
            started,
        })
    }

    pub fn params(&self) -> &HyperParams {
        &self.params
    }

    pub fn mean_field(&self) -> &MeanFieldState {
        &self.mf
    }

    /// Current MPM estimate.
    pub fn estimate(&self) -> FieldState {
        meanfield::quantize(self.obs.lattice(), &self.mf)
    }

    fn record(&self, stats: Option<BlockEstimate>, clipped: Vec<Param>, truth: Option<&FieldState>) -> Result<RunRecord, ModelError> {
        let (k, l) = match truth {
            Some(t) => {
                let a = metrics::angular_length_measures(&self.estimate(), t)?;
                (a.k, a.l)
            }
            None => (None, None),
        };
        Ok(RunRecord {
            step: self.step,
            params: self.params,
            stats: stats.as_ref().map(|s| s.stats),
            std_err: stats.as_ref().map(|s| s.std_err),
            k,
            l,
            ct_seconds: self.started.elapsed().as_secs_f64(),
            seed: self.config.sampler.seed,
            clipped,
            mf_iterations: self.mf_iterations,
            mf_converged: self.mf_converged,
        })
    }

    pub fn initial_record(&self, truth: Option<&FieldState>) -> Result<RunRecord, LearningError> {
        self.record(None, Vec::new(), truth)
            .map_err(|e| LearningError { step: 0, cause: e.into() })
    }

    /// Estimate `<C>`, update the parameters, and re-solve for the estimate.
    pub fn step(&mut self, truth: Option<&FieldState>) -> Result<RunRecord, LearningError> {
        let step = self.step + 1;
        let fail = |cause: LearningFailure| LearningError { step, cause };
        let cfg = &self.config;
        let mut rng = step_rng(cfg.sampler.seed, step);
        let est = match cfg.mode {
            LearningMode::Hybrid => hybrid::block_expectations(
                self.obs,
                &self.params,
                &self.mf,
                cfg.sampler.sweeps,
                cfg.sampler.burn_in,
                cfg.beta_d_form,
                &mut rng,
            ),
            LearningMode::SimpleMcmc => full_posterior_expectations(
                self.obs,
                &self.params,
                cfg.sampler.sweeps,
                cfg.sampler.burn_in,
                cfg.beta_d_form,
                &mut self.chain,
                &mut rng,
            ),
        }
        .map_err(|e| fail(e.into()))?;
        let (next, clipped) = apply_update(&self.params, &est.stats, cfg.dt, cfg.direction, &cfg.floors);
        let sol = meanfield::solve(self.obs, &next, &cfg.schedule(), self.mf.clone())
            .map_err(|r| fail(Box::new(r).into()))?;
        self.params = next;
        self.mf = sol.state;
        self.mf_iterations = sol.iterations;
        self.mf_converged = sol.converged;
        self.step = step;
        self.record(Some(est), clipped, truth).map_err(|e| fail(e.into()))
    }
}

/// Final state of a completed run.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub records: Vec<RunRecord>,
    pub params: HyperParams,
    pub estimate: FieldState,
    pub mean_field: MeanFieldState,
}

/// Run `config.steps` learning steps, handing each record (the initial
/// snapshot first) to `sink` as soon as it exists.
pub fn run_learning(
    obs: &Observation,
    config: &LearningConfig,
    truth: Option<&FieldState>,
    sink: &mut dyn FnMut(&RunRecord),
) -> Result<Trajectory, LearningError> {
    let mut learner = Learner::new(obs, config.clone())?;
    let mut records = Vec::with_capacity(config.steps + 1);
    let first = learner.initial_record(truth)?;
    sink(&first);
    records.push(first);
    for _ in 0..config.steps {
        let rec = learner.step(truth)?;
        sink(&rec);
        records.push(rec);
    }
    Ok(Trajectory {
        records,
        params: learner.params,
        estimate: learner.estimate(),
        mean_field: learner.mf,
    })
}

/// A single step from scratch: mean field from maximum entropy, chain from
/// its quantised solution, generator on stream `step`.
pub fn learning_step(
    params: &HyperParams,
    obs: &Observation,
    config: &LearningConfig,
    step: usize,
) -> Result<(HyperParams, RunRecord), LearningError> {
    let mut cfg = config.clone();
    cfg.init = *params;
    let mut learner = Learner::new(obs, cfg)?;
    learner.step = step.saturating_sub(1);
    let rec = learner.step(None)?;
    Ok((learner.params, rec))
}
