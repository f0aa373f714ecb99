//! Flat TOML run configuration. Every key is optional and unknown keys are
//! rejected.
//!
//! | group    | keys |
//! |----------|------|
//! | run      | `seed` |
//! | model    | `sigma2`, `mu`, `b`, `lambda_d`, `lambda_s`, `alpha_l`, `beta_d`, `t_s`, `beta` |
//! | scene    | `width`, `height`, `max_speed`, `object_x`, `object_y`, `object_width`, `object_height`, `displacement_x`, `displacement_y`, `background`, `exposed`, `object_lo`, `object_hi` |
//! | estimate | `estimate_mode` (`mpm`/`map`), `max_iter`, `epsilon`, `beta0`, `growth`, `overflow_guard` |
//! | learning | `learning_mode` (`hybrid`/`simple_mcmc`), `dt`, `steps`, `mf_iters`, `mf_epsilon`, `direction` (`euler`/`negative`), `beta_d_form` (`squared`/`printed`), `snapshot_every` |
//! | sampler  | `sweeps`, `burn_in` |
//!
//! When `b` is absent, estimation derives it as `1/(2 mu sigma2)` and
//! learning starts from the tabulated `b = 5`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::io::IoError;
use crate::lattice::{Velocity, DEFAULT_MAX_SPEED};
use crate::learning::{BetaDForm, FlowDirection, LearningConfig, LearningMode};
use crate::mcmc::SamplerConfig;
use crate::meanfield::{AnnealSchedule, EstimateMode};
use crate::params::HyperParams;
use crate::scenes::{Rect, SceneSpec};

pub const LEARNING_INIT_B: f64 = 5.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,

    pub sigma2: f64,
    pub mu: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    pub lambda_d: f64,
    pub lambda_s: f64,
    pub alpha_l: f64,
    pub beta_d: f64,
    pub t_s: f64,
    pub beta: f64,

    pub width: usize,
    pub height: usize,
    pub max_speed: i32,
    pub object_x: usize,
    pub object_y: usize,
    pub object_width: usize,
    pub object_height: usize,
    pub displacement_x: i32,
    pub displacement_y: i32,
    pub background: u8,
    pub exposed: u8,
    pub object_lo: u8,
    pub object_hi: u8,

    pub estimate_mode: EstimateMode,
    pub max_iter: usize,
    pub epsilon: f64,
    pub beta0: f64,
    pub growth: f64,
    pub overflow_guard: bool,

    pub learning_mode: LearningMode,
    pub dt: f64,
    pub steps: usize,
    pub mf_iters: usize,
    pub mf_epsilon: f64,
    pub direction: FlowDirection,
    pub beta_d_form: BetaDForm,
    /// Quiver snapshot cadence in steps; 0 disables snapshots.
    pub snapshot_every: usize,

    pub sweeps: usize,
    pub burn_in: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = HyperParams::zhang(21.0);
        let scene = SceneSpec::default();
        let map = AnnealSchedule::map(50);
        let learning = LearningConfig::new(LearningMode::Hybrid);
        RunConfig {
            seed: 0,
            sigma2: p.sigma2,
            mu: p.mu,
            b: None,
            lambda_d: p.lambda_d,
            lambda_s: p.lambda_s,
            alpha_l: p.alpha_l,
            beta_d: p.beta_d,
            t_s: p.t_s,
            beta: p.beta,
            width: scene.width,
            height: scene.height,
            max_speed: DEFAULT_MAX_SPEED,
            object_x: scene.object.x,
            object_y: scene.object.y,
            object_width: scene.object.width,
            object_height: scene.object.height,
            displacement_x: scene.displacement.vx,
            displacement_y: scene.displacement.vy,
            background: scene.background,
            exposed: scene.exposed,
            object_lo: scene.object_lo,
            object_hi: scene.object_hi,
            estimate_mode: EstimateMode::Mpm,
            max_iter: 50,
            epsilon: AnnealSchedule::DEFAULT_EPSILON,
            beta0: map.beta0,
            growth: map.growth,
            overflow_guard: true,
            learning_mode: learning.mode,
            dt: learning.dt,
            steps: learning.steps,
            mf_iters: learning.mf_iters,
            mf_epsilon: learning.mf_epsilon,
            direction: learning.direction,
            beta_d_form: learning.beta_d_form,
            snapshot_every: 10,
            sweeps: learning.sampler.sweeps,
            burn_in: learning.sampler.burn_in,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, IoError> {
        toml::from_str(text).map_err(|e| IoError::Config(e.to_string()))
    }

    /// Canonical text: every key, in declaration order.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config always serialises")
    }

    /// Hex SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    /// Model parameters for estimation, with `b` derived from `mu` unless set.
    pub fn hyper_params(&self) -> HyperParams {
        let base = HyperParams {
            sigma2: self.sigma2,
            mu: self.mu,
            b: 1.0 / (2.0 * self.mu * self.sigma2),
            lambda_d: self.lambda_d,
            lambda_s: self.lambda_s,
            alpha_l: self.alpha_l,
            beta_d: self.beta_d,
            t_s: self.t_s,
            beta: self.beta,
        };
        HyperParams { b: self.b.unwrap_or(base.b), ..base }
    }

    pub fn learning_init(&self) -> HyperParams {
        HyperParams { b: self.b.unwrap_or(LEARNING_INIT_B), ..self.hyper_params() }
    }

    pub fn scene_spec(&self) -> SceneSpec {
        SceneSpec {
            width: self.width,
            height: self.height,
            max_speed: self.max_speed,
            object: Rect { x: self.object_x, y: self.object_y, width: self.object_width, height: self.object_height },
            displacement: Velocity::new(self.displacement_x, self.displacement_y),
            background: self.background,
            exposed: self.exposed,
            object_lo: self.object_lo,
            object_hi: self.object_hi,
            seed: self.seed,
        }
    }

    pub fn schedule(&self) -> AnnealSchedule {
        let base = match self.estimate_mode {
            EstimateMode::Mpm => AnnealSchedule::mpm(self.max_iter),
            EstimateMode::Map => AnnealSchedule { beta0: self.beta0, growth: self.growth, ..AnnealSchedule::map(self.max_iter) },
        };
        base.with_epsilon(self.epsilon).with_guard(self.overflow_guard)
    }

    pub fn learning_config(&self) -> LearningConfig {
        LearningConfig {
            dt: self.dt,
            steps: self.steps,
            mf_iters: self.mf_iters,
            mf_epsilon: self.mf_epsilon,
            sampler: SamplerConfig::full(self.sweeps, self.burn_in, self.seed),
            init: self.learning_init(),
            direction: self.direction,
            beta_d_form: self.beta_d_form,
            ..LearningConfig::new(self.learning_mode)
        }
    }

    /// Check every derived structure.
    pub fn validate(&self) -> Result<(), IoError> {
        self.hyper_params().validate()?;
        self.scene_spec().validate()?;
        self.schedule().validate().map_err(IoError::Config)?;
        self.learning_config().validate().map_err(|e| IoError::Config(e.to_string()))?;
        Ok(())
    }
}
