//! Motion estimation between two grayscale frames with a spatio-temporal
//! Markov random field, and learning of its hyper-parameters from the
//! marginal likelihood.
//!
//! Hidden fields per frame pair: an integer velocity `d_i` and an
//! unpredictability bit `s_i` per pixel, and a line bit `l(i,j)` per
//! nearest-neighbour edge. The posterior energy is built in [`energy`];
//! [`meanfield`] and [`mcmc`] approximate its marginals, [`learning`]
//! adapts the hyper-parameters, and [`oracle`] enumerates tiny instances
//! exactly for verification.
//!
//! ```
//! use mrfmotion::{generate, meanfield, AnnealSchedule, HyperParams, MeanFieldState, SceneSpec};
//!
//! let scene = generate(&SceneSpec::square(10)).unwrap();
//! let obs = scene.observation();
//! let schedule = AnnealSchedule::mpm(50);
//! let sol = meanfield::solve(&obs, &HyperParams::zhang(21.0), &schedule, MeanFieldState::max_entropy(obs.lattice())).unwrap();
//! let estimate = meanfield::quantize(obs.lattice(), &sol.state);
//! assert_eq!(estimate.d.len(), 100);
//! ```

pub mod boltzmann;
pub mod ct;
pub mod energy;
pub mod error;
pub mod field;
pub mod frames;
pub mod io;
pub mod lattice;
pub mod learning;
pub mod mcmc;
pub mod meanfield;
pub mod metrics;
pub mod oracle;
pub mod params;
pub mod scaling;
pub mod scenes;

pub use energy::{energy_of, total_energy, EnergyBreakdown};
pub use error::{ModelError, Result};
pub use field::{FieldState, FieldView};
pub use frames::{FramePair, GrayImage, Observation};
pub use lattice::{Lattice, Velocity, DEFAULT_MAX_SPEED};
pub use learning::{ConjugateStats, LearningConfig, LearningMode, RunRecord};
pub use mcmc::SamplerConfig;
pub use meanfield::{AnnealSchedule, MeanFieldState};
pub use params::HyperParams;
pub use scenes::{generate, Scene, SceneSpec};
