//! Single-site heat-bath sampling of the posterior and Monte Carlo estimates
//! of posterior expectations.
//!
//! Chains use [`ChaCha8Rng`]; a sampler seeded with `seed` draws from
//! `ChaCha8Rng::seed_from_u64(seed)` on stream 0 unless the caller picks
//! another stream.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boltzmann;
use crate::energy::{edge_l_cost, site_d_cost, site_s_cost, smoothness_kernel};
use crate::field::{FieldState, FieldView};
use crate::frames::Observation;
use crate::lattice::Velocity;
use crate::meanfield::{MeanFieldState, MeanFieldView, Variable};
use crate::params::HyperParams;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum McmcError {
    #[error("non-finite conditional for {0}")]
    NonFinite(Variable),
    #[error("invalid sampler configuration: {0}")]
    Config(String),
    #[error("no statistics requested")]
    NoStatistics,
    #[error(transparent)]
    Model(#[from] crate::error::ModelError),
}

/// Variables left free under a clamped environment; everything else is read
/// from the mean-field state.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreeSet {
    pub s: Vec<usize>,
    pub d: Vec<usize>,
    pub l: Vec<usize>,
}

impl FreeSet {
    pub fn site(site: usize) -> Self {
        FreeSet { s: vec![site], d: vec![site], l: vec![] }
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty() && self.d.is_empty() && self.l.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Environment {
    /// Every variable is sampled.
    Full,
    /// Only `free` is sampled; the rest sits at its mean-field expectation.
    Clamped { means: MeanFieldState, free: FreeSet },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub sweeps: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub environment: Environment,
}

impl SamplerConfig {
    pub const DEFAULT_SWEEPS: usize = 100;
    pub const DEFAULT_BURN_IN: usize = 20;

    pub fn full(sweeps: usize, burn_in: usize, seed: u64) -> Self {
        SamplerConfig { sweeps, burn_in, seed, environment: Environment::Full }
    }

    pub fn validate(&self) -> Result<(), McmcError> {
        if self.sweeps == 0 {
            return Err(McmcError::Config("sweeps must be positive".into()));
        }
        if self.burn_in >= self.sweeps {
            return Err(McmcError::Config(format!(
                "burn_in ({}) must be smaller than sweeps ({})",
                self.burn_in, self.sweeps
            )));
        }
        Ok(())
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self::full(Self::DEFAULT_SWEEPS, Self::DEFAULT_BURN_IN, 0)
    }
}

/// Chain values for free variables, mean-field values for the rest.
pub struct ClampedView<'a> {
    chain: &'a FieldState,
    means: MeanFieldView<'a>,
    free_s: Vec<bool>,
    free_d: Vec<bool>,
    free_l: Vec<bool>,
}

impl<'a> ClampedView<'a> {
    pub fn new(chain: &'a FieldState, means: MeanFieldView<'a>, free: &FreeSet) -> Self {
        let mark = |n: usize, idx: &[usize]| {
            let mut v = vec![false; n];
            idx.iter().for_each(|&i| v[i] = true);
            v
        };
        ClampedView {
            chain,
            means,
            free_s: mark(chain.s.len(), &free.s),
            free_d: mark(chain.d.len(), &free.d),
            free_l: mark(chain.l.len(), &free.l),
        }
    }
}

impl FieldView for ClampedView<'_> {
    fn s(&self, site: usize) -> f64 {
        if self.free_s[site] { self.chain.s(site) } else { self.means.s(site) }
    }
    fn d(&self, site: usize) -> [f64; 2] {
        if self.free_d[site] { self.chain.d(site) } else { self.means.d(site) }
    }
    fn offset(&self, site: usize) -> Velocity {
        if self.free_d[site] { self.chain.offset(site) } else { self.means.offset(site) }
    }
    fn l(&self, edge: usize) -> f64 {
        if self.free_l[edge] { self.chain.l(edge) } else { self.means.l(edge) }
    }
}

/// Smoothness kernel tabulated over integer squared distances.
#[derive(Clone, Debug)]
pub(crate) struct KernelTable {
    values: Vec<f64>,
}

impl KernelTable {
    pub(crate) fn new(beta_d: f64, max_speed: i32) -> Self {
        let span = 2 * max_speed;
        let max_r = 2 * span * span;
        KernelTable {
            values: (0..=max_r).map(|r| smoothness_kernel(beta_d, f64::from(r))).collect(),
        }
    }

    #[inline]
    pub(crate) fn get(&self, a: Velocity, b: Velocity) -> f64 {
        self.values[a.dist_sq(b) as usize]
    }
}

fn coupling_bits(a: u8, b: u8) -> f64 {
    if a == b { -1.0 } else { 1.0 }
}

fn check(costs: &[f64], variable: Variable) -> Result<(), McmcError> {
    if costs.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(McmcError::NonFinite(variable))
    }
}

/// Heat-bath sweep over the full posterior: every `s` (raster), then every
/// `d`, then every `l`, each drawn from its exact conditional.
pub fn gibbs_sweep_full<R: Rng + ?Sized>(
    obs: &Observation,
    p: &HyperParams,
    beta: f64,
    fields: &mut FieldState,
    rng: &mut R,
) -> Result<(), McmcError> {
    let kernel = KernelTable::new(p.beta_d, obs.lattice().max_speed());
    let mut scratch = Vec::with_capacity(128);
    let mut costs = Vec::with_capacity(128);
    sweep_full_with(obs, p, beta, &kernel, fields, rng, &mut costs, &mut scratch)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn sweep_full_with<R: Rng + ?Sized>(
    obs: &Observation,
    p: &HyperParams,
    beta: f64,
    kernel: &KernelTable,
    fields: &mut FieldState,
    rng: &mut R,
    costs: &mut Vec<f64>,
    scratch: &mut Vec<f64>,
) -> Result<(), McmcError> {
    let lat = obs.lattice();
    for i in 0..lat.num_sites() {
        let res = obs.residual(i, fields.d[i]);
        let (mut k0, mut k1) = (0.0, 0.0);
        for n in lat.neighbors(i) {
            let w = 1.0 - f64::from(fields.l[n.edge]);
            k0 += w * coupling_bits(0, fields.s[n.site]);
            k1 += w * coupling_bits(1, fields.s[n.site]);
        }
        let c = [p.b * res + 2.0 * p.lambda_s * k0, p.t_s + 2.0 * p.lambda_s * k1];
        check(&c, Variable::S(i))?;
        fields.s[i] = boltzmann::sample_bit(c[0], c[1], beta, rng);
    }

    for i in 0..lat.num_sites() {
        let sup = lat.support(i);
        let data_w = p.b * (1.0 - f64::from(fields.s[i]));
        let nbrs = lat.neighbors(i);
        costs.clear();
        for (k, &res) in obs.residuals(i).iter().enumerate() {
            let v = sup.get(k);
            let mut smooth = 0.0;
            for n in nbrs {
                smooth += kernel.get(v, fields.d[n.site]) * (1.0 - f64::from(fields.l[n.edge]));
            }
            costs.push(data_w * res + 2.0 * p.lambda_d * smooth);
        }
        check(costs, Variable::D(i))?;
        let k = boltzmann::sample_index(costs, beta, rng, scratch);
        fields.d[i] = sup.get(k);
    }

    for (e, edge) in lat.edges().iter().enumerate() {
        let off = 2.0
            * (p.lambda_d * kernel.get(fields.d[edge.a], fields.d[edge.b])
                + p.lambda_s * coupling_bits(fields.s[edge.a], fields.s[edge.b]));
        let on = 2.0 * p.alpha_l / obs.gap_sq(e);
        check(&[off, on], Variable::L(e))?;
        fields.l[e] = boltzmann::sample_bit(off, on, beta, rng);
    }
    Ok(())
}

/// Heat-bath sweep over the free variables only, with conditionals taken
/// from the restriction of the energy to each variable and every clamped
/// variable read from `means`.
#[allow(clippy::too_many_arguments)]
pub fn gibbs_sweep_clamped<R: Rng + ?Sized>(
    obs: &Observation,
    p: &HyperParams,
    beta: f64,
    means: &MeanFieldState,
    free: &FreeSet,
    fields: &mut FieldState,
    rng: &mut R,
) -> Result<(), McmcError> {
    let lat = obs.lattice();
    let mut costs = Vec::new();
    let mut scratch = Vec::new();
    let mut sorted = free.clone();
    sorted.s.sort_unstable();
    sorted.d.sort_unstable();
    sorted.l.sort_unstable();

    for &i in &sorted.s {
        let c = {
            let view = ClampedView::new(fields, means.view(lat), free);
            [site_s_cost(obs, p, &view, i, 0.0), site_s_cost(obs, p, &view, i, 1.0)]
        };
        check(&c, Variable::S(i))?;
        fields.s[i] = boltzmann::sample_bit(c[0], c[1], beta, rng);
    }
    for &i in &sorted.d {
        costs.clear();
        {
            let view = ClampedView::new(fields, means.view(lat), free);
            costs.extend(lat.support(i).iter().map(|v| site_d_cost(obs, p, &view, i, v)));
        }
        check(&costs, Variable::D(i))?;
        let k = boltzmann::sample_index(&costs, beta, rng, &mut scratch);
        fields.d[i] = lat.support(i).get(k);
    }
    for &e in &sorted.l {
        let c = {
            let view = ClampedView::new(fields, means.view(lat), free);
            [edge_l_cost(obs, p, &view, e, 0.0), edge_l_cost(obs, p, &view, e, 1.0)]
        };
        check(&c, Variable::L(e))?;
        fields.l[e] = boltzmann::sample_bit(c[0], c[1], beta, rng);
    }
    Ok(())
}

/// One sweep under the given environment.
pub fn gibbs_sweep<R: Rng + ?Sized>(
    obs: &Observation,
    p: &HyperParams,
    beta: f64,
    env: &Environment,
    fields: &mut FieldState,
    rng: &mut R,
) -> Result<(), McmcError> {
    match env {
        Environment::Full => gibbs_sweep_full(obs, p, beta, fields, rng),
        Environment::Clamped { means, free } => gibbs_sweep_clamped(obs, p, beta, means, free, fields, rng),
    }
}

/// A bounded functional of the (possibly partially clamped) field.
pub type Statistic<'a> = &'a dyn Fn(&dyn FieldView) -> f64;

/// Time averages with batch-means standard errors.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
    pub samples: usize,
    /// Chain state after the last sweep, for warm starts.
    pub final_state: FieldState,
}

/// Number of batches used for the standard errors.
pub const BATCHES: usize = 20;

/// Run `config.sweeps` sweeps from `init` at `p.beta` and average every
/// statistic over the sweeps after burn-in.
pub fn estimate_expectations(
    statistics: &[Statistic<'_>],
    config: &SamplerConfig,
    obs: &Observation,
    p: &HyperParams,
    init: &FieldState,
) -> Result<Estimate, McmcError> {
    let mut rng = config.rng();
    estimate_with_rng(statistics, config, obs, p, init, &mut rng)
}

pub fn estimate_with_rng<R: Rng + ?Sized>(
    statistics: &[Statistic<'_>],
    config: &SamplerConfig,
    obs: &Observation,
    p: &HyperParams,
    init: &FieldState,
    rng: &mut R,
) -> Result<Estimate, McmcError> {
    if statistics.is_empty() {
        return Err(McmcError::NoStatistics);
    }
    config.validate()?;
    init.validate(obs.lattice())?;
    let lat = obs.lattice();
    let mut fields = init.clone();
    let mut traces: Vec<Vec<f64>> = vec![Vec::with_capacity(config.sweeps - config.burn_in); statistics.len()];
    let kernel = KernelTable::new(p.beta_d, lat.max_speed());
    let (mut costs, mut scratch) = (Vec::new(), Vec::new());
    for t in 0..config.sweeps {
        match &config.environment {
            Environment::Full => sweep_full_with(obs, p, p.beta, &kernel, &mut fields, rng, &mut costs, &mut scratch)?,
            Environment::Clamped { means, free } => gibbs_sweep_clamped(obs, p, p.beta, means, free, &mut fields, rng)?,
        }
        if t >= config.burn_in {
            match &config.environment {
                Environment::Full => {
                    for (trace, f) in traces.iter_mut().zip(statistics) {
                        trace.push(f(&fields));
                    }
                }
                Environment::Clamped { means, free } => {
                    let view = ClampedView::new(&fields, means.view(lat), free);
                    for (trace, f) in traces.iter_mut().zip(statistics) {
                        trace.push(f(&view));
                    }
                }
            }
        }
    }
    let (mean, std_err) = traces.iter().map(|t| batch_means(t)).unzip();
    Ok(Estimate {
        mean,
        std_err,
        samples: config.sweeps - config.burn_in,
        final_state: fields,
    })
}

/// Mean and batch-means standard error of a correlated trace.
pub fn batch_means(trace: &[f64]) -> (f64, f64) {
    let n = trace.len();
    let mean = trace.iter().sum::<f64>() / n as f64;
    let batches = BATCHES.min(n);
    if batches < 2 {
        return (mean, f64::NAN);
    }
    let size = n / batches;
    let bm: Vec<f64> = (0..batches)
        .map(|b| trace[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let grand = bm.iter().sum::<f64>() / batches as f64;
    let var = bm.iter().map(|x| (x - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (mean, (var / batches as f64).sqrt())
}
