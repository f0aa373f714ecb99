//! Mean-field inference: single-variable local costs with neighbours replaced
//! by their expectations, Gauss-Seidel fixed-point sweeps, annealed solves, and
//! quantisation of the converged means.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boltzmann::{self, LN_F64_MAX};
use crate::energy::{coupling_kernel, smoothness_kernel};
use crate::field::{FieldState, FieldView};
use crate::frames::Observation;
use crate::lattice::{Lattice, Velocity};
use crate::params::HyperParams;

/// Expectations `<s_i>`, `<d_i>`, `<l(i,j)>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldState {
    pub s: Vec<f64>,
    pub d: Vec<[f64; 2]>,
    pub l: Vec<f64>,
}

impl MeanFieldState {
    /// `<s> = <l> = 1/2`, `<d> = 0`.
    pub fn max_entropy(lattice: &Lattice) -> Self {
        MeanFieldState {
            s: vec![0.5; lattice.num_sites()],
            d: vec![[0.0, 0.0]; lattice.num_sites()],
            l: vec![0.5; lattice.num_edges()],
        }
    }

    /// Embed a binary configuration.
    pub fn from_fields(fields: &FieldState) -> Self {
        MeanFieldState {
            s: fields.s.iter().map(|&b| f64::from(b)).collect(),
            d: fields.d.iter().map(|v| v.as_f64()).collect(),
            l: fields.l.iter().map(|&b| f64::from(b)).collect(),
        }
    }

    pub fn view<'a>(&'a self, lattice: &'a Lattice) -> MeanFieldView<'a> {
        MeanFieldView { mf: self, lattice }
    }

    /// True when every mean lies in its admissible range.
    pub fn in_range(&self, max_speed: i32) -> bool {
        let dmax = f64::from(max_speed);
        self.s.iter().chain(&self.l).all(|&x| (0.0..=1.0).contains(&x))
            && self
                .d
                .iter()
                .flatten()
                .all(|&x| x.is_finite() && x.abs() <= dmax + 1e-12)
    }
}

/// Mean-field state read through the lattice, so that `<d_i>` can be turned
/// into a pixel offset with [`quantize`]'s rounding.
#[derive(Clone, Copy, Debug)]
pub struct MeanFieldView<'a> {
    mf: &'a MeanFieldState,
    lattice: &'a Lattice,
}

impl FieldView for MeanFieldView<'_> {
    fn s(&self, site: usize) -> f64 {
        self.mf.s[site]
    }
    fn d(&self, site: usize) -> [f64; 2] {
        self.mf.d[site]
    }
    fn offset(&self, site: usize) -> Velocity {
        self.lattice.support(site).quantize(self.mf.d[site])
    }
    fn l(&self, edge: usize) -> f64 {
        self.mf.l[edge]
    }
}

/// Variable addressed by a diagnostic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variable {
    S(usize),
    D(usize),
    L(usize),
}

impl std::fmt::Display for Variable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variable::S(i) => write!(f, "s at site {i}"),
            Variable::D(i) => write!(f, "d at site {i}"),
            Variable::L(e) => write!(f, "l at edge {e}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error, Serialize, Deserialize)]
pub enum MeanFieldError {
    #[error("non-finite local cost for {variable}")]
    NonFinite { variable: Variable },

    /// The unshifted Boltzmann ratio `exp(beta * spread)` of a local cost
    /// table is not representable in f64.
    #[error("Boltzmann weights overflow for {variable}: beta * cost spread = {exponent:.1}")]
    Overflow { variable: Variable, exponent: f64 },

    #[error("mean left its admissible range after the sweep")]
    OutOfRange,
}

/// Two-entry cost table for `s_i`, neighbours at their means.
pub fn local_cost_s(obs: &Observation, p: &HyperParams, mf: &MeanFieldState, site: usize) -> [f64; 2] {
    let view = mf.view(obs.lattice());
    let data = p.b * obs.residual(site, view.offset(site));
    let mut c = [data, p.t_s];
    for n in obs.lattice().neighbors(site) {
        let w = 2.0 * p.lambda_s * (1.0 - mf.l[n.edge]);
        let sj = mf.s[n.site];
        c[0] += w * coupling_kernel(0.0, sj);
        c[1] += w * coupling_kernel(1.0, sj);
    }
    c
}

/// Cost table for `d_i` over the site's support (support order).
pub fn local_cost_d(obs: &Observation, p: &HyperParams, mf: &MeanFieldState, site: usize) -> Vec<f64> {
    let mut out = Vec::new();
    local_cost_d_into(obs, p, mf, site, &mut out);
    out
}

fn local_cost_d_into(obs: &Observation, p: &HyperParams, mf: &MeanFieldState, site: usize, out: &mut Vec<f64>) {
    out.clear();
    let lat = obs.lattice();
    let sup = lat.support(site);
    let data_weight = p.b * (1.0 - mf.s[site]);
    let mut nbrs = [([0.0f64; 2], 0.0f64); 4];
    let mut count = 0;
    for n in lat.neighbors(site) {
        nbrs[count] = (mf.d[n.site], 2.0 * p.lambda_d * (1.0 - mf.l[n.edge]));
        count += 1;
    }
    let nbrs = &nbrs[..count];
    for (k, &res) in obs.residuals(site).iter().enumerate() {
        let v = sup.get(k);
        let (vx, vy) = (f64::from(v.vx), f64::from(v.vy));
        let mut c = data_weight * res;
        for &(dj, w) in nbrs {
            let dx = vx - dj[0];
            let dy = vy - dj[1];
            c += w * smoothness_kernel(p.beta_d, dx * dx + dy * dy);
        }
        out.push(c);
    }
}

/// Two-entry cost table for `l(i,j)`, endpoints at their means.
pub fn local_cost_l(obs: &Observation, p: &HyperParams, mf: &MeanFieldState, edge: usize) -> [f64; 2] {
    let e = obs.lattice().edge(edge);
    let (da, db) = (mf.d[e.a], mf.d[e.b]);
    let r = (da[0] - db[0]).powi(2) + (da[1] - db[1]).powi(2);
    let off = 2.0 * (p.lambda_d * smoothness_kernel(p.beta_d, r) + p.lambda_s * coupling_kernel(mf.s[e.a], mf.s[e.b]));
    [off, 2.0 * p.alpha_l / obs.gap_sq(edge)]
}

fn check_table(costs: &[f64], beta: f64, guard: bool, variable: Variable) -> Result<(), MeanFieldError> {
    if costs.iter().any(|c| !c.is_finite()) {
        return Err(MeanFieldError::NonFinite { variable });
    }
    if guard {
        let exponent = beta * boltzmann::spread(costs);
        if exponent > LN_F64_MAX {
            return Err(MeanFieldError::Overflow { variable, exponent });
        }
    }
    Ok(())
}

fn bit_mean(c: [f64; 2], beta: f64) -> f64 {
    boltzmann::logistic(-beta * (c[1] - c[0]))
}

/// One Gauss-Seidel pass (all `s`, then all `d`, then all `l`, raster order),
/// returning the new state and
/// `eps_t = N^-1 (|ds|^2 + |dd|^2 + |dl|^2)^(1/2)`.
///
/// With `guard` set, a local table whose unshifted weights would overflow is
/// reported instead of being silently renormalised.
pub fn mf_sweep(
    obs: &Observation,
    p: &HyperParams,
    state: &MeanFieldState,
    beta: f64,
    guard: bool,
) -> Result<(MeanFieldState, f64), MeanFieldError> {
    let lat = obs.lattice();
    let mut next = state.clone();
    let mut sq = 0.0;

    for i in 0..lat.num_sites() {
        let c = local_cost_s(obs, p, &next, i);
        check_table(&c, beta, guard, Variable::S(i))?;
        let m = bit_mean(c, beta);
        sq += (m - next.s[i]).powi(2);
        next.s[i] = m;
    }

    let mut costs = Vec::with_capacity(121);
    let mut w = Vec::with_capacity(121);
    for i in 0..lat.num_sites() {
        local_cost_d_into(obs, p, &next, i, &mut costs);
        check_table(&costs, beta, guard, Variable::D(i))?;
        boltzmann::weights_into(&costs, beta, &mut w);
        let sup = lat.support(i);
        let mut m = [0.0, 0.0];
        for (k, &wk) in w.iter().enumerate() {
            let v = sup.get(k);
            m[0] += wk * f64::from(v.vx);
            m[1] += wk * f64::from(v.vy);
        }
        // keep means inside the support box despite rounding in the weights
        m[0] = m[0].clamp(f64::from(sup.vx_lo), f64::from(sup.vx_hi));
        m[1] = m[1].clamp(f64::from(sup.vy_lo), f64::from(sup.vy_hi));
        sq += (m[0] - next.d[i][0]).powi(2) + (m[1] - next.d[i][1]).powi(2);
        next.d[i] = m;
    }

    for e in 0..lat.num_edges() {
        let c = local_cost_l(obs, p, &next, e);
        check_table(&c, beta, guard, Variable::L(e))?;
        let m = bit_mean(c, beta);
        sq += (m - next.l[e]).powi(2);
        next.l[e] = m;
    }

    if !next.in_range(lat.max_speed()) {
        return Err(MeanFieldError::OutOfRange);
    }
    Ok((next, sq.sqrt() / lat.num_sites() as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateMode {
    /// Posterior-marginal maximiser: `beta = 1` throughout.
    Mpm,
    /// Annealed towards the posterior mode: `beta(t) = beta0 * growth^t`.
    Map,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub mode: EstimateMode,
    pub beta0: f64,
    pub growth: f64,
    pub max_iter: usize,
    pub epsilon: f64,
    /// Report a divergence when a local Boltzmann ratio leaves the f64 range.
    pub overflow_guard: bool,
}

impl AnnealSchedule {
    pub const DEFAULT_EPSILON: f64 = 1.0e-5;

    pub fn mpm(max_iter: usize) -> Self {
        AnnealSchedule {
            mode: EstimateMode::Mpm,
            beta0: 1.0,
            growth: 1.0,
            max_iter,
            epsilon: Self::DEFAULT_EPSILON,
            overflow_guard: true,
        }
    }

    pub fn map(max_iter: usize) -> Self {
        AnnealSchedule {
            mode: EstimateMode::Map,
            beta0: 0.5,
            growth: 1.05,
            max_iter,
            epsilon: Self::DEFAULT_EPSILON,
            overflow_guard: false,
        }
    }

    pub fn with_guard(self, overflow_guard: bool) -> Self {
        AnnealSchedule { overflow_guard, ..self }
    }

    pub fn with_epsilon(self, epsilon: f64) -> Self {
        AnnealSchedule { epsilon, ..self }
    }

    pub fn beta_at(&self, t: usize) -> f64 {
        match self.mode {
            EstimateMode::Mpm => 1.0,
            EstimateMode::Map => self.beta0 * self.growth.powi(t as i32),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.mode == EstimateMode::Map && !(self.beta0 > 0.0 && self.growth >= 1.0) {
            return Err(format!(
                "annealing needs beta0 > 0 and growth >= 1, got {} and {}",
                self.beta0, self.growth
            ));
        }
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return Err(format!("epsilon must be non-negative, got {}", self.epsilon));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MfSolution {
    pub state: MeanFieldState,
    pub iterations: usize,
    pub converged: bool,
    pub eps_trace: Vec<f64>,
    pub beta_trace: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Error, Serialize, Deserialize)]
#[error("mean-field iteration diverged at sweep {iteration}: {cause}")]
pub struct DivergenceReport {
    pub iteration: usize,
    pub cause: MeanFieldError,
    pub eps_trace: Vec<f64>,
    /// Last state that completed a sweep.
    pub last_state: MeanFieldState,
}

/// Iterate [`mf_sweep`] under the schedule until `eps_t < epsilon` or the
/// iteration budget runs out.
pub fn solve(
    obs: &Observation,
    p: &HyperParams,
    schedule: &AnnealSchedule,
    init: MeanFieldState,
) -> Result<MfSolution, DivergenceReport> {
    let mut state = init;
    let mut eps_trace = Vec::new();
    let mut beta_trace = Vec::new();
    let mut converged = false;
    for t in 0..schedule.max_iter {
        let beta = schedule.beta_at(t);
        match mf_sweep(obs, p, &state, beta, schedule.overflow_guard) {
            Ok((next, eps)) => {
                state = next;
                eps_trace.push(eps);
                beta_trace.push(beta);
                if eps < schedule.epsilon {
                    converged = true;
                    break;
                }
            }
            Err(cause) => {
                return Err(DivergenceReport {
                    iteration: t,
                    cause,
                    eps_trace,
                    last_state: state,
                })
            }
        }
    }
    Ok(MfSolution {
        iterations: eps_trace.len(),
        state,
        converged,
        eps_trace,
        beta_trace,
    })
}

/// Nearest discrete configuration: velocities rounded half away from zero
/// (and kept in the support), bits thresholded at 1/2 with ties to 0.
pub fn quantize(lattice: &Lattice, state: &MeanFieldState) -> FieldState {
    FieldState {
        d: state
            .d
            .iter()
            .enumerate()
            .map(|(i, &d)| lattice.support(i).quantize(d))
            .collect(),
        s: state.s.iter().map(|&x| u8::from(x > 0.5)).collect(),
        l: state.l.iter().map(|&x| u8::from(x > 0.5)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{edge_l_cost, site_d_cost, site_s_cost};
    use crate::field::Overlay;
    use crate::frames::{FramePair, GrayImage};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform_obs(w: usize, h: usize, v: u8, max_speed: i32) -> Observation {
        let img = GrayImage::filled(w, h, v);
        Observation::new(FramePair::new(img.clone(), img).unwrap(), max_speed).unwrap()
    }

    fn random_instance(seed: u64) -> (Observation, MeanFieldState, HyperParams) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, h) = (2, 2);
        let prev: Vec<u8> = (0..4).map(|_| rng.gen()).collect();
        let curr: Vec<u8> = (0..4).map(|_| rng.gen()).collect();
        let frames = FramePair::new(GrayImage::new(w, h, prev).unwrap(), GrayImage::new(w, h, curr).unwrap()).unwrap();
        let obs = Observation::new(frames, 1).unwrap();
        let lat = obs.lattice();
        let mf = MeanFieldState {
            s: (0..4).map(|_| rng.gen()).collect(),
            d: (0..4)
                .map(|i| {
                    let sup = lat.support(i);
                    [
                        rng.gen_range(f64::from(sup.vx_lo)..=f64::from(sup.vx_hi)),
                        rng.gen_range(f64::from(sup.vy_lo)..=f64::from(sup.vy_hi)),
                    ]
                })
                .collect(),
            l: (0..lat.num_edges()).map(|_| rng.gen()).collect(),
        };
        let p = HyperParams {
            b: rng.gen_range(0.001..0.05),
            lambda_d: rng.gen_range(0.5..3.0),
            lambda_s: rng.gen_range(0.5..3.0),
            alpha_l: rng.gen_range(0.0..300.0),
            beta_d: rng.gen_range(0.1..4.0),
            t_s: rng.gen_range(-2.0..6.0),
            ..HyperParams::default()
        };
        (obs, mf, p)
    }

    #[test]
    fn s_table_without_coupling_is_flat_on_identical_frames() {
        let obs = uniform_obs(3, 3, 17, 1);
        let mf = MeanFieldState::max_entropy(obs.lattice());
        let p = HyperParams { lambda_s: 0.0, t_s: 0.0, ..HyperParams::default() };
        assert_eq!(local_cost_s(&obs, &p, &mf, 4), [0.0, 0.0]);
        assert_eq!(bit_mean(local_cost_s(&obs, &p, &mf, 4), 1.0), 0.5);
    }

    #[test]
    fn chemical_potential_alone_gives_logistic_mean() {
        let obs = uniform_obs(3, 3, 17, 1);
        let mf = MeanFieldState::max_entropy(obs.lattice());
        let p = HyperParams { lambda_s: 0.0, t_s: 5.0, ..HyperParams::default() };
        let m = bit_mean(local_cost_s(&obs, &p, &mf, 4), 1.0);
        assert!((m - 1.0 / (1.0 + 5f64.exp())).abs() < 1e-15);
        assert!((m - 0.00669).abs() < 1e-5);
    }

    #[test]
    fn d_table_flat_without_smoothing() {
        let obs = uniform_obs(5, 5, 40, 1);
        let mf = MeanFieldState::max_entropy(obs.lattice());
        let p = HyperParams { lambda_d: 0.0, ..HyperParams::default() };
        let t = local_cost_d(&obs, &p, &mf, 12);
        assert_eq!(t.len(), 9);
        assert!(t.iter().all(|&c| c == t[0]));
    }

    #[test]
    fn d_table_lengths() {
        let obs = uniform_obs(30, 30, 0, 5);
        let mf = MeanFieldState::max_entropy(obs.lattice());
        let p = HyperParams::default();
        assert_eq!(local_cost_d(&obs, &p, &mf, obs.lattice().site(15, 15)).len(), 121);
        assert_eq!(local_cost_d(&obs, &p, &mf, 0).len(), 36);
    }

    #[test]
    fn l_table_term_by_term() {
        let frames = FramePair::new(GrayImage::new(2, 1, vec![0, 255]).unwrap(), GrayImage::new(2, 1, vec![0, 255]).unwrap()).unwrap();
        let obs = Observation::new(frames, 0).unwrap();
        let mf = MeanFieldState { s: vec![0.3, 0.3], d: vec![[0.0, 0.0]; 2], l: vec![0.5] };
        let p = HyperParams::default();
        let c = local_cost_l(&obs, &p, &mf, 0);
        assert!((c[0] + 2.0 * (p.lambda_d + p.lambda_s)).abs() < 1e-12);
        assert!(c[1] < 0.01 && c[1] > 0.0);

        let img = GrayImage::new(2, 1, vec![9, 9]).unwrap();
        let obs = Observation::new(FramePair::new(img.clone(), img).unwrap(), 0).unwrap();
        let c = local_cost_l(&obs, &p, &mf, 0);
        assert_eq!(c[1], 2.0 * 200.0);
        assert!(bit_mean(c, 1.0) < 1e-100);
    }

    #[test]
    fn tables_match_restrictions_of_the_total_energy() {
        for seed in 0..20 {
            let (obs, mf, p) = random_instance(seed);
            let lat = obs.lattice();
            let view = mf.view(lat);
            for i in 0..lat.num_sites() {
                let t = local_cost_s(&obs, &p, &mf, i);
                for (s, &c) in t.iter().enumerate() {
                    let direct = site_s_cost(&obs, &p, &view, i, s as f64);
                    assert!((c - direct).abs() <= 1e-9 * direct.abs().max(1.0));
                }
                // differences of full-energy evaluations
                let e0 = crate::energy::energy_of(&obs, &Overlay::new(&view).with_s(i, 0.0), &p).total;
                let e1 = crate::energy::energy_of(&obs, &Overlay::new(&view).with_s(i, 1.0), &p).total;
                assert!(((t[1] - t[0]) - (e1 - e0)).abs() <= 1e-9 * e0.abs().max(1.0));

                let td = local_cost_d(&obs, &p, &mf, i);
                let sup = lat.support(i);
                let base = crate::energy::energy_of(&obs, &Overlay::new(&view).with_d(i, sup.get(0)), &p).total;
                for (k, &c) in td.iter().enumerate() {
                    let v = sup.get(k);
                    let direct = site_d_cost(&obs, &p, &view, i, v);
                    assert!((c - direct).abs() <= 1e-9 * direct.abs().max(1.0));
                    let ek = crate::energy::energy_of(&obs, &Overlay::new(&view).with_d(i, v), &p).total;
                    assert!(((c - td[0]) - (ek - base)).abs() <= 1e-9 * base.abs().max(1.0));
                }
            }
            for e in 0..lat.num_edges() {
                let t = local_cost_l(&obs, &p, &mf, e);
                for (l, &c) in t.iter().enumerate() {
                    let direct = edge_l_cost(&obs, &p, &view, e, l as f64);
                    assert!((c - direct).abs() <= 1e-9 * direct.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn zero_beta_gives_uniform_means() {
        for (w, h) in [(1, 1), (2, 3), (6, 4)] {
            let frames = FramePair::new(
                GrayImage::new(w, h, (0..w * h).map(|k| (k * 37 % 256) as u8).collect()).unwrap(),
                GrayImage::new(w, h, (0..w * h).map(|k| (k * 91 % 256) as u8).collect()).unwrap(),
            )
            .unwrap();
            let obs = Observation::new(frames, 2).unwrap();
            let lat = obs.lattice();
            let init = MeanFieldState::max_entropy(lat);
            let (next, _) = mf_sweep(&obs, &HyperParams::default(), &init, 0.0, true).unwrap();
            assert!(next.s.iter().all(|&x| x == 0.5));
            assert!(next.l.iter().all(|&x| x == 0.5));
            for i in 0..lat.num_sites() {
                let sup = lat.support(i);
                let mx = f64::from(sup.vx_lo + sup.vx_hi) / 2.0;
                let my = f64::from(sup.vy_lo + sup.vy_hi) / 2.0;
                assert!((next.d[i][0] - mx).abs() < 1e-12 && (next.d[i][1] - my).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fixed_point_is_idempotent() {
        let (obs, _, p) = random_instance(7);
        let sched = AnnealSchedule::mpm(500).with_epsilon(1e-13);
        let sol = solve(&obs, &p, &sched, MeanFieldState::max_entropy(obs.lattice())).unwrap();
        assert!(sol.converged);
        let (_, eps) = mf_sweep(&obs, &p, &sol.state, 1.0, true).unwrap();
        assert!(eps < 1e-10);
    }

    #[test]
    fn sweeps_are_deterministic() {
        let (obs, mf, p) = random_instance(11);
        let a = mf_sweep(&obs, &p, &mf, 1.0, false).unwrap();
        let b = mf_sweep(&obs, &p, &mf, 1.0, false).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1.to_bits(), b.1.to_bits());
    }

    #[test]
    fn zero_budget_returns_init() {
        let obs = uniform_obs(3, 3, 0, 1);
        let init = MeanFieldState::max_entropy(obs.lattice());
        let sol = solve(&obs, &HyperParams::default(), &AnnealSchedule::mpm(0), init.clone()).unwrap();
        assert_eq!(sol.state, init);
        assert!(!sol.converged);
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn mpm_keeps_unit_beta_and_map_anneals() {
        let (obs, _, p) = random_instance(3);
        let init = MeanFieldState::max_entropy(obs.lattice());
        let sched = AnnealSchedule::mpm(20).with_epsilon(0.0).with_guard(false);
        let sol = solve(&obs, &p, &sched, init.clone()).unwrap();
        assert!(sol.beta_trace.iter().all(|&b| b == 1.0));
        let sol = solve(&obs, &p, &AnnealSchedule::map(20).with_epsilon(0.0), init).unwrap();
        assert!(sol.beta_trace.windows(2).all(|w| w[1] >= w[0]));
        assert!(sol.beta_trace[0] == 0.5);
    }

    #[test]
    fn overflow_guard_reports_site_and_variable() {
        let frames = FramePair::new(
            GrayImage::new(3, 1, vec![0, 0, 0]).unwrap(),
            GrayImage::new(3, 1, vec![0, 255, 0]).unwrap(),
        )
        .unwrap();
        let obs = Observation::new(frames, 1).unwrap();
        let init = MeanFieldState::max_entropy(obs.lattice());
        let err = solve(&obs, &HyperParams::zhang(1.0), &AnnealSchedule::mpm(10), init.clone()).unwrap_err();
        assert_eq!(err.iteration, 0);
        assert!(matches!(err.cause, MeanFieldError::Overflow { variable: Variable::S(1), .. }));
        // same instance without the guard is renormalised and completes
        assert!(solve(&obs, &HyperParams::zhang(1.0), &AnnealSchedule::mpm(10).with_guard(false), init).is_ok());
    }

    #[test]
    fn quantize_rules() {
        let lat = Lattice::new(2, 1).unwrap();
        let mf = MeanFieldState {
            s: vec![0.5, 0.51],
            d: vec![[-0.6, 0.0], [0.4, -0.0]],
            l: vec![0.5],
        };
        let q = quantize(&lat, &mf);
        assert_eq!(q.s, vec![0, 1]);
        assert_eq!(q.l, vec![0]);
        assert_eq!(q.d, vec![Velocity::new(-1, 0), Velocity::ZERO]);
        let lat = Lattice::new(11, 11).unwrap();
        let mut mf = MeanFieldState::max_entropy(&lat);
        mf.d[lat.site(5, 5)] = [2.4, -1.6];
        assert_eq!(quantize(&lat, &mf).d[lat.site(5, 5)], Velocity::new(2, -2));
        let zero = MeanFieldState { s: vec![0.0; 121], d: vec![[0.0; 2]; 121], l: vec![0.0; lat.num_edges()] };
        assert_eq!(quantize(&lat, &zero), FieldState::zeros(&lat));
    }
}
