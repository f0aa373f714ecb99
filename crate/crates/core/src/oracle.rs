//! Exhaustive enumeration of the posterior on tiny lattices.
//!
//! The energy here is written out again from the raw pixels and does not
//! call into the model code, so the two can check each other. Pair sums use
//! the same ordered-pair convention and the same summation order (sites in
//! raster order, neighbours left, right, up, down), so totals agree to the
//! last bit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::FieldState;
use crate::frames::FramePair;
use crate::lattice::Velocity;
use crate::learning::{conjugate_stats_of, BetaDForm, ConjugateStats, Param};
use crate::frames::Observation;
use crate::params::HyperParams;

pub const DEFAULT_BUDGET: u64 = 5_000_000;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum OracleError {
    #[error("enumeration needs {states} states, over the budget of {budget}")]
    Budget { states: u128, budget: u64 },
    #[error(transparent)]
    Model(#[from] crate::error::ModelError),
}

/// Raw problem description read straight from the frames.
#[derive(Clone, Debug)]
struct Problem {
    w: usize,
    h: usize,
    curr: Vec<f64>,
    prev: Vec<f64>,
    // per site: admissible velocities, vy-major
    velocities: Vec<Vec<(i32, i32)>>,
    // undirected edges: horizontal in raster order, then vertical
    edges: Vec<(usize, usize)>,
    // per site: (neighbour, edge) in the order left, right, up, down
    nbrs: Vec<Vec<(usize, usize)>>,
}

impl Problem {
    fn new(frames: &FramePair, max_speed: i32) -> Self {
        let (w, h) = (frames.width(), frames.height());
        let curr = frames.curr.pixels().iter().map(|&v| f64::from(v)).collect();
        let prev = frames.prev.pixels().iter().map(|&v| f64::from(v)).collect();
        let mut velocities = Vec::with_capacity(w * h);
        for y in 0..h as i32 {
            for x in 0..w as i32 {
                let mut vs = Vec::new();
                for vy in -max_speed..=max_speed {
                    for vx in -max_speed..=max_speed {
                        let (sx, sy) = (x - vx, y - vy);
                        if sx >= 0 && sy >= 0 && sx < w as i32 && sy < h as i32 {
                            vs.push((vx, vy));
                        }
                    }
                }
                velocities.push(vs);
            }
        }
        let mut edges = Vec::new();
        for y in 0..h {
            for x in 0..w.saturating_sub(1) {
                edges.push((y * w + x, y * w + x + 1));
            }
        }
        for y in 0..h.saturating_sub(1) {
            for x in 0..w {
                edges.push((y * w + x, (y + 1) * w + x));
            }
        }
        let find = |a: usize, b: usize| edges.iter().position(|&(p, q)| (p, q) == (a.min(b), a.max(b))).unwrap();
        let mut nbrs = vec![Vec::new(); w * h];
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if x > 0 {
                    nbrs[i].push((i - 1, find(i, i - 1)));
                }
                if x + 1 < w {
                    nbrs[i].push((i + 1, find(i, i + 1)));
                }
                if y > 0 {
                    nbrs[i].push((i - w, find(i, i - w)));
                }
                if y + 1 < h {
                    nbrs[i].push((i + w, find(i, i + w)));
                }
            }
        }
        Problem { w, h, curr, prev, velocities, edges, nbrs }
    }

    fn sites(&self) -> usize {
        self.w * self.h
    }

    fn state_count(&self) -> u128 {
        let mut n: u128 = 1;
        for vs in &self.velocities {
            n = n.saturating_mul(2 * vs.len() as u128);
        }
        n.saturating_mul(1u128.checked_shl(self.edges.len() as u32).unwrap_or(u128::MAX))
    }

    /// Decode a mixed-radix index: per site `(velocity, s)`, then edge bits.
    fn decode(&self, mut idx: u64, s: &mut [u8], d: &mut [(i32, i32)], l: &mut [u8]) {
        for i in 0..self.sites() {
            let vs = &self.velocities[i];
            let radix = 2 * vs.len() as u64;
            let digit = idx % radix;
            idx /= radix;
            s[i] = (digit % 2) as u8;
            d[i] = vs[(digit / 2) as usize];
        }
        for bit in l.iter_mut() {
            *bit = (idx % 2) as u8;
            idx /= 2;
        }
    }

    fn energy(&self, p: &HyperParams, s: &[u8], d: &[(i32, i32)], l: &[u8]) -> f64 {
        let mut data = 0.0;
        let mut smooth = 0.0;
        let mut coupling = 0.0;
        let mut line = 0.0;
        let mut chem = 0.0;
        for i in 0..self.sites() {
            let (x, y) = ((i % self.w) as i32, (i / self.w) as i32);
            let (vx, vy) = d[i];
            let src = ((y - vy) * self.w as i32 + (x - vx)) as usize;
            let diff = self.curr[i] - self.prev[src];
            let si = f64::from(s[i]);
            data += (1.0 - si) * (diff * diff);
            chem += si;
            for &(j, e) in &self.nbrs[i] {
                let le = f64::from(l[e]);
                let dx = f64::from(vx) - f64::from(d[j].0);
                let dy = f64::from(vy) - f64::from(d[j].1);
                let r = dx * dx + dy * dy;
                smooth += (1.0 - 2.0 * (-p.beta_d * r).exp()) * (1.0 - le);
                let same = if s[i] == s[j] { 1.0 } else { 0.0 };
                coupling += (1.0 - le) * (1.0 - 2.0 * same);
                let gap = self.curr[i] - self.curr[j];
                line += le / (gap * gap).max(1.0);
            }
        }
        let terms = [p.b * data, p.lambda_d * smooth, p.lambda_s * coupling, p.alpha_l * line, p.t_s * chem];
        terms[0] + terms[1] + terms[2] + terms[3] + terms[4]
    }

    fn to_fields(&self, s: &[u8], d: &[(i32, i32)], l: &[u8]) -> FieldState {
        FieldState {
            d: d.iter().map(|&(vx, vy)| Velocity::new(vx, vy)).collect(),
            s: s.to_vec(),
            l: l.to_vec(),
        }
    }
}

/// `log sum_k exp(-u_k)`, shifted by the smallest energy.
pub fn log_partition(energies: &[f64]) -> f64 {
    let m = energies.iter().copied().fold(f64::INFINITY, f64::min);
    -m + energies.iter().map(|&u| (-(u - m)).exp()).sum::<f64>().ln()
}

/// Exact posterior marginals, in the model's site / support / edge order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Marginals {
    /// `P(s_i = 1)`.
    pub s: Vec<f64>,
    /// `P(d_i = v)` over the site's support.
    pub d: Vec<Vec<f64>>,
    /// `P(l_e = 1)`.
    pub l: Vec<f64>,
}

/// A fully enumerated posterior.
#[derive(Clone, Debug)]
pub struct Enumeration {
    problem: Problem,
    params: HyperParams,
    /// `U = beta * E` of every state, in index order.
    energies: Vec<f64>,
    log_z: f64,
}

impl Enumeration {
    pub fn new(frames: &FramePair, max_speed: i32, params: &HyperParams, budget: u64) -> Result<Self, OracleError> {
        params.validate()?;
        let problem = Problem::new(frames, max_speed);
        let states = problem.state_count();
        if states > u128::from(budget) {
            return Err(OracleError::Budget { states, budget });
        }
        let n = states as u64;
        let mut s = vec![0u8; problem.sites()];
        let mut d = vec![(0, 0); problem.sites()];
        let mut l = vec![0u8; problem.edges.len()];
        let mut energies = Vec::with_capacity(n as usize);
        for idx in 0..n {
            problem.decode(idx, &mut s, &mut d, &mut l);
            energies.push(params.beta * problem.energy(params, &s, &d, &l));
        }
        let log_z = log_partition(&energies);
        Ok(Enumeration { problem, params: *params, energies, log_z })
    }

    pub fn state_count(&self) -> usize {
        self.energies.len()
    }

    /// `log sum exp(-U)`.
    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn params(&self) -> &HyperParams {
        &self.params
    }

    /// Unnormalised energies `U` of all states.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Oracle energy `E` (without `beta`) of one configuration.
    pub fn energy_of(&self, fields: &FieldState) -> f64 {
        let d: Vec<(i32, i32)> = fields.d.iter().map(|v| (v.vx, v.vy)).collect();
        self.problem.energy(&self.params, &fields.s, &d, &fields.l)
    }

    /// Every state as a field configuration with its posterior probability.
    pub fn states(&self) -> impl Iterator<Item = (FieldState, f64)> + '_ {
        let pb = &self.problem;
        let mut s = vec![0u8; pb.sites()];
        let mut d = vec![(0, 0); pb.sites()];
        let mut l = vec![0u8; pb.edges.len()];
        self.energies.iter().enumerate().map(move |(idx, &u)| {
            pb.decode(idx as u64, &mut s, &mut d, &mut l);
            (pb.to_fields(&s, &d, &l), (-u - self.log_z).exp())
        })
    }

    /// Posterior expectation of `f`.
    pub fn expect(&self, mut f: impl FnMut(&FieldState) -> f64) -> f64 {
        self.states().map(|(fs, p)| p * f(&fs)).sum()
    }

    pub fn marginals(&self) -> Marginals {
        let pb = &self.problem;
        let mut m = Marginals {
            s: vec![0.0; pb.sites()],
            d: pb.velocities.iter().map(|vs| vec![0.0; vs.len()]).collect(),
            l: vec![0.0; pb.edges.len()],
        };
        for (fs, p) in self.states() {
            for i in 0..pb.sites() {
                m.s[i] += p * f64::from(fs.s[i]);
                let k = pb.velocities[i].iter().position(|&v| v == (fs.d[i].vx, fs.d[i].vy)).unwrap();
                m.d[i][k] += p;
            }
            for (e, &b) in fs.l.iter().enumerate() {
                m.l[e] += p * f64::from(b);
            }
        }
        m
    }

    /// Ground state (lowest energy, first in index order on ties).
    pub fn ground_state(&self) -> FieldState {
        let (idx, _) = self
            .energies
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |(bi, bu), (i, &u)| if u < bu { (i, u) } else { (bi, bu) });
        self.states().nth(idx).unwrap().0
    }

    /// Exact `<C>` under the posterior, with the model's statistics code.
    pub fn expected_stats(&self, obs: &Observation, form: BetaDForm) -> ConjugateStats {
        let mut acc = [0.0; 6];
        for (fs, p) in self.states() {
            let c = conjugate_stats_of(obs, &fs, &self.params, form).to_array();
            for k in 0..6 {
                acc[k] += p * c[k];
            }
        }
        ConjugateStats::from_array(acc)
    }
}

/// Marginal log-likelihood `-F = log sum exp(-U)` (unnormalised Boltzmann sum).
pub fn marginal_log_likelihood(frames: &FramePair, max_speed: i32, params: &HyperParams, budget: u64) -> Result<f64, OracleError> {
    Ok(Enumeration::new(frames, max_speed, params, budget)?.log_z())
}

/// `<C>` under the exact posterior.
pub fn exact_gradient(obs: &Observation, params: &HyperParams, budget: u64) -> Result<ConjugateStats, OracleError> {
    let en = Enumeration::new(obs.frames(), obs.lattice().max_speed(), params, budget)?;
    Ok(en.expected_stats(obs, BetaDForm::Squared))
}

/// Central differences of `-F` in each learnable parameter, step
/// `rel_step * |x|` (or `rel_step` at `x = 0`).
pub fn finite_difference_gradient(
    frames: &FramePair,
    max_speed: i32,
    params: &HyperParams,
    rel_step: f64,
    budget: u64,
) -> Result<ConjugateStats, OracleError> {
    let mut out = [0.0; 6];
    for (k, param) in Param::ALL.into_iter().enumerate() {
        let x = param.get(params);
        let h = if x == 0.0 { rel_step } else { rel_step * x.abs() };
        let (mut up, mut dn) = (*params, *params);
        param.set(&mut up, x + h);
        param.set(&mut dn, x - h);
        let fu = marginal_log_likelihood(frames, max_speed, &up, budget)?;
        let fd = marginal_log_likelihood(frames, max_speed, &dn, budget)?;
        out[k] = (fu - fd) / (2.0 * h);
    }
    Ok(ConjugateStats::from_array(out))
}

/// `KL(P_a || P_b)` between the two posteriors over the hidden fields.
pub fn kl_between(frames: &FramePair, max_speed: i32, a: &HyperParams, b: &HyperParams, budget: u64) -> Result<f64, OracleError> {
    let ea = Enumeration::new(frames, max_speed, a, budget)?;
    let eb = Enumeration::new(frames, max_speed, b, budget)?;
    let kl: f64 = ea
        .energies
        .iter()
        .zip(&eb.energies)
        .map(|(&ua, &ub)| {
            let lpa = -ua - ea.log_z;
            let lpb = -ub - eb.log_z;
            lpa.exp() * (lpa - lpb)
        })
        .sum();
    Ok(kl)
}
