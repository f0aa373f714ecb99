//! Expectations of the conjugate statistics under mean-field environments.
//!
//! Each statistic is averaged over a small block of variables sampled from
//! the restriction of the energy to that block, with every other variable
//! held at its mean-field expectation:
//!
//! | statistic            | free block per site / edge |
//! |----------------------|----------------------------|
//! | `B`                  | `(s_i, d_i)`               |
//! | `lambda_d`, `beta_d` | `(d_i, d_j, l_ij)`         |
//! | `lambda_s`           | `(l_ij, s_i, s_j)`         |
//! | `alpha_l`            | `l_ij`                     |
//! | `T_s`                | `s_i`                      |
//!
//! Blocks of one kind never interact, so one sweep updates every block once.

use rand::Rng;

use super::stats::{BetaDForm, ConjugateStats};
use crate::boltzmann;
use crate::energy::{coupling_kernel, energy_of, smoothness_kernel};
use crate::field::Overlay;
use crate::frames::Observation;
use crate::lattice::Velocity;
use crate::mcmc::{batch_means, KernelTable, McmcError};
use crate::meanfield::{local_cost_s, MeanFieldState, Variable};
use crate::params::HyperParams;

/// Sampled block expectations with batch-means standard errors.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockEstimate {
    pub stats: ConjugateStats,
    pub std_err: ConjugateStats,
}

fn kappa_mf(p: &HyperParams, a: [f64; 2], b: [f64; 2]) -> f64 {
    smoothness_kernel(p.beta_d, (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2))
}

fn coupling_bits(a: u8, b: u8) -> f64 {
    if a == b { -1.0 } else { 1.0 }
}

fn finite(costs: &[f64], v: Variable) -> Result<(), McmcError> {
    if costs.iter().all(|c| c.is_finite()) { Ok(()) } else { Err(McmcError::NonFinite(v)) }
}

/// Cumulative Boltzmann weights of a fixed table, for repeated draws.
struct Cumulative {
    acc: Vec<f64>,
}

impl Cumulative {
    fn new(costs: &[f64], beta: f64) -> Self {
        let m = boltzmann::min_cost(costs);
        let mut z = 0.0;
        let acc = costs
            .iter()
            .map(|&c| {
                z += (-beta * (c - m)).exp();
                z
            })
            .collect();
        Cumulative { acc }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = rng.gen::<f64>() * self.acc[self.acc.len() - 1];
        self.acc.partition_point(|&a| a <= u).min(self.acc.len() - 1)
    }
}

struct SiteBlock {
    s: u8,
    k: usize,
    // d | s = 0 and d | s = 1
    d_given: [Cumulative; 2],
    // s-costs without the data term
    s_cost: [f64; 2],
}

struct EdgeDBlock {
    da: Velocity,
    db: Velocity,
    l: u8,
    unary_a: Vec<f64>,
    unary_b: Vec<f64>,
    l_const: [f64; 2],
}

struct EdgeSBlock {
    l: u8,
    sa: u8,
    sb: u8,
    unary_a: [f64; 2],
    unary_b: [f64; 2],
    smooth: f64,
    line: f64,
}

/// Data-plus-smoothness unary for `d_i` with every neighbour except
/// `skip` at its mean and the data term weighted by `data_w`.
fn d_unary(
    obs: &Observation,
    p: &HyperParams,
    mf: &MeanFieldState,
    i: usize,
    skip: Option<usize>,
    data_w: f64,
) -> Vec<f64> {
    let lat = obs.lattice();
    let sup = lat.support(i);
    obs.residuals(i)
        .iter()
        .enumerate()
        .map(|(k, &res)| {
            let v = sup.get(k).as_f64();
            let mut smooth = 0.0;
            for n in lat.neighbors(i).iter().filter(|n| Some(n.site) != skip) {
                smooth += kappa_mf(p, v, mf.d[n.site]) * (1.0 - mf.l[n.edge]);
            }
            data_w * res + 2.0 * p.lambda_d * smooth
        })
        .collect()
}

/// `s_i` unary at the quantised mean velocity, neighbour `skip` excluded.
fn s_unary(obs: &Observation, p: &HyperParams, mf: &MeanFieldState, i: usize, skip: usize) -> [f64; 2] {
    let lat = obs.lattice();
    let res = obs.residual(i, lat.support(i).quantize(mf.d[i]));
    let mut c = [p.b * res, p.t_s];
    for n in lat.neighbors(i).iter().filter(|n| n.site != skip) {
        let w = 2.0 * p.lambda_s * (1.0 - mf.l[n.edge]);
        c[0] += w * coupling_kernel(0.0, mf.s[n.site]);
        c[1] += w * coupling_kernel(1.0, mf.s[n.site]);
    }
    c
}

/// Estimate every conjugate statistic by heat-bath sampling of its blocks
/// under the mean-field environment `mf`, at inverse temperature `p.beta`.
pub fn block_expectations<R: Rng + ?Sized>(
    obs: &Observation,
    p: &HyperParams,
    mf: &MeanFieldState,
    sweeps: usize,
    burn_in: usize,
    form: BetaDForm,
    rng: &mut R,
) -> Result<BlockEstimate, McmcError> {
    if burn_in >= sweeps {
        return Err(McmcError::Config(format!("burn_in ({burn_in}) must be smaller than sweeps ({sweeps})")));
    }
    let lat = obs.lattice();
    let beta = p.beta;
    let kernel = KernelTable::new(p.beta_d, lat.max_speed());
    let bit = |x: f64| u8::from(x > 0.5);

    let mut sites = Vec::with_capacity(lat.num_sites());
    for i in 0..lat.num_sites() {
        // d | s = 1 sees only the smoothing; d | s = 0 adds the full data term
        let d1 = d_unary(obs, p, mf, i, None, 0.0);
        finite(&d1, Variable::D(i))?;
        let d0: Vec<f64> = d1.iter().zip(obs.residuals(i)).map(|(&u, &res)| u + p.b * res).collect();
        let mut s_cost = [0.0, p.t_s];
        for n in lat.neighbors(i) {
            let w = 2.0 * p.lambda_s * (1.0 - mf.l[n.edge]);
            s_cost[0] += w * coupling_kernel(0.0, mf.s[n.site]);
            s_cost[1] += w * coupling_kernel(1.0, mf.s[n.site]);
        }
        finite(&s_cost, Variable::S(i))?;
        let sup = lat.support(i);
        sites.push(SiteBlock {
            s: bit(mf.s[i]),
            k: sup.index_of(sup.quantize(mf.d[i])).unwrap(),
            d_given: [Cumulative::new(&d0, beta), Cumulative::new(&d1, beta)],
            s_cost,
        });
    }

    let mut dblocks = Vec::with_capacity(lat.num_edges());
    let mut sblocks = Vec::with_capacity(lat.num_edges());
    let mut lines = Vec::with_capacity(lat.num_edges());
    for (e, edge) in lat.edges().iter().enumerate() {
        let (a, b) = (edge.a, edge.b);
        let unary_a = d_unary(obs, p, mf, a, Some(b), p.b * (1.0 - mf.s[a]));
        let unary_b = d_unary(obs, p, mf, b, Some(a), p.b * (1.0 - mf.s[b]));
        finite(&unary_a, Variable::D(a))?;
        finite(&unary_b, Variable::D(b))?;
        let line = 2.0 * p.alpha_l / obs.gap_sq(e);
        let smooth_mf = 2.0 * p.lambda_d * kappa_mf(p, mf.d[a], mf.d[b]);
        let coupling_mf = 2.0 * p.lambda_s * coupling_kernel(mf.s[a], mf.s[b]);
        finite(&[line, smooth_mf, coupling_mf], Variable::L(e))?;
        dblocks.push(EdgeDBlock {
            da: lat.support(a).quantize(mf.d[a]),
            db: lat.support(b).quantize(mf.d[b]),
            l: bit(mf.l[e]),
            unary_a,
            unary_b,
            l_const: [coupling_mf, line],
        });
        let (ua, ub) = (s_unary(obs, p, mf, a, b), s_unary(obs, p, mf, b, a));
        finite(&ua, Variable::S(a))?;
        finite(&ub, Variable::S(b))?;
        sblocks.push(EdgeSBlock {
            l: bit(mf.l[e]),
            sa: bit(mf.s[a]),
            sb: bit(mf.s[b]),
            unary_a: ua,
            unary_b: ub,
            smooth: smooth_mf,
            line,
        });
        lines.push(Cumulative::new(&[smooth_mf + coupling_mf, line], beta));
    }

    let mut singles = Vec::with_capacity(lat.num_sites());
    let mut s_state: Vec<u8> = mf.s.iter().map(|&x| bit(x)).collect();
    for i in 0..lat.num_sites() {
        let c = local_cost_s(obs, p, mf, i);
        finite(&c, Variable::S(i))?;
        singles.push(Cumulative::new(&c, beta));
    }
    let mut l_state: Vec<u8> = mf.l.iter().map(|&x| bit(x)).collect();

    let mut traces: [Vec<f64>; 6] = Default::default();
    let mut scratch = Vec::with_capacity(128);
    let mut costs = Vec::with_capacity(128);
    for t in 0..sweeps {
        let keep = t >= burn_in;
        let mut acc = [0.0f64; 6];

        for (i, blk) in sites.iter_mut().enumerate() {
            let res = obs.residuals(i);
            blk.s = boltzmann::sample_bit(p.b * res[blk.k] + blk.s_cost[0], blk.s_cost[1], beta, rng);
            blk.k = blk.d_given[usize::from(blk.s)].draw(rng);
            if keep {
                acc[0] += f64::from(1 - blk.s) * res[blk.k];
            }
        }

        for (e, blk) in dblocks.iter_mut().enumerate() {
            let edge = lat.edge(e);
            let w = 2.0 * p.lambda_d * (1.0 - f64::from(blk.l));
            let sup_a = lat.support(edge.a);
            costs.clear();
            costs.extend(blk.unary_a.iter().enumerate().map(|(k, &u)| u + w * kernel.get(sup_a.get(k), blk.db)));
            blk.da = sup_a.get(boltzmann::sample_index(&costs, beta, rng, &mut scratch));
            let sup_b = lat.support(edge.b);
            costs.clear();
            costs.extend(blk.unary_b.iter().enumerate().map(|(k, &u)| u + w * kernel.get(blk.da, sup_b.get(k))));
            blk.db = sup_b.get(boltzmann::sample_index(&costs, beta, rng, &mut scratch));
            let kap = kernel.get(blk.da, blk.db);
            blk.l = boltzmann::sample_bit(2.0 * p.lambda_d * kap + blk.l_const[0], blk.l_const[1], beta, rng);
            if keep {
                let free = 1.0 - f64::from(blk.l);
                let r = f64::from(blk.da.dist_sq(blk.db));
                acc[1] += 2.0 * kap * free;
                acc[4] += 2.0 * form.pair_term(p, r, free);
            }
        }

        for blk in sblocks.iter_mut() {
            let free = 1.0 - f64::from(blk.l);
            let w = 2.0 * p.lambda_s * free;
            blk.sa = boltzmann::sample_bit(
                blk.unary_a[0] + w * coupling_bits(0, blk.sb),
                blk.unary_a[1] + w * coupling_bits(1, blk.sb),
                beta,
                rng,
            );
            blk.sb = boltzmann::sample_bit(
                blk.unary_b[0] + w * coupling_bits(blk.sa, 0),
                blk.unary_b[1] + w * coupling_bits(blk.sa, 1),
                beta,
                rng,
            );
            let coupling = coupling_bits(blk.sa, blk.sb);
            blk.l = boltzmann::sample_bit(blk.smooth + 2.0 * p.lambda_s * coupling, blk.line, beta, rng);
            if keep {
                acc[2] += 2.0 * (1.0 - f64::from(blk.l)) * coupling;
            }
        }

        for (e, table) in lines.iter().enumerate() {
            l_state[e] = table.draw(rng) as u8;
            if keep {
                acc[3] += 2.0 * f64::from(l_state[e]) / obs.gap_sq(e);
            }
        }

        for (i, table) in singles.iter().enumerate() {
            s_state[i] = table.draw(rng) as u8;
            if keep {
                acc[5] += f64::from(s_state[i]);
            }
        }

        if keep {
            for (trace, v) in traces.iter_mut().zip(acc) {
                trace.push(v);
            }
        }
    }

    let mut mean = [0.0; 6];
    let mut se = [0.0; 6];
    for k in 0..6 {
        (mean[k], se[k]) = batch_means(&traces[k]);
    }
    Ok(BlockEstimate {
        stats: ConjugateStats::from_array(mean),
        std_err: ConjugateStats::from_array(se),
    })
}

/// Closed-form block expectations by enumerating every block's joint states
/// and weighting them with full-lattice energies; independent of the
/// sampler's cost tables. Validation only: cost grows with lattice size
/// times block size.
pub fn exact_block_expectations(obs: &Observation, p: &HyperParams, mf: &MeanFieldState, form: BetaDForm) -> ConjugateStats {
    let lat = obs.lattice();
    let view = mf.view(lat);
    let mut out = [0.0; 6];

    let average = |states: &mut dyn Iterator<Item = (f64, f64)>| -> f64 {
        let (energies, values): (Vec<f64>, Vec<f64>) = states.unzip();
        let m = energies.iter().copied().fold(f64::INFINITY, f64::min);
        let w: Vec<f64> = energies.iter().map(|&e| (-p.beta * (e - m)).exp()).collect();
        let z: f64 = w.iter().sum();
        w.iter().zip(&values).map(|(w, v)| w * v).sum::<f64>() / z
    };

    for i in 0..lat.num_sites() {
        let sup = lat.support(i);
        out[0] += average(&mut sup.iter().flat_map(|v| {
            [0u8, 1].into_iter().map(move |s| {
                let o = Overlay::new(&view).with_s(i, f64::from(s)).with_d(i, v);
                (energy_of(obs, &o, p).total, f64::from(1 - s) * obs.residual(i, v))
            })
        }));
        out[5] += average(&mut [0u8, 1].into_iter().map(|s| {
            let o = Overlay::new(&view).with_s(i, f64::from(s));
            (energy_of(obs, &o, p).total, f64::from(s))
        }));
    }

    for (e, edge) in lat.edges().iter().enumerate() {
        let (a, b) = (edge.a, edge.b);
        let (sa, sb) = (lat.support(a), lat.support(b));
        let mut lambda_d = Vec::new();
        let mut beta_d = Vec::new();
        for va in sa.iter() {
            for vb in sb.iter() {
                for l in [0u8, 1] {
                    let o = Overlay::new(&view).with_d(a, va).with_d(b, vb).with_l(e, f64::from(l));
                    let energy = energy_of(obs, &o, p).total;
                    let r = f64::from(va.dist_sq(vb));
                    let free = 1.0 - f64::from(l);
                    lambda_d.push((energy, 2.0 * smoothness_kernel(p.beta_d, r) * free));
                    beta_d.push((energy, 2.0 * form.pair_term(p, r, free)));
                }
            }
        }
        out[1] += average(&mut lambda_d.into_iter());
        out[4] += average(&mut beta_d.into_iter());

        let mut lambda_s = Vec::new();
        for l in [0u8, 1] {
            for s_a in [0u8, 1] {
                for s_b in [0u8, 1] {
                    let o = Overlay::new(&view)
                        .with_l(e, f64::from(l))
                        .with_s(a, f64::from(s_a))
                        .with_s(b, f64::from(s_b));
                    let value = 2.0 * (1.0 - f64::from(l)) * coupling_bits(s_a, s_b);
                    lambda_s.push((energy_of(obs, &o, p).total, value));
                }
            }
        }
        out[2] += average(&mut lambda_s.into_iter());

        out[3] += average(&mut [0u8, 1].into_iter().map(|l| {
            let o = Overlay::new(&view).with_l(e, f64::from(l));
            (energy_of(obs, &o, p).total, 2.0 * f64::from(l) / obs.gap_sq(e))
        }));
    }
    ConjugateStats::from_array(out)
}
