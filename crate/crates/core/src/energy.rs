//! Posterior energy `E = E_likelihood + E_prior` and its restrictions to a
//! single variable.
//!
//! Pair sums run over ordered nearest-neighbour pairs, so every undirected
//! edge contributes twice. All pair terms are symmetric, which makes the
//! restriction of `E` to one site or edge carry a factor of two on them.

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::field::{FieldState, FieldView};
use crate::frames::Observation;
use crate::lattice::Velocity;
use crate::params::HyperParams;

/// Per-term decomposition of the total energy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub data_term: f64,
    pub smoothness_term: f64,
    pub coupling_term: f64,
    pub line_term: f64,
    pub chemical_term: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn likelihood(&self) -> f64 {
        self.data_term + self.line_term
    }

    pub fn prior(&self) -> f64 {
        self.smoothness_term + self.coupling_term + self.chemical_term
    }
}

/// `1 - 2 exp(-beta_d r)` for squared velocity distance `r`.
#[inline]
pub fn smoothness_kernel(beta_d: f64, dist_sq: f64) -> f64 {
    1.0 - 2.0 * (-beta_d * dist_sq).exp()
}

/// `1 - 2 delta(a - b)` with the affine interpolation `delta = 1 - |a - b|`
/// for expectations in `[0, 1]`; exact for bits.
#[inline]
pub fn coupling_kernel(a: f64, b: f64) -> f64 {
    1.0 - 2.0 * (1.0 - (a - b).abs())
}

#[inline]
fn dist_sq(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

pub(crate) fn check_view_shape(obs: &Observation, fields: &FieldState) -> Result<()> {
    fields.validate(obs.lattice())
}

/// Total energy of any view (binary or mean-field) with its decomposition.
pub fn energy_of<V: FieldView + ?Sized>(obs: &Observation, view: &V, p: &HyperParams) -> EnergyBreakdown {
    let lat = obs.lattice();
    let mut data = 0.0;
    let mut smooth = 0.0;
    let mut coupling = 0.0;
    let mut line = 0.0;
    let mut chem = 0.0;
    for i in 0..lat.num_sites() {
        let si = view.s(i);
        let di = view.d(i);
        data += (1.0 - si) * obs.residual(i, view.offset(i));
        chem += si;
        for n in lat.neighbors(i) {
            let l = view.l(n.edge);
            smooth += smoothness_kernel(p.beta_d, dist_sq(di, view.d(n.site))) * (1.0 - l);
            coupling += (1.0 - l) * coupling_kernel(si, view.s(n.site));
            line += l / obs.gap_sq(n.edge);
        }
    }
    let data_term = p.b * data;
    let smoothness_term = p.lambda_d * smooth;
    let coupling_term = p.lambda_s * coupling;
    let line_term = p.alpha_l * line;
    let chemical_term = p.t_s * chem;
    EnergyBreakdown {
        data_term,
        smoothness_term,
        coupling_term,
        line_term,
        chemical_term,
        total: data_term + smoothness_term + coupling_term + line_term + chemical_term,
    }
}

/// Smoothness term minus its first-order expansion in `beta_d`,
/// `lambda_d * sum (1 - l) (-1 + 2 beta_d r)`. For small `beta_d` the prior
/// reduces to a diluted Q-state ferromagnet and this remainder behaves like
/// `-lambda_d beta_d^2 sum (1 - l) r^2`.
pub fn q_ising_residual(lattice: &crate::lattice::Lattice, fields: &FieldState, p: &HyperParams) -> Result<f64> {
    fields.validate(lattice)?;
    let mut acc = 0.0;
    for i in 0..lattice.num_sites() {
        let di = fields.d[i].as_f64();
        for n in lattice.neighbors(i) {
            let r = dist_sq(di, fields.d[n.site].as_f64());
            let free = 1.0 - f64::from(fields.l[n.edge]);
            acc += free * (smoothness_kernel(p.beta_d, r) - (2.0 * p.beta_d * r - 1.0));
        }
    }
    Ok(p.lambda_d * acc)
}

pub fn total_energy(obs: &Observation, fields: &FieldState, p: &HyperParams) -> Result<EnergyBreakdown> {
    check_view_shape(obs, fields)?;
    Ok(energy_of(obs, fields, p))
}

/// Displaced-frame term plus line-field gap term.
pub fn likelihood_energy(obs: &Observation, fields: &FieldState, p: &HyperParams) -> Result<f64> {
    total_energy(obs, fields, p).map(|e| e.likelihood())
}

/// Smoothness, segmentation-coupling and chemical-potential terms.
pub fn prior_energy(obs: &Observation, fields: &FieldState, p: &HyperParams) -> Result<f64> {
    total_energy(obs, fields, p).map(|e| e.prior())
}

/// Terms of `E` that involve `s_site`, with `s_site = s`.
pub fn site_s_cost<V: FieldView + ?Sized>(
    obs: &Observation,
    p: &HyperParams,
    view: &V,
    site: usize,
    s: f64,
) -> f64 {
    let mut coupling = 0.0;
    for n in obs.lattice().neighbors(site) {
        coupling += (1.0 - view.l(n.edge)) * coupling_kernel(s, view.s(n.site));
    }
    p.b * (1.0 - s) * obs.residual(site, view.offset(site)) + p.t_s * s + 2.0 * p.lambda_s * coupling
}

/// Terms of `E` that involve `d_site`, with `d_site = d`.
pub fn site_d_cost<V: FieldView + ?Sized>(
    obs: &Observation,
    p: &HyperParams,
    view: &V,
    site: usize,
    d: Velocity,
) -> f64 {
    let df = d.as_f64();
    let mut smooth = 0.0;
    for n in obs.lattice().neighbors(site) {
        smooth += smoothness_kernel(p.beta_d, dist_sq(df, view.d(n.site))) * (1.0 - view.l(n.edge));
    }
    p.b * (1.0 - view.s(site)) * obs.residual(site, d) + 2.0 * p.lambda_d * smooth
}

/// Terms of `E` that involve `l_edge`, with `l_edge = l`.
pub fn edge_l_cost<V: FieldView + ?Sized>(
    obs: &Observation,
    p: &HyperParams,
    view: &V,
    edge: usize,
    l: f64,
) -> f64 {
    let e = obs.lattice().edge(edge);
    let smooth = smoothness_kernel(p.beta_d, dist_sq(view.d(e.a), view.d(e.b)));
    let coupling = coupling_kernel(view.s(e.a), view.s(e.b));
    2.0 * (p.lambda_d * smooth * (1.0 - l) + p.lambda_s * (1.0 - l) * coupling + p.alpha_l * l / obs.gap_sq(edge))
}

/// A single-variable change of a binary configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Change {
    S { site: usize, value: u8 },
    D { site: usize, value: Velocity },
    L { edge: usize, value: u8 },
}

/// `E(after) - E(before)` for one variable change, in O(neighbourhood).
pub fn local_energy_delta(
    obs: &Observation,
    fields: &FieldState,
    change: Change,
    p: &HyperParams,
) -> Result<f64> {
    let lat = obs.lattice();
    match change {
        Change::S { site, value } => {
            if site >= lat.num_sites() || value > 1 {
                return Err(ModelError::Domain(format!("s[{site}] := {value}")));
            }
            let old = fields.s[site];
            if old == value {
                return Ok(0.0);
            }
            Ok(site_s_cost(obs, p, fields, site, f64::from(value))
                - site_s_cost(obs, p, fields, site, f64::from(old)))
        }
        Change::D { site, value } => {
            if site >= lat.num_sites() || !lat.support(site).contains(value) {
                return Err(ModelError::Domain(format!(
                    "d[{site}] := ({}, {}) outside support",
                    value.vx, value.vy
                )));
            }
            let old = fields.d[site];
            if old == value {
                return Ok(0.0);
            }
            Ok(site_d_cost(obs, p, fields, site, value) - site_d_cost(obs, p, fields, site, old))
        }
        Change::L { edge, value } => {
            if edge >= lat.num_edges() || value > 1 {
                return Err(ModelError::Domain(format!("l[{edge}] := {value}")));
            }
            let old = fields.l[edge];
            if old == value {
                return Ok(0.0);
            }
            Ok(edge_l_cost(obs, p, fields, edge, f64::from(value))
                - edge_l_cost(obs, p, fields, edge, f64::from(old)))
        }
    }
}

impl Change {
    pub fn apply(self, fields: &mut FieldState) {
        match self {
            Change::S { site, value } => fields.s[site] = value,
            Change::D { site, value } => fields.d[site] = value,
            Change::L { edge, value } => fields.l[edge] = value,
        }
    }
}
