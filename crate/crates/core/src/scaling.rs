//! Sweep of the variance scale `mu` (with `B = 1/(2 mu sigma2)`) against
//! ground truth, and selection of the best converged scale.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::Result;
use crate::field::FieldState;
use crate::frames::Observation;
use crate::meanfield::{self, AnnealSchedule, MeanFieldState};
use crate::metrics;
use crate::params::HyperParams;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mu: f64,
    pub d1: Option<f64>,
    pub d2: Option<f64>,
    /// Exact-velocity match rates per region.
    pub delta1: Option<f64>,
    pub delta2: Option<f64>,
    pub converged: bool,
    pub diverged: bool,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ScalingError {
    #[error("no grid point converged")]
    NothingConverged,
}

/// Solve and score every `mu` of the grid. Divergent points are scored on
/// the last completed state and marked, never dropped.
pub fn sweep_mu(
    obs: &Observation,
    truth: &FieldState,
    params: &HyperParams,
    grid: &[f64],
    schedule: &AnnealSchedule,
) -> Result<Vec<SweepRow>> {
    truth.validate(obs.lattice())?;
    let mut rows = Vec::with_capacity(grid.len());
    for &mu in grid {
        let p = params.with_mu(mu);
        p.validate()?;
        let init = MeanFieldState::max_entropy(obs.lattice());
        let (state, converged, diverged, iterations) = match meanfield::solve(obs, &p, schedule, init) {
            Ok(sol) => (sol.state, sol.converged, false, sol.iterations),
            Err(report) => (report.last_state, false, true, report.iteration),
        };
        let est = meanfield::quantize(obs.lattice(), &state);
        rows.push(score(mu, &est, truth, converged, diverged, iterations)?);
    }
    Ok(rows)
}

/// Score one estimate against the truth.
pub fn score(mu: f64, est: &FieldState, truth: &FieldState, converged: bool, diverged: bool, iterations: usize) -> Result<SweepRow> {
    let mse = metrics::mse_measures(est, truth)?;
    let bits = metrics::bit_rates(est, truth)?;
    Ok(SweepRow {
        mu,
        d1: mse.d1,
        d2: mse.d2,
        delta1: bits.match1,
        delta2: bits.match2,
        converged,
        diverged,
        iterations,
    })
}

/// Converged `mu` with the smallest `D1`; ties go to the smaller `mu`.
pub fn select_mu(rows: &[SweepRow]) -> std::result::Result<f64, ScalingError> {
    rows.iter()
        .filter(|r| r.converged)
        .filter_map(|r| r.d1.map(|d1| (d1, r.mu)))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)))
        .map(|(_, mu)| mu)
        .ok_or(ScalingError::NothingConverged)
}

/// `a, a + step, ...` up to and including `b` (with a small tolerance).
pub fn grid(a: f64, b: f64, step: f64) -> Vec<f64> {
    if step.is_nan() || step <= 0.0 || b < a {
        return Vec::new();
    }
    let n = ((b - a) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| a + k as f64 * step).collect()
}
