//! Ground-truth comparison measures for estimated velocity fields.
//!
//! Region masks come from the truth's segmentation field: `s = 0` sites are
//! predictable (region 1), `s = 1` sites unpredictable (region 2).

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::field::FieldState;
use crate::lattice::Velocity;

fn check(est: &FieldState, truth: &FieldState) -> Result<()> {
    if est.d.len() != truth.d.len() || truth.s.len() != truth.d.len() {
        return Err(ModelError::shape(
            format!("{} sites", truth.d.len()),
            format!("{} sites", est.d.len()),
        ));
    }
    Ok(())
}

/// Region-wise mean-square velocity errors. A region without sites has no
/// error (`None`), which is not the same as zero error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MseMeasures {
    pub d1: Option<f64>,
    pub d2: Option<f64>,
    pub n1: usize,
    pub n2: usize,
}

pub fn mse_measures(est: &FieldState, truth: &FieldState) -> Result<MseMeasures> {
    check(est, truth)?;
    let mut sum = [0.0f64; 2];
    let mut n = [0usize; 2];
    for ((e, t), &s) in est.d.iter().zip(&truth.d).zip(&truth.s) {
        let r = usize::from(s);
        sum[r] += f64::from(e.dist_sq(*t));
        n[r] += 1;
    }
    let mean = |k: usize| (n[k] > 0).then(|| sum[k] / n[k] as f64);
    Ok(MseMeasures { d1: mean(0), d2: mean(1), n1: n[0], n2: n[1] })
}

/// Fraction of sites whose velocity is reproduced exactly, per region, with
/// the complementary error rates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BitRates {
    pub match1: Option<f64>,
    pub match2: Option<f64>,
    pub error1: Option<f64>,
    pub error2: Option<f64>,
}

pub fn bit_rates(est: &FieldState, truth: &FieldState) -> Result<BitRates> {
    check(est, truth)?;
    let mut hits = [0usize; 2];
    let mut n = [0usize; 2];
    for ((e, t), &s) in est.d.iter().zip(&truth.d).zip(&truth.s) {
        let r = usize::from(s);
        hits[r] += usize::from(e == t);
        n[r] += 1;
    }
    let rate = |k: usize| (n[k] > 0).then(|| hits[k] as f64 / n[k] as f64);
    Ok(BitRates {
        match1: rate(0),
        match2: rate(1),
        error1: rate(0).map(|m| 1.0 - m),
        error2: rate(1).map(|m| 1.0 - m),
    })
}

/// Direction error `K = mean(1 - cos theta)` and length error
/// `L = mean(1 - |d| / |d0|)`.
///
/// Sites with a zero true velocity have no direction and are left out; a
/// zero estimate against a non-zero truth counts 1 towards both sums.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngularLength {
    pub k: Option<f64>,
    pub l: Option<f64>,
    pub counted: usize,
}

pub fn angular_length_measures(est: &FieldState, truth: &FieldState) -> Result<AngularLength> {
    check(est, truth)?;
    let mut k = 0.0;
    let mut l = 0.0;
    let mut counted = 0usize;
    for (e, t) in est.d.iter().zip(&truth.d) {
        if *t == Velocity::ZERO {
            continue;
        }
        counted += 1;
        if *e == Velocity::ZERO {
            k += 1.0;
            l += 1.0;
            continue;
        }
        let (tn, en) = (t.norm(), e.norm());
        let dot = f64::from(t.vx * e.vx + t.vy * e.vy);
        let cos = (dot / (tn * en)).clamp(-1.0, 1.0);
        k += 1.0 - cos;
        l += 1.0 - en / tn;
    }
    let avg = |x: f64| (counted > 0).then(|| x / counted as f64);
    Ok(AngularLength { k: avg(k), l: avg(l), counted })
}

/// Every measure at once.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mse: MseMeasures,
    pub bits: BitRates,
    pub angular: AngularLength,
}

pub fn report(est: &FieldState, truth: &FieldState) -> Result<MetricsReport> {
    Ok(MetricsReport {
        mse: mse_measures(est, truth)?,
        bits: bit_rates(est, truth)?,
        angular: angular_length_measures(est, truth)?,
    })
}
