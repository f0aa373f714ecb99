use serde::{Deserialize, Serialize};

use crate::energy::{coupling_kernel, smoothness_kernel};
use crate::field::{FieldState, FieldView};
use crate::frames::Observation;
use crate::params::HyperParams;

/// Learnable hyper-parameters in a fixed order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    B,
    LambdaD,
    LambdaS,
    AlphaL,
    BetaD,
    TS,
}

impl Param {
    pub const ALL: [Param; 6] = [Param::B, Param::LambdaD, Param::LambdaS, Param::AlphaL, Param::BetaD, Param::TS];

    pub fn name(self) -> &'static str {
        match self {
            Param::B => "b",
            Param::LambdaD => "lambda_d",
            Param::LambdaS => "lambda_s",
            Param::AlphaL => "alpha_l",
            Param::BetaD => "beta_d",
            Param::TS => "t_s",
        }
    }

    pub fn get(self, p: &HyperParams) -> f64 {
        match self {
            Param::B => p.b,
            Param::LambdaD => p.lambda_d,
            Param::LambdaS => p.lambda_s,
            Param::AlphaL => p.alpha_l,
            Param::BetaD => p.beta_d,
            Param::TS => p.t_s,
        }
    }

    pub fn set(self, p: &mut HyperParams, v: f64) {
        match self {
            Param::B => p.b = v,
            Param::LambdaD => p.lambda_d = v,
            Param::LambdaS => p.lambda_s = v,
            Param::AlphaL => p.alpha_l = v,
            Param::BetaD => p.beta_d = v,
            Param::TS => p.t_s = v,
        }
    }
}

/// How the statistic conjugate to `beta_d` is formed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaDForm {
    /// `dE/d beta_d = lambda_d * sum (1 - l) 2 r exp(-beta_d r)` over ordered pairs,
    /// `r = |d_i - d_j|^2`.
    #[default]
    Squared,
    /// `sum (1 - l) r exp(-beta_d sqrt(r))`, with the unsquared norm in the
    /// exponent and no `lambda_d` factor.
    Printed,
}

impl BetaDForm {
    /// Contribution of one ordered pair with `(1 - l) = free` and squared
    /// distance `r`.
    #[inline]
    pub fn pair_term(self, p: &HyperParams, r: f64, free: f64) -> f64 {
        match self {
            BetaDForm::Squared => p.lambda_d * free * 2.0 * r * (-p.beta_d * r).exp(),
            BetaDForm::Printed => free * r * (-p.beta_d * r.sqrt()).exp(),
        }
    }
}

/// Energy sub-sums multiplying each hyper-parameter.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConjugateStats {
    pub c_b: f64,
    pub c_lambda_d: f64,
    pub c_lambda_s: f64,
    pub c_alpha_l: f64,
    pub c_beta_d: f64,
    pub c_t_s: f64,
}

impl ConjugateStats {
    pub fn get(&self, param: Param) -> f64 {
        self.to_array()[Param::ALL.iter().position(|&q| q == param).unwrap()]
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.c_b, self.c_lambda_d, self.c_lambda_s, self.c_alpha_l, self.c_beta_d, self.c_t_s]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        ConjugateStats {
            c_b: a[0],
            c_lambda_d: a[1],
            c_lambda_s: a[2],
            c_alpha_l: a[3],
            c_beta_d: a[4],
            c_t_s: a[5],
        }
    }

    pub fn map2(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let (a, b) = (self.to_array(), other.to_array());
        Self::from_array(std::array::from_fn(|k| f(a[k], b[k])))
    }
}

/// Conjugate statistics of any field view.
pub fn conjugate_stats_of<V: FieldView + ?Sized>(
    obs: &Observation,
    view: &V,
    p: &HyperParams,
    form: BetaDForm,
) -> ConjugateStats {
    let lat = obs.lattice();
    let mut c = ConjugateStats::default();
    for i in 0..lat.num_sites() {
        let si = view.s(i);
        let di = view.d(i);
        c.c_b += (1.0 - si) * obs.residual(i, view.offset(i));
        c.c_t_s += si;
        for n in lat.neighbors(i) {
            let l = view.l(n.edge);
            let dj = view.d(n.site);
            let r = (di[0] - dj[0]).powi(2) + (di[1] - dj[1]).powi(2);
            c.c_lambda_d += smoothness_kernel(p.beta_d, r) * (1.0 - l);
            c.c_lambda_s += (1.0 - l) * coupling_kernel(si, view.s(n.site));
            c.c_alpha_l += l / obs.gap_sq(n.edge);
            c.c_beta_d += form.pair_term(p, r, 1.0 - l);
        }
    }
    c
}

/// Conjugate statistics of a binary configuration (calculus-consistent
/// `beta_d` statistic).
pub fn conjugate_stats(obs: &Observation, fields: &FieldState, p: &HyperParams) -> ConjugateStats {
    conjugate_stats_of(obs, fields, p, BetaDForm::Squared)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::energy_of;
    use crate::frames::{FramePair, GrayImage};
    use crate::lattice::Velocity;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_fields_identical_frames() {
        let img = GrayImage::new(3, 2, vec![1, 2, 3, 4, 5, 6]).unwrap();
        let obs = Observation::new(FramePair::new(img.clone(), img).unwrap(), 1).unwrap();
        let f = FieldState::zeros(obs.lattice());
        let c = conjugate_stats(&obs, &f, &HyperParams::default());
        let pairs = obs.lattice().num_ordered_pairs() as f64;
        assert_eq!(c.c_b, 0.0);
        assert_eq!(c.c_t_s, 0.0);
        assert_eq!(c.c_alpha_l, 0.0);
        assert_eq!(c.c_lambda_d, -pairs);
        assert_eq!(c.c_lambda_s, -pairs);
        assert_eq!(c.c_beta_d, 0.0);
    }

    #[test]
    fn all_unpredictable() {
        let obs = Observation::new(
            FramePair::new(GrayImage::filled(2, 2, 0), GrayImage::filled(2, 2, 90)).unwrap(),
            1,
        )
        .unwrap();
        let mut f = FieldState::zeros(obs.lattice());
        f.s = vec![1; 4];
        let c = conjugate_stats(&obs, &f, &HyperParams::default());
        assert_eq!(c.c_b, 0.0);
        assert_eq!(c.c_t_s, 4.0);
    }

    #[test]
    fn statistics_are_energy_derivatives() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let prev = (0..4).map(|_| rng.gen()).collect();
            let curr = (0..4).map(|_| rng.gen()).collect();
            let obs = Observation::new(
                FramePair::new(GrayImage::new(2, 2, prev).unwrap(), GrayImage::new(2, 2, curr).unwrap()).unwrap(),
                1,
            )
            .unwrap();
            let lat = obs.lattice();
            let f = FieldState {
                d: (0..4).map(|i| lat.support(i).get(rng.gen_range(0..4))).collect(),
                s: (0..4).map(|_| rng.gen_range(0..2)).collect(),
                l: (0..4).map(|_| rng.gen_range(0..2)).collect(),
            };
            let p = HyperParams {
                b: rng.gen_range(0.01..1.0),
                beta_d: rng.gen_range(0.2..3.0),
                ..HyperParams::default()
            };
            let c = conjugate_stats(&obs, &f, &p);
            for param in Param::ALL {
                let x = param.get(&p);
                let h = 1e-5 * x.abs().max(1.0);
                let (mut up, mut dn) = (p, p);
                param.set(&mut up, x + h);
                param.set(&mut dn, x - h);
                let fd = (energy_of(&obs, &f, &up).total - energy_of(&obs, &f, &dn).total) / (2.0 * h);
                let a = c.get(param);
                assert!((fd - a).abs() <= 1e-6 * a.abs().max(1.0), "{param:?}: {fd} vs {a}");
            }
        }
    }

    #[test]
    fn printed_form_uses_unsquared_exponent() {
        let img = GrayImage::filled(2, 1, 0);
        let obs = Observation::new(FramePair::new(img.clone(), img).unwrap(), 1).unwrap();
        let f = FieldState { d: vec![Velocity::new(0, 0), Velocity::new(1, 0)], s: vec![0, 0], l: vec![0] };
        let p = HyperParams { beta_d: 0.5, ..HyperParams::default() };
        let printed = conjugate_stats_of(&obs, &f, &p, BetaDForm::Printed).c_beta_d;
        assert!((printed - 2.0 * (-0.5f64).exp()).abs() < 1e-15);
        let squared = conjugate_stats(&obs, &f, &p).c_beta_d;
        assert!((squared - 2.0 * p.lambda_d * 2.0 * (-0.5f64).exp()).abs() < 1e-15);
    }
}
