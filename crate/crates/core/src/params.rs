use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// Hyper-parameters of the posterior plus the inverse temperature.
///
/// `b` is the coefficient of the displaced-frame term and is the quantity that
/// learning updates; `sigma2` and `mu` only seed it through `b = 1/(2 mu sigma2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub sigma2: f64,
    pub mu: f64,
    pub b: f64,
    pub lambda_d: f64,
    pub lambda_s: f64,
    pub alpha_l: f64,
    pub beta_d: f64,
    pub t_s: f64,
    pub beta: f64,
}

impl HyperParams {
    /// Ad-hoc setting `(beta, sigma2, lambda_d, beta_d, alpha_l, T_s, lambda_s)
    /// = (1, 0.2, 2.5, 4, 200, 5, 2)` with the variance rescaled by `mu`.
    pub fn zhang(mu: f64) -> Self {
        let sigma2 = 0.2;
        HyperParams {
            sigma2,
            mu,
            b: 1.0 / (2.0 * mu * sigma2),
            lambda_d: 2.5,
            lambda_s: 2.0,
            alpha_l: 200.0,
            beta_d: 4.0,
            t_s: 5.0,
            beta: 1.0,
        }
    }

    /// Starting point of hyper-parameter learning: the ad-hoc setting with the
    /// tabulated `B = 5`.
    pub fn learning_init() -> Self {
        HyperParams {
            b: 5.0,
            ..Self::zhang(1.0)
        }
    }

    /// Rescale the variance: `b = 1/(2 mu sigma2)`.
    pub fn with_mu(self, mu: f64) -> Self {
        HyperParams {
            mu,
            b: 1.0 / (2.0 * mu * self.sigma2),
            ..self
        }
    }

    pub fn with_beta(self, beta: f64) -> Self {
        HyperParams { beta, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("sigma2", self.sigma2),
            ("mu", self.mu),
            ("b", self.b),
            ("lambda_d", self.lambda_d),
            ("lambda_s", self.lambda_s),
            ("alpha_l", self.alpha_l),
            ("beta_d", self.beta_d),
            ("t_s", self.t_s),
            ("beta", self.beta),
        ];
        if let Some((name, v)) = all.iter().find(|(_, v)| !v.is_finite()) {
            return Err(ModelError::Param(format!("{name} = {v} is not finite")));
        }
        let positive = [("sigma2", self.sigma2), ("mu", self.mu), ("b", self.b), ("beta_d", self.beta_d)];
        if let Some((name, v)) = positive.iter().find(|(_, v)| *v <= 0.0) {
            return Err(ModelError::Param(format!("{name} = {v} must be positive")));
        }
        if self.alpha_l < 0.0 {
            return Err(ModelError::Param(format!(
                "alpha_l = {} must be non-negative",
                self.alpha_l
            )));
        }
        if self.beta < 0.0 {
            return Err(ModelError::Param(format!("beta = {} must be non-negative", self.beta)));
        }
        Ok(())
    }
}

impl Default for HyperParams {
    fn default() -> Self {
        Self::zhang(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn b_follows_scaled_variance() {
        let p = HyperParams::zhang(1.0);
        assert!((p.b - 2.5).abs() < 1e-12);
        let p = p.with_mu(21.0);
        assert!((p.b - 1.0 / 8.4).abs() < 1e-12);
        assert_eq!(HyperParams::learning_init().b, 5.0);
    }

    #[test]
    fn validation() {
        assert!(HyperParams::default().validate().is_ok());
        let bad = HyperParams { b: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = HyperParams { alpha_l: -1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = HyperParams { lambda_s: f64::NAN, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
