//! Adam with bias correction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Parameter, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            alpha: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    /// Settings used for GANs.
    pub fn gan() -> Self {
        Self {
            alpha: 5e-4,
            beta1: 0.5,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("adam.alpha must be > 0, got {}", self.alpha)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("adam.{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config(format!("adam.eps must be > 0, got {}", self.eps)));
        }
        Ok(())
    }
}

/// Optimizer state for one ordered list of parameters.
#[derive(Clone, Debug)]
pub struct Adam<S> {
    pub cfg: AdamConfig,
    t: i32,
    m: Vec<Tensor<S>>,
    v: Vec<Tensor<S>>,
}

impl<S: Scalar> Adam<S> {
    pub fn new(cfg: AdamConfig) -> Self {
        Self {
            cfg,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    /// `θ ← θ − α m̂ / (√v̂ + ε)` for every parameter holding a gradient,
    /// then clears the gradients. The parameter list must keep the same
    /// order and shapes across calls.
    pub fn step(&mut self, params: Vec<&mut Parameter<S>>) -> Result<()> {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| Tensor::zeros(p.value.rows(), p.value.cols())).collect();
            self.v = self.m.clone();
        }
        if params.len() != self.m.len() {
            return Err(Error::Contract(format!(
                "optimizer tracks {} parameters, got {}",
                self.m.len(),
                params.len()
            )));
        }
        self.t += 1;
        let (b1, b2) = (S::of(self.cfg.beta1), S::of(self.cfg.beta2));
        let c1 = S::one() - b1.powi(self.t);
        let c2 = S::one() - b2.powi(self.t);
        let (alpha, eps) = (S::of(self.cfg.alpha), S::of(self.cfg.eps));
        for ((p, m), v) in params.into_iter().zip(&mut self.m).zip(&mut self.v) {
            let Some(g) = p.grad.take() else { continue };
            if g.shape() != m.shape() {
                return Err(Error::Dimension(format!(
                    "gradient {:?} for optimizer slot {:?}",
                    g.shape(),
                    m.shape()
                )));
            }
            let theta = p.value.data_mut();
            for i in 0..theta.len() {
                let gi = g.data()[i];
                let mi = b1 * m.data()[i] + (S::one() - b1) * gi;
                let vi = b2 * v.data()[i] + (S::one() - b2) * gi * gi;
                m.data_mut()[i] = mi;
                v.data_mut()[i] = vi;
                theta[i] -= alpha * (mi / c1) / ((vi / c2).sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic_step(theta0: f64, alpha: f64, steps: usize) -> Vec<f64> {
        let mut p = Parameter::new(Tensor::<f64>::scalar(theta0));
        let mut opt = Adam::new(AdamConfig {
            alpha,
            ..AdamConfig::default()
        });
        let mut out = Vec::new();
        for _ in 0..steps {
            // ∇ ½θ² = θ
            p.grad = Some(p.value.clone());
            opt.step(vec![&mut p]).unwrap();
            out.push(p.value.item());
        }
        out
    }

    #[test]
    fn first_step_moves_by_alpha() {
        let t = quadratic_step(1.0, 0.1, 1);
        assert!((t[0] - 0.9).abs() < 1e-6, "{}", t[0]);
        let t = quadratic_step(-3.0, 0.01, 1);
        assert!((t[0] + 2.99).abs() < 1e-6);
    }

    #[test]
    fn matches_hand_rolled_updates() {
        let (b1, b2, eps, alpha) = (0.9f64, 0.999f64, 1e-8, 0.05);
        let (mut th, mut m, mut v) = (2.0f64, 0.0, 0.0);
        let mut want = Vec::new();
        for t in 1..=5 {
            let g = th;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            th -= alpha * (m / (1.0 - b1.powi(t))) / ((v / (1.0 - b2.powi(t))).sqrt() + eps);
            want.push(th);
        }
        let got = quadratic_step(2.0, alpha, 5);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn skips_parameters_without_gradients() {
        let mut a = Parameter::new(Tensor::<f64>::scalar(1.0));
        let mut b = Parameter::new(Tensor::<f64>::scalar(1.0));
        a.grad = Some(Tensor::scalar(1.0));
        let mut opt = Adam::new(AdamConfig::default());
        opt.step(vec![&mut a, &mut b]).unwrap();
        assert!(a.value.item() < 1.0 && a.grad.is_none());
        assert_eq!(b.value.item(), 1.0);
        assert!(opt.step(vec![&mut a]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(AdamConfig::default().validate().is_ok());
        assert!(AdamConfig { alpha: 0.0, ..Default::default() }.validate().is_err());
        assert!(AdamConfig { beta1: 1.0, ..Default::default() }.validate().is_err());
        assert_eq!(AdamConfig::gan().beta1, 0.5);
    }
}
