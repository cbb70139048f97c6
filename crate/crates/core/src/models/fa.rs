use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Parameter, Tensor};

use super::Model;

/// Factor analysis as a tied linear autoencoder: `z̃ = Wᵀ(x − μ)`,
/// `x̂ = W z̃ + μ`. Sampling draws `W z + μ + σ_obs η`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FaModel<S> {
    /// d × p loadings.
    pub w: Parameter<S>,
    /// 1 × d offset.
    pub mu: Parameter<S>,
    pub sigma_obs: f64,
}

impl<S: Scalar> FaModel<S> {
    pub const DEFAULT_SIGMA_OBS: f64 = 1e-2;

    pub fn new<R: Rng + ?Sized>(d: usize, p: usize, rng: &mut R) -> Result<Self> {
        if p == 0 || p > d {
            return Err(Error::Config(format!("FA needs 1 <= p <= d, got p={p}, d={d}")));
        }
        let scale = S::of(1.0 / (d as f64).sqrt());
        Ok(Self {
            w: Parameter::new(Tensor::randn(d, p, rng).map(|v| v * scale)),
            mu: Parameter::new(Tensor::zeros(1, d)),
            sigma_obs: Self::DEFAULT_SIGMA_OBS,
        })
    }

    pub fn d(&self) -> usize {
        self.w.value.rows()
    }

    pub fn p(&self) -> usize {
        self.w.value.cols()
    }

    fn check(&self, x: Var<'_, S>) -> Result<()> {
        if x.shape()[1] != self.d() {
            return Err(Error::Dimension(format!(
                "batch has {} columns, model has d={}",
                x.shape()[1],
                self.d()
            )));
        }
        Ok(())
    }

    /// `x̂` for each row of `x`.
    pub fn reconstruct_var<'t>(&self, p: &[Var<'t, S>], x: Var<'t, S>) -> Result<Var<'t, S>> {
        self.check(x)?;
        let (w, mu) = (p[0], p[1]);
        let centered = x.sub(mu)?;
        centered.matmul(w)?.matmul(w.transpose())?.add(mu)
    }

    /// Mean over rows of `‖x − W Wᵀ(x − μ) − μ‖²`.
    pub fn loss<'t>(&self, p: &[Var<'t, S>], x: Var<'t, S>) -> Result<Var<'t, S>> {
        let r = x.sub(self.reconstruct_var(p, x)?)?;
        let n = S::from_usize(x.shape()[0]).expect("row count fits");
        Ok(r.square().sum().div_scalar(n))
    }

    /// `m` reparameterized samples.
    pub fn sample<'t, R: Rng + ?Sized>(&self, p: &[Var<'t, S>], m: usize, rng: &mut R) -> Result<Var<'t, S>> {
        let tape = p[0].tape();
        let z = tape.constant(Tensor::randn(m, self.p(), rng));
        let eta = Tensor::<S>::randn(m, self.d(), rng).map(|v| v * S::of(self.sigma_obs));
        z.matmul(p[0].transpose())?.add(p[1])?.add(tape.constant(eta))
    }

    pub fn reconstruct(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let tape = Tape::new();
        let p = super::bind(&tape, &self.params(), false);
        Ok(self.reconstruct_var(&p, tape.constant(x.clone()))?.value())
    }
}

impl<S: Scalar> Model<S> for FaModel<S> {
    fn params(&self) -> Vec<&Parameter<S>> {
        vec![&self.w, &self.mu]
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter<S>> {
        vec![&mut self.w, &mut self.mu]
    }
}
