use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Parameter, Tensor};

use super::mlp::{Activation, Mlp};
use super::Model;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Likelihood {
    /// Diagonal Gaussian: fixed scale `obs_sigma`, or a learned
    /// per-feature variance when `obs_log_var` is set.
    #[default]
    Gaussian,
    /// Independent Bernoulli pixels; the decoder emits logits.
    Bernoulli,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    /// Decoder means (Gaussian) or probabilities (Bernoulli).
    #[default]
    Mean,
    /// Adds reparameterized observation noise to Gaussian means.
    Noisy,
}

/// ccMNIST-style decoder: `z = [z1 z2 z3 z4]`, the top third of the output
/// sees only `(z1, z2)`, the middle third `(z1, z3)` and the bottom third
/// `z4`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DedicatedDecoder<S> {
    /// Sizes of `z1..z4`.
    pub parts: [usize; 4],
    pub top: Mlp<S>,
    pub middle: Mlp<S>,
    pub bottom: Mlp<S>,
}

impl<S: Scalar> DedicatedDecoder<S> {
    pub fn new<R: Rng + ?Sized>(
        dim_z: usize,
        hidden: usize,
        d: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if dim_z < 4 {
            return Err(Error::Config(format!("dedicated decoder needs dim_z >= 4, got {dim_z}")));
        }
        if d % 3 != 0 {
            return Err(Error::Config(format!("dedicated decoder needs d divisible by 3, got {d}")));
        }
        let mut parts = [dim_z / 4; 4];
        for p in parts.iter_mut().take(dim_z % 4) {
            *p += 1;
        }
        let block = d / 3;
        Ok(Self {
            parts,
            top: Mlp::three_hidden(parts[0] + parts[1], hidden, block, activation, rng)?,
            middle: Mlp::three_hidden(parts[0] + parts[2], hidden, block, activation, rng)?,
            bottom: Mlp::three_hidden(parts[3], hidden, block, activation, rng)?,
        })
    }

    fn ranges(&self) -> [Vec<usize>; 4] {
        let mut start = 0;
        self.parts.map(|n| {
            let r: Vec<usize> = (start..start + n).collect();
            start += n;
            r
        })
    }

    fn forward<'t>(&self, p: &[Var<'t, S>], z: Var<'t, S>) -> Result<Var<'t, S>> {
        let [z1, z2, z3, z4] = self.ranges();
        let (nt, nm) = (self.top.n_params(), self.middle.n_params());
        let cat = |a: &[usize], b: &[usize]| [a, b].concat();
        let top = self.top.forward(&p[..nt], z.slice_columns(&cat(&z1, &z2))?)?;
        let middle = self.middle.forward(&p[nt..nt + nm], z.slice_columns(&cat(&z1, &z3))?)?;
        let bottom = self.bottom.forward(&p[nt + nm..], z.slice_columns(&z4)?)?;
        z.tape().concat_cols(&[top, middle, bottom])
    }

    fn params(&self) -> Vec<&Parameter<S>> {
        [&self.top, &self.middle, &self.bottom]
            .into_iter()
            .flat_map(|m| m.params())
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter<S>> {
        let mut out = self.top.params_mut();
        out.extend(self.middle.params_mut());
        out.extend(self.bottom.params_mut());
        out
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decoder<S> {
    Mlp(Mlp<S>),
    Dedicated(DedicatedDecoder<S>),
}

/// Negative ELBO and its two parts, each averaged over the batch.
pub struct ElboTerms<'t, S> {
    pub neg_elbo: Var<'t, S>,
    /// `−E_q[log p(x|z)]`, one-sample estimate.
    pub recon: Var<'t, S>,
    pub kl: Var<'t, S>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Deserialize<'de>"))]
pub struct VaeModel<S> {
    /// Outputs `[mean | log-variance]` of `q(z|x)`.
    pub encoder: Mlp<S>,
    pub decoder: Decoder<S>,
    pub dim_z: usize,
    pub likelihood: Likelihood,
    pub obs_sigma: f64,
    /// Learned per-feature log-variance (1 × d) of a Gaussian decoder;
    /// overrides `obs_sigma` and comes last in [`Model::params`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obs_log_var: Option<Parameter<S>>,
}

impl<S: Scalar> VaeModel<S> {
    pub fn new<R: Rng + ?Sized>(
        d: usize,
        dim_z: usize,
        hidden: usize,
        activation: Activation,
        likelihood: Likelihood,
        dedicated: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if dim_z == 0 {
            return Err(Error::Config("dim_z must be >= 1".into()));
        }
        let encoder = Mlp::three_hidden(d, hidden, 2 * dim_z, activation, rng)?;
        let decoder = if dedicated {
            Decoder::Dedicated(DedicatedDecoder::new(dim_z, hidden, d, activation, rng)?)
        } else {
            Decoder::Mlp(Mlp::three_hidden(dim_z, hidden, d, activation, rng)?)
        };
        Ok(Self {
            encoder,
            decoder,
            dim_z,
            likelihood,
            obs_sigma: 1.0,
            obs_log_var: None,
        })
    }

    /// Switches a Gaussian decoder to a learned per-feature variance,
    /// initialised at `obs_sigma²`.
    pub fn with_learned_variance(mut self) -> Result<Self> {
        if self.likelihood != Likelihood::Gaussian {
            return Err(Error::Config("a learned variance needs a Gaussian likelihood".into()));
        }
        let lv = S::of(2.0 * self.obs_sigma.ln());
        self.obs_log_var = Some(Parameter::new(Tensor::full(1, self.d(), lv)));
        Ok(self)
    }

    pub fn d(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn n_encoder_params(&self) -> usize {
        self.encoder.n_params()
    }

    /// Position, within [`Model::params`], of the last decoder weight
    /// matrix (h × d). `None` for the dedicated decoder.
    pub fn decoder_output_weight(&self) -> Option<usize> {
        match &self.decoder {
            Decoder::Mlp(m) => Some(self.n_encoder_params() + m.n_params() - 2),
            Decoder::Dedicated(_) => None,
        }
    }

    fn obs_log_var_index(&self) -> usize {
        self.n_encoder_params()
            + match &self.decoder {
                Decoder::Mlp(m) => m.n_params(),
                Decoder::Dedicated(dd) => dd.params().len(),
            }
    }

    /// Mean and log-variance of `q(z|x)`.
    pub fn encode<'t>(&self, p: &[Var<'t, S>], x: Var<'t, S>) -> Result<(Var<'t, S>, Var<'t, S>)> {
        if x.shape()[1] != self.d() {
            return Err(Error::Dimension(format!(
                "batch has {} columns, model has d={}",
                x.shape()[1],
                self.d()
            )));
        }
        let h = self.encoder.forward(&p[..self.n_encoder_params()], x)?;
        let k = self.dim_z;
        let mean = h.slice_columns(&(0..k).collect::<Vec<_>>())?;
        let logvar = h.slice_columns(&(k..2 * k).collect::<Vec<_>>())?;
        Ok((mean, logvar))
    }

    /// Gaussian means, or Bernoulli logits.
    pub fn decode_raw<'t>(&self, p: &[Var<'t, S>], z: Var<'t, S>) -> Result<Var<'t, S>> {
        let p = &p[self.n_encoder_params()..self.obs_log_var_index()];
        match &self.decoder {
            Decoder::Mlp(m) => m.forward(p, z),
            Decoder::Dedicated(dd) => dd.forward(p, z),
        }
    }

    /// Gaussian means, or Bernoulli probabilities.
    pub fn decode_mean<'t>(&self, p: &[Var<'t, S>], z: Var<'t, S>) -> Result<Var<'t, S>> {
        let raw = self.decode_raw(p, z)?;
        Ok(match self.likelihood {
            Likelihood::Gaussian => raw,
            Likelihood::Bernoulli => raw.sigmoid(),
        })
    }

    /// One-sample reparameterized ELBO terms.
    pub fn elbo_terms<'t, R: Rng + ?Sized>(
        &self,
        p: &[Var<'t, S>],
        x: Var<'t, S>,
        rng: &mut R,
    ) -> Result<ElboTerms<'t, S>> {
        let tape = x.tape();
        let [n, d] = x.shape();
        let nf = S::from_usize(n).expect("row count fits");
        let (mean, logvar) = self.encode(p, x)?;
        let eps = tape.constant(Tensor::randn(n, self.dim_z, rng));
        let z = mean.add(logvar.scale(S::of(0.5)).exp().mul(eps)?)?;
        let raw = self.decode_raw(p, z)?;
        let recon_total = match self.likelihood {
            Likelihood::Gaussian if self.obs_log_var.is_some() => {
                let lv = p[self.obs_log_var_index()];
                let log_2pi = S::of((2.0 * std::f64::consts::PI).ln() * 0.5 * (n * d) as f64);
                x.sub(raw)?
                    .square()
                    .mul(lv.neg().exp())?
                    .sum()
                    .add(lv.sum().scale(nf))?
                    .scale(S::of(0.5))
                    .add_scalar(log_2pi)
            }
            Likelihood::Gaussian => {
                let s2 = S::of(self.obs_sigma * self.obs_sigma);
                let log_norm = 0.5 * d as f64 * (2.0 * std::f64::consts::PI * self.obs_sigma.powi(2)).ln();
                x.sub(raw)?
                    .square()
                    .sum()
                    .div_scalar(S::of(2.0) * s2)
                    .add_scalar(S::of(log_norm) * nf)
            }
            // −log Bernoulli(x | sigmoid(l)) = softplus(l) − x l
            Likelihood::Bernoulli => raw.softplus().sub(x.mul(raw)?)?.sum(),
        };
        let recon = recon_total.div_scalar(nf);
        let kl = mean
            .square()
            .add(logvar.exp())?
            .sub(logvar)?
            .add_scalar(-S::one())
            .sum()
            .scale(S::of(0.5))
            .div_scalar(nf);
        Ok(ElboTerms {
            neg_elbo: recon.add(kl)?,
            recon,
            kl,
        })
    }

    /// Negative ELBO averaged over rows.
    pub fn neg_elbo<'t, R: Rng + ?Sized>(&self, p: &[Var<'t, S>], x: Var<'t, S>, rng: &mut R) -> Result<Var<'t, S>> {
        Ok(self.elbo_terms(p, x, rng)?.neg_elbo)
    }

    /// `m` samples from `p(x) = ∫ p(x|z) p(z) dz` via `z ~ N(0, I)`.
    pub fn sample<'t, R: Rng + ?Sized>(
        &self,
        p: &[Var<'t, S>],
        m: usize,
        rng: &mut R,
        mode: SampleMode,
    ) -> Result<Var<'t, S>> {
        let tape = p[0].tape();
        let z = tape.constant(Tensor::randn(m, self.dim_z, rng));
        let mean = self.decode_mean(p, z)?;
        match (mode, self.likelihood) {
            (SampleMode::Noisy, Likelihood::Gaussian) if self.obs_log_var.is_some() => {
                let sd = p[self.obs_log_var_index()].scale(S::of(0.5)).exp();
                mean.add(tape.constant(Tensor::randn(m, self.d(), rng)).mul(sd)?)
            }
            (SampleMode::Noisy, Likelihood::Gaussian) => {
                let eta = Tensor::<S>::randn(m, self.d(), rng).map(|v| v * S::of(self.obs_sigma));
                mean.add(tape.constant(eta))
            }
            _ => Ok(mean),
        }
    }

    /// Decoder mean at the encoder mean of each row.
    pub fn reconstruct(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let tape = Tape::new();
        let p = super::bind(&tape, &self.params(), false);
        let (mean, _) = self.encode(&p, tape.constant(x.clone()))?;
        Ok(self.decode_mean(&p, mean)?.value())
    }

    /// Decoder output for given latent codes, without gradients.
    pub fn decode(&self, z: &Tensor<S>) -> Result<Tensor<S>> {
        let tape = Tape::new();
        let p = super::bind(&tape, &self.params(), false);
        Ok(self.decode_mean(&p, tape.constant(z.clone()))?.value())
    }
}

impl<S: Scalar> Model<S> for VaeModel<S> {
    fn params(&self) -> Vec<&Parameter<S>> {
        let mut out = self.encoder.params();
        match &self.decoder {
            Decoder::Mlp(m) => out.extend(m.params()),
            Decoder::Dedicated(dd) => out.extend(dd.params()),
        }
        out.extend(self.obs_log_var.as_ref());
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter<S>> {
        let mut out = self.encoder.params_mut();
        match &mut self.decoder {
            Decoder::Mlp(m) => out.extend(m.params_mut()),
            Decoder::Dedicated(dd) => out.extend(dd.params_mut()),
        }
        out.extend(self.obs_log_var.as_mut());
        out
    }
}
