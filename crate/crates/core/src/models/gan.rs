use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Parameter, Tensor};

use super::mlp::{Activation, Mlp};
use super::Model;

/// Discriminator outputs are clamped to `[D_CLAMP, 1 − D_CLAMP]` before logs.
pub const D_CLAMP: f64 = 1e-7;

/// Generator `G: z → x` and discriminator `D: x → (0, 1)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GanModel<S> {
    pub generator: Mlp<S>,
    pub discriminator: Mlp<S>,
    pub dim_z: usize,
}

pub struct GanLosses<'t, S> {
    /// `−mean[log D(x) + log(1 − D(G(z)))]`
    pub d_loss: Var<'t, S>,
    /// `−mean[log D(G(z))]`
    pub g_loss: Var<'t, S>,
    /// The generated batch `G(z)`.
    pub fake: Var<'t, S>,
}

impl<S: Scalar> GanModel<S> {
    pub fn new<R: Rng + ?Sized>(d: usize, dim_z: usize, hidden: usize, activation: Activation, rng: &mut R) -> Result<Self> {
        if dim_z == 0 {
            return Err(Error::Config("dim_z must be >= 1".into()));
        }
        Ok(Self {
            generator: Mlp::three_hidden(dim_z, hidden, d, activation, rng)?,
            discriminator: Mlp::three_hidden(d, hidden, 1, activation, rng)?,
            dim_z,
        })
    }

    pub fn d(&self) -> usize {
        self.generator.output_dim()
    }

    /// Leaves belonging to the generator come first in [`Model::params`].
    pub fn n_generator_params(&self) -> usize {
        self.generator.n_params()
    }

    pub fn generate<'t>(&self, p: &[Var<'t, S>], z: Var<'t, S>) -> Result<Var<'t, S>> {
        self.generator.forward(&p[..self.n_generator_params()], z)
    }

    /// Clamped discriminator probabilities (n × 1).
    pub fn discriminate<'t>(&self, p: &[Var<'t, S>], x: Var<'t, S>) -> Result<Var<'t, S>> {
        if x.shape()[1] != self.d() {
            return Err(Error::Dimension(format!(
                "batch has {} columns, model has d={}",
                x.shape()[1],
                self.d()
            )));
        }
        let logits = self.discriminator.forward(&p[self.n_generator_params()..], x)?;
        let c = S::of(D_CLAMP);
        Ok(logits.sigmoid().clamp(c, S::one() - c))
    }

    /// `m` generated samples.
    pub fn sample<'t, R: Rng + ?Sized>(&self, p: &[Var<'t, S>], m: usize, rng: &mut R) -> Result<Var<'t, S>> {
        let z = p[0].tape().constant(Tensor::randn(m, self.dim_z, rng));
        self.generate(p, z)
    }

    /// Both losses on one tape, with `m` fresh latent draws.
    pub fn losses<'t, R: Rng + ?Sized>(
        &self,
        p: &[Var<'t, S>],
        real: Var<'t, S>,
        m: usize,
        rng: &mut R,
    ) -> Result<GanLosses<'t, S>> {
        let fake = self.sample(p, m, rng)?;
        let d_real = self.discriminate(p, real)?;
        let d_fake = self.discriminate(p, fake)?;
        let one_minus_fake = d_fake.neg().add_scalar(S::one());
        let d_loss = d_real.ln()?.mean().add(one_minus_fake.ln()?.mean())?.neg();
        let g_loss = d_fake.ln()?.mean().neg();
        Ok(GanLosses { d_loss, g_loss, fake })
    }

    pub fn generate_tensor(&self, z: &Tensor<S>) -> Result<Tensor<S>> {
        let tape = Tape::new();
        let p = super::bind(&tape, &self.params(), false);
        Ok(self.generate(&p, tape.constant(z.clone()))?.value())
    }
}

impl<S: Scalar> Model<S> for GanModel<S> {
    fn params(&self) -> Vec<&Parameter<S>> {
        let mut out = self.generator.params();
        out.extend(self.discriminator.params());
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter<S>> {
        let mut out = self.generator.params_mut();
        out.extend(self.discriminator.params_mut());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::max_gradient_error;
    use crate::models::bind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gan(seed: u64) -> GanModel<f64> {
        GanModel::new(3, 2, 5, Activation::Relu, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    fn set_constant_discriminator(model: &mut GanModel<f64>, logit: f64) {
        let last = model.discriminator.layers.last_mut().unwrap();
        last.w.value = Tensor::zeros(last.w.value.rows(), 1);
        last.b.value = Tensor::scalar(logit);
    }

    #[test]
    fn half_discriminator_losses() {
        let mut model = gan(0);
        set_constant_discriminator(&mut model, 0.0);
        let tape = Tape::new();
        let p = bind(&tape, &model.params(), false);
        let real = tape.constant(Tensor::randn(6, 3, &mut ChaCha8Rng::seed_from_u64(1)));
        let l = model.losses(&p, real, 6, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let ln2 = std::f64::consts::LN_2;
        assert!((l.d_loss.item() - 2.0 * ln2).abs() < 1e-12);
        assert!((l.g_loss.item() - ln2).abs() < 1e-12);
    }

    #[test]
    fn perfect_discriminator_limit_and_clamp() {
        // D(x) = sigmoid(k x1); real rows have x1 = 1, G always emits x1 = −1
        let mut model = gan(3);
        model.discriminator = Mlp {
            layers: vec![super::super::Linear {
                w: Parameter::new(Tensor::from_f64(3, 1, &[1.0, 0.0, 0.0]).unwrap()),
                b: Parameter::new(Tensor::scalar(0.0)),
            }],
            activation: Activation::Relu,
        };
        let last = model.generator.layers.last_mut().unwrap();
        last.w.value = Tensor::zeros(last.w.value.rows(), 3);
        last.b.value = Tensor::from_f64(1, 3, &[-1.0, 0.0, 0.0]).unwrap();
        let real = Tensor::from_f64(2, 3, &[1.0, 0.3, 0.2, 1.0, -0.4, 0.0]).unwrap();
        let mut prev = f64::INFINITY;
        for k in [1.0, 5.0, 20.0] {
            model.discriminator.layers[0].w.value.set(0, 0, k);
            let tape = Tape::new();
            let p = bind(&tape, &model.params(), false);
            let l = model.losses(&p, tape.constant(real.clone()), 4, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
            assert!(l.d_loss.item() < prev);
            prev = l.d_loss.item();
        }
        assert!(prev <= 2.0 * D_CLAMP + 1e-12, "{prev}");
        // beyond the clamp the loss saturates instead of overflowing
        model.discriminator.layers[0].w.value.set(0, 0, -1e4);
        let tape = Tape::new();
        let p = bind(&tape, &model.params(), false);
        let l = model.losses(&p, tape.constant(real), 4, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert!((l.d_loss.item() + 2.0 * D_CLAMP.ln()).abs() < 1e-6);
    }

    #[test]
    fn discriminator_output_in_unit_interval() {
        let model = gan(6);
        let tape = Tape::new();
        let p = bind(&tape, &model.params(), false);
        let x = tape.constant(Tensor::randn(50, 3, &mut ChaCha8Rng::seed_from_u64(7)).map(|v| 30.0 * v));
        let d = model.discriminate(&p, x).unwrap().value();
        assert!(d.data().iter().all(|&v| v >= D_CLAMP && v <= 1.0 - D_CLAMP));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let model = GanModel::<f64>::new(2, 2, 4, Activation::Tanh, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let mut inputs: Vec<Tensor<f64>> = model.params().iter().map(|p| p.value.clone()).collect();
        inputs.push(Tensor::randn(5, 2, &mut ChaCha8Rng::seed_from_u64(9)));
        let n = inputs.len() - 1;
        for which in 0..2 {
            let err = max_gradient_error(&inputs, |_, v| {
                let l = model.losses(&v[..n], v[n], 5, &mut ChaCha8Rng::seed_from_u64(10))?;
                Ok(if which == 0 { l.d_loss } else { l.g_loss })
            })
            .unwrap();
            assert!(err < 1e-4, "loss {which}: {err}");
        }
    }

    #[test]
    fn losses_touch_only_their_own_parameters_when_bound_that_way() {
        let model = gan(11);
        let tape = Tape::new();
        let ng = model.n_generator_params();
        let params = model.params();
        let mut p = bind(&tape, &params[..ng], false);
        p.extend(bind(&tape, &params[ng..], true));
        let real = tape.constant(Tensor::randn(4, 3, &mut ChaCha8Rng::seed_from_u64(12)));
        let l = model.losses(&p, real, 4, &mut ChaCha8Rng::seed_from_u64(13)).unwrap();
        let grads = tape.backward(l.d_loss).unwrap();
        assert!(p[..ng].iter().all(|&v| !v.requires_grad()));
        assert!(p[ng..].iter().any(|&v| grads.wrt(v).data().iter().any(|&g| g != 0.0)));
    }
}
