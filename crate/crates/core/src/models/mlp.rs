use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Parameter, Tensor};

use super::Model;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply<'t, S: Scalar>(self, x: Var<'t, S>) -> Var<'t, S> {
        match self {
            Activation::Relu => x.relu(),
            Activation::Tanh => x.tanh(),
        }
    }
}

/// `x W + b` with `W` stored as in×out.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Linear<S> {
    pub w: Parameter<S>,
    pub b: Parameter<S>,
}

impl<S: Scalar> Linear<S> {
    /// Weights and biases drawn from `U(−1/√fan_in, 1/√fan_in)`, the usual
    /// default for dense layers.
    pub fn new<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let mut uniform = |rows, cols| {
            let data = (0..rows * cols).map(|_| S::of(rng.random_range(-bound..bound))).collect();
            Tensor::from_vec(rows, cols, data).expect("shape matches")
        };
        let w = uniform(fan_in, fan_out);
        let b = uniform(1, fan_out);
        Self {
            w: Parameter::new(w),
            b: Parameter::new(b),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.w.value.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.w.value.cols()
    }
}

/// Fully connected network; the activation follows every layer but the last.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Mlp<S> {
    pub layers: Vec<Linear<S>>,
    pub activation: Activation,
}

impl<S: Scalar> Mlp<S> {
    /// Layers between consecutive entries of `widths`.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], activation: Activation, rng: &mut R) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::Config("an MLP needs at least input and output widths".into()));
        }
        if widths.contains(&0) {
            return Err(Error::Config(format!("layer widths must be >= 1, got {widths:?}")));
        }
        let layers = widths.windows(2).map(|w| Linear::new(w[0], w[1], rng)).collect();
        Ok(Self { layers, activation })
    }

    /// Three hidden layers of equal width.
    pub fn three_hidden<R: Rng + ?Sized>(
        input: usize,
        hidden: usize,
        output: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        Self::new(&[input, hidden, hidden, hidden, output], activation, rng)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out()
    }

    /// Number of bound leaves consumed by [`Mlp::forward`].
    pub fn n_params(&self) -> usize {
        2 * self.layers.len()
    }

    pub fn forward<'t>(&self, p: &[Var<'t, S>], x: Var<'t, S>) -> Result<Var<'t, S>> {
        debug_assert_eq!(p.len(), self.n_params());
        let last = self.layers.len() - 1;
        let mut h = x;
        for (i, pair) in p.chunks(2).enumerate() {
            h = h.matmul(pair[0])?.add(pair[1])?;
            if i < last {
                h = self.activation.apply(h);
            }
        }
        Ok(h)
    }

    /// Forward pass without gradients.
    pub fn eval(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let tape = Tape::new();
        let p = super::bind(&tape, &self.params(), false);
        Ok(self.forward(&p, tape.constant(x.clone()))?.value())
    }
}

impl<S: Scalar> Model<S> for Mlp<S> {
    fn params(&self) -> Vec<&Parameter<S>> {
        self.layers.iter().flat_map(|l| [&l.w, &l.b]).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter<S>> {
        self.layers.iter_mut().flat_map(|l| [&mut l.w, &mut l.b]).collect()
    }
}
