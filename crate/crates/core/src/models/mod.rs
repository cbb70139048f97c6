//! Generative models trained under the knowledge regularizer: factor
//! analysis, VAEs (with an optional dedicated ccMNIST decoder) and GANs.
//!
//! Models own their [`Parameter`]s. A forward pass binds them to a tape with
//! [`bind`], which yields leaves in the order of [`Model::params`]; every
//! forward function takes the slice of bound leaves it needs.

mod checkpoint;
mod fa;
mod gan;
mod mlp;
mod vae;

pub use checkpoint::{AnyModel, Checkpoint, CHECKPOINT_VERSION};
pub use fa::FaModel;
pub use gan::{GanLosses, GanModel, D_CLAMP};
pub use mlp::{Activation, Linear, Mlp};
pub use vae::{DedicatedDecoder, Decoder, ElboTerms, Likelihood, SampleMode, VaeModel};

use crate::autograd::{Gradients, Tape, Var};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::Parameter;

/// Anything with an ordered list of trainable parameters.
pub trait Model<S: Scalar> {
    fn params(&self) -> Vec<&Parameter<S>>;
    fn params_mut(&mut self) -> Vec<&mut Parameter<S>>;

    fn num_weights(&self) -> usize {
        self.params().iter().map(|p| p.value.numel()).sum()
    }
}

/// Puts every parameter on `tape`: as leaves when `trainable`, otherwise as
/// constants.
pub fn bind<'t, S: Scalar>(tape: &'t Tape<S>, params: &[&Parameter<S>], trainable: bool) -> Vec<Var<'t, S>> {
    params
        .iter()
        .map(|p| {
            if trainable && p.requires_grad {
                tape.leaf(p.value.clone())
            } else {
                tape.constant(p.value.clone())
            }
        })
        .collect()
}

/// Adds the gradients of `leaves` into the matching parameters.
pub fn accumulate<S: Scalar>(
    params: Vec<&mut Parameter<S>>,
    leaves: &[Var<'_, S>],
    grads: &Gradients<S>,
) -> Result<()> {
    for (p, &v) in params.into_iter().zip(leaves) {
        if p.requires_grad {
            p.accumulate(&grads.wrt(v))?;
        }
    }
    Ok(())
}
