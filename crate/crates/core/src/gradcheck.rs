//! Central finite-difference gradient checking.
//!
//! Used by the test suites as an oracle that is independent of the tape's
//! backward rules.

use crate::autograd::{Tape, Var};
use crate::error::Result;
use crate::tensor::Tensor;

/// Default step for central differences.
pub const FD_STEP: f64 = 1e-5;

/// Numerical gradient of `f` with respect to each input by central
/// differences.
pub fn numerical_gradient<F>(inputs: &[Tensor<f64>], h: f64, f: F) -> Result<Vec<Tensor<f64>>>
where
    F: Fn(&[Tensor<f64>]) -> Result<f64>,
{
    let mut work: Vec<Tensor<f64>> = inputs.to_vec();
    let mut out = Vec::with_capacity(inputs.len());
    for k in 0..inputs.len() {
        let mut g = Tensor::zeros(inputs[k].rows(), inputs[k].cols());
        for i in 0..inputs[k].numel() {
            let orig = work[k].data()[i];
            work[k].data_mut()[i] = orig + h;
            let fp = f(&work)?;
            work[k].data_mut()[i] = orig - h;
            let fm = f(&work)?;
            work[k].data_mut()[i] = orig;
            g.data_mut()[i] = (fp - fm) / (2.0 * h);
        }
        out.push(g);
    }
    Ok(out)
}

/// Gradient of the scalar built by `build` with respect to each input, via
/// the tape.
pub fn tape_gradient<F>(inputs: &[Tensor<f64>], build: F) -> Result<(f64, Vec<Tensor<f64>>)>
where
    F: for<'t> Fn(&'t Tape<f64>, &[Var<'t, f64>]) -> Result<Var<'t, f64>>,
{
    let tape = Tape::new();
    let vars: Vec<_> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let root = build(&tape, &vars)?;
    let value = root.item();
    let grads = tape.backward(root)?;
    Ok((value, vars.iter().map(|&v| grads.wrt(v)).collect()))
}

/// Norm-wise relative error `‖a − b‖ / max(‖a‖, ‖b‖, floor)`.
pub fn relative_error(a: &Tensor<f64>, b: &Tensor<f64>, floor: f64) -> f64 {
    let diff: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let na = a.data().iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.data().iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(floor)
}

/// Largest relative error between tape and finite-difference gradients over
/// all inputs.
pub fn max_gradient_error<F>(inputs: &[Tensor<f64>], build: F) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape<f64>, &[Var<'t, f64>]) -> Result<Var<'t, f64>>,
{
    let (_, analytic) = tape_gradient(inputs, &build)?;
    let numeric = numerical_gradient(inputs, FD_STEP, |xs| {
        let tape = Tape::new();
        let vars: Vec<_> = xs.iter().map(|t| tape.constant(t.clone())).collect();
        Ok(build(&tape, &vars)?.item())
    })?;
    Ok(analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| relative_error(a, n, 1e-10))
        .fold(0.0, f64::max))
}
