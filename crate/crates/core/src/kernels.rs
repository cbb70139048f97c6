//! Gaussian kernel Gram matrices and median-heuristic bandwidths.

use serde::{Deserialize, Serialize};

use crate::autograd::Var;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthMode {
    Fixed,
    MedianHeuristic,
}

/// Gaussian kernel `k(x, x') = exp(-‖x − x'‖² / 2σ²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    /// σ, in the units of the feature distance.
    pub bandwidth: f64,
    pub bandwidth_mode: BandwidthMode,
}

impl KernelConfig {
    pub fn fixed(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::Domain(format!(
                "bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        Ok(Self {
            bandwidth,
            bandwidth_mode: BandwidthMode::Fixed,
        })
    }

    /// Bandwidth set by [`median_heuristic`] on `data`.
    pub fn from_median<S: Scalar>(data: &Tensor<S>) -> Result<Self> {
        let sigma = median_heuristic(data)?.to_f64_lossy();
        Ok(Self {
            bandwidth: sigma,
            bandwidth_mode: BandwidthMode::MedianHeuristic,
        })
    }

    pub fn sigma<S: Scalar>(&self) -> S {
        S::of(self.bandwidth)
    }
}

/// Median of the m(m−1)/2 Euclidean distances between rows. With an even
/// number of pairs the two middle distances are averaged.
pub fn median_heuristic<S: Scalar>(x: &Tensor<S>) -> Result<S> {
    let m = x.rows();
    if m < 2 {
        return Err(Error::Contract(format!(
            "median heuristic needs at least 2 rows, got {m}"
        )));
    }
    let mut dists = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        let xi = x.row(i);
        for j in (i + 1)..m {
            let s: S = xi
                .iter()
                .zip(x.row(j))
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum();
            dists.push(s.sqrt());
        }
    }
    if dists.iter().any(|d| !d.is_finite()) {
        return Err(Error::Domain("non-finite input to median heuristic".into()));
    }
    let n = dists.len();
    let cmp = |a: &S, b: &S| a.partial_cmp(b).expect("finite");
    let mid = n / 2;
    let (lower, upper_mid, _) = dists.select_nth_unstable_by(mid, cmp);
    let upper_mid = *upper_mid;
    let med = if n % 2 == 1 {
        upper_mid
    } else {
        let lower_mid = lower.iter().copied().fold(S::neg_infinity(), S::max);
        (lower_mid + upper_mid) / S::of(2.0)
    };
    if med <= S::zero() {
        return Err(Error::DegenerateBandwidth(
            "median pairwise distance is zero (rows identical or mostly duplicated)".into(),
        ));
    }
    Ok(med)
}

/// Gaussian Gram matrix `K[i,j] = exp(-‖x_i − x_j‖² / 2σ²)` on the tape.
pub fn gaussian_gram<'t, S: Scalar>(x: Var<'t, S>, sigma: S) -> Result<Var<'t, S>> {
    let [m, _] = x.shape();
    if m < 2 {
        return Err(Error::Contract(format!("Gram matrix needs m >= 2, got {m}")));
    }
    if !(sigma > S::zero() && sigma.is_finite()) {
        return Err(Error::Domain(format!("bandwidth {sigma} is not positive")));
    }
    if !x.with_value(Tensor::all_finite) {
        return Err(Error::Domain("non-finite input to Gram matrix".into()));
    }
    let gamma = -S::one() / (S::of(2.0) * sigma * sigma);
    Ok(x.pairwise_sqdist().scale(gamma).exp())
}

/// Plain (untaped) Gram matrix.
pub fn gaussian_gram_matrix<S: Scalar>(x: &Tensor<S>, cfg: &KernelConfig) -> Result<Tensor<S>> {
    let tape = crate::autograd::Tape::new();
    let v = tape.constant(x.clone());
    Ok(gaussian_gram(v, cfg.sigma())?.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::Tape;
    use crate::gradcheck::max_gradient_error;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(rows: usize, cols: usize, v: &[f64]) -> Tensor<f64> {
        Tensor::from_f64(rows, cols, v).unwrap()
    }

    #[test]
    fn identical_rows_give_ones() {
        let k = gaussian_gram_matrix(&t(2, 2, &[1.0, 2.0, 1.0, 2.0]), &KernelConfig::fixed(0.7).unwrap())
            .unwrap();
        assert_eq!(k.data(), &[1.0; 4]);
    }

    #[test]
    fn distance_sigma_gives_exp_minus_half() {
        let sigma = 1.3;
        let x = t(2, 1, &[0.0, sigma]);
        let k = gaussian_gram_matrix(&x, &KernelConfig::fixed(sigma).unwrap()).unwrap();
        assert!((k.get(0, 1) - (-0.5f64).exp()).abs() < 1e-15);
        assert!((k.get(0, 1) - 0.60653).abs() < 1e-5);
    }

    #[test]
    fn gram_matches_per_pair_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Tensor::<f64>::randn(5, 3, &mut rng);
        let sigma = 0.9;
        let k = gaussian_gram_matrix(&x, &KernelConfig::fixed(sigma).unwrap()).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let d2: f64 = (0..3).map(|c| (x.get(i, c) - x.get(j, c)).powi(2)).sum();
                let want = (-d2 / (2.0 * sigma * sigma)).exp();
                assert!((k.get(i, j) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn gram_properties_and_translation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Tensor::<f64>::randn(12, 4, &mut rng);
        let cfg = KernelConfig::fixed(1.1).unwrap();
        let k = gaussian_gram_matrix(&x, &cfg).unwrap();
        assert_eq!(k.max_abs_diff(&k.transpose()), 0.0);
        for i in 0..12 {
            assert_eq!(k.get(i, i), 1.0);
            for j in 0..12 {
                assert!(k.get(i, j) > 0.0 && k.get(i, j) <= 1.0);
            }
        }
        let shift = [3.0, -7.5, 0.25, 11.0];
        let mut xs = x.clone();
        for i in 0..12 {
            for (c, s) in shift.iter().enumerate() {
                xs.set(i, c, x.get(i, c) + s);
            }
        }
        let ks = gaussian_gram_matrix(&xs, &cfg).unwrap();
        assert!(k.max_abs_diff(&ks) < 1e-12);
    }

    #[test]
    fn gram_errors() {
        let tape = Tape::new();
        let one = tape.leaf(t(1, 2, &[0.0, 1.0]));
        assert!(matches!(gaussian_gram(one, 1.0), Err(Error::Contract(_))));
        let bad = tape.leaf(t(2, 1, &[0.0, f64::NAN]));
        assert!(matches!(gaussian_gram(bad, 1.0), Err(Error::Domain(_))));
        assert!(KernelConfig::fixed(0.0).is_err());
    }

    #[test]
    fn gram_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Tensor::<f64>::randn(6, 2, &mut rng);
        let w = Tensor::<f64>::randn(6, 6, &mut rng);
        let err = max_gradient_error(&[x, w], |_, v| {
            Ok(gaussian_gram(v[0], 0.8)?.mul(v[1])?.sum())
        })
        .unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn median_examples() {
        assert_eq!(median_heuristic(&t(3, 1, &[0.0, 1.0, 3.0])).unwrap(), 2.0);
        assert_eq!(median_heuristic(&t(2, 2, &[0.0, 0.0, 3.0, 4.0])).unwrap(), 5.0);
        // 4 points on a line: distances {1,2,4,1,3,2} -> sorted 1,1,2,2,3,4 -> 2
        assert_eq!(median_heuristic(&t(4, 1, &[0.0, 1.0, 2.0, 4.0])).unwrap(), 2.0);
        // 0,1,3,7: distances 1,3,7,2,6,4 -> sorted 1,2,3,4,6,7 -> (3+4)/2
        assert_eq!(median_heuristic(&t(4, 1, &[0.0, 1.0, 3.0, 7.0])).unwrap(), 3.5);
    }

    #[test]
    fn median_scales_homogeneously() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = Tensor::<f64>::randn(9, 3, &mut rng);
        let base = median_heuristic(&x).unwrap();
        let scaled = median_heuristic(&x.map(|v| v * 2.5)).unwrap();
        assert!((scaled - 2.5 * base).abs() < 1e-12);
    }

    #[test]
    fn median_degenerate() {
        let x = t(3, 2, &[1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(median_heuristic(&x), Err(Error::DegenerateBandwidth(_))));
        assert!(matches!(median_heuristic(&t(1, 1, &[0.0])), Err(Error::Contract(_))));
    }
}
