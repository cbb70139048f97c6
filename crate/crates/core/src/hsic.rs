//! Empirical HSIC, the relative-dependence statistic and its test.
//!
//! Both estimators are written as an inner product between the raw Gram of
//! one variable and a centered Gram of the other:
//!
//! * biased: `tr(K H L H) / m² = ⟨K, HLH⟩ / m²`
//! * unbiased: `⟨K̃, U(L̃)⟩ / (m(m−3))`, where `K̃`, `L̃` have zeroed
//!   diagonals and `U` is U-centering. This equals the closed form of
//!   Song et al. (2012).
//!
//! Each estimator exists twice: on the tape (differentiable, used by the
//! regularizer) and on plain tensors (used by the bootstrap, where the full
//! Gram matrices are computed once and resampled by index).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::kernels::{gaussian_gram, gaussian_gram_matrix, KernelConfig};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    #[default]
    Biased,
    Unbiased,
}

impl Estimator {
    pub fn min_samples(self) -> usize {
        4
    }
}

/// An empirical HSIC value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HsicEstimate<S> {
    pub value: S,
    pub estimator: Estimator,
    pub m: usize,
}

/// Output of [`rel_dep_test`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelDepResult {
    pub rho_hat: f64,
    pub sigma2_xy: f64,
    pub sigma2_xz: f64,
    pub sigma_xyxz: f64,
    pub tau: f64,
    pub p_bound: f64,
}

/// Kernels for the reference, "more dependent" and "less dependent" blocks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelKernels {
    pub reference: KernelConfig,
    pub plus: KernelConfig,
    pub minus: KernelConfig,
}

impl RelKernels {
    /// Median-heuristic bandwidth for each block.
    pub fn median<S: Scalar>(x_ref: &Tensor<S>, x_plus: &Tensor<S>, x_minus: &Tensor<S>) -> Result<Self> {
        Ok(Self {
            reference: KernelConfig::from_median(x_ref)?,
            plus: KernelConfig::from_median(x_plus)?,
            minus: KernelConfig::from_median(x_minus)?,
        })
    }
}

fn check_m(m: usize, est: Estimator) -> Result<()> {
    if m < est.min_samples() {
        return Err(Error::Contract(format!(
            "{est:?} HSIC needs m >= {}, got {m}",
            est.min_samples()
        )));
    }
    Ok(())
}

fn usize_s<S: Scalar>(n: usize) -> S {
    S::from_usize(n).expect("usize fits scalar")
}

/// `H L H` on the tape.
pub fn double_center<'t, S: Scalar>(l: Var<'t, S>) -> Result<Var<'t, S>> {
    let m = l.shape()[0];
    let mf = usize_s::<S>(m);
    let row_means = l.sum_rows().div_scalar(mf);
    let col_means = l.sum_cols().div_scalar(mf);
    let grand = l.sum().div_scalar(mf * mf);
    l.sub(row_means)?.sub(col_means)?.add(grand)
}

/// U-centering of a Gram matrix on the tape; the diagonal of the input is
/// ignored and the output diagonal is zero.
pub fn u_center<'t, S: Scalar>(l: Var<'t, S>) -> Result<Var<'t, S>> {
    let m = l.shape()[0];
    let tape = l.tape();
    let mask = tape.constant(off_diagonal_mask(m));
    let lt = l.mul(mask)?;
    let m1 = usize_s::<S>(m - 1);
    let a = m1 / usize_s::<S>(m - 2);
    let mu = lt.sum().div_scalar(usize_s::<S>(m) * m1);
    let row_dev = lt.sum_rows().div_scalar(m1).sub(mu)?.scale(a);
    let col_dev = lt.sum_cols().div_scalar(m1).sub(mu)?.scale(a);
    lt.sub(mu)?.sub(row_dev)?.sub(col_dev)?.mul(mask)
}

fn off_diagonal_mask<S: Scalar>(m: usize) -> Tensor<S> {
    let mut t = Tensor::full(m, m, S::one());
    for i in 0..m {
        t.set(i, i, S::zero());
    }
    t
}

/// Centered version of `l` appropriate for `est`.
pub fn center_for<'t, S: Scalar>(l: Var<'t, S>, est: Estimator) -> Result<Var<'t, S>> {
    match est {
        Estimator::Biased => double_center(l),
        Estimator::Unbiased => u_center(l),
    }
}

/// HSIC from a raw Gram `k` and a Gram `l_centered` already passed through
/// [`center_for`] with the same estimator.
pub fn hsic_centered<'t, S: Scalar>(
    k: Var<'t, S>,
    l_centered: Var<'t, S>,
    est: Estimator,
) -> Result<Var<'t, S>> {
    let m = k.shape()[0];
    check_m(m, est)?;
    let norm = match est {
        Estimator::Biased => usize_s::<S>(m * m),
        Estimator::Unbiased => usize_s::<S>(m * (m - 3)),
    };
    // The zero diagonal of a U-centered matrix already drops K's diagonal.
    Ok(k.mul(l_centered)?.sum().div_scalar(norm))
}

/// HSIC from two Gram matrices on the tape.
pub fn hsic_from_grams<'t, S: Scalar>(k: Var<'t, S>, l: Var<'t, S>, est: Estimator) -> Result<Var<'t, S>> {
    let [m, m2] = k.shape();
    if [m, m2] != l.shape() || m != m2 {
        return Err(Error::Contract(format!(
            "Gram shapes {:?} and {:?} differ",
            k.shape(),
            l.shape()
        )));
    }
    check_m(m, est)?;
    hsic_centered(k, center_for(l, est)?, est)
}

/// Differentiable HSIC between row-paired samples `x` and `y`.
pub fn hsic_var<'t, S: Scalar>(
    x: Var<'t, S>,
    y: Var<'t, S>,
    sigma_x: S,
    sigma_y: S,
    est: Estimator,
) -> Result<Var<'t, S>> {
    let (m, my) = (x.shape()[0], y.shape()[0]);
    if m != my {
        return Err(Error::Contract(format!("sample counts differ: {m} vs {my}")));
    }
    check_m(m, est)?;
    hsic_from_grams(gaussian_gram(x, sigma_x)?, gaussian_gram(y, sigma_y)?, est)
}

fn hsic_tensor<S: Scalar>(
    x: &Tensor<S>,
    y: &Tensor<S>,
    kx: &KernelConfig,
    ky: &KernelConfig,
    est: Estimator,
) -> Result<HsicEstimate<S>> {
    let tape = Tape::new();
    let v = hsic_var(
        tape.constant(x.clone()),
        tape.constant(y.clone()),
        kx.sigma(),
        ky.sigma(),
        est,
    )?;
    Ok(HsicEstimate {
        value: v.item(),
        estimator: est,
        m: x.rows(),
    })
}

/// Biased estimator `tr(KHLH)/m²`; never negative up to rounding.
pub fn hsic_biased<S: Scalar>(
    x: &Tensor<S>,
    y: &Tensor<S>,
    kx: &KernelConfig,
    ky: &KernelConfig,
) -> Result<HsicEstimate<S>> {
    hsic_tensor(x, y, kx, ky, Estimator::Biased)
}

/// Unbiased U-statistic estimator (can be negative).
pub fn hsic_unbiased<S: Scalar>(
    x: &Tensor<S>,
    y: &Tensor<S>,
    kx: &KernelConfig,
    ky: &KernelConfig,
) -> Result<HsicEstimate<S>> {
    hsic_tensor(x, y, kx, ky, Estimator::Unbiased)
}

/// ρ̂ = HSIC(ref, plus) − HSIC(ref, minus) on the tape.
#[allow(clippy::too_many_arguments)]
pub fn relative_hsic_var<'t, S: Scalar>(
    x_ref: Var<'t, S>,
    x_plus: Var<'t, S>,
    x_minus: Var<'t, S>,
    kernels: &RelKernels,
    est: Estimator,
) -> Result<Var<'t, S>> {
    let m = x_ref.shape()[0];
    if x_plus.shape()[0] != m || x_minus.shape()[0] != m {
        return Err(Error::Contract("ref/plus/minus sample counts differ".into()));
    }
    check_m(m, est)?;
    let k = gaussian_gram(x_ref, kernels.reference.sigma())?;
    let lp = center_for(gaussian_gram(x_plus, kernels.plus.sigma())?, est)?;
    let lm = center_for(gaussian_gram(x_minus, kernels.minus.sigma())?, est)?;
    relative_from_centered(k, lp, lm, est)
}

/// ρ̂ from the raw reference Gram and the two centered Grams.
pub fn relative_from_centered<'t, S: Scalar>(
    k_ref: Var<'t, S>,
    l_plus_centered: Var<'t, S>,
    l_minus_centered: Var<'t, S>,
    est: Estimator,
) -> Result<Var<'t, S>> {
    hsic_centered(k_ref, l_plus_centered, est)?.sub(hsic_centered(k_ref, l_minus_centered, est)?)
}

/// Plain-tensor ρ̂.
pub fn relative_hsic<S: Scalar>(
    x_ref: &Tensor<S>,
    x_plus: &Tensor<S>,
    x_minus: &Tensor<S>,
    kernels: &RelKernels,
    est: Estimator,
) -> Result<S> {
    let tape = Tape::new();
    let v = relative_hsic_var(
        tape.constant(x_ref.clone()),
        tape.constant(x_plus.clone()),
        tape.constant(x_minus.clone()),
        kernels,
        est,
    )?;
    Ok(v.item())
}

/// HSIC from precomputed Grams without a tape, resampling rows by `idx`.
fn hsic_indexed(k: &Tensor<f64>, l: &Tensor<f64>, idx: &[usize], est: Estimator) -> f64 {
    let m = idx.len();
    let mf = m as f64;
    let at = |g: &Tensor<f64>, a: usize, b: usize| g.get(idx[a], idx[b]);
    match est {
        Estimator::Biased => {
            // ⟨K, HLH⟩ / m² expanded: tr(KL) − 2/m Σ (K1)(L1) + (1ᵀK1)(1ᵀL1)/m²
            let (mut kl, mut ksum, mut lsum, mut cross) = (0.0, 0.0, 0.0, 0.0);
            for a in 0..m {
                let (mut kr, mut lr) = (0.0, 0.0);
                for b in 0..m {
                    let (kv, lv) = (at(k, a, b), at(l, a, b));
                    kl += kv * lv;
                    kr += kv;
                    lr += lv;
                }
                ksum += kr;
                lsum += lr;
                cross += kr * lr;
            }
            (kl - 2.0 * cross / mf + ksum * lsum / (mf * mf)) / (mf * mf)
        }
        Estimator::Unbiased => {
            // Song et al. closed form with zero-diagonal Grams.
            let (mut kl, mut ksum, mut lsum, mut cross) = (0.0, 0.0, 0.0, 0.0);
            for a in 0..m {
                let (mut kr, mut lr) = (0.0, 0.0);
                for b in 0..m {
                    if a == b {
                        continue;
                    }
                    let (kv, lv) = (at(k, a, b), at(l, a, b));
                    kl += kv * lv;
                    kr += kv;
                    lr += lv;
                }
                ksum += kr;
                lsum += lr;
                cross += kr * lr;
            }
            (kl + ksum * lsum / ((mf - 1.0) * (mf - 2.0)) - 2.0 * cross / (mf - 2.0))
                / (mf * (mf - 3.0))
        }
    }
}

/// Variances and covariance of (ĤSIC(ref,plus), ĤSIC(ref,minus)) under
/// bootstrap row resampling.
#[allow(clippy::too_many_arguments)]
pub fn estimate_rel_variance<S: Scalar>(
    x_ref: &Tensor<S>,
    x_plus: &Tensor<S>,
    x_minus: &Tensor<S>,
    kernels: &RelKernels,
    est: Estimator,
    n_boot: usize,
    seed: u64,
) -> Result<(f64, f64, f64)> {
    let m = x_ref.rows();
    if x_plus.rows() != m || x_minus.rows() != m {
        return Err(Error::Contract("ref/plus/minus sample counts differ".into()));
    }
    if m < 8 {
        return Err(Error::Contract(format!("variance estimate needs m >= 8, got {m}")));
    }
    if n_boot < 100 {
        return Err(Error::Contract(format!("need at least 100 bootstrap resamples, got {n_boot}")));
    }
    let k = gaussian_gram_matrix(&x_ref.cast::<f64>(), &kernels.reference)?;
    let lp = gaussian_gram_matrix(&x_plus.cast::<f64>(), &kernels.plus)?;
    let lm = gaussian_gram_matrix(&x_minus.cast::<f64>(), &kernels.minus)?;

    let mut pairs = Vec::with_capacity(n_boot);
    let mut idx = vec![0usize; m];
    for b in 0..n_boot {
        // One independent stream per resample.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64);
        for slot in idx.iter_mut() {
            *slot = rng.random_range(0..m);
        }
        pairs.push((hsic_indexed(&k, &lp, &idx, est), hsic_indexed(&k, &lm, &idx, est)));
    }
    let n = n_boot as f64;
    let mean_a = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_b = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0);
    for &(a, b) in &pairs {
        saa += (a - mean_a) * (a - mean_a);
        sbb += (b - mean_b) * (b - mean_b);
        sab += (a - mean_a) * (b - mean_b);
    }
    let (saa, sbb, sab) = (saa / (n - 1.0), sbb / (n - 1.0), sab / (n - 1.0));
    if saa <= 0.0 && sbb <= 0.0 {
        return Err(Error::DegenerateVariance(
            "bootstrap HSIC values have zero variance".into(),
        ));
    }
    Ok((saa, sbb, sab))
}

/// Minimum τ² for the test to be applicable.
pub const MIN_TAU2: f64 = 1e-12;

/// Relative-dependence test of H0: ρ ≤ 0 against H1: ρ > 0 using the
/// conservative bound `p ≤ 1 − Φ(ρ̂/τ)`.
#[allow(clippy::too_many_arguments)]
pub fn rel_dep_test<S: Scalar>(
    x_ref: &Tensor<S>,
    x_plus: &Tensor<S>,
    x_minus: &Tensor<S>,
    kernels: &RelKernels,
    est: Estimator,
    n_boot: usize,
    seed: u64,
) -> Result<RelDepResult> {
    let rho_hat = relative_hsic(x_ref, x_plus, x_minus, kernels, est)?.to_f64_lossy();
    let (sigma2_xy, sigma2_xz, sigma_xyxz) =
        estimate_rel_variance(x_ref, x_plus, x_minus, kernels, est, n_boot, seed)?;
    let tau2 = sigma2_xy + sigma2_xz - 2.0 * sigma_xyxz;
    if !(tau2 > MIN_TAU2) {
        return Err(Error::DegenerateVariance(format!(
            "tau² = {tau2:e} <= {MIN_TAU2:e}; the two HSIC estimates are (nearly) identical"
        )));
    }
    let tau = tau2.sqrt();
    Ok(RelDepResult {
        rho_hat,
        sigma2_xy,
        sigma2_xz,
        sigma_xyxz,
        tau,
        p_bound: p_value_bound(rho_hat, tau),
    })
}

/// `1 − Φ(ρ̂/τ)`.
pub fn p_value_bound(rho_hat: f64, tau: f64) -> f64 {
    phi_sf(rho_hat / tau)
}

/// Standard normal CDF.
pub fn phi_cdf(u: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-u / std::f64::consts::SQRT_2)
}

/// Standard normal survival function `1 − Φ(u)`, accurate in the upper tail.
pub fn phi_sf(u: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(u / std::f64::consts::SQRT_2)
}

/// Standard normal quantile.
pub fn phi_inv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("normal quantile needs 0 < p < 1, got {p}")));
    }
    Ok(-std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::max_gradient_error;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn kc(s: f64) -> KernelConfig {
        KernelConfig::fixed(s).unwrap()
    }

    /// Term-by-term evaluation of the three empirical expectations of the
    /// population HSIC formula, each replaced by its V-statistic.
    fn hsic_expectation_oracle(x: &Tensor<f64>, y: &Tensor<f64>, sx: f64, sy: f64) -> f64 {
        let m = x.rows();
        let kern = |a: &[f64], b: &[f64], s: f64| {
            let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum();
            (-d2 / (2.0 * s * s)).exp()
        };
        let mf = m as f64;
        let mut t1 = 0.0;
        let mut ek = 0.0;
        let mut el = 0.0;
        for i in 0..m {
            for j in 0..m {
                let k = kern(x.row(i), x.row(j), sx);
                let l = kern(y.row(i), y.row(j), sy);
                t1 += k * l;
                ek += k;
                el += l;
            }
        }
        t1 /= mf * mf;
        ek /= mf * mf;
        el /= mf * mf;
        let mut t3 = 0.0;
        for i in 0..m {
            let mut kx = 0.0;
            let mut ly = 0.0;
            for j in 0..m {
                kx += kern(x.row(i), x.row(j), sx);
                ly += kern(y.row(i), y.row(j), sy);
            }
            t3 += (kx / mf) * (ly / mf);
        }
        t3 /= mf;
        t1 + ek * el - 2.0 * t3
    }

    #[test]
    fn biased_matches_expectation_terms() {
        let x = Tensor::<f64>::randn(6, 2, &mut rng(1));
        let got = hsic_biased(&x, &x, &kc(0.9), &kc(0.9)).unwrap().value;
        let want = hsic_expectation_oracle(&x, &x, 0.9, 0.9);
        assert!((got - want).abs() < 1e-14, "{got} vs {want}");
        let y = Tensor::<f64>::randn(6, 3, &mut rng(2));
        let got = hsic_biased(&x, &y, &kc(0.7), &kc(1.4)).unwrap().value;
        let want = hsic_expectation_oracle(&x, &y, 0.7, 1.4);
        assert!((got - want).abs() < 1e-14);
    }

    #[test]
    fn constant_marginal_is_exactly_zero() {
        let x = Tensor::<f64>::randn(10, 2, &mut rng(3));
        let y = Tensor::full(10, 1, 2.5);
        assert_eq!(hsic_biased(&x, &y, &kc(1.0), &kc(1.0)).unwrap().value, 0.0);
        assert_eq!(hsic_unbiased(&x, &y, &kc(1.0), &kc(1.0)).unwrap().value, 0.0);
    }

    #[test]
    fn unbiased_tape_form_matches_closed_form() {
        for seed in 0..5 {
            let x = Tensor::<f64>::randn(9, 2, &mut rng(seed));
            let y = x.map(|v| v.sin()).zip_map(&Tensor::randn(9, 2, &mut rng(seed + 50)), |a, b| a + 0.3 * b).unwrap();
            let k = gaussian_gram_matrix(&x, &kc(1.0)).unwrap();
            let l = gaussian_gram_matrix(&y, &kc(0.8)).unwrap();
            let idx: Vec<usize> = (0..9).collect();
            let closed = hsic_indexed(&k, &l, &idx, Estimator::Unbiased);
            let tape = hsic_unbiased(&x, &y, &kc(1.0), &kc(0.8)).unwrap().value;
            assert!((closed - tape).abs() < 1e-14, "{closed} vs {tape}");
            let closed_b = hsic_indexed(&k, &l, &idx, Estimator::Biased);
            let tape_b = hsic_biased(&x, &y, &kc(1.0), &kc(0.8)).unwrap().value;
            assert!((closed_b - tape_b).abs() < 1e-14);
        }
    }

    #[test]
    fn sample_count_contracts() {
        let x = Tensor::<f64>::randn(3, 1, &mut rng(4));
        assert!(matches!(hsic_unbiased(&x, &x, &kc(1.0), &kc(1.0)), Err(Error::Contract(_))));
        let y = Tensor::<f64>::randn(5, 1, &mut rng(4));
        let x5 = Tensor::<f64>::randn(6, 1, &mut rng(4));
        assert!(matches!(hsic_biased(&x5, &y, &kc(1.0), &kc(1.0)), Err(Error::Contract(_))));
    }

    #[test]
    fn relative_identities() {
        let r = Tensor::<f64>::randn(20, 1, &mut rng(5));
        let p = Tensor::<f64>::randn(20, 2, &mut rng(6));
        let q = Tensor::<f64>::randn(20, 1, &mut rng(7));
        let ks = RelKernels { reference: kc(1.0), plus: kc(1.2), minus: kc(0.8) };
        let same = RelKernels { reference: kc(1.0), plus: kc(1.2), minus: kc(1.2) };
        for est in [Estimator::Biased, Estimator::Unbiased] {
            assert_eq!(relative_hsic(&r, &p, &p, &same, est).unwrap(), 0.0);
            let swapped = RelKernels { reference: kc(1.0), plus: kc(0.8), minus: kc(1.2) };
            let a = relative_hsic(&r, &p, &q, &ks, est).unwrap();
            let b = relative_hsic(&r, &q, &p, &swapped, est).unwrap();
            assert_eq!(a, -b);
        }
    }

    #[test]
    fn relative_gradient_matches_finite_differences() {
        let ks = RelKernels { reference: kc(1.0), plus: kc(0.9), minus: kc(1.1) };
        for seed in 0..3 {
            let mut g = rng(100 + seed);
            let inputs = [
                Tensor::<f64>::randn(8, 2, &mut g),
                Tensor::<f64>::randn(8, 1, &mut g),
                Tensor::<f64>::randn(8, 2, &mut g),
            ];
            for est in [Estimator::Biased, Estimator::Unbiased] {
                let err = max_gradient_error(&inputs, |_, v| relative_hsic_var(v[0], v[1], v[2], &ks, est))
                    .unwrap();
                assert!(err < 1e-4, "{est:?}: {err}");
            }
        }
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi_cdf(0.0), 0.5);
        assert!((phi_inv(0.95).unwrap() - 1.6449).abs() < 1e-4);
        for u in [-3.0, -0.5, 0.1, 2.2] {
            assert!((phi_cdf(-u) + phi_cdf(u) - 1.0).abs() < 1e-15);
        }
        for p in [1e-6, 0.01, 0.05, 0.3, 0.5, 0.9, 0.999] {
            assert!((phi_cdf(phi_inv(p).unwrap()) - p).abs() < 1e-10);
        }
        assert!(matches!(phi_inv(0.0), Err(Error::Domain(_))));
        assert!(matches!(phi_inv(1.0), Err(Error::Domain(_))));
        let mut prev = 0.0;
        for i in -60..=60 {
            let v = phi_cdf(i as f64 / 10.0);
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn p_bound_examples() {
        assert_eq!(p_value_bound(0.0, 0.3), 0.5);
        assert!((p_value_bound(1.6449 * 0.02, 0.02) - 0.05).abs() < 1e-5);
    }

    #[test]
    fn identical_blocks_make_test_refuse() {
        let r = Tensor::<f64>::randn(16, 1, &mut rng(8));
        let p = Tensor::<f64>::randn(16, 1, &mut rng(9));
        let ks = RelKernels { reference: kc(1.0), plus: kc(1.0), minus: kc(1.0) };
        let (a, b, c) = estimate_rel_variance(&r, &p, &p, &ks, Estimator::Unbiased, 100, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert!(matches!(
            rel_dep_test(&r, &p, &p, &ks, Estimator::Unbiased, 100, 1),
            Err(Error::DegenerateVariance(_))
        ));
    }

    #[test]
    fn bootstrap_contracts() {
        let r = Tensor::<f64>::randn(16, 1, &mut rng(8));
        let ks = RelKernels { reference: kc(1.0), plus: kc(1.0), minus: kc(1.0) };
        assert!(estimate_rel_variance(&r, &r, &r, &ks, Estimator::Biased, 99, 0).is_err());
        let small = Tensor::<f64>::randn(7, 1, &mut rng(8));
        assert!(estimate_rel_variance(&small, &small, &small, &ks, Estimator::Biased, 100, 0).is_err());
    }
}
