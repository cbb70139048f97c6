//! The knowledge-based regularizer `R_K`, its margin calibration and the
//! out-layer baseline.
//!
//! For a knowledge set `K` and model samples `D̂`,
//!
//! ```text
//! R_K = 1/|K| Σ_s max(0, ν_α − ρ̂_s),   ρ̂_s = HSIC(ref_s, plus_s) − HSIC(ref_s, minus_s)
//! ```

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::autograd::Var;
use crate::error::{Error, Result};
use crate::hsic::{center_for, hsic_centered, phi_inv, rel_dep_test, Estimator, RelKernels};
use crate::kernels::{gaussian_gram, median_heuristic, KernelConfig};
use crate::knowledge::{KnowledgeSet, KnowledgeTriple};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Rows used when estimating a group bandwidth from data.
pub const BANDWIDTH_ROWS: usize = 1000;

/// One frozen bandwidth per feature group (0-based, sorted).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BandwidthTable {
    entries: Vec<GroupBandwidth>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct GroupBandwidth {
    features: Vec<usize>,
    sigma: f64,
}

impl BandwidthTable {
    /// Median-heuristic bandwidth for every group used by `ks`, computed on
    /// (up to [`BANDWIDTH_ROWS`] evenly spaced rows of) real data.
    pub fn from_data<S: Scalar>(x: &Tensor<S>, ks: &KnowledgeSet) -> Result<Self> {
        let n = x.rows();
        let rows: Vec<usize> = if n > BANDWIDTH_ROWS {
            (0..BANDWIDTH_ROWS).map(|i| i * n / BANDWIDTH_ROWS).collect()
        } else {
            (0..n).collect()
        };
        let x = x.select_rows(&rows);
        let mut table = Self::default();
        for t in &ks.triples {
            for set in [t.reference(), t.plus(), t.minus()] {
                if table.get(set).is_none() {
                    let sigma = median_heuristic(&x.select_cols(set))?.to_f64_lossy();
                    table.insert(set.to_vec(), sigma)?;
                }
            }
        }
        Ok(table)
    }

    /// The same σ for every group of `ks`.
    pub fn uniform(ks: &KnowledgeSet, sigma: f64) -> Result<Self> {
        let mut table = Self::default();
        for t in &ks.triples {
            for set in [t.reference(), t.plus(), t.minus()] {
                table.insert(set.to_vec(), sigma)?;
            }
        }
        Ok(table)
    }

    pub fn insert(&mut self, features: Vec<usize>, sigma: f64) -> Result<()> {
        KernelConfig::fixed(sigma)?;
        match self.entries.iter_mut().find(|e| e.features == features) {
            Some(e) => e.sigma = sigma,
            None => self.entries.push(GroupBandwidth { features, sigma }),
        }
        Ok(())
    }

    pub fn get(&self, features: &[usize]) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.features == features)
            .map(|e| e.sigma)
    }

    fn sigma(&self, features: &[usize]) -> Result<f64> {
        self.get(features).ok_or_else(|| {
            Error::Config(format!(
                "no bandwidth for feature group {:?}",
                features.iter().map(|i| i + 1).collect::<Vec<_>>()
            ))
        })
    }

    pub fn kernels_for(&self, t: &KnowledgeTriple) -> Result<RelKernels> {
        Ok(RelKernels {
            reference: KernelConfig::fixed(self.sigma(t.reference())?)?,
            plus: KernelConfig::fixed(self.sigma(t.plus())?)?,
            minus: KernelConfig::fixed(self.sigma(t.minus())?)?,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegConfig {
    pub lambda: f64,
    pub nu_alpha: f64,
    /// Model samples drawn per step.
    pub m: usize,
    #[serde(default)]
    pub estimator: Estimator,
    /// Filled from training data by the trainer when left empty.
    #[serde(default)]
    pub bandwidths: BandwidthTable,
}

/// Model samples per step used when none is configured.
pub const DEFAULT_M: usize = 128;

impl Default for RegConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            nu_alpha: 0.05,
            m: DEFAULT_M,
            estimator: Estimator::Biased,
            bandwidths: BandwidthTable::default(),
        }
    }
}

impl RegConfig {
    pub fn new(lambda: f64, nu_alpha: f64, m: usize, bandwidths: BandwidthTable) -> Result<Self> {
        let cfg = Self {
            lambda,
            nu_alpha,
            m,
            estimator: Estimator::Biased,
            bandwidths,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.nu_alpha >= 0.0 && self.nu_alpha.is_finite()) {
            return Err(Error::Config(format!("nu_alpha must be >= 0, got {}", self.nu_alpha)));
        }
        if self.m < 4 {
            return Err(Error::Config(format!("m must be >= 4, got {}", self.m)));
        }
        Ok(())
    }
}

fn check_width<S: Scalar>(samples: Var<'_, S>, d: usize) -> Result<()> {
    let cols = samples.shape()[1];
    if cols != d {
        return Err(Error::Dimension(format!(
            "samples have {cols} features, knowledge set expects {d}"
        )));
    }
    Ok(())
}

/// ρ̂_s on the columns of `samples` selected by `triple`.
pub fn rho_hat_s<'t, S: Scalar>(
    samples: Var<'t, S>,
    triple: &KnowledgeTriple,
    cfg: &RegConfig,
) -> Result<Var<'t, S>> {
    let mut cache = GramCache::default();
    cache.rho(samples, triple, cfg)
}

/// Raw reference Grams and centered plus/minus Grams keyed by feature set,
/// so that repeated groups are computed once per step.
#[derive(Default)]
struct GramCache<'t, S> {
    raw: HashMap<Vec<usize>, Var<'t, S>>,
    centered: HashMap<Vec<usize>, Var<'t, S>>,
}

impl<'t, S: Scalar> GramCache<'t, S> {
    fn raw(&mut self, samples: Var<'t, S>, set: &[usize], cfg: &RegConfig) -> Result<Var<'t, S>> {
        if let Some(&g) = self.raw.get(set) {
            return Ok(g);
        }
        let sigma = S::of(cfg.bandwidths.sigma(set)?);
        let g = gaussian_gram(samples.slice_columns(set)?, sigma)?;
        self.raw.insert(set.to_vec(), g);
        Ok(g)
    }

    fn centered(&mut self, samples: Var<'t, S>, set: &[usize], cfg: &RegConfig) -> Result<Var<'t, S>> {
        if let Some(&g) = self.centered.get(set) {
            return Ok(g);
        }
        let g = center_for(self.raw(samples, set, cfg)?, cfg.estimator)?;
        self.centered.insert(set.to_vec(), g);
        Ok(g)
    }

    fn rho(&mut self, samples: Var<'t, S>, t: &KnowledgeTriple, cfg: &RegConfig) -> Result<Var<'t, S>> {
        let k = self.raw(samples, t.reference(), cfg)?;
        let lp = self.centered(samples, t.plus(), cfg)?;
        let lm = self.centered(samples, t.minus(), cfg)?;
        hsic_centered(k, lp, cfg.estimator)?.sub(hsic_centered(k, lm, cfg.estimator)?)
    }
}

/// `R_K` and the individual ρ̂_s values.
pub fn r_k_with_terms<'t, S: Scalar>(
    samples: Var<'t, S>,
    ks: &KnowledgeSet,
    cfg: &RegConfig,
) -> Result<(Var<'t, S>, Vec<S>)> {
    if ks.is_empty() {
        return Err(Error::Validation {
            triple: None,
            message: "knowledge set has no triples".into(),
        });
    }
    check_width(samples, ks.d)?;
    let mut cache = GramCache::default();
    let nu = S::of(cfg.nu_alpha);
    let mut total: Option<Var<'t, S>> = None;
    let mut rhos = Vec::with_capacity(ks.len());
    for t in &ks.triples {
        let rho = cache.rho(samples, t, cfg)?;
        rhos.push(rho.item());
        let hinge = rho.neg().add_scalar(nu).max_with_scalar(S::zero());
        total = Some(match total {
            None => hinge,
            Some(acc) => acc.add(hinge)?,
        });
    }
    let n = S::from_usize(ks.len()).expect("count fits scalar");
    Ok((total.expect("nonempty").div_scalar(n), rhos))
}

/// `R_K = 1/|K| Σ_s max(0, ν_α − ρ̂_s)`, differentiable in `samples`.
pub fn r_k<'t, S: Scalar>(samples: Var<'t, S>, ks: &KnowledgeSet, cfg: &RegConfig) -> Result<Var<'t, S>> {
    Ok(r_k_with_terms(samples, ks, cfg)?.0)
}

/// The hinge average on precomputed ρ̂ values.
pub fn hinge_mean(rhos: &[f64], nu_alpha: f64) -> f64 {
    rhos.iter().map(|r| (nu_alpha - r).max(0.0)).sum::<f64>() / rhos.len() as f64
}

/// ρ̂_s for every triple on plain samples.
pub fn rho_values<S: Scalar>(samples: &Tensor<S>, ks: &KnowledgeSet, cfg: &RegConfig) -> Result<Vec<f64>> {
    let tape = crate::autograd::Tape::new();
    let x = tape.constant(samples.clone());
    let (_, rhos) = r_k_with_terms(x, ks, cfg)?;
    Ok(rhos.into_iter().map(Scalar::to_f64_lossy).collect())
}

/// `ν_α = τ Φ⁻¹(1 − α)`; reaching `R_{K,s} = 0` then bounds the p-value by α.
pub fn calibrate_nu_alpha(alpha: f64, tau: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Domain(format!("tau must be positive, got {tau}")));
    }
    Ok(tau * phi_inv(1.0 - alpha)?)
}

/// Margin from a target level `alpha`, with `τ_s` estimated on real data
/// before training: each triple's test runs on `m` evenly spaced rows of
/// `x` using the frozen bandwidths in `bw`, and the largest
/// `calibrate_nu_alpha(alpha, τ_s)` is returned so that `R_K = 0` bounds
/// every triple's p-value by `alpha`. Also returns the `τ_s`.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_nu_on_data(
    x: &Tensor<f64>,
    ks: &KnowledgeSet,
    bw: &BandwidthTable,
    m: usize,
    est: Estimator,
    alpha: f64,
    n_boot: usize,
    seed: u64,
) -> Result<(f64, Vec<f64>)> {
    let n = x.rows();
    let rows: Vec<usize> = (0..m.min(n)).map(|i| i * n / m.min(n)).collect();
    let x = x.select_rows(&rows);
    let mut nu = 0.0f64;
    let mut taus = Vec::with_capacity(ks.len());
    for (pos, t) in ks.triples.iter().enumerate() {
        let kernels = bw.kernels_for(t)?;
        let res = rel_dep_test(
            &x.select_cols(t.reference()),
            &x.select_cols(t.plus()),
            &x.select_cols(t.minus()),
            &kernels,
            est,
            n_boot,
            seed.wrapping_add(pos as u64),
        )?;
        nu = nu.max(calibrate_nu_alpha(alpha, res.tau)?);
        taus.push(res.tau);
    }
    Ok((nu, taus))
}

/// Baseline penalty on the rows of the last decoder layer `w` (d × h):
/// mean over triples of `max(0, ε + ‖w_ref − w_plus‖² − ‖w_ref − w_minus‖²)`.
///
/// Only defined when every triple relates single features.
pub fn out_layer_reg<'t, S: Scalar>(w: Var<'t, S>, ks: &KnowledgeSet, epsilon: f64) -> Result<Var<'t, S>> {
    if !(epsilon >= 0.0) {
        return Err(Error::Domain(format!("epsilon must be >= 0, got {epsilon}")));
    }
    if ks.is_empty() {
        return Err(Error::Validation {
            triple: None,
            message: "knowledge set has no triples".into(),
        });
    }
    if let Some(pos) = ks.triples.iter().position(|t| !t.is_singleton()) {
        return Err(Error::NotApplicable(format!(
            "out-layer penalty needs one-to-one feature triples; triple #{} relates feature groups",
            pos + 1
        )));
    }
    let d = w.shape()[0];
    if d != ks.d {
        return Err(Error::Dimension(format!(
            "weight matrix has {d} rows, knowledge set expects {}",
            ks.d
        )));
    }
    let wt = w.transpose();
    let col = |i: usize| wt.slice_columns(&[i]);
    let eps = S::of(epsilon);
    let mut total: Option<Var<'t, S>> = None;
    for t in &ks.triples {
        let r = col(t.reference()[0])?;
        let near = r.sub(col(t.plus()[0])?)?.square().sum();
        let far = r.sub(col(t.minus()[0])?)?.square().sum();
        let hinge = near.sub(far)?.add_scalar(eps).max_with_scalar(S::zero());
        total = Some(match total {
            None => hinge,
            Some(acc) => acc.add(hinge)?,
        });
    }
    let n = S::from_usize(ks.len()).expect("count fits scalar");
    Ok(total.expect("nonempty").div_scalar(n))
}
