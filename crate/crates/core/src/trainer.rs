//! Minimisation of `L(θ) + λ R_K(θ)` with Adam, evaluation metrics and
//! validation-based selection of `(λ, ν_α)`.
//!
//! Every run derives independent random streams from its seed: one for the
//! batch order, one for the noise inside `L`, one for the samples fed to
//! `R_K` and one for monitoring. With `λ = 0` the penalty is never evaluated
//! during steps, so the trajectory is bit-identical to a run without
//! knowledge.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{Tape, Var};
use crate::data::Splits;
use crate::error::{Error, Result};
use crate::knowledge::KnowledgeSet;
use crate::models::{accumulate, bind, AnyModel, Likelihood, Model, SampleMode};
use crate::optim::{Adam, AdamConfig};
use crate::regularizer::{hinge_mean, out_layer_reg, r_k, rho_values, BandwidthTable, RegConfig};
use crate::tensor::{Parameter, Tensor};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Squared error per feature, averaged over rows and features.
    #[default]
    ReconError,
    /// Bernoulli cross-entropy summed over features, averaged over rows.
    CrossEntropy,
    /// One-sample negative ELBO averaged over rows.
    NegElbo,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::ReconError => "recon_error",
            Metric::CrossEntropy => "cross_entropy",
            Metric::NegElbo => "neg_elbo",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "recon_error" => Ok(Metric::ReconError),
            "cross_entropy" => Ok(Metric::CrossEntropy),
            "neg_elbo" => Ok(Metric::NegElbo),
            _ => Err(Error::Config(format!(
                "unknown metric {s:?}; expected recon_error, cross_entropy or neg_elbo"
            ))),
        }
    }
}

/// How often the penalty enters a gradient step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegSchedule {
    #[default]
    EveryBatch,
    /// Only on the first batch of each epoch.
    EveryEpoch,
}

/// Which knowledge penalty is added to `L`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    /// `R_K` on model samples.
    #[default]
    Knowledge,
    /// Hinge on the rows of the last decoder layer, with `ε = reg.nu_alpha`.
    OutLayer,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub lambdas: Vec<f64>,
    pub nu_alphas: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// `λ₂` in the additive `λ₂‖θ‖²` term.
    pub l2_weight_decay: f64,
    pub reg: RegConfig,
    pub seed: u64,
    pub grid: Grid,
    pub reg_schedule: RegSchedule,
    pub penalty: Penalty,
    pub metric: Metric,
    /// How VAE samples for `R_K` are drawn.
    pub sample_mode: SampleMode,
    /// Compute the validation metric after every epoch rather than only at
    /// the end.
    pub eval_every_epoch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 100,
            adam: AdamConfig::default(),
            l2_weight_decay: 1e-4,
            reg: RegConfig::default(),
            seed: 0,
            grid: Grid::default(),
            reg_schedule: RegSchedule::default(),
            penalty: Penalty::default(),
            metric: Metric::default(),
            sample_mode: SampleMode::default(),
            eval_every_epoch: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        self.adam.validate()?;
        if !(self.l2_weight_decay >= 0.0 && self.l2_weight_decay.is_finite()) {
            return Err(Error::Config(format!(
                "l2_weight_decay must be >= 0, got {}",
                self.l2_weight_decay
            )));
        }
        self.reg.validate()?;
        for &l in &self.grid.lambdas {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::Config(format!("grid lambda must be >= 0, got {l}")));
            }
        }
        for &n in &self.grid.nu_alphas {
            if !(n >= 0.0 && n.is_finite()) {
                return Err(Error::Config(format!("grid nu_alpha must be >= 0, got {n}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean of `L` over the epoch's batches (generator loss for GANs).
    pub train_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub disc_loss: Option<f64>,
    pub valid_metric: Option<f64>,
    /// Penalty value on fresh monitoring samples.
    pub rk: Option<f64>,
    /// `ρ̂_s` per triple on the same samples.
    pub rho: Vec<f64>,
    /// Wall-clock seconds spent in gradient steps.
    #[serde(skip)]
    pub step_seconds: f64,
    /// Wall-clock seconds for the whole epoch, monitoring included.
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub metric: Metric,
    pub penalty: Penalty,
    pub lambda: f64,
    pub nu_alpha: f64,
    pub epochs: Vec<EpochRecord>,
    pub valid_metric: Option<f64>,
    pub test_metric: Option<f64>,
    pub rk_final: Option<f64>,
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line<'a> {
    Epoch(&'a EpochRecord),
    Summary {
        metric: Metric,
        penalty: Penalty,
        lambda: f64,
        nu_alpha: f64,
        epochs_run: usize,
        valid_metric: Option<f64>,
        test_metric: Option<f64>,
        rk_final: Option<f64>,
    },
}

impl TrainReport {
    /// One JSON object per epoch followed by a summary object.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for e in &self.epochs {
            out.push_str(&serde_json::to_string(&Line::Epoch(e)).expect("record serializes"));
            out.push('\n');
        }
        let summary = Line::Summary {
            metric: self.metric,
            penalty: self.penalty,
            lambda: self.lambda,
            nu_alpha: self.nu_alpha,
            epochs_run: self.epochs.len(),
            valid_metric: self.valid_metric,
            test_metric: self.test_metric,
            rk_final: self.rk_final,
        };
        out.push_str(&serde_json::to_string(&summary).expect("summary serializes"));
        out.push('\n');
        out
    }

    pub fn mean_step_seconds(&self) -> f64 {
        self.epochs.iter().map(|e| e.step_seconds).sum::<f64>() / self.epochs.len().max(1) as f64
    }
}

/// Named random streams of one run.
fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

const SHUFFLE: u64 = 1;
const NOISE: u64 = 2;
const PENALTY: u64 = 3;
const MONITOR: u64 = 4;
const EVAL: u64 = 5;

const EVAL_CHUNK: usize = 1024;

fn model_d(model: &AnyModel<f64>) -> usize {
    match model {
        AnyModel::Fa(m) => m.d(),
        AnyModel::Vae(m) => m.d(),
        AnyModel::Gan(m) => m.d(),
    }
}

fn draw_samples<'t>(
    model: &AnyModel<f64>,
    p: &[Var<'t, f64>],
    m: usize,
    rng: &mut ChaCha8Rng,
    mode: SampleMode,
) -> Result<Var<'t, f64>> {
    match model {
        AnyModel::Fa(f) => f.sample(p, m, rng),
        AnyModel::Vae(v) => v.sample(p, m, rng, mode),
        AnyModel::Gan(g) => g.sample(p, m, rng),
    }
}

/// Last decoder (or generator) layer as a d × h matrix whose rows belong to
/// output features.
fn out_layer_weight<'t>(model: &AnyModel<f64>, p: &[Var<'t, f64>]) -> Result<Var<'t, f64>> {
    match model {
        AnyModel::Fa(_) => Ok(p[0]),
        AnyModel::Vae(v) => v
            .decoder_output_weight()
            .map(|i| p[i].transpose())
            .ok_or_else(|| Error::NotApplicable("the dedicated decoder has no single output layer".into())),
        AnyModel::Gan(g) => Ok(p[g.n_generator_params() - 2].transpose()),
    }
}

/// Adds the gradient of `λ₂‖θ‖²` and returns the penalty value.
fn weight_decay(params: Vec<&mut Parameter<f64>>, l2: f64) -> f64 {
    if l2 == 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    for p in params {
        if !p.requires_grad {
            continue;
        }
        total += p.value.data().iter().map(|v| v * v).sum::<f64>();
        let g = p.grad.get_or_insert_with(|| Tensor::zeros(p.value.rows(), p.value.cols()));
        for (gi, &v) in g.data_mut().iter_mut().zip(p.value.data()) {
            *gi += 2.0 * l2 * v;
        }
    }
    l2 * total
}

struct Ctx<'a> {
    ks: Option<&'a KnowledgeSet>,
    reg: RegConfig,
    cfg: &'a TrainConfig,
}

impl Ctx<'_> {
    fn active(&self) -> Option<&KnowledgeSet> {
        self.ks.filter(|_| self.reg.lambda > 0.0)
    }

    fn penalty<'t>(&self, ks: &KnowledgeSet, model: &AnyModel<f64>, p: &[Var<'t, f64>], rng: &mut ChaCha8Rng) -> Result<Var<'t, f64>> {
        match self.cfg.penalty {
            Penalty::Knowledge => {
                let samples = draw_samples(model, p, self.reg.m, rng, self.cfg.sample_mode)?;
                r_k(samples, ks, &self.reg)
            }
            Penalty::OutLayer => out_layer_reg(out_layer_weight(model, p)?, ks, self.reg.nu_alpha),
        }
    }

    /// Penalty value and ρ̂ trace on fresh samples, without gradients.
    fn monitor(&self, model: &AnyModel<f64>, rng: &mut ChaCha8Rng) -> Result<(Option<f64>, Vec<f64>)> {
        let Some(ks) = self.ks else { return Ok((None, Vec::new())) };
        let tape = Tape::new();
        let p = bind(&tape, &model.params(), false);
        let samples = draw_samples(model, &p, self.reg.m, rng, self.cfg.sample_mode)?.value();
        let rhos = if self.reg.bandwidths.is_empty() {
            Vec::new()
        } else {
            rho_values(&samples, ks, &self.reg)?
        };
        let rk = match self.cfg.penalty {
            Penalty::Knowledge => hinge_mean(&rhos, self.reg.nu_alpha),
            Penalty::OutLayer => out_layer_reg(out_layer_weight(model, &p)?, ks, self.reg.nu_alpha)?.item(),
        };
        Ok((Some(rk), rhos))
    }
}

fn non_finite(epoch: usize, batch: usize, loss: f64, penalty: Option<f64>, wd: f64) -> Error {
    Error::Numeric(format!(
        "non-finite objective at epoch {epoch}, batch {batch}: loss={loss}, penalty={}, weight_decay={wd}",
        penalty.map_or("n/a".to_string(), |v| v.to_string())
    ))
}

/// Trains `model` in place on `splits.train`, returning per-epoch traces and
/// the final validation and test metrics.
pub fn train(
    model: &mut AnyModel<f64>,
    splits: &Splits,
    ks: Option<&KnowledgeSet>,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    let d = model_d(model);
    if splits.d() != d {
        return Err(Error::Dimension(format!("data has {} features, model has d={d}", splits.d())));
    }
    if splits.train.n() == 0 {
        return Err(Error::Contract("training split is empty".into()));
    }
    let mut reg = cfg.reg.clone();
    if let Some(ks) = ks {
        ks.validate(d)?;
        if cfg.penalty == Penalty::OutLayer {
            let tape = Tape::new();
            let p = bind(&tape, &model.params(), false);
            out_layer_reg(out_layer_weight(model, &p)?, ks, reg.nu_alpha)?;
        }
        if reg.bandwidths.is_empty() {
            reg.bandwidths = BandwidthTable::from_data(&splits.train.x, ks).map_err(|e| match e {
                Error::DegenerateBandwidth(msg) => Error::Config(format!("degenerate bandwidth: {msg}")),
                e => e,
            })?;
        }
    }
    let ctx = Ctx { ks, reg, cfg };
    let mut shuffle_rng = stream(cfg.seed, SHUFFLE);
    let mut noise_rng = stream(cfg.seed, NOISE);
    let mut penalty_rng = stream(cfg.seed, PENALTY);
    let mut monitor_rng = stream(cfg.seed, MONITOR);
    let metric_ok = metric_applies(model, cfg.metric);
    let mut optimizers = match model {
        AnyModel::Gan(_) => vec![Adam::new(cfg.adam), Adam::new(cfg.adam)],
        _ => vec![Adam::new(cfg.adam)],
    };
    let x = &splits.train.x;
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut records = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut disc_sum = 0.0;
        let batches: Vec<&[usize]> = order.chunks(cfg.batch_size).collect();
        for (bi, idx) in batches.iter().enumerate() {
            let batch = x.select_rows(idx);
            let with_penalty = match cfg.reg_schedule {
                RegSchedule::EveryBatch => true,
                RegSchedule::EveryEpoch => bi == 0,
            };
            let ks_now = ctx.active().filter(|_| with_penalty);
            let (loss, disc) = match model {
                AnyModel::Gan(_) => gan_step(model, &batch, &ctx, ks_now, &mut optimizers, &mut noise_rng, &mut penalty_rng, epoch, bi + 1)?,
                _ => (likelihood_step(model, &batch, &ctx, ks_now, &mut optimizers[0], &mut noise_rng, &mut penalty_rng, epoch, bi + 1)?, 0.0),
            };
            loss_sum += loss;
            disc_sum += disc;
        }
        let step_seconds = start.elapsed().as_secs_f64();
        let (rk, rho) = ctx.monitor(model, &mut monitor_rng)?;
        let valid_metric = if metric_ok && splits.valid.n() > 0 && (cfg.eval_every_epoch || epoch == cfg.epochs) {
            Some(evaluate(model, &splits.valid.x, cfg.metric, cfg.seed)?)
        } else {
            None
        };
        let nb = batches.len() as f64;
        records.push(EpochRecord {
            epoch,
            train_loss: loss_sum / nb,
            disc_loss: matches!(model, AnyModel::Gan(_)).then_some(disc_sum / nb),
            valid_metric,
            rk,
            rho,
            step_seconds,
            seconds: start.elapsed().as_secs_f64(),
        });
        log::debug!(
            "epoch {epoch}: loss {:.5} valid {:?} rk {:?}",
            loss_sum / nb,
            valid_metric,
            rk
        );
    }
    let test_metric = if metric_ok && splits.test.n() > 0 {
        Some(evaluate(model, &splits.test.x, cfg.metric, cfg.seed)?)
    } else {
        None
    };
    let last = records.last().expect("epochs >= 1");
    Ok(TrainReport {
        metric: cfg.metric,
        penalty: cfg.penalty,
        lambda: ctx.reg.lambda,
        nu_alpha: ctx.reg.nu_alpha,
        valid_metric: last.valid_metric,
        rk_final: last.rk,
        epochs: records,
        test_metric,
    })
}

#[allow(clippy::too_many_arguments)]
fn likelihood_step(
    model: &mut AnyModel<f64>,
    batch: &Tensor<f64>,
    ctx: &Ctx<'_>,
    ks: Option<&KnowledgeSet>,
    opt: &mut Adam<f64>,
    noise_rng: &mut ChaCha8Rng,
    penalty_rng: &mut ChaCha8Rng,
    epoch: usize,
    batch_no: usize,
) -> Result<f64> {
    let tape = Tape::new();
    let p = bind(&tape, &model.params(), true);
    let xb = tape.constant(batch.clone());
    let loss = match &*model {
        AnyModel::Fa(f) => f.loss(&p, xb)?,
        AnyModel::Vae(v) => v.neg_elbo(&p, xb, noise_rng)?,
        AnyModel::Gan(_) => unreachable!("GANs use gan_step"),
    };
    let (objective, pen) = match ks {
        Some(ks) => {
            let r = ctx.penalty(ks, model, &p, penalty_rng)?;
            (loss.add(r.scale(ctx.reg.lambda))?, Some(r.item()))
        }
        None => (loss, None),
    };
    let grads = tape.backward(objective)?;
    accumulate(model.params_mut(), &p, &grads)?;
    let wd = weight_decay(model.params_mut(), ctx.cfg.l2_weight_decay);
    if !(objective.item() + wd).is_finite() {
        return Err(non_finite(epoch, batch_no, loss.item(), pen, wd));
    }
    opt.step(model.params_mut())?;
    Ok(loss.item())
}

#[allow(clippy::too_many_arguments)]
fn gan_step(
    model: &mut AnyModel<f64>,
    batch: &Tensor<f64>,
    ctx: &Ctx<'_>,
    ks: Option<&KnowledgeSet>,
    opts: &mut [Adam<f64>],
    noise_rng: &mut ChaCha8Rng,
    penalty_rng: &mut ChaCha8Rng,
    epoch: usize,
    batch_no: usize,
) -> Result<(f64, f64)> {
    let AnyModel::Gan(gan) = &*model else { unreachable!("gan_step needs a GAN") };
    let ng = gan.n_generator_params();
    let l2 = ctx.cfg.l2_weight_decay;

    // discriminator update with the generator frozen
    let tape = Tape::new();
    let params = model.params();
    let mut p = bind(&tape, &params[..ng], false);
    p.extend(bind(&tape, &params[ng..], true));
    let AnyModel::Gan(gan) = &*model else { unreachable!() };
    let l = gan.losses(&p, tape.constant(batch.clone()), batch.rows(), noise_rng)?;
    let d_loss = l.d_loss.item();
    let grads = tape.backward(l.d_loss)?;
    let mut pm = model.params_mut();
    let disc = pm.split_off(ng);
    accumulate(disc, &p[ng..], &grads)?;
    let mut pm = model.params_mut();
    let wd = weight_decay(pm.split_off(ng), l2);
    if !(d_loss + wd).is_finite() {
        return Err(non_finite(epoch, batch_no, d_loss, None, wd));
    }
    let mut pm = model.params_mut();
    opts[1].step(pm.split_off(ng))?;

    // generator update with the discriminator frozen
    let tape = Tape::new();
    let params = model.params();
    let mut p = bind(&tape, &params[..ng], true);
    p.extend(bind(&tape, &params[ng..], false));
    let AnyModel::Gan(gan) = &*model else { unreachable!() };
    let l = gan.losses(&p, tape.constant(batch.clone()), batch.rows(), noise_rng)?;
    let g_loss = l.g_loss;
    let (objective, pen) = match ks {
        Some(ks) => {
            let r = ctx.penalty(ks, model, &p, penalty_rng)?;
            (g_loss.add(r.scale(ctx.reg.lambda))?, Some(r.item()))
        }
        None => (g_loss, None),
    };
    let grads = tape.backward(objective)?;
    let mut pm = model.params_mut();
    pm.truncate(ng);
    accumulate(pm, &p[..ng], &grads)?;
    let mut pm = model.params_mut();
    pm.truncate(ng);
    let wd = weight_decay(pm, l2);
    if !(objective.item() + wd).is_finite() {
        return Err(non_finite(epoch, batch_no, g_loss.item(), pen, wd));
    }
    let mut pm = model.params_mut();
    pm.truncate(ng);
    opts[0].step(pm)?;
    Ok((g_loss.item(), d_loss))
}

fn metric_applies(model: &AnyModel<f64>, metric: Metric) -> bool {
    match (model, metric) {
        (AnyModel::Fa(_), Metric::ReconError) => true,
        (AnyModel::Vae(_), Metric::ReconError | Metric::NegElbo) => true,
        (AnyModel::Vae(v), Metric::CrossEntropy) => v.likelihood == Likelihood::Bernoulli,
        _ => false,
    }
}

/// `metric` of `model` on the rows of `x`. The negative ELBO uses a fixed
/// noise stream derived from `seed`.
pub fn evaluate(model: &AnyModel<f64>, x: &Tensor<f64>, metric: Metric, seed: u64) -> Result<f64> {
    if !metric_applies(model, metric) {
        let kind = match model {
            AnyModel::Fa(_) => "an FA model",
            AnyModel::Vae(v) if v.likelihood == Likelihood::Gaussian => "a Gaussian VAE",
            AnyModel::Vae(_) => "a Bernoulli VAE",
            AnyModel::Gan(_) => "a GAN",
        };
        return Err(Error::Config(format!("metric {} is not defined for {kind}", metric.name())));
    }
    let (n, d) = (x.rows(), x.cols());
    if n == 0 {
        return Err(Error::Contract("cannot evaluate on an empty split".into()));
    }
    if d != model_d(model) {
        return Err(Error::Dimension(format!("data has {d} features, model has d={}", model_d(model))));
    }
    let mut rng = stream(seed, EVAL);
    let mut total = 0.0;
    for start in (0..n).step_by(EVAL_CHUNK) {
        let rows: Vec<usize> = (start..(start + EVAL_CHUNK).min(n)).collect();
        let xb = x.select_rows(&rows);
        total += match (model, metric) {
            (AnyModel::Fa(f), _) => squared_error(&xb, &f.reconstruct(&xb)?),
            (AnyModel::Vae(v), Metric::ReconError) => squared_error(&xb, &v.reconstruct(&xb)?),
            (AnyModel::Vae(v), Metric::CrossEntropy) => {
                let tape = Tape::new();
                let p = bind(&tape, &v.params(), false);
                let xv = tape.constant(xb.clone());
                let (mean, _) = v.encode(&p, xv)?;
                let logits = v.decode_raw(&p, mean)?;
                logits.softplus().sub(xv.mul(logits)?)?.sum().item()
            }
            (AnyModel::Vae(v), Metric::NegElbo) => {
                let tape = Tape::new();
                let p = bind(&tape, &v.params(), false);
                v.neg_elbo(&p, tape.constant(xb.clone()), &mut rng)?.item() * rows.len() as f64
            }
            _ => unreachable!("checked by metric_applies"),
        };
    }
    let value = match metric {
        Metric::ReconError => total / (n * d) as f64,
        Metric::CrossEntropy | Metric::NegElbo => total / n as f64,
    };
    if !value.is_finite() {
        return Err(Error::Numeric(format!("{} evaluated to {value}", metric.name())));
    }
    Ok(value)
}

fn squared_error(x: &Tensor<f64>, xhat: &Tensor<f64>) -> f64 {
    x.data().iter().zip(xhat.data()).map(|(a, b)| (a - b).powi(2)).sum()
}

/// Validation score of one `(λ, ν_α)` candidate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub lambda: f64,
    pub nu_alpha: f64,
    pub score: f64,
}

fn sorted_unique(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Runs `run(λ, ν)` over the grid and keeps the lowest score. Candidates are
/// visited in increasing `λ`, then increasing `ν`, and only a strictly lower
/// score replaces the incumbent, so ties go to the smaller values.
pub fn select_by<T, F>(lambdas: &[f64], nu_alphas: &[f64], mut run: F) -> Result<(Candidate, T, Vec<Candidate>)>
where
    F: FnMut(f64, f64) -> Result<(f64, T)>,
{
    if lambdas.is_empty() || nu_alphas.is_empty() {
        return Err(Error::Config("candidate grids must be nonempty".into()));
    }
    let mut best: Option<(Candidate, T)> = None;
    let mut all = Vec::new();
    for &lambda in &sorted_unique(lambdas) {
        for &nu_alpha in &sorted_unique(nu_alphas) {
            let (score, out) = run(lambda, nu_alpha)?;
            let c = Candidate { lambda, nu_alpha, score };
            all.push(c);
            let better = match &best {
                None => !score.is_nan(),
                Some((b, _)) => score < b.score,
            };
            if better {
                best = Some((c, out));
            }
        }
    }
    let (c, out) = best.ok_or_else(|| Error::Numeric("every candidate scored NaN".into()))?;
    Ok((c, out, all))
}

pub struct GridOutcome {
    pub best: Candidate,
    pub report: TrainReport,
    pub model: AnyModel<f64>,
    pub candidates: Vec<Candidate>,
}

/// Trains a fresh model from `factory` for every grid point (an empty grid
/// list falls back to the value in `cfg.reg`) and keeps the one with the
/// lowest final validation metric.
pub fn grid_select<F>(factory: F, splits: &Splits, ks: Option<&KnowledgeSet>, cfg: &TrainConfig) -> Result<GridOutcome>
where
    F: Fn() -> Result<AnyModel<f64>>,
{
    if splits.valid.n() == 0 {
        return Err(Error::Contract("grid selection needs a nonempty validation split".into()));
    }
    let or_default = |xs: &[f64], v: f64| if xs.is_empty() { vec![v] } else { xs.to_vec() };
    let lambdas = or_default(&cfg.grid.lambdas, cfg.reg.lambda);
    let nus = or_default(&cfg.grid.nu_alphas, cfg.reg.nu_alpha);
    let (best, (report, model), candidates) = select_by(&lambdas, &nus, |lambda, nu_alpha| {
        let mut c = cfg.clone();
        c.reg.lambda = lambda;
        c.reg.nu_alpha = nu_alpha;
        let mut model = factory()?;
        let report = train(&mut model, splits, ks, &c)?;
        let score = report
            .valid_metric
            .ok_or_else(|| Error::Config(format!("metric {} is unavailable for this model", c.metric.name())))?;
        log::info!("candidate lambda={lambda} nu_alpha={nu_alpha}: valid {score:.6}");
        Ok((score, (report, model)))
    })?;
    Ok(GridOutcome {
        best,
        report,
        model,
        candidates,
    })
}
