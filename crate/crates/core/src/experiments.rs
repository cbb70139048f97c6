//! Multi-seed experiment protocols shared by the command-line tool and the
//! acceptance tests.
//!
//! Each `run_*` function trains every model the protocol needs for one seed
//! and returns [`ResultRow`]s; [`summarize`] turns rows from many seeds into
//! mean, standard deviation and Welch p-value against the baseline variant.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{build_ccmnist, pairs_knowledge, pairs_splits, toy_splits, Mnist, Splits, TOY_SIZES};
use crate::error::{Error, Result};
use crate::knowledge::{ccmnist_knowledge, toy_knowledge, KnowledgeSet};
use crate::models::{Activation, AnyModel, GanModel, Likelihood, VaeModel};
use crate::optim::AdamConfig;
use crate::stats::{mean_sd, welch_t_test};
use crate::tensor::Tensor;
use crate::trainer::{grid_select, select_by, train, Grid, Metric, Penalty, TrainConfig, TrainReport};

pub const NU_ALPHAS: [f64; 2] = [0.01, 0.05];
pub const TOY_LAMBDAS: [f64; 3] = [250.0, 500.0, 1000.0];
pub const TOY_EPOCHS: usize = 200;

pub const GAN_LAMBDAS: [f64; 2] = [10.0, 100.0];
pub const GAN_EPOCHS: usize = 1000;
pub const COVERAGE_RADIUS: f64 = 0.15;
pub const COVERAGE_POINTS: usize = 500;

pub const PAIRS: usize = 6;
pub const PAIRS_SIZES: [usize; 3] = [1000, 1000, 1000];
pub const KNOWLEDGE_SIZES: [usize; 3] = [1, 3, 6];
pub const PAIRS_LAMBDA: f64 = 1000.0;
pub const PAIRS_NU_ALPHA: f64 = 0.01;
pub const PAIRS_OBS_SIGMA: f64 = 0.8;

pub const CCMNIST_LAMBDAS: [f64; 3] = [5e3, 1e4, 2e4];

// random streams for evaluation draws, kept apart from the trainer's
const VALID_SAMPLES: u64 = 11;
const TEST_SAMPLES: u64 = 12;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    ToyVae,
    CcmnistVae,
    ToyGan,
    KnowledgeSize,
}

impl Experiment {
    pub const ALL: [Experiment; 4] = [Self::ToyVae, Self::CcmnistVae, Self::ToyGan, Self::KnowledgeSize];

    pub fn name(self) -> &'static str {
        match self {
            Self::ToyVae => "toy-vae",
            Self::CcmnistVae => "ccmnist-vae",
            Self::ToyGan => "toy-gan",
            Self::KnowledgeSize => "knowledge-size",
        }
    }

    /// Variant every other variant is compared against.
    pub fn baseline(self) -> Variant {
        match self {
            Self::KnowledgeSize => Variant::KnowledgeSize(KNOWLEDGE_SIZES[0]),
            _ => Variant::L2Only,
        }
    }

    /// Higher is better for coverage, lower for everything else.
    pub fn higher_is_better(self) -> bool {
        matches!(self, Self::ToyGan)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}' (expected toy-vae, ccmnist-vae, toy-gan or knowledge-size)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// Weight decay only.
    L2Only,
    OutLayer,
    /// Knowledge penalty.
    Proposed,
    /// Knowledge penalty with the first `k` planted triples.
    KnowledgeSize(usize),
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::L2Only => f.write_str("l2-only"),
            Self::OutLayer => f.write_str("out-layer"),
            Self::Proposed => f.write_str("proposed"),
            Self::KnowledgeSize(k) => write!(f, "k{k}"),
        }
    }
}

/// One line of the results table. `experiment` reads `name/variant`, e.g.
/// `toy-vae/proposed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub seed: u64,
    pub lambda: f64,
    pub nu_alpha: f64,
    pub metric: f64,
    pub rk_final: Option<f64>,
}

impl ResultRow {
    fn new(exp: Experiment, variant: Variant, seed: u64, report: &TrainReport, metric: f64) -> Self {
        Self {
            experiment: format!("{exp}/{variant}"),
            seed,
            lambda: report.lambda,
            nu_alpha: report.nu_alpha,
            metric,
            rk_final: report.rk_final,
        }
    }

    /// Part after the slash.
    pub fn variant(&self) -> &str {
        self.experiment.split_once('/').map_or("", |(_, v)| v)
    }
}

/// A finished run: its table row plus the full training report.
pub struct Outcome {
    pub row: ResultRow,
    pub report: TrainReport,
}

fn test_metric(report: &TrainReport) -> Result<f64> {
    report
        .test_metric
        .ok_or_else(|| Error::Contract("run finished without a test metric".into()))
}

// ---------------------------------------------------------------- Toy VAE

pub fn toy_data(seed: u64) -> Splits {
    toy_splits(seed, TOY_SIZES)
}

/// VAE with `dim(z) = 4` and 32-unit MLPs.
pub fn toy_vae_model(seed: u64) -> Result<AnyModel<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(AnyModel::Vae(VaeModel::new(3, 4, 32, Activation::Relu, Likelihood::Gaussian, false, &mut rng)?))
}

pub fn toy_vae_config(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: TOY_EPOCHS,
        seed,
        grid: Grid {
            lambdas: TOY_LAMBDAS.to_vec(),
            nu_alphas: NU_ALPHAS.to_vec(),
        },
        eval_every_epoch: false,
        ..TrainConfig::default()
    }
}

/// One Toy VAE run. Penalized variants pick `(λ, ν_α)` (or `(λ, ε)`) by
/// validation error.
pub fn run_toy_vae(seed: u64, variant: Variant) -> Result<Outcome> {
    let splits = toy_data(seed);
    let ks = toy_knowledge();
    let mut cfg = toy_vae_config(seed);
    let report = match variant {
        Variant::L2Only => train(&mut toy_vae_model(seed)?, &splits, None, &cfg)?,
        Variant::OutLayer | Variant::Proposed => {
            if variant == Variant::OutLayer {
                cfg.penalty = Penalty::OutLayer;
            }
            grid_select(|| toy_vae_model(seed), &splits, Some(&ks), &cfg)?.report
        }
        Variant::KnowledgeSize(_) => return Err(Error::Config("toy-vae has no knowledge-size variant".into())),
    };
    let metric = test_metric(&report)?;
    Ok(Outcome {
        row: ResultRow::new(Experiment::ToyVae, variant, seed, &report, metric),
        report,
    })
}

// ---------------------------------------------------------------- Toy GAN

/// Fraction of the first [`COVERAGE_POINTS`] rows of `reference` whose
/// nearest row of `samples` lies within `radius` (Euclidean).
pub fn coverage(reference: &Tensor<f64>, samples: &Tensor<f64>, radius: f64) -> Result<f64> {
    if reference.cols() != samples.cols() {
        return Err(Error::Dimension(format!(
            "reference has {} columns, samples have {}",
            reference.cols(),
            samples.cols()
        )));
    }
    let n = reference.rows().min(COVERAGE_POINTS);
    if n == 0 || samples.rows() == 0 {
        return Err(Error::Contract("coverage needs nonempty reference and sample sets".into()));
    }
    let r2 = radius * radius;
    let hits = (0..n)
        .filter(|&i| {
            let a = reference.row(i);
            (0..samples.rows()).any(|j| samples.row(j).iter().zip(a).map(|(x, y)| (x - y).powi(2)).sum::<f64>() <= r2)
        })
        .count();
    Ok(hits as f64 / n as f64)
}

pub fn toy_gan_model(seed: u64) -> Result<AnyModel<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(AnyModel::Gan(GanModel::new(3, 4, 32, Activation::Relu, &mut rng)?))
}

pub fn toy_gan_config(seed: u64) -> TrainConfig {
    TrainConfig {
        epochs: GAN_EPOCHS,
        seed,
        adam: AdamConfig::gan(),
        eval_every_epoch: false,
        ..TrainConfig::default()
    }
}

/// Coverage of `x` by [`COVERAGE_POINTS`] generator samples drawn from
/// stream `id` of `seed`.
pub fn gan_coverage(model: &AnyModel<f64>, x: &Tensor<f64>, seed: u64, id: u64) -> Result<f64> {
    let AnyModel::Gan(g) = model else {
        return Err(Error::Config("coverage needs a GAN".into()));
    };
    let z = Tensor::randn(COVERAGE_POINTS, g.dim_z, &mut stream(seed, id));
    coverage(x, &g.generate_tensor(&z)?, COVERAGE_RADIUS)
}

/// One Toy GAN run; the regularized variant picks `(λ, ν_α)` by validation
/// coverage. The row's metric is test coverage.
pub fn run_toy_gan(seed: u64, variant: Variant) -> Result<Outcome> {
    let splits = toy_data(seed);
    let ks = toy_knowledge();
    let cfg = toy_gan_config(seed);
    let (report, model) = match variant {
        Variant::L2Only => {
            let mut model = toy_gan_model(seed)?;
            (train(&mut model, &splits, None, &cfg)?, model)
        }
        Variant::Proposed => {
            let (_, out, _) = select_by(&GAN_LAMBDAS, &NU_ALPHAS, |lambda, nu_alpha| {
                let mut c = cfg.clone();
                c.reg.lambda = lambda;
                c.reg.nu_alpha = nu_alpha;
                let mut model = toy_gan_model(seed)?;
                let report = train(&mut model, &splits, Some(&ks), &c)?;
                let cov = gan_coverage(&model, &splits.valid.x, seed, VALID_SAMPLES)?;
                log::info!("candidate lambda={lambda} nu_alpha={nu_alpha}: valid coverage {cov:.3}");
                Ok((-cov, (report, model)))
            })?;
            out
        }
        _ => return Err(Error::Config(format!("toy-gan has no {variant} variant"))),
    };
    let metric = gan_coverage(&model, &splits.test.x, seed, TEST_SAMPLES)?;
    Ok(Outcome {
        row: ResultRow::new(Experiment::ToyGan, variant, seed, &report, metric),
        report,
    })
}

// ---------------------------------------------------------- knowledge size

pub fn pairs_data(seed: u64) -> Splits {
    pairs_splits(seed, PAIRS, PAIRS_SIZES)
}

/// VAE for the planted-pairs data: `dim(z) = 8`, 32-unit MLPs and
/// `σ_obs = 0.8`.
pub fn pairs_vae_model(seed: u64, d: usize) -> Result<AnyModel<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vae = VaeModel::new(d, 8, 32, Activation::Relu, Likelihood::Gaussian, false, &mut rng)?;
    vae.obs_sigma = PAIRS_OBS_SIGMA;
    Ok(AnyModel::Vae(vae))
}

pub fn pairs_config(seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig {
        epochs: TOY_EPOCHS,
        seed,
        eval_every_epoch: false,
        ..TrainConfig::default()
    };
    cfg.reg.lambda = PAIRS_LAMBDA;
    cfg.reg.nu_alpha = PAIRS_NU_ALPHA;
    cfg
}

/// Trains with the first `k` planted triples (`k = 0` trains without
/// knowledge).
pub fn run_knowledge_size(seed: u64, k: usize) -> Result<Outcome> {
    if k > PAIRS {
        return Err(Error::Config(format!("at most {PAIRS} planted triples, got {k}")));
    }
    let splits = pairs_data(seed);
    let ks = pairs_knowledge(PAIRS).prefix(k);
    let mut model = pairs_vae_model(seed, splits.d())?;
    let report = train(&mut model, &splits, (k > 0).then_some(&ks), &pairs_config(seed))?;
    let metric = test_metric(&report)?;
    Ok(Outcome {
        row: ResultRow::new(Experiment::KnowledgeSize, Variant::KnowledgeSize(k), seed, &report, metric),
        report,
    })
}

/// Median time of one training epoch (gradient steps only) with the first
/// `k` of `ks`, over `epochs` epochs on a fixed model and dataset.
pub fn epoch_seconds(splits: &Splits, ks: &KnowledgeSet, k: usize, epochs: usize, hidden: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut model = AnyModel::Vae(VaeModel::new(splits.d(), 8, hidden, Activation::Relu, Likelihood::Gaussian, false, &mut rng)?);
    let mut cfg = TrainConfig {
        epochs,
        eval_every_epoch: false,
        ..TrainConfig::default()
    };
    cfg.reg.lambda = 1.0;
    let sub = ks.prefix(k);
    let report = train(&mut model, splits, (k > 0).then_some(&sub), &cfg)?;
    let times: Vec<f64> = report.epochs.iter().map(|e| e.step_seconds).collect();
    Ok(crate::stats::median(&times))
}

// ------------------------------------------------------------- ccMNIST VAE

/// Settings of a ccMNIST run; the defaults are the reduced desk-scale ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CcmnistProtocol {
    pub sizes: [usize; 3],
    pub dim_z: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub dedicated: bool,
    /// Candidate `λ`s; `ν_α` always ranges over {0.01, 0.05}.
    pub lambdas: Vec<f64>,
}

impl Default for CcmnistProtocol {
    fn default() -> Self {
        Self {
            sizes: [5000, 1000, 1000],
            dim_z: 25,
            hidden: 512,
            epochs: 10,
            dedicated: false,
            lambdas: vec![1e4],
        }
    }
}

pub fn ccmnist_vae_model(seed: u64, p: &CcmnistProtocol) -> Result<AnyModel<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(AnyModel::Vae(VaeModel::new(
        2352,
        p.dim_z,
        p.hidden,
        Activation::Relu,
        Likelihood::Bernoulli,
        p.dedicated,
        &mut rng,
    )?))
}

/// One ccMNIST VAE run, scored by mean per-image cross-entropy.
pub fn run_ccmnist_vae(mnist: &Mnist, seed: u64, variant: Variant, p: &CcmnistProtocol) -> Result<Outcome> {
    let splits = build_ccmnist(mnist, p.sizes, seed)?.splits;
    let ks = ccmnist_knowledge();
    let cfg = TrainConfig {
        epochs: p.epochs,
        seed,
        metric: Metric::CrossEntropy,
        grid: Grid {
            lambdas: p.lambdas.clone(),
            nu_alphas: NU_ALPHAS.to_vec(),
        },
        eval_every_epoch: false,
        ..TrainConfig::default()
    };
    let report = match variant {
        Variant::L2Only => train(&mut ccmnist_vae_model(seed, p)?, &splits, None, &cfg)?,
        Variant::Proposed => grid_select(|| ccmnist_vae_model(seed, p), &splits, Some(&ks), &cfg)?.report,
        _ => return Err(Error::Config(format!("ccmnist-vae has no {variant} variant"))),
    };
    let metric = test_metric(&report)?;
    Ok(Outcome {
        row: ResultRow::new(Experiment::CcmnistVae, variant, seed, &report, metric),
        report,
    })
}

// ----------------------------------------------------------------- tables

/// Variants run by an experiment, baseline first.
pub fn variants(exp: Experiment) -> Vec<Variant> {
    match exp {
        Experiment::ToyVae => vec![Variant::L2Only, Variant::OutLayer, Variant::Proposed],
        Experiment::CcmnistVae | Experiment::ToyGan => vec![Variant::L2Only, Variant::Proposed],
        Experiment::KnowledgeSize => KNOWLEDGE_SIZES.iter().map(|&k| Variant::KnowledgeSize(k)).collect(),
    }
}

/// One `(seed, variant)` run of `exp`.
pub fn run_one(exp: Experiment, seed: u64, variant: Variant, mnist: Option<&Mnist>) -> Result<Outcome> {
    match exp {
        Experiment::ToyVae => run_toy_vae(seed, variant),
        Experiment::ToyGan => run_toy_gan(seed, variant),
        Experiment::KnowledgeSize => match variant {
            Variant::KnowledgeSize(k) => run_knowledge_size(seed, k),
            v => Err(Error::Config(format!("knowledge-size has no {v} variant"))),
        },
        Experiment::CcmnistVae => {
            let mnist = mnist.ok_or_else(|| Error::Config("ccmnist-vae needs MNIST files".into()))?;
            run_ccmnist_vae(mnist, seed, variant, &CcmnistProtocol::default())
        }
    }
}

/// Runs every variant of `exp` for each seed on up to `jobs` worker threads.
/// Rows come back in seed order, then variant order, whatever the number of
/// workers.
pub fn run_experiment(exp: Experiment, seeds: &[u64], mnist: Option<&Mnist>, jobs: usize) -> Result<Vec<ResultRow>> {
    let tasks: Vec<(u64, Variant)> = seeds
        .iter()
        .flat_map(|&seed| variants(exp).into_iter().map(move |v| (seed, v)))
        .collect();
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<ResultRow>>>> = tasks.iter().map(|_| Mutex::new(None)).collect();
    let work = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some(&(seed, variant)) = tasks.get(i) else { break };
        let row = run_one(exp, seed, variant, mnist).map(|out| {
            log::info!("{} seed {seed}: {:.6}", out.row.experiment, out.row.metric);
            out.row
        });
        *slots[i].lock().expect("slot lock") = Some(row);
    };
    let workers = jobs.clamp(1, tasks.len().max(1));
    if workers == 1 {
        work();
    } else {
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(work);
            }
        });
    }
    slots
        .into_iter()
        .map(|slot| slot.into_inner().expect("slot lock").expect("every task ran"))
        .collect()
}

/// Across-seed summary of one variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    /// Welch p-value against the baseline variant; `None` for the baseline
    /// itself or when the test is undefined.
    pub p_value: Option<f64>,
}

/// Groups rows by `experiment` (in first-seen order) and compares every
/// group with the first one.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
    for r in rows {
        match groups.iter_mut().find(|(name, _)| *name == r.experiment) {
            Some((_, v)) => v.push(r.metric),
            None => groups.push((r.experiment.clone(), vec![r.metric])),
        }
    }
    let base = groups.first().map(|(_, v)| v.clone()).unwrap_or_default();
    groups
        .iter()
        .enumerate()
        .map(|(i, (name, v))| {
            let (mean, sd) = mean_sd(v);
            SummaryRow {
                experiment: name.clone(),
                n: v.len(),
                mean,
                sd,
                p_value: (i > 0).then(|| welch_t_test(v, &base).ok().map(|w| w.p_value)).flatten(),
            }
        })
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v}"))
}

pub const RESULTS_HEADER: &str = "experiment,seed,lambda,nu_alpha,metric,rk_final";
pub const SUMMARY_HEADER: &str = "experiment,n,mean,sd,welch_p";

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut out = format!("{RESULTS_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.experiment,
            r.seed,
            r.lambda,
            r.nu_alpha,
            r.metric,
            fmt_opt(r.rk_final)
        ));
    }
    out
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{},{}\n", r.experiment, r.n, r.mean, r.sd, fmt_opt(r.p_value)));
    }
    out
}

/// Mean test error against `|K|`, one line per knowledge size.
pub fn trend_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from("k,n,mean,sd\n");
    for s in summarize(rows) {
        let k = s.experiment.rsplit_once("/k").map_or("", |(_, k)| k);
        out.push_str(&format!("{k},{},{},{}\n", s.n, s.mean, s.sd));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coverage_counts_points_within_the_radius() {
        let reference = Tensor::from_f64(3, 2, &[0.0, 0.0, 1.0, 0.0, 5.0, 5.0]).unwrap();
        let samples = Tensor::from_f64(2, 2, &[0.1, 0.0, 1.0, 0.149]).unwrap();
        assert!((coverage(&reference, &samples, 0.15).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(coverage(&reference, &samples, 0.01).unwrap(), 0.0);
        assert_eq!(coverage(&reference, &reference, 0.0).unwrap(), 1.0);
        assert!(coverage(&reference, &Tensor::zeros(2, 3), 0.1).is_err());
    }

    #[test]
    fn coverage_uses_at_most_500_reference_points() {
        let mut data = vec![0.0; 600];
        for v in data.iter_mut().skip(500) {
            *v = 100.0;
        }
        let reference = Tensor::from_vec(600, 1, data).unwrap();
        let samples = Tensor::from_f64(1, 1, &[0.0]).unwrap();
        assert_eq!(coverage(&reference, &samples, 0.15).unwrap(), 1.0);
    }

    #[test]
    fn experiment_names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
        assert!("toy".parse::<Experiment>().is_err());
        assert_eq!(Variant::KnowledgeSize(3).to_string(), "k3");
    }

    fn row(exp: &str, seed: u64, metric: f64) -> ResultRow {
        ResultRow {
            experiment: exp.into(),
            seed,
            lambda: 0.0,
            nu_alpha: 0.0,
            metric,
            rk_final: None,
        }
    }

    #[test]
    fn summary_and_tables() {
        let rows = vec![
            row("toy-vae/l2-only", 0, 1.0),
            row("toy-vae/proposed", 0, 0.5),
            row("toy-vae/l2-only", 1, 2.0),
            row("toy-vae/proposed", 1, 0.7),
        ];
        let s = summarize(&rows);
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].n, s[0].mean), (2, 1.5));
        assert!(s[0].p_value.is_none());
        let want = welch_t_test(&[0.5, 0.7], &[1.0, 2.0]).unwrap().p_value;
        assert_eq!(s[1].p_value, Some(want));
        assert_eq!(rows[1].variant(), "proposed");
        let csv = results_csv(&rows);
        assert!(csv.starts_with("experiment,seed,lambda,nu_alpha,metric,rk_final\ntoy-vae/l2-only,0,0,0,1,\n"));
        assert_eq!(summary_csv(&s).lines().count(), 3);
        let trend = trend_csv(&[row("knowledge-size/k1", 0, 0.4), row("knowledge-size/k3", 0, 0.3)]);
        assert_eq!(trend.lines().nth(2).unwrap(), "3,1,0.3,0");
    }

    #[test]
    fn knowledge_size_runs_are_deterministic() {
        // a shortened run through the same code path
        let splits = pairs_splits(1, PAIRS, [100, 50, 50]);
        let ks = pairs_knowledge(PAIRS).prefix(2);
        let mut cfg = pairs_config(1);
        cfg.epochs = 2;
        cfg.reg.m = 32;
        let go = || {
            let mut m = pairs_vae_model(1, 12).unwrap();
            train(&mut m, &splits, Some(&ks), &cfg).unwrap().to_json_lines()
        };
        assert_eq!(go(), go());
    }
}
