use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use depreg::data::{
    build_ccmnist, load_cached_splits, load_csv, load_mnist, preprocess, save_cached_splits, toy_splits,
    Preprocessing, CCMNIST_SIZES, TOY_SIZES,
};
use depreg::experiments::{results_csv, run_experiment, summarize, summary_csv, trend_csv, Experiment};
use depreg::hsic::{rel_dep_test, Estimator, RelKernels};
use depreg::knowledge::{ccmnist_knowledge, toy_knowledge};
use depreg::models::Checkpoint;
use depreg::regularizer::{calibrate_nu_on_data, BandwidthTable};
use depreg::trainer::{Grid, Penalty};
use depreg::{evaluate, grid_select, train, Metric, Split};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::RunConfig;
use crate::{BaselineArg, Command, DatasetArg, SplitArg};

pub enum CliError {
    /// Bad invocation; exit code 2.
    Usage(String),
    /// Anything that went wrong while running; exit code 1.
    Run(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Run(e.into())
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Bootstrap resamples behind each `τ_s` when calibrating `ν_α` from `α`.
const CALIBRATION_BOOT: usize = 200;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::GenData { dataset, mnist_dir, out, seed, sizes } => gen_data(dataset, mnist_dir, &out, seed, sizes),
        Command::HsicTest { data, reference, plus, minus, m, boot, seed, unbiased } => {
            let est = if unbiased { Estimator::Unbiased } else { Estimator::Biased };
            hsic_test(&data, [&reference, &plus, &minus], m, boot, seed, est)
        }
        Command::Train { config, no_reg, baseline } => train_cmd(&config, no_reg, baseline),
        Command::Evaluate { checkpoint, data, metric, name, split, seed } => {
            let split = match split {
                SplitArg::Train => Split::Train,
                SplitArg::Valid => Split::Valid,
                SplitArg::Test => Split::Test,
            };
            evaluate_cmd(&checkpoint, &data, metric, name, split, seed)
        }
        Command::Reproduce { experiment, out, seed_base, seeds, jobs, mnist_dir } => {
            reproduce(experiment, &out, seed_base, seeds, jobs, mnist_dir)
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn sizes_or(sizes: Option<Vec<usize>>, default: [usize; 3]) -> Result<[usize; 3]> {
    match sizes {
        None => Ok(default),
        Some(v) if v.len() == 3 && v.iter().all(|&n| n > 0) => Ok([v[0], v[1], v[2]]),
        Some(v) => Err(CliError::Usage(format!("--sizes needs three positive counts, got {v:?}"))),
    }
}

fn gen_data(dataset: DatasetArg, mnist_dir: Option<PathBuf>, out: &Path, seed: u64, sizes: Option<Vec<usize>>) -> Result<()> {
    let (name, splits, ks) = match dataset {
        DatasetArg::Toy => ("toy", toy_splits(seed, sizes_or(sizes, TOY_SIZES)?), toy_knowledge()),
        DatasetArg::Ccmnist => {
            let dir = mnist_dir.ok_or_else(|| CliError::Usage("--mnist-dir is required for ccmnist".into()))?;
            let sizes = sizes_or(sizes, CCMNIST_SIZES)?;
            let mnist = load_mnist(&dir)?;
            let cc = build_ccmnist(&mnist, sizes, seed)?;
            create_dir(out)?;
            let digits = json!({ "train": cc.digits[0], "valid": cc.digits[1], "test": cc.digits[2] });
            write(&out.join("ccmnist_digits.json"), &format!("{digits}\n"))?;
            ("ccmnist", cc.splits, ccmnist_knowledge())
        }
    };
    create_dir(out)?;
    save_cached_splits(&splits, out, name)?;
    let kpath = out.join(format!("{name}.knowledge.json"));
    ks.save_json(&kpath)?;
    log::info!("wrote {name} splits and knowledge to {}", out.display());
    let summary = json!({
        "dataset": name,
        "d": splits.d(),
        "rows": [splits.train.n(), splits.valid.n(), splits.test.n()],
        "knowledge": kpath.file_name().and_then(|s| s.to_str()),
    });
    println!("{summary}");
    Ok(())
}

fn hsic_test(data: &Path, blocks: [&[usize]; 3], m: usize, boot: usize, seed: u64, est: Estimator) -> Result<()> {
    let ds = load_csv(data, b',', true)?;
    let (n, d) = (ds.n(), ds.d());
    let mut cols = Vec::with_capacity(3);
    for (flag, block) in ["--ref", "--plus", "--minus"].iter().zip(blocks) {
        if let Some(&bad) = block.iter().find(|&&c| c == 0 || c > d) {
            return Err(CliError::Usage(format!("{flag} column {bad} is outside 1..={d}")));
        }
        cols.push(block.iter().map(|c| c - 1).collect::<Vec<_>>());
    }
    let x = if m < n {
        let mut rows = rand::seq::index::sample(&mut ChaCha8Rng::seed_from_u64(seed), n, m).into_vec();
        rows.sort_unstable();
        ds.x.select_rows(&rows)
    } else {
        ds.x
    };
    let (xr, xp, xm) = (x.select_cols(&cols[0]), x.select_cols(&cols[1]), x.select_cols(&cols[2]));
    let kernels = RelKernels::median(&xr, &xp, &xm)?;
    let res = rel_dep_test(&xr, &xp, &xm, &kernels, est, boot, seed)?;
    println!("{}", json!({ "rho_hat": res.rho_hat, "tau": res.tau, "p_bound": res.p_bound }));
    Ok(())
}

fn train_cmd(path: &Path, no_reg: bool, baseline: Option<BaselineArg>) -> Result<()> {
    let cfg = RunConfig::load(path)?;
    cfg.validate()?;
    let splits = cfg.load_data()?;
    let d = splits.d();
    cfg.validate_for(d)?;
    let ks = cfg.load_knowledge()?;
    let mut tc = cfg.train.clone();
    if no_reg {
        tc.reg.lambda = 0.0;
        tc.grid = Grid::default();
    }
    if let Some(BaselineArg::OutLayer) = baseline {
        if ks.is_none() {
            return Err(CliError::Usage("--baseline out-layer needs a knowledge file in the config".into()));
        }
        tc.penalty = Penalty::OutLayer;
    }
    let mut taus = None;
    if let (Some(alpha), Some(ks), false) = (cfg.calibrate_alpha, ks.as_ref(), no_reg) {
        let bw = BandwidthTable::from_data(&splits.train.x, ks)?;
        let (nu, t) = calibrate_nu_on_data(&splits.train.x, ks, &bw, tc.reg.m, tc.reg.estimator, alpha, CALIBRATION_BOOT, cfg.seed)?;
        log::info!("nu_alpha calibrated to {nu:.6} for alpha {alpha} (tau {t:?})");
        tc.reg.nu_alpha = nu;
        tc.reg.bandwidths = bw;
        taus = Some(t);
    }
    let use_grid = !tc.grid.lambdas.is_empty() || !tc.grid.nu_alphas.is_empty();
    let (report, model, candidates) = if use_grid {
        let out = grid_select(|| cfg.build_model(d).map_err(|e| depreg::Error::Config(format!("{e:#}"))), &splits, ks.as_ref(), &tc)?;
        (out.report, out.model, Some(out.candidates))
    } else {
        let mut model = cfg.build_model(d)?;
        let report = train(&mut model, &splits, ks.as_ref(), &tc)?;
        (report, model, None)
    };
    create_dir(&cfg.out_dir)?;
    let lines = report.to_json_lines();
    write(&cfg.out_dir.join("report.jsonl"), &lines)?;
    // the config as written, so the checkpoint does not depend on where the run happened
    let as_written: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).context("re-reading config")?)?;
    let mut ck = Checkpoint::new(model);
    ck.meta = json!({
        "config": as_written,
        "seed": cfg.seed,
        "lambda": report.lambda,
        "nu_alpha": report.nu_alpha,
        "penalty": report.penalty,
        "candidates": candidates,
        "calibration_taus": taus,
        "preprocessing": splits.train.preprocessing,
    });
    ck.save(cfg.out_dir.join("checkpoint.json"))?;
    log::info!("wrote report and checkpoint to {}", cfg.out_dir.display());
    print!("{}", lines.lines().last().map(|l| format!("{l}\n")).unwrap_or_default());
    Ok(())
}

/// The single `<name>` with a `<name>_train.json` sidecar in `dir`.
fn infer_name(dir: &Path) -> Result<String> {
    let entries = fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))?;
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str().and_then(|f| f.strip_suffix("_train.json")).map(String::from))
        .collect();
    names.sort();
    match names.len() {
        1 => Ok(names.remove(0)),
        0 => Err(CliError::Run(anyhow!("no dataset cache found in {}", dir.display()))),
        _ => Err(CliError::Usage(format!("{} holds several datasets ({}); pass --name", dir.display(), names.join(", ")))),
    }
}

fn evaluate_cmd(path: &Path, data: &Path, metric: Metric, name: Option<String>, split: Split, seed: Option<u64>) -> Result<()> {
    let ck = Checkpoint::<f64>::load(path)?;
    let name = match name {
        Some(n) => n,
        None => infer_name(data)?,
    };
    let mut splits = load_cached_splits(data, &name)?;
    if let Some(pre) = ck.meta.get("preprocessing").filter(|v| !v.is_null()) {
        let pre: Preprocessing = serde_json::from_value(pre.clone()).context("reading checkpoint preprocessing")?;
        splits = preprocess(splits, pre.noise_sigma, pre.seed)?;
        if splits.train.preprocessing.as_ref().map(|p| (&p.means, &p.stds)) != Some((&pre.means, &pre.stds)) {
            log::warn!("{} was trained on data with different column statistics", path.display());
        }
    }
    let seed = seed.or_else(|| ck.meta.get("seed").and_then(|v| v.as_u64())).unwrap_or(0);
    let value = evaluate(&ck.model, &splits.get(split).x, metric, seed)?;
    println!("{}", json!({ "metric": metric.name(), "split": split.name(), "value": value }));
    Ok(())
}

fn reproduce(exp: Experiment, out: &Path, seed_base: u64, seeds: usize, jobs: Option<usize>, mnist_dir: Option<PathBuf>) -> Result<()> {
    if seeds == 0 {
        return Err(CliError::Usage("--seeds must be >= 1".into()));
    }
    let mnist = match (exp, mnist_dir) {
        (Experiment::CcmnistVae, None) => return Err(CliError::Usage("ccmnist-vae needs --mnist-dir".into())),
        (Experiment::CcmnistVae, Some(dir)) => Some(load_mnist(dir)?),
        _ => None,
    };
    let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let seed_list: Vec<u64> = (0..seeds as u64).map(|i| seed_base + i).collect();
    let rows = run_experiment(exp, &seed_list, mnist.as_ref(), jobs)?;
    let summary = summary_csv(&summarize(&rows));
    create_dir(out)?;
    write(&out.join("results.csv"), &results_csv(&rows))?;
    write(&out.join("summary.csv"), &summary)?;
    if exp == Experiment::KnowledgeSize {
        write(&out.join("trend.csv"), &trend_csv(&rows))?;
    }
    print!("{summary}");
    Ok(())
}
