//! Run configuration for `depreg train`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use depreg::data::{load_cached_splits, load_csv, preprocess, toy_splits, Split, Splits, PREPROCESS_NOISE, TOY_SIZES};
use depreg::models::{Activation, AnyModel, FaModel, GanModel, Likelihood, VaeModel};
use depreg::{KnowledgeSet, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Width of a ccMNIST sample (three stacked 28×28 digits).
pub const CCMNIST_D: usize = 3 * 28 * 28;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Freshly generated Toy data, seeded by the run seed.
    Toy {
        #[serde(default = "toy_sizes")]
        sizes: [usize; 3],
    },
    /// `<name>_{train,valid,test}` written by `gen-data`.
    Cache { dir: PathBuf, name: String },
    /// Three CSV files with a header row.
    Csv { train: PathBuf, valid: PathBuf, test: PathBuf },
}

fn toy_sizes() -> [usize; 3] {
    TOY_SIZES
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Fa,
    Vae,
    Gan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Latent dimension (number of factors for FA).
    pub dim_z: usize,
    #[serde(default = "default_mlp")]
    pub dim_mlp: usize,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub dedicated_decoder: bool,
    #[serde(default)]
    pub likelihood: Likelihood,
    #[serde(default = "one")]
    pub obs_sigma: f64,
    #[serde(default)]
    pub learned_variance: bool,
}

fn default_mlp() -> usize {
    32
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    /// Standardize columns with train statistics and add small noise.
    #[serde(default)]
    pub standardize: bool,
    pub model: ModelSpec,
    /// Trainer settings; `train.seed` is replaced by `seed`.
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub knowledge: Option<PathBuf>,
    /// When set, `train.reg.nu_alpha` is replaced by the margin that bounds
    /// each triple's test p-value by this level, with `τ_s` estimated on the
    /// training data before training.
    #[serde(default)]
    pub calibrate_alpha: Option<f64>,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing run config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        cfg.train.seed = cfg.seed;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.dataset {
            DatasetSpec::Toy { .. } => {}
            DatasetSpec::Cache { dir, .. } => fix(dir),
            DatasetSpec::Csv { train, valid, test } => {
                fix(train);
                fix(valid);
                fix(test);
            }
        }
        if let Some(k) = &mut self.knowledge {
            fix(k);
        }
        fix(&mut self.out_dir);
    }

    /// Checks that needs no data.
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        let m = &self.model;
        if m.dim_z == 0 || m.dim_mlp == 0 {
            bail!("model.dim_z and model.dim_mlp must be >= 1");
        }
        if !(m.obs_sigma > 0.0 && m.obs_sigma.is_finite()) {
            bail!("model.obs_sigma must be > 0, got {}", m.obs_sigma);
        }
        if m.kind != ModelKind::Vae && (m.dedicated_decoder || m.learned_variance || m.likelihood != Likelihood::Gaussian) {
            bail!("dedicated_decoder, learned_variance and likelihood apply only to VAEs");
        }
        if m.learned_variance && m.likelihood != Likelihood::Gaussian {
            bail!("learned_variance needs a Gaussian likelihood");
        }
        if let Some(a) = self.calibrate_alpha {
            if !(a > 0.0 && a < 1.0) {
                bail!("calibrate_alpha must lie in (0, 1), got {a}");
            }
            if !self.train.grid.nu_alphas.is_empty() {
                bail!("calibrate_alpha replaces the nu_alpha grid; set only one of them");
            }
            if self.knowledge.is_none() {
                bail!("calibrate_alpha needs a knowledge file");
            }
        }
        if let DatasetSpec::Toy { sizes } = self.dataset {
            if sizes.iter().any(|&n| n == 0) {
                bail!("dataset.sizes must all be >= 1");
            }
        }
        Ok(())
    }

    /// Checks that depend on the data width.
    pub fn validate_for(&self, d: usize) -> Result<()> {
        if self.model.dedicated_decoder && d != CCMNIST_D {
            bail!("dedicated_decoder needs ccMNIST data ({CCMNIST_D} features), got {d}");
        }
        Ok(())
    }

    pub fn load_data(&self) -> Result<Splits> {
        let splits = match &self.dataset {
            DatasetSpec::Toy { sizes } => toy_splits(self.seed, *sizes),
            DatasetSpec::Cache { dir, name } => load_cached_splits(dir, name)?,
            DatasetSpec::Csv { train, valid, test } => {
                let load = |p: &PathBuf, split: Split| -> Result<_> {
                    let mut ds = load_csv(p, b',', true)?;
                    ds.split = split;
                    Ok(ds)
                };
                Splits {
                    train: load(train, Split::Train)?,
                    valid: load(valid, Split::Valid)?,
                    test: load(test, Split::Test)?,
                }
            }
        };
        Ok(if self.standardize {
            preprocess(splits, PREPROCESS_NOISE, self.seed)?
        } else {
            splits
        })
    }

    pub fn load_knowledge(&self) -> Result<Option<KnowledgeSet>> {
        self.knowledge
            .as_ref()
            .map(|p| KnowledgeSet::load_json(p).map_err(Into::into))
            .transpose()
    }

    /// Freshly initialised model for data of width `d`.
    pub fn build_model(&self, d: usize) -> Result<AnyModel<f64>> {
        let m = &self.model;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        Ok(match m.kind {
            ModelKind::Fa => AnyModel::Fa(FaModel::new(d, m.dim_z, &mut rng)?),
            ModelKind::Gan => AnyModel::Gan(GanModel::new(d, m.dim_z, m.dim_mlp, m.activation, &mut rng)?),
            ModelKind::Vae => {
                let mut vae =
                    VaeModel::new(d, m.dim_z, m.dim_mlp, m.activation, m.likelihood, m.dedicated_decoder, &mut rng)?;
                vae.obs_sigma = m.obs_sigma;
                if m.learned_variance {
                    vae = vae.with_learned_variance()?;
                }
                AnyModel::Vae(vae)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = parse(r#"{"dataset":{"source":"toy"},"model":{"kind":"vae","dim_z":4},"out_dir":"o"}"#).unwrap();
        assert_eq!(cfg.dataset, DatasetSpec::Toy { sizes: TOY_SIZES });
        assert_eq!(cfg.model.dim_mlp, 32);
        assert_eq!(cfg.train, TrainConfig::default());
    }

    #[test]
    fn inconsistent_fields_are_rejected() {
        assert!(parse(r#"{"dataset":{"source":"toy"},"model":{"kind":"gan","dim_z":2,"dedicated_decoder":true},"out_dir":"o"}"#).is_err());
        assert!(parse(r#"{"dataset":{"source":"toy"},"model":{"kind":"vae","dim_z":2},"out_dir":"o","extra":1}"#).is_err());
        let cfg = parse(r#"{"dataset":{"source":"toy"},"model":{"kind":"vae","dim_z":2,"dedicated_decoder":true},"out_dir":"o"}"#).unwrap();
        assert!(cfg.validate_for(3).is_err());
        assert!(cfg.validate_for(CCMNIST_D).is_ok());
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let mut cfg = parse(
            r#"{"dataset":{"source":"cache","dir":"data","name":"toy"},"model":{"kind":"fa","dim_z":1},"knowledge":"k.json","out_dir":"/abs"}"#,
        )
        .unwrap();
        cfg.resolve(Path::new("/runs"));
        assert_eq!(cfg.dataset, DatasetSpec::Cache { dir: "/runs/data".into(), name: "toy".into() });
        assert_eq!(cfg.knowledge.as_deref(), Some(Path::new("/runs/k.json")));
        assert_eq!(cfg.out_dir, PathBuf::from("/abs"));
    }
}
