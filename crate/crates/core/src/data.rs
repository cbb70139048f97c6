//! Datasets: the Toy cylinder generator, planted multi-ring data, ccMNIST
//! construction from MNIST IDX files, CSV ingestion with train-statistics
//! normalisation, and a flat binary cache.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knowledge::{KnowledgeSet, KnowledgeTriple};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

/// How a split was normalised; statistics always come from the train split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub noise_sigma: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: Tensor<f64>,
    pub split: Split,
    pub feature_names: Option<Vec<String>>,
    pub preprocessing: Option<Preprocessing>,
}

impl Dataset {
    pub fn new(x: Tensor<f64>, split: Split) -> Self {
        Self {
            x,
            split,
            feature_names: None,
            preprocessing: None,
        }
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub valid: Dataset,
    pub test: Dataset,
}

impl Splits {
    pub fn get(&self, split: Split) -> &Dataset {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn d(&self) -> usize {
        self.train.d()
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Noise level of the Toy generator.
pub const TOY_NOISE: f64 = 0.05;

/// Sizes used for the Toy experiments.
pub const TOY_SIZES: [usize; 3] = [1000, 2000, 2000];

/// Half-height of the Toy cylinder.
pub const TOY_HALF_HEIGHT: f64 = 1.0;

/// Noisy unit-cylinder shell: `θ ~ U[0, 2π)`, `h ~ U[−1, 1]`,
/// `x = (cos θ, sin θ, h) + ε`, `ε ~ N(0, 0.05²)`.
pub fn gen_toy<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Tensor<f64> {
    let noise = Normal::new(0.0, TOY_NOISE).expect("valid sigma");
    let mut data = Vec::with_capacity(3 * n);
    for _ in 0..n {
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let h = rng.random_range(-TOY_HALF_HEIGHT..TOY_HALF_HEIGHT);
        data.push(theta.cos() + noise.sample(rng));
        data.push(theta.sin() + noise.sample(rng));
        data.push(h + noise.sample(rng));
    }
    Tensor::from_vec(n, 3, data).expect("3 columns")
}

/// Toy splits, each split drawn from its own stream of `seed`.
pub fn toy_splits(seed: u64, sizes: [usize; 3]) -> Splits {
    let [train, valid, test] = [0, 1, 2].map(|i| gen_toy(sizes[i], &mut stream(seed, i as u64)));
    Splits {
        train: Dataset::new(train, Split::Train),
        valid: Dataset::new(valid, Split::Valid),
        test: Dataset::new(test, Split::Test),
    }
}

/// `k` independent planted pairs side by side: columns `2j, 2j+1` hold
/// `(u_j, u_j) + ε` with `u_j ~ U[−1, 1]` and `ε ~ N(0, 0.05²)`.
pub fn gen_pairs<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Tensor<f64> {
    let noise = Normal::new(0.0, TOY_NOISE).expect("valid sigma");
    let mut data = Vec::with_capacity(2 * k * n);
    for _ in 0..n {
        for _ in 0..k {
            let u = rng.random_range(-1.0..1.0);
            data.push(u + noise.sample(rng));
            data.push(u + noise.sample(rng));
        }
    }
    Tensor::from_vec(n, 2 * k, data).expect("2k columns")
}

pub fn pairs_splits(seed: u64, k: usize, sizes: [usize; 3]) -> Splits {
    let [train, valid, test] = [0, 1, 2].map(|i| gen_pairs(sizes[i], k, &mut stream(seed, i as u64)));
    Splits {
        train: Dataset::new(train, Split::Train),
        valid: Dataset::new(valid, Split::Valid),
        test: Dataset::new(test, Split::Test),
    }
}

/// One planted triple per pair: `({2j}, {2j+1}, {2j+2 mod 2k})` in 0-based
/// columns, i.e. the two halves of a pair are more dependent than a column
/// and the next pair.
pub fn pairs_knowledge(k: usize) -> KnowledgeSet {
    let d = 2 * k;
    let triples = (0..k)
        .map(|j| {
            KnowledgeTriple::new([2 * j], [2 * j + 1], [(2 * j + 2) % d])
                .with_label(format!("pair {}", j + 1))
        })
        .collect();
    KnowledgeSet::new(d, triples)
}

/// Z-scores every split with train means and standard deviations, then adds
/// `N(0, noise_sigma²)` noise to all splits.
pub fn preprocess(splits: Splits, noise_sigma: f64, seed: u64) -> Result<Splits> {
    let x = &splits.train.x;
    let (n, d) = (x.rows(), x.cols());
    if n < 2 {
        return Err(Error::Contract(format!("need at least 2 training rows, got {n}")));
    }
    let mut means = vec![0.0; d];
    let mut stds = vec![0.0; d];
    for j in 0..d {
        let mean = (0..n).map(|i| x.get(i, j)).sum::<f64>() / n as f64;
        let var = (0..n).map(|i| (x.get(i, j) - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        if !(var > 0.0) {
            return Err(Error::Domain(format!(
                "column {} is constant in the training split",
                j + 1
            )));
        }
        means[j] = mean;
        stds[j] = var.sqrt();
    }
    let record = Preprocessing {
        means: means.clone(),
        stds: stds.clone(),
        noise_sigma,
        seed,
    };
    let noise = Normal::new(0.0, noise_sigma).map_err(|e| Error::Domain(e.to_string()))?;
    let transform = |ds: Dataset, id: u64| -> Result<Dataset> {
        if ds.d() != d {
            return Err(Error::Dimension(format!(
                "{} split has {} columns, train has {d}",
                ds.split.name(),
                ds.d()
            )));
        }
        let mut rng = stream(seed, id);
        let mut out = ds.x.clone();
        for i in 0..out.rows() {
            for j in 0..d {
                let z = (out.get(i, j) - means[j]) / stds[j];
                let eps = if noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                out.set(i, j, z + eps);
            }
        }
        Ok(Dataset {
            x: out,
            preprocessing: Some(record.clone()),
            ..ds
        })
    };
    Ok(Splits {
        train: transform(splits.train, 100)?,
        valid: transform(splits.valid, 101)?,
        test: transform(splits.test, 102)?,
    })
}

/// Standard deviation of the preprocessing noise.
pub const PREPROCESS_NOISE: f64 = 1e-2;

/// `ln(x + 10⁻³)` elementwise.
pub fn solar_log_transform(x: &Tensor<f64>) -> Result<Tensor<f64>> {
    if let Some(v) = x.data().iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::Domain(format!("log transform needs non-negative input, got {v}")));
    }
    Ok(x.map(|v| (v + 1e-3).ln()))
}

/// Reads a rectangular numeric table.
pub fn load_csv(path: impl AsRef<Path>, delimiter: u8, has_header: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, delimiter, has_header, &path.display().to_string())
}

pub fn read_csv<R: Read>(reader: R, delimiter: u8, has_header: bool, context: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let names = if has_header {
        let h = rdr
            .headers()
            .map_err(|e| Error::parse(context, e.to_string()))?;
        Some(h.iter().map(str::to_owned).collect::<Vec<_>>())
    } else {
        None
    };
    let mut data = Vec::new();
    let mut cols = names.as_ref().map(Vec::len);
    let mut rows = 0;
    for (r, rec) in rdr.records().enumerate() {
        let line = r + 1 + usize::from(has_header);
        let rec = rec.map_err(|e| Error::parse(context, format!("row {line}: {e}")))?;
        match cols {
            Some(c) if c != rec.len() => {
                return Err(Error::parse(
                    context,
                    format!("row {line}: expected {c} columns, found {}", rec.len()),
                ))
            }
            None => cols = Some(rec.len()),
            _ => {}
        }
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                Error::parse(context, format!("row {line}, column {}: {cell:?} is not a number", c + 1))
            })?;
            if !v.is_finite() {
                return Err(Error::parse(context, format!("row {line}, column {}: non-finite value", c + 1)));
            }
            data.push(v);
        }
        rows += 1;
    }
    let cols = cols.unwrap_or(0);
    if rows == 0 || cols == 0 {
        return Err(Error::parse(context, "table is empty"));
    }
    Ok(Dataset {
        feature_names: names,
        ..Dataset::new(Tensor::from_vec(rows, cols, data)?, Split::Train)
    })
}

pub fn write_csv<W: Write>(writer: W, x: &Tensor<f64>, header: Option<&[String]>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::Numeric(format!("csv write failed: {e}"));
    if let Some(h) = header {
        w.write_record(h).map_err(err)?;
    }
    for i in 0..x.rows() {
        w.write_record(x.row(i).iter().map(|v| v.to_string())).map_err(err)?;
    }
    w.flush().map_err(|e| Error::Numeric(format!("csv write failed: {e}")))?;
    Ok(())
}

/// Images as an n × (rows·cols) matrix scaled to [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct IdxImages {
    pub pixels: Tensor<f64>,
    pub rows: usize,
    pub cols: usize,
}

const IDX_IMAGES: u32 = 0x0000_0803;
const IDX_LABELS: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], offset: usize, context: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::parse(context, format!("truncated header at byte offset {offset}")))
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn parse_idx_images(bytes: &[u8], context: &str) -> Result<IdxImages> {
    let magic = be_u32(bytes, 0, context)?;
    if magic != IDX_IMAGES {
        return Err(Error::parse(context, format!("bad magic 0x{magic:08x} at offset 0, expected 0x{IDX_IMAGES:08x}")));
    }
    let n = be_u32(bytes, 4, context)? as usize;
    let rows = be_u32(bytes, 8, context)? as usize;
    let cols = be_u32(bytes, 12, context)? as usize;
    let body = &bytes[16..];
    let need = n * rows * cols;
    if body.len() < need {
        return Err(Error::parse(
            context,
            format!("truncated pixel data at offset {}: need {need} bytes, have {}", 16 + body.len(), body.len()),
        ));
    }
    let data = body[..need].iter().map(|&b| f64::from(b) / 255.0).collect();
    Ok(IdxImages {
        pixels: Tensor::from_vec(n, rows * cols, data)?,
        rows,
        cols,
    })
}

pub fn parse_idx_labels(bytes: &[u8], context: &str) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0, context)?;
    if magic != IDX_LABELS {
        return Err(Error::parse(context, format!("bad magic 0x{magic:08x} at offset 0, expected 0x{IDX_LABELS:08x}")));
    }
    let n = be_u32(bytes, 4, context)? as usize;
    let body = &bytes[8..];
    if body.len() < n {
        return Err(Error::parse(
            context,
            format!("truncated label data at offset {}: need {n} bytes", 8 + body.len()),
        ));
    }
    if let Some(pos) = body[..n].iter().position(|&l| l > 9) {
        return Err(Error::parse(context, format!("label {} at offset {} is not a digit", body[pos], 8 + pos)));
    }
    Ok(body[..n].to_vec())
}

/// Images and labels from a pair of IDX files.
pub fn parse_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<(IdxImages, Vec<u8>)> {
    let (ip, lp) = (images.as_ref(), labels.as_ref());
    let img = parse_idx_images(&read_all(ip)?, &ip.display().to_string())?;
    let lab = parse_idx_labels(&read_all(lp)?, &lp.display().to_string())?;
    if img.pixels.rows() != lab.len() {
        return Err(Error::parse(
            ip.display().to_string(),
            format!("{} images but {} labels", img.pixels.rows(), lab.len()),
        ));
    }
    Ok((img, lab))
}

/// IDX image bytes; pixel values are rounded from [0, 1] to bytes.
pub fn idx_image_bytes(pixels: &Tensor<f64>, rows: usize, cols: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + pixels.numel());
    for v in [IDX_IMAGES, pixels.rows() as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend(pixels.data().iter().map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8));
    out
}

pub fn idx_label_bytes(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Standard MNIST file names inside `dir`.
pub fn mnist_paths(dir: &Path) -> [(PathBuf, PathBuf); 2] {
    [
        (dir.join("train-images-idx3-ubyte"), dir.join("train-labels-idx1-ubyte")),
        (dir.join("t10k-images-idx3-ubyte"), dir.join("t10k-labels-idx1-ubyte")),
    ]
}

pub type Mnist = ((IdxImages, Vec<u8>), (IdxImages, Vec<u8>));

pub fn load_mnist(dir: impl AsRef<Path>) -> Result<Mnist> {
    let [(ti, tl), (si, sl)] = mnist_paths(dir.as_ref());
    Ok((parse_idx(ti, tl)?, parse_idx(si, sl)?))
}

/// Sizes used for ccMNIST.
pub const CCMNIST_SIZES: [usize; 3] = [20_000, 10_000, 10_000];

fn concat_digits(
    images: &Tensor<f64>,
    labels: &[u8],
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Tensor<f64>, Vec<[u8; 3]>)> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); 10];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l as usize].push(i);
    }
    let usable: Vec<usize> = (0..10).filter(|&c| by_class[c].len() >= 2).collect();
    if usable.is_empty() {
        return Err(Error::Construction("no digit class has two distinct images".into()));
    }
    if usable.len() < 10 {
        return Err(Error::Construction(format!(
            "digit classes {:?} have fewer than two images",
            (0..10).filter(|c| !usable.contains(c)).collect::<Vec<_>>()
        )));
    }
    let px = images.cols();
    let mut data = Vec::with_capacity(n * 3 * px);
    let mut digits = Vec::with_capacity(n);
    for _ in 0..n {
        let top = rng.random_range(0..labels.len());
        let class = &by_class[labels[top] as usize];
        // a different image with the same label
        let middle = loop {
            let c = *class.choose(rng).expect("class nonempty");
            if c != top {
                break c;
            }
        };
        let bottom = rng.random_range(0..labels.len());
        for idx in [top, middle, bottom] {
            data.extend_from_slice(images.row(idx));
        }
        digits.push([labels[top], labels[middle], labels[bottom]]);
    }
    Ok((Tensor::from_vec(n, 3 * px, data)?, digits))
}

/// Stacked digit triples with their labels, per split.
#[derive(Clone, Debug)]
pub struct CcMnist {
    pub splits: Splits,
    pub digits: [Vec<[u8; 3]>; 3],
}

/// Three vertically stacked digits per sample: top and middle share a label
/// (distinct images), the bottom is drawn independently. Train and valid
/// come from the MNIST training images, test from the MNIST test images.
pub fn build_ccmnist(mnist: &Mnist, sizes: [usize; 3], seed: u64) -> Result<CcMnist> {
    let ((train_img, train_lab), (test_img, test_lab)) = mnist;
    let (train, dtr) = concat_digits(&train_img.pixels, train_lab, sizes[0], &mut stream(seed, 0))?;
    let (valid, dva) = concat_digits(&train_img.pixels, train_lab, sizes[1], &mut stream(seed, 1))?;
    let (test, dte) = concat_digits(&test_img.pixels, test_lab, sizes[2], &mut stream(seed, 2))?;
    Ok(CcMnist {
        splits: Splits {
            train: Dataset::new(train, Split::Train),
            valid: Dataset::new(valid, Split::Valid),
            test: Dataset::new(test, Split::Test),
        },
        digits: [dtr, dva, dte],
    })
}

/// Sidecar written next to a cached matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheMeta {
    pub rows: usize,
    pub cols: usize,
    pub dtype: String,
    pub split: Split,
    #[serde(default)]
    pub feature_names: Option<Vec<String>>,
    #[serde(default)]
    pub preprocessing: Option<Preprocessing>,
}

/// Writes `<stem>.bin` (little-endian f64, row-major) and `<stem>.json`.
pub fn save_cache(ds: &Dataset, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
    let dir = dir.as_ref();
    let bin = dir.join(format!("{stem}.bin"));
    let meta_path = dir.join(format!("{stem}.json"));
    let bytes: Vec<u8> = ds.x.data().iter().flat_map(|v| v.to_le_bytes()).collect();
    std::fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))?;
    let meta = CacheMeta {
        rows: ds.n(),
        cols: ds.d(),
        dtype: "f64le".into(),
        split: ds.split,
        feature_names: ds.feature_names.clone(),
        preprocessing: ds.preprocessing.clone(),
    };
    let text = serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n";
    std::fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))
}

pub fn load_cache(dir: impl AsRef<Path>, stem: &str) -> Result<Dataset> {
    let dir = dir.as_ref();
    let bin = dir.join(format!("{stem}.bin"));
    let meta_path = dir.join(format!("{stem}.json"));
    let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: CacheMeta = serde_json::from_str(&text)
        .map_err(|e| Error::parse(meta_path.display().to_string(), e.to_string()))?;
    if meta.dtype != "f64le" {
        return Err(Error::parse(meta_path.display().to_string(), format!("unsupported dtype {:?}", meta.dtype)));
    }
    let bytes = read_all(&bin)?;
    if bytes.len() != meta.rows * meta.cols * 8 {
        return Err(Error::parse(
            bin.display().to_string(),
            format!("expected {} bytes for {}x{}, found {}", meta.rows * meta.cols * 8, meta.rows, meta.cols, bytes.len()),
        ));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(Dataset {
        x: Tensor::from_vec(meta.rows, meta.cols, data)?,
        split: meta.split,
        feature_names: meta.feature_names,
        preprocessing: meta.preprocessing,
    })
}

/// Loads `<name>_{train,valid,test}` from a cache directory.
pub fn load_cached_splits(dir: impl AsRef<Path>, name: &str) -> Result<Splits> {
    let dir = dir.as_ref();
    Ok(Splits {
        train: load_cache(dir, &format!("{name}_train"))?,
        valid: load_cache(dir, &format!("{name}_valid"))?,
        test: load_cache(dir, &format!("{name}_test"))?,
    })
}

pub fn save_cached_splits(splits: &Splits, dir: impl AsRef<Path>, name: &str) -> Result<()> {
    for s in Split::ALL {
        save_cache(splits.get(s), dir.as_ref(), &format!("{name}_{}", s.name()))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_split_sizes_and_shell() {
        let s = toy_splits(0, TOY_SIZES);
        assert_eq!([s.train.n(), s.valid.n(), s.test.n()], [1000, 2000, 2000]);
        assert_eq!(s.d(), 3);
        let x = &s.test.x;
        let r2 = (0..x.rows()).map(|i| x.get(i, 0).powi(2) + x.get(i, 1).powi(2)).sum::<f64>() / x.rows() as f64;
        assert!((0.95..=1.1).contains(&r2), "{r2}");
        assert_eq!(toy_splits(0, TOY_SIZES), s);
        assert_ne!(toy_splits(1, TOY_SIZES).train, s.train);
    }

    #[test]
    fn pairs_and_their_knowledge() {
        let s = pairs_splits(3, 6, [50, 20, 20]);
        assert_eq!(s.d(), 12);
        let x = &s.train.x;
        for i in 0..x.rows() {
            assert!(x.get(i, 4).abs() <= 1.3 && (x.get(i, 4) - x.get(i, 5)).abs() < 0.5);
        }
        let ks = pairs_knowledge(6);
        ks.validate(12).unwrap();
        assert_eq!(ks.triples[5].minus(), &[0]);
        assert_eq!(ks.triples[1].label.as_deref(), Some("pair 2"));
    }

    #[test]
    fn preprocess_uses_train_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let train = Tensor::<f64>::randn(1000, 2, &mut rng).map(|v| 5.0 + 2.0 * v);
        let valid = Tensor::from_f64(2, 2, &[5.0, 5.0, 7.0, 3.0]).unwrap();
        let splits = Splits {
            train: Dataset::new(train, Split::Train),
            valid: Dataset::new(valid.clone(), Split::Valid),
            test: Dataset::new(valid, Split::Test),
        };
        let clean = preprocess(splits.clone(), 0.0, 1).unwrap();
        let rec = clean.train.preprocessing.clone().unwrap();
        for j in 0..2 {
            let col: Vec<f64> = (0..1000).map(|i| clean.train.x.get(i, j)).collect();
            let mean = col.iter().sum::<f64>() / 1000.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 999.0;
            assert!(mean.abs() < 0.05 && (var.sqrt() - 1.0).abs() < 0.05);
            assert!((rec.means[j] - 5.0).abs() < 0.2 && (rec.stds[j] - 2.0).abs() < 0.2);
            let want = (7.0 - rec.means[0]) / rec.stds[0];
            assert_eq!(clean.valid.x.get(1, 0), want);
        }
        let noisy = preprocess(splits, PREPROCESS_NOISE, 1).unwrap();
        let diffs: Vec<f64> = noisy
            .train
            .x
            .data()
            .iter()
            .zip(clean.train.x.data())
            .map(|(a, b)| a - b)
            .collect();
        let var = diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64;
        assert!((var / 1e-4 - 1.0).abs() < 0.3, "{var}");
    }

    #[test]
    fn preprocess_rejects_constant_columns() {
        let x = Tensor::from_f64(3, 2, &[1.0, 1.0, 2.0, 1.0, 3.0, 1.0]).unwrap();
        let s = Splits {
            train: Dataset::new(x.clone(), Split::Train),
            valid: Dataset::new(x.clone(), Split::Valid),
            test: Dataset::new(x, Split::Test),
        };
        let err = preprocess(s, 0.0, 0).unwrap_err();
        assert!(err.to_string().contains("column 2"), "{err}");
    }

    #[test]
    fn log_transform_examples() {
        let x = Tensor::from_f64(1, 3, &[0.0, 54.597, 1.0]).unwrap();
        let y = solar_log_transform(&x).unwrap();
        assert!((y.get(0, 0) - (-6.907755)).abs() < 1e-6);
        assert!((y.get(0, 1) - 4.0).abs() < 1e-3);
        assert!(y.get(0, 0) < y.get(0, 2) && y.get(0, 2) < y.get(0, 1));
        assert!(solar_log_transform(&Tensor::from_f64(1, 1, &[-0.1]).unwrap()).is_err());
    }

    #[test]
    fn csv_reading_and_errors() {
        let ds = read_csv("a,b\n1,2\n3.5,-4\n".as_bytes(), b',', true, "mem").unwrap();
        assert_eq!(ds.x.data(), &[1.0, 2.0, 3.5, -4.0]);
        assert_eq!(ds.feature_names.unwrap(), vec!["a", "b"]);
        let ds = read_csv("1;2\n3;4\n".as_bytes(), b';', false, "mem").unwrap();
        assert_eq!(ds.x.shape(), [2, 2]);
        let err = read_csv("a,b\n1,2\n3,x\n".as_bytes(), b',', true, "t.csv").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 3") && msg.contains("column 2"), "{msg}");
        assert!(read_csv("1,2\n3\n".as_bytes(), b',', false, "mem").is_err());
        let mut buf = Vec::new();
        write_csv(&mut buf, &Tensor::from_f64(1, 2, &[0.1, 2.0]).unwrap(), None).unwrap();
        assert_eq!(read_csv(&buf[..], b',', false, "mem").unwrap().x.data(), &[0.1, 2.0]);
    }

    fn synthetic_mnist(n: usize, seed: u64) -> (IdxImages, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
        let data = (0..n * 784).map(|_| f64::from(rng.random_range(0u8..=255)) / 255.0).collect();
        (
            IdxImages {
                pixels: Tensor::from_vec(n, 784, data).unwrap(),
                rows: 28,
                cols: 28,
            },
            labels,
        )
    }

    #[test]
    fn idx_round_trip_and_errors() {
        let (img, lab) = synthetic_mnist(2, 5);
        let bytes = idx_image_bytes(&img.pixels, 28, 28);
        let back = parse_idx_images(&bytes, "mem").unwrap();
        assert_eq!(back, img);
        assert_eq!(back.pixels.cols(), 784);
        assert_eq!(parse_idx_labels(&idx_label_bytes(&lab), "mem").unwrap(), lab);
        let err = parse_idx_images(&idx_label_bytes(&lab), "mem").unwrap_err();
        assert!(err.to_string().contains("magic"));
        let err = parse_idx_images(&bytes[..bytes.len() - 1], "mem").unwrap_err();
        assert!(err.to_string().contains("truncated"));
        assert!(parse_idx_labels(&idx_label_bytes(&[3, 12]), "mem").is_err());

        let dir = tempfile::tempdir().unwrap();
        let [(ti, tl), (si, sl)] = mnist_paths(dir.path());
        std::fs::write(&ti, &bytes).unwrap();
        std::fs::write(&tl, idx_label_bytes(&lab)).unwrap();
        std::fs::write(&si, &bytes).unwrap();
        std::fs::write(&sl, idx_label_bytes(&[1])).unwrap();
        assert!(parse_idx(&ti, &tl).is_ok());
        assert!(load_mnist(dir.path()).is_err());
    }

    #[test]
    fn ccmnist_construction() {
        let mnist = (synthetic_mnist(60, 6), synthetic_mnist(40, 7));
        let cc = build_ccmnist(&mnist, [30, 10, 10], 8).unwrap();
        assert_eq!(cc.splits.d(), 2352);
        assert_eq!([cc.splits.train.n(), cc.splits.valid.n(), cc.splits.test.n()], [30, 10, 10]);
        for (s, digits) in Split::ALL.iter().zip(&cc.digits) {
            let x = &cc.splits.get(*s).x;
            for (i, d) in digits.iter().enumerate() {
                assert_eq!(d[0], d[1]);
                assert_ne!(x.row(i)[..784], x.row(i)[784..1568]);
            }
        }
        crate::knowledge::ccmnist_knowledge().validate(cc.splits.d()).unwrap();
        let few = (synthetic_mnist(15, 9), synthetic_mnist(40, 7));
        assert!(matches!(build_ccmnist(&few, [5, 5, 5], 0), Err(Error::Construction(_))));
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let splits = preprocess(toy_splits(2, [20, 10, 10]), 0.01, 3).unwrap();
        save_cached_splits(&splits, dir.path(), "toy").unwrap();
        assert_eq!(load_cached_splits(dir.path(), "toy").unwrap(), splits);
        std::fs::write(dir.path().join("toy_test.bin"), [0u8; 7]).unwrap();
        assert!(load_cache(dir.path(), "toy_test").is_err());
    }
}
