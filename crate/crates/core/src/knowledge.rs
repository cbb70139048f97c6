//! Knowledge sets: triples `(J_ref, J_plus, J_minus)` stating that the
//! features in `J_ref` depend more on `J_plus` than on `J_minus`.
//!
//! Indices are 1-based in files and 0-based in memory. The JSON layout is
//!
//! ```json
//! {"d": 3, "triples": [{"ref": [1], "plus": [2], "minus": [3], "label": "x"}]}
//! ```

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KnowledgeTriple {
    reference: Vec<usize>,
    plus: Vec<usize>,
    minus: Vec<usize>,
    pub label: Option<String>,
}

fn normalize(idx: impl IntoIterator<Item = usize>) -> Vec<usize> {
    idx.into_iter().collect::<BTreeSet<_>>().into_iter().collect()
}

impl KnowledgeTriple {
    /// From 0-based index sets. Duplicates are dropped and order normalized.
    pub fn new(
        reference: impl IntoIterator<Item = usize>,
        plus: impl IntoIterator<Item = usize>,
        minus: impl IntoIterator<Item = usize>,
    ) -> Self {
        Self {
            reference: normalize(reference),
            plus: normalize(plus),
            minus: normalize(minus),
            label: None,
        }
    }

    /// From 1-based index sets, as written in files and tables.
    pub fn one_based(reference: &[usize], plus: &[usize], minus: &[usize]) -> Result<Self> {
        let conv = |v: &[usize]| -> Result<Vec<usize>> {
            v.iter()
                .map(|&i| {
                    i.checked_sub(1).ok_or_else(|| Error::Validation {
                        triple: None,
                        message: "feature index 0 in a 1-based index set".into(),
                    })
                })
                .collect()
        };
        Ok(Self::new(conv(reference)?, conv(plus)?, conv(minus)?))
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn reference(&self) -> &[usize] {
        &self.reference
    }

    pub fn plus(&self) -> &[usize] {
        &self.plus
    }

    pub fn minus(&self) -> &[usize] {
        &self.minus
    }

    /// `J_ref ∪ J_plus ∪ J_minus`.
    pub fn support(&self) -> Vec<usize> {
        normalize(
            self.reference
                .iter()
                .chain(&self.plus)
                .chain(&self.minus)
                .copied(),
        )
    }

    pub fn is_singleton(&self) -> bool {
        self.reference.len() == 1 && self.plus.len() == 1 && self.minus.len() == 1
    }

    fn check(&self, pos: usize, d: usize) -> Result<()> {
        let fail = |message: String| Error::Validation {
            triple: Some(pos),
            message,
        };
        for (name, set) in [("ref", &self.reference), ("plus", &self.plus), ("minus", &self.minus)] {
            if set.is_empty() {
                return Err(fail(format!("{name} set is empty")));
            }
            if let Some(&i) = set.iter().find(|&&i| i >= d) {
                return Err(fail(format!(
                    "{name} index {} out of range 1..={d}",
                    i + 1
                )));
            }
        }
        let overlap = |a: &[usize], b: &[usize]| a.iter().find(|i| b.contains(i)).copied();
        if let Some(i) = overlap(&self.reference, &self.plus) {
            return Err(fail(format!("ref and plus overlap at feature {}", i + 1)));
        }
        if let Some(i) = overlap(&self.reference, &self.minus) {
            return Err(fail(format!("ref and minus overlap at feature {}", i + 1)));
        }
        if let Some(i) = overlap(&self.plus, &self.minus) {
            return Err(fail(format!("plus and minus overlap at feature {}", i + 1)));
        }
        Ok(())
    }
}

/// An ordered list of knowledge triples over `d` features.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KnowledgeSet {
    pub d: usize,
    pub triples: Vec<KnowledgeTriple>,
}

impl KnowledgeSet {
    pub fn new(d: usize, triples: Vec<KnowledgeTriple>) -> Self {
        Self { d, triples }
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// The first `n` triples; prefixes of one set are nested.
    pub fn prefix(&self, n: usize) -> Self {
        Self {
            d: self.d,
            triples: self.triples.iter().take(n).cloned().collect(),
        }
    }

    /// Checks every triple against `d` and requires at least one triple.
    pub fn validate(&self, d: usize) -> Result<()> {
        if self.d != d {
            return Err(Error::Validation {
                triple: None,
                message: format!("knowledge declared for d={} but data has d={d}", self.d),
            });
        }
        if self.triples.is_empty() {
            return Err(Error::Validation {
                triple: None,
                message: "knowledge set has no triples".into(),
            });
        }
        self.triples
            .iter()
            .enumerate()
            .try_for_each(|(pos, t)| t.check(pos, d))
    }

    pub fn to_json(&self) -> String {
        let file = KnowledgeFile {
            d: self.d,
            triples: self
                .triples
                .iter()
                .map(|t| TripleFile {
                    reference: t.reference.iter().map(|i| i + 1).collect(),
                    plus: t.plus.iter().map(|i| i + 1).collect(),
                    minus: t.minus.iter().map(|i| i + 1).collect(),
                    label: t.label.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("knowledge serializes")
    }

    /// Parses and validates a knowledge document.
    pub fn from_json(text: &str, context: &str) -> Result<Self> {
        let file: KnowledgeFile = serde_json::from_str(text).map_err(|e| {
            Error::parse(
                context,
                format!("line {} column {}: {e}", e.line(), e.column()),
            )
        })?;
        let triples = file
            .triples
            .iter()
            .enumerate()
            .map(|(pos, t)| {
                let mut triple = KnowledgeTriple::one_based(&t.reference, &t.plus, &t.minus)
                    .map_err(|e| match e {
                        Error::Validation { message, .. } => Error::Validation {
                            triple: Some(pos),
                            message,
                        },
                        other => other,
                    })?;
                triple.label = t.label.clone();
                Ok(triple)
            })
            .collect::<Result<Vec<_>>>()?;
        let ks = Self::new(file.d, triples);
        ks.validate(file.d)?;
        Ok(ks)
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KnowledgeFile {
    d: usize,
    triples: Vec<TripleFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TripleFile {
    #[serde(rename = "ref")]
    reference: Vec<usize>,
    plus: Vec<usize>,
    minus: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

/// One triple per site whose nearest neighbour lies within `near_km` while
/// the second-nearest lies beyond `far_km`: `({i}, {nearest}, {second})`.
///
/// Equal distances are broken toward the lower site index.
pub fn build_from_distances(coords: &Tensor<f64>, near_km: f64, far_km: f64) -> Result<KnowledgeSet> {
    let n = coords.rows();
    if n < 3 {
        return Err(Error::Contract(format!("need at least 3 sites, got {n}")));
    }
    if coords.cols() != 2 {
        return Err(Error::Dimension(format!(
            "site coordinates must be n×2, got n×{}",
            coords.cols()
        )));
    }
    if !(near_km < far_km) {
        return Err(Error::Contract(format!(
            "near threshold {near_km} must be below far threshold {far_km}"
        )));
    }
    let mut triples = Vec::new();
    for i in 0..n {
        let mut neighbours: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let dx = coords.get(i, 0) - coords.get(j, 0);
                let dy = coords.get(i, 1) - coords.get(j, 1);
                ((dx * dx + dy * dy).sqrt(), j)
            })
            .collect();
        neighbours.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let (d1, j) = neighbours[0];
        let (d2, k) = neighbours[1];
        if neighbours.len() > 2 && neighbours[2].0 == d2 || d1 == d2 {
            log::warn!("site {}: tied neighbour distances, lower index wins", i + 1);
        }
        if d1 <= near_km && d2 > far_km {
            triples.push(
                KnowledgeTriple::new([i], [j], [k])
                    .with_label(format!("site {} ({d1:.1} km / {d2:.1} km)", i + 1)),
            );
        }
    }
    Ok(KnowledgeSet::new(n, triples))
}

/// Materializes named relations over named feature groups (1-based).
pub fn build_from_groups(
    d: usize,
    groups: &[(&str, Vec<usize>)],
    relations: &[(&str, &str, &str)],
) -> Result<KnowledgeSet> {
    if relations.is_empty() {
        return Err(Error::Validation {
            triple: None,
            message: "no relations given".into(),
        });
    }
    let lookup = |pos: usize, name: &str| -> Result<&Vec<usize>> {
        groups
            .iter()
            .find(|(g, _)| *g == name)
            .map(|(_, idx)| idx)
            .ok_or_else(|| Error::Validation {
                triple: Some(pos),
                message: format!("unknown group {name:?}"),
            })
    };
    let triples = relations
        .iter()
        .enumerate()
        .map(|(pos, &(r, p, m))| {
            let t = KnowledgeTriple::one_based(lookup(pos, r)?, lookup(pos, p)?, lookup(pos, m)?)?;
            Ok(t.with_label(format!("({r}, {p}, {m})")))
        })
        .collect::<Result<Vec<_>>>()?;
    let ks = KnowledgeSet::new(d, triples);
    ks.validate(d)?;
    Ok(ks)
}

/// `{({1}, {2}, {3})}` for the three-feature cylinder data.
pub fn toy_knowledge() -> KnowledgeSet {
    KnowledgeSet::new(3, vec![KnowledgeTriple::new([0], [1], [2]).with_label("x1~x2 > x1~x3")])
}

/// Top third of a stacked image depends more on the middle third than on
/// the bottom third.
pub fn ccmnist_knowledge() -> KnowledgeSet {
    KnowledgeSet::new(
        2352,
        vec![KnowledgeTriple::new(0..784, 784..1568, 1568..2352).with_label("top~middle > top~bottom")],
    )
}

/// Sensor groups of the 22-sensor chemical plant layout.
pub fn plant_groups() -> Vec<(&'static str, Vec<usize>)> {
    vec![
        ("Feed1", vec![1, 2, 3]),
        ("Feed2", vec![4]),
        ("Reactor", vec![5, 6, 7, 8, 9, 21]),
        ("Separator", vec![11, 12, 13, 14, 22]),
        ("Stripper", vec![15, 16, 17, 18, 19]),
        ("Compressor", vec![20]),
        ("Purge", vec![10]),
    ]
}

/// The twelve unit-connectivity relations of the plant layout.
pub const PLANT_RELATIONS: [(&str, &str, &str); 12] = [
    ("Reactor", "Separator", "Feed2"),
    ("Reactor", "Separator", "Purge"),
    ("Separator", "Stripper", "Feed1"),
    ("Separator", "Stripper", "Feed2"),
    ("Separator", "Compressor", "Feed1"),
    ("Separator", "Compressor", "Feed2"),
    ("Compressor", "Reactor", "Feed1"),
    ("Compressor", "Reactor", "Feed2"),
    ("Compressor", "Reactor", "Stripper"),
    ("Stripper", "Reactor", "Feed1"),
    ("Stripper", "Reactor", "Purge"),
    ("Stripper", "Reactor", "Compressor"),
];

pub fn plant_knowledge() -> KnowledgeSet {
    build_from_groups(22, &plant_groups(), &PLANT_RELATIONS).expect("plant relations are valid")
}
