//! Pairwise 3-way comparison datasets.
//!
//! A pair `(a, b)` is labelled [`PairLabel::FirstHigher`] when
//! `y_a - y_b > t`, [`PairLabel::SecondHigher`] when `y_b - y_a > t`, and
//! [`PairLabel::Same`] otherwise. A difference of exactly `t` counts as
//! "same".

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Sample;
use crate::error::{DpcError, Result};
use crate::threshold::Threshold;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
#[repr(u8)]
pub enum PairLabel {
    Same = 0,
    FirstHigher = 1,
    SecondHigher = 2,
}

impl PairLabel {
    pub const ALL: [PairLabel; 3] = [PairLabel::Same, PairLabel::FirstHigher, PairLabel::SecondHigher];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<PairLabel> {
        match i {
            0 => Some(PairLabel::Same),
            1 => Some(PairLabel::FirstHigher),
            2 => Some(PairLabel::SecondHigher),
            _ => None,
        }
    }

    /// The label of the same pair with its members swapped.
    pub fn swapped(self) -> PairLabel {
        match self {
            PairLabel::Same => PairLabel::Same,
            PairLabel::FirstHigher => PairLabel::SecondHigher,
            PairLabel::SecondHigher => PairLabel::FirstHigher,
        }
    }
}

impl From<PairLabel> for u8 {
    fn from(l: PairLabel) -> u8 {
        l as u8
    }
}

impl TryFrom<u8> for PairLabel {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        PairLabel::from_index(v as usize).ok_or_else(|| format!("invalid pair label {v}"))
    }
}

impl fmt::Display for PairLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", *self as u8)
    }
}

pub fn label_pair(y1: f64, y2: f64, t: f64) -> PairLabel {
    if y1 - y2 > t {
        PairLabel::FirstHigher
    } else if y2 - y1 > t {
        PairLabel::SecondHigher
    } else {
        PairLabel::Same
    }
}

/// Indices into [`PairDataset::samples`] plus the label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pair {
    pub first: usize,
    pub second: usize,
    pub label: PairLabel,
}

/// Ordered pairs over a sample list, labelled against a threshold.
///
/// `values[i]` is the property value used to label sample `i`. For measured
/// pair sets it is the sample's own property; reference sets built from a
/// noiseless ground truth store that instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDataset {
    samples: Vec<Sample>,
    values: Vec<f64>,
    pairs: Vec<Pair>,
    property_name: String,
    threshold: Threshold,
}

impl PairDataset {
    /// All ordered pairs `(i1, i2)` over `values`, self-pairs included,
    /// in lexicographic order.
    pub fn exhaustive(
        samples: Vec<Sample>,
        values: Vec<f64>,
        property_name: &str,
        threshold: Threshold,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(DpcError::EmptyDataset);
        }
        if samples.len() != values.len() {
            return Err(DpcError::DimensionMismatch {
                expected: samples.len(),
                actual: values.len(),
            });
        }
        let t = threshold.value();
        let k = samples.len();
        let mut pairs = Vec::with_capacity(k * k);
        for i1 in 0..k {
            for i2 in 0..k {
                pairs.push(Pair {
                    first: i1,
                    second: i2,
                    label: label_pair(values[i1], values[i2], t),
                });
            }
        }
        Ok(PairDataset {
            samples,
            values,
            pairs,
            property_name: property_name.to_string(),
            threshold,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn property_name(&self) -> &str {
        &self.property_name
    }

    pub fn threshold(&self) -> Threshold {
        self.threshold
    }

    pub fn n_features(&self) -> usize {
        self.samples.first().map_or(0, |s| s.features.len())
    }

    pub fn first_features(&self, pair: &Pair) -> &[f64] {
        &self.samples[pair.first].features
    }

    pub fn second_features(&self, pair: &Pair) -> &[f64] {
        &self.samples[pair.second].features
    }

    /// Same samples, a reordered or filtered pair list.
    pub fn with_pairs(&self, pairs: Vec<Pair>) -> PairDataset {
        PairDataset {
            samples: self.samples.clone(),
            values: self.values.clone(),
            pairs,
            property_name: self.property_name.clone(),
            threshold: self.threshold,
        }
    }

    /// Whether every stored label equals `label_pair` recomputed from `values`.
    pub fn labels_consistent(&self) -> bool {
        let t = self.threshold.value();
        self.pairs
            .iter()
            .all(|p| p.label == label_pair(self.values[p.first], self.values[p.second], t))
    }

    /// Debug export: `i1,i2,experiment_id_1,sample_id_1,experiment_id_2,sample_id_2,y1,y2,label`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "i1",
            "i2",
            "experiment_id_1",
            "sample_id_1",
            "experiment_id_2",
            "sample_id_2",
            "y1",
            "y2",
            "label",
        ])?;
        for p in &self.pairs {
            let a = &self.samples[p.first];
            let b = &self.samples[p.second];
            w.write_record([
                p.first.to_string(),
                p.second.to_string(),
                a.experiment_id.clone(),
                a.sample_id.clone(),
                b.experiment_id.clone(),
                b.sample_id.clone(),
                self.values[p.first].to_string(),
                self.values[p.second].to_string(),
                p.label.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// All k² ordered pairs of `samples`, labelled from their measured `property_name`.
pub fn build_pair_dataset(
    samples: &[Sample],
    property_name: &str,
    threshold: Threshold,
) -> Result<PairDataset> {
    let values = samples
        .iter()
        .map(|s| s.property(property_name))
        .collect::<Result<Vec<_>>>()?;
    PairDataset::exhaustive(samples.to_vec(), values, property_name, threshold)
}

/// Uniform sample of `max_pairs` pairs without replacement, kept in their
/// original relative order. Returns the input unchanged when it already fits.
pub fn subsample_pairs(pd: &PairDataset, max_pairs: usize, seed: u64) -> PairDataset {
    let max_pairs = max_pairs.max(1);
    if pd.len() <= max_pairs {
        return pd.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = index::sample(&mut rng, pd.len(), max_pairs).into_vec();
    chosen.sort_unstable();
    pd.with_pairs(chosen.into_iter().map(|i| pd.pairs[i]).collect())
}

/// Count per label; all three labels are always present as keys.
pub fn class_balance(pd: &PairDataset) -> BTreeMap<PairLabel, usize> {
    let mut counts: BTreeMap<PairLabel, usize> = PairLabel::ALL.iter().map(|&l| (l, 0)).collect();
    for p in &pd.pairs {
        *counts.get_mut(&p.label).expect("all labels seeded") += 1;
    }
    counts
}
