//! Samples, experiments, CSV ingestion and experiment-level splitting.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DpcError, Result};
use crate::seed::fingerprint;

pub const EXPERIMENT_ID_COLUMN: &str = "experiment_id";
pub const SAMPLE_ID_COLUMN: &str = "sample_id";

/// One measured specimen: process parameters plus measured properties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub experiment_id: String,
    pub sample_id: String,
    pub features: Vec<f64>,
    pub properties: BTreeMap<String, f64>,
}

impl Sample {
    pub fn property(&self, name: &str) -> Result<f64> {
        self.properties
            .get(name)
            .copied()
            .ok_or_else(|| DpcError::UnknownProperty(name.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub id: String,
    pub samples: Vec<Sample>,
}

/// Samples grouped by the experiment (manufacturing run) that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    experiments: Vec<Experiment>,
    feature_names: Vec<String>,
    property_names: Vec<String>,
}

impl Dataset {
    /// Validating constructor.
    pub fn new(
        experiments: Vec<Experiment>,
        feature_names: Vec<String>,
        property_names: Vec<String>,
    ) -> Result<Self> {
        if feature_names.is_empty() {
            return Err(DpcError::InvalidConfig(
                "dataset needs at least one feature column".into(),
            ));
        }
        let mut seen_experiments = HashSet::new();
        for exp in &experiments {
            if exp.id.is_empty() {
                return Err(DpcError::InvalidConfig("empty experiment id".into()));
            }
            if !seen_experiments.insert(exp.id.as_str()) {
                return Err(DpcError::InvalidConfig(format!(
                    "experiment id `{}` appears twice",
                    exp.id
                )));
            }
            if exp.samples.is_empty() {
                return Err(DpcError::InvalidConfig(format!(
                    "experiment `{}` has no samples",
                    exp.id
                )));
            }
            let mut seen_samples = HashSet::new();
            for s in &exp.samples {
                if s.experiment_id != exp.id {
                    return Err(DpcError::InvalidConfig(format!(
                        "sample `{}` filed under experiment `{}` but tagged `{}`",
                        s.sample_id, exp.id, s.experiment_id
                    )));
                }
                if !seen_samples.insert(s.sample_id.as_str()) {
                    return Err(DpcError::DuplicateSampleId {
                        experiment_id: exp.id.clone(),
                        sample_id: s.sample_id.clone(),
                    });
                }
                if s.features.len() != feature_names.len() {
                    return Err(DpcError::DimensionMismatch {
                        expected: feature_names.len(),
                        actual: s.features.len(),
                    });
                }
                if s.properties.len() != property_names.len()
                    || property_names.iter().any(|p| !s.properties.contains_key(p))
                {
                    return Err(DpcError::InvalidConfig(format!(
                        "sample `{}` does not carry exactly the properties {:?}",
                        s.sample_id, property_names
                    )));
                }
                let all_finite = s.features.iter().all(|v| v.is_finite())
                    && s.properties.values().all(|v| v.is_finite());
                if !all_finite {
                    return Err(DpcError::InvalidConfig(format!(
                        "sample `{}` has a non-finite value",
                        s.sample_id
                    )));
                }
            }
        }
        Ok(Dataset {
            experiments,
            feature_names,
            property_names,
        })
    }

    pub fn experiments(&self) -> &[Experiment] {
        &self.experiments
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn property_names(&self) -> &[String] {
        &self.property_names
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_experiments(&self) -> usize {
        self.experiments.len()
    }

    pub fn n_samples(&self) -> usize {
        self.experiments.iter().map(|e| e.samples.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.n_samples() == 0
    }

    /// All samples in experiment order, file order within each experiment.
    pub fn samples(&self) -> impl Iterator<Item = &Sample> {
        self.experiments.iter().flat_map(|e| e.samples.iter())
    }

    pub fn samples_vec(&self) -> Vec<Sample> {
        self.samples().cloned().collect()
    }

    pub fn experiment_ids(&self) -> Vec<&str> {
        self.experiments.iter().map(|e| e.id.as_str()).collect()
    }

    pub fn property_values(&self, name: &str) -> Result<Vec<f64>> {
        if !self.property_names.iter().any(|p| p == name) {
            return Err(DpcError::UnknownProperty(name.to_string()));
        }
        self.samples().map(|s| s.property(name)).collect()
    }

    /// A dataset holding the listed experiments (by position), in the given order.
    pub fn select_experiments(&self, indices: &[usize]) -> Dataset {
        Dataset {
            experiments: indices.iter().map(|&i| self.experiments[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            property_names: self.property_names.clone(),
        }
    }

    /// A dataset holding the experiments whose ids are listed, in file order.
    pub fn select_experiment_ids(&self, ids: &[String]) -> Result<Dataset> {
        let wanted: HashSet<&str> = ids.iter().map(String::as_str).collect();
        for id in &wanted {
            if !self.experiments.iter().any(|e| e.id == *id) {
                return Err(DpcError::InvalidConfig(format!("unknown experiment id `{id}`")));
            }
        }
        let idx: Vec<usize> = (0..self.experiments.len())
            .filter(|&i| wanted.contains(self.experiments[i].id.as_str()))
            .collect();
        Ok(self.select_experiments(&idx))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![EXPERIMENT_ID_COLUMN.to_string(), SAMPLE_ID_COLUMN.to_string()];
        header.extend(self.feature_names.iter().cloned());
        header.extend(self.property_names.iter().cloned());
        w.write_record(&header)?;
        for s in self.samples() {
            let mut row = vec![s.experiment_id.clone(), s.sample_id.clone()];
            row.extend(s.features.iter().map(|v| v.to_string()));
            row.extend(self.property_names.iter().map(|p| s.properties[p].to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    /// SHA-256 of the canonical CSV serialization.
    pub fn fingerprint(&self) -> String {
        fingerprint(self.to_csv_string().as_bytes())
    }
}

/// Loads a dataset CSV. Every column other than the two id columns and the
/// requested `property_names` is a feature. Row numbers in errors count data
/// rows from 1 (the header is not counted).
pub fn load_dataset(path: impl AsRef<Path>, property_names: &[String]) -> Result<Dataset> {
    let path = path.as_ref();
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    parse_dataset(&text, property_names).map_err(|e| match e {
        DpcError::EmptyFile { .. } => DpcError::EmptyFile {
            path: path.to_path_buf(),
        },
        other => other,
    })
}

pub fn parse_dataset(text: &str, property_names: &[String]) -> Result<Dataset> {
    let empty = || DpcError::EmptyFile {
        path: "<input>".into(),
    };
    if text.trim().is_empty() {
        return Err(empty());
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();

    let find = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DpcError::MissingColumn {
                column: name.to_string(),
            })
    };
    let exp_col = find(EXPERIMENT_ID_COLUMN)?;
    let sample_col = find(SAMPLE_ID_COLUMN)?;
    let prop_cols: Vec<usize> = property_names
        .iter()
        .map(|p| find(p))
        .collect::<Result<_>>()?;
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|i| *i != exp_col && *i != sample_col && !prop_cols.contains(i))
        .collect();
    if feature_cols.is_empty() {
        return Err(DpcError::InvalidConfig("no feature columns".into()));
    }

    let mut experiments: Vec<Experiment> = Vec::new();
    let mut n_rows = 0usize;
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = idx + 1;
        n_rows += 1;
        let cell = |col: usize| -> Result<f64> {
            let raw = record.get(col).unwrap_or("").trim();
            let value: f64 = raw.parse().map_err(|_| DpcError::NonNumericCell {
                row,
                column: header[col].clone(),
                value: raw.to_string(),
            })?;
            if !value.is_finite() {
                return Err(DpcError::NonFiniteValue {
                    row,
                    column: header[col].clone(),
                    value,
                });
            }
            Ok(value)
        };
        let experiment_id = record.get(exp_col).unwrap_or("").trim().to_string();
        if experiment_id.is_empty() {
            return Err(DpcError::EmptyExperimentId { row });
        }
        let sample_id = record.get(sample_col).unwrap_or("").trim().to_string();
        let features = feature_cols.iter().map(|&c| cell(c)).collect::<Result<Vec<_>>>()?;
        let mut properties = BTreeMap::new();
        for (name, &c) in property_names.iter().zip(&prop_cols) {
            properties.insert(name.clone(), cell(c)?);
        }
        let sample = Sample {
            experiment_id: experiment_id.clone(),
            sample_id,
            features,
            properties,
        };
        match experiments.iter_mut().find(|e| e.id == experiment_id) {
            Some(exp) => {
                if exp.samples.iter().any(|s| s.sample_id == sample.sample_id) {
                    return Err(DpcError::DuplicateSampleId {
                        experiment_id,
                        sample_id: sample.sample_id,
                    });
                }
                exp.samples.push(sample);
            }
            None => experiments.push(Experiment {
                id: experiment_id,
                samples: vec![sample],
            }),
        }
    }
    if n_rows == 0 {
        return Err(empty());
    }
    Dataset::new(
        experiments,
        feature_cols.iter().map(|&c| header[c].clone()).collect(),
        property_names.to_vec(),
    )
}

/// Number of experiments assigned to training: `train_fraction * n` rounded
/// half-up, kept within `[1, n - 1]` so both sides are non-empty.
pub fn train_experiment_count(n_experiments: usize, train_fraction: f64) -> usize {
    let raw = (train_fraction * n_experiments as f64 + 0.5).floor() as usize;
    raw.clamp(1, n_experiments.saturating_sub(1).max(1))
}

/// Partitions whole experiments into (train, test). Experiments are shuffled
/// with a ChaCha8 generator seeded from `seed`; each side keeps file order.
pub fn split_by_experiment(
    ds: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let n = ds.n_experiments();
    if n < 2 {
        return Err(DpcError::TooFewExperiments { found: n });
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DpcError::InvalidConfig(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_train = train_experiment_count(n, train_fraction);
    let mut train_idx = order[..n_train].to_vec();
    let mut test_idx = order[n_train..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((ds.select_experiments(&train_idx), ds.select_experiments(&test_idx)))
}
