//! The three backbone model types and pairwise prediction.
//!
//! | backbone               | learner signature        | trained on                         |
//! |------------------------|--------------------------|------------------------------------|
//! | direct regression      | `x -> y`                 | `(x_i, y_i)`, MSE                  |
//! | difference regression  | `[x1 ‖ x2] -> y1 - y2`   | all ordered training pairs, MSE    |
//! | direct classification  | `[x1 ‖ x2] -> {0,1,2}`   | labelled training pairs, cross-entropy |

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{DpcError, Result};
use crate::learners::{
    argmax, fit_boosted_classifier_weighted, fit_boosted_regressor, mlp_train, mlp_train_weighted, BoostParams,
    BoostedClassifier, BoostedRegressor, Matrix, MlpNetwork, MlpParams, Objective, Targets, N_CLASSES,
};
use crate::pairing::{build_pair_dataset, label_pair, subsample_pairs, PairDataset, PairLabel};
use crate::seed::fingerprint;
use crate::synthgen::PropertyTruth;
use crate::threshold::Threshold;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackboneKind {
    DirectRegression,
    DifferenceRegression,
    DirectClassification,
}

impl BackboneKind {
    pub const ALL: [BackboneKind; 3] = [
        BackboneKind::DirectRegression,
        BackboneKind::DifferenceRegression,
        BackboneKind::DirectClassification,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BackboneKind::DirectRegression => "direct-regression",
            BackboneKind::DifferenceRegression => "difference-regression",
            BackboneKind::DirectClassification => "direct-classification",
        }
    }

    pub fn uses_pairs(self) -> bool {
        !matches!(self, BackboneKind::DirectRegression)
    }
}

impl fmt::Display for BackboneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BackboneKind {
    type Err = DpcError;
    fn from_str(s: &str) -> Result<Self> {
        BackboneKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| DpcError::InvalidConfig(format!("unknown backbone `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    /// Gradient-boosted regression trees.
    Gbt,
    Mlp,
}

impl Architecture {
    pub const ALL: [Architecture; 2] = [Architecture::Gbt, Architecture::Mlp];

    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Gbt => "gbt",
            Architecture::Mlp => "mlp",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Architecture {
    type Err = DpcError;
    fn from_str(s: &str) -> Result<Self> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| DpcError::InvalidConfig(format!("unknown architecture `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassWeighting {
    #[default]
    None,
    /// Weight each training pair by `n / (3 * count(label))`.
    InverseFrequency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub gbt: BoostParams,
    pub mlp: MlpParams,
    /// Cap on training pairs for pair-input backbones; `None` uses all k².
    pub max_pairs: Option<usize>,
    /// Seed of the pair subsample. Kept apart from the model seed so tree
    /// models stay identical across repeat seeds.
    pub pair_subsample_seed: u64,
    pub class_weighting: ClassWeighting,
    /// Predict on both orderings of a pair and combine (pair-input backbones).
    pub symmetrize: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            gbt: BoostParams::default(),
            mlp: MlpParams::default(),
            max_pairs: None,
            pair_subsample_seed: 0,
            class_weighting: ClassWeighting::None,
            symmetrize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Learner {
    BoostedRegressor(BoostedRegressor),
    BoostedClassifier(BoostedClassifier),
    Mlp(MlpNetwork),
    /// A known noiseless property function, used as a reference model.
    GroundTruth(PropertyTruth),
}

impl Learner {
    fn value(&self, x: &[f64]) -> Result<f64> {
        match self {
            Learner::BoostedRegressor(m) => m.predict(x),
            Learner::Mlp(net) if net.objective == Objective::Mse => net.predict_value(x),
            Learner::GroundTruth(g) => Ok(g.value(x)),
            _ => Err(DpcError::InvalidConfig("learner does not produce a scalar output".into())),
        }
    }

    fn class_scores(&self, x: &[f64]) -> Result<[f64; N_CLASSES]> {
        match self {
            Learner::BoostedClassifier(m) => m.predict_proba(x),
            Learner::Mlp(net) if net.objective == Objective::CrossEntropy => net.predict_proba(x),
            _ => Err(DpcError::InvalidConfig("learner does not produce class scores".into())),
        }
    }

    fn architecture(&self) -> Option<Architecture> {
        match self {
            Learner::BoostedRegressor(_) | Learner::BoostedClassifier(_) => Some(Architecture::Gbt),
            Learner::Mlp(_) => Some(Architecture::Mlp),
            Learner::GroundTruth(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingManifest {
    pub architecture: Option<Architecture>,
    pub seed: u64,
    pub hyperparams: Hyperparams,
    pub dataset_fingerprint: String,
    pub train_experiment_ids: Vec<String>,
    pub n_train_samples: usize,
    /// Rows the learner saw: samples for direct regression, pairs otherwise.
    pub n_train_rows: usize,
    /// Ordered pairs before any subsampling (pair-input backbones only).
    pub n_train_pairs: Option<usize>,
}

/// A trained pairwise comparison model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpcModel {
    pub format_version: u32,
    pub kind: BackboneKind,
    pub property_name: String,
    pub threshold: Threshold,
    pub feature_names: Vec<String>,
    pub symmetrize: bool,
    pub learner: Learner,
    pub manifest: TrainingManifest,
}

/// Anything that can label a pair of feature vectors.
pub trait PairPredictor {
    fn n_features(&self) -> usize;
    fn predict_pair(&self, x1: &[f64], x2: &[f64]) -> Result<PairLabel>;
    /// Identifier recorded in evaluation reports.
    fn fingerprint(&self) -> String {
        String::new()
    }
}

fn concat(x1: &[f64], x2: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(x1.len() + x2.len());
    v.extend_from_slice(x1);
    v.extend_from_slice(x2);
    v
}

impl DpcModel {
    /// A direct-regression model whose learner is the given truth function.
    pub fn oracle(truth: PropertyTruth, threshold: Threshold, feature_names: Vec<String>) -> Self {
        DpcModel {
            format_version: MODEL_FORMAT_VERSION,
            kind: BackboneKind::DirectRegression,
            property_name: truth.name.clone(),
            threshold,
            feature_names,
            symmetrize: false,
            learner: Learner::GroundTruth(truth),
            manifest: TrainingManifest {
                architecture: None,
                seed: 0,
                hyperparams: Hyperparams::default(),
                dataset_fingerprint: String::new(),
                train_experiment_ids: Vec::new(),
                n_train_samples: 0,
                n_train_rows: 0,
                n_train_pairs: None,
            },
        }
    }

    pub fn architecture(&self) -> Option<Architecture> {
        self.learner.architecture()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: DpcModel = serde_json::from_str(text)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(DpcError::UnsupportedVersion {
                found: model.format_version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        DpcModel::from_json(&std::fs::read_to_string(path)?)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.feature_names.len() {
            return Err(DpcError::DimensionMismatch {
                expected: self.feature_names.len(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Predicted `y1 - y2` of a difference-regression model.
    pub fn predicted_difference(&self, x1: &[f64], x2: &[f64]) -> Result<f64> {
        let forward = self.learner.value(&concat(x1, x2))?;
        if !self.symmetrize {
            return Ok(forward);
        }
        let backward = self.learner.value(&concat(x2, x1))?;
        Ok((forward - backward) / 2.0)
    }

    /// Class scores of a direct-classification model, index = label.
    pub fn class_scores(&self, x1: &[f64], x2: &[f64]) -> Result<[f64; N_CLASSES]> {
        let forward = self.learner.class_scores(&concat(x1, x2))?;
        if !self.symmetrize {
            return Ok(forward);
        }
        let backward = self.learner.class_scores(&concat(x2, x1))?;
        Ok([
            (forward[0] + backward[0]) / 2.0,
            (forward[1] + backward[2]) / 2.0,
            (forward[2] + backward[1]) / 2.0,
        ])
    }
}

impl PairPredictor for DpcModel {
    fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn predict_pair(&self, x1: &[f64], x2: &[f64]) -> Result<PairLabel> {
        predict_pair(self, x1, x2)
    }

    fn fingerprint(&self) -> String {
        fingerprint(self.to_json().unwrap_or_default().as_bytes())
    }
}

pub fn predict_pair(model: &DpcModel, x1: &[f64], x2: &[f64]) -> Result<PairLabel> {
    model.check_dim(x1)?;
    model.check_dim(x2)?;
    let t = model.threshold.value();
    match model.kind {
        BackboneKind::DirectRegression => {
            Ok(label_pair(model.learner.value(x1)?, model.learner.value(x2)?, t))
        }
        BackboneKind::DifferenceRegression => Ok(label_pair(model.predicted_difference(x1, x2)?, 0.0, t)),
        BackboneKind::DirectClassification => {
            let scores = model.class_scores(x1, x2)?;
            // A symmetrized 1-vs-2 tie must map to "same" to stay antisymmetric.
            if model.symmetrize && scores[1] == scores[2] && scores[1] >= scores[0] {
                return Ok(PairLabel::Same);
            }
            Ok(PairLabel::from_index(argmax(&scores)).expect("three classes"))
        }
    }
}

/// Absolute property prediction; only direct-regression models have one.
pub fn predict_value(model: &DpcModel, x: &[f64]) -> Result<f64> {
    if model.kind != BackboneKind::DirectRegression {
        return Err(DpcError::WrongBackboneKind(model.kind.to_string()));
    }
    model.check_dim(x)?;
    model.learner.value(x)
}

fn pair_design(pd: &PairDataset) -> Result<Matrix> {
    let rows: Vec<Vec<f64>> = pd
        .pairs()
        .iter()
        .map(|p| concat(pd.first_features(p), pd.second_features(p)))
        .collect();
    Matrix::from_rows(&rows)
}

fn inverse_frequency_weights(labels: &[usize]) -> Vec<f64> {
    let mut counts = [0usize; N_CLASSES];
    for &l in labels {
        counts[l] += 1;
    }
    let n = labels.len() as f64;
    labels
        .iter()
        .map(|&l| n / (N_CLASSES as f64 * counts[l] as f64))
        .collect()
}

/// Fits one backbone on a training dataset. Pair labels for direct
/// classification use the same `threshold` the model predicts with.
pub fn train_backbone(
    kind: BackboneKind,
    architecture: Architecture,
    train: &Dataset,
    property_name: &str,
    threshold: Threshold,
    hyper: &Hyperparams,
    seed: u64,
) -> Result<DpcModel> {
    if train.is_empty() {
        return Err(DpcError::EmptyDataset);
    }
    let values = train.property_values(property_name)?;
    let samples = train.samples_vec();

    let (learner, n_rows, n_pairs) = match kind {
        BackboneKind::DirectRegression => {
            let x = Matrix::from_rows(&samples.iter().map(|s| s.features.as_slice()).collect::<Vec<_>>())?;
            let learner = match architecture {
                Architecture::Gbt => Learner::BoostedRegressor(fit_boosted_regressor(&x, &values, &hyper.gbt)?),
                Architecture::Mlp => Learner::Mlp(mlp_train(&x, Targets::Values(&values), &hyper.mlp, seed)?),
            };
            (learner, samples.len(), None)
        }
        BackboneKind::DifferenceRegression | BackboneKind::DirectClassification => {
            let all = build_pair_dataset(&samples, property_name, threshold)?;
            let n_all = all.len();
            let pd = match hyper.max_pairs {
                Some(m) => subsample_pairs(&all, m, hyper.pair_subsample_seed),
                None => all,
            };
            let x = pair_design(&pd)?;
            let learner = if kind == BackboneKind::DifferenceRegression {
                let diffs: Vec<f64> = pd
                    .pairs()
                    .iter()
                    .map(|p| pd.values()[p.first] - pd.values()[p.second])
                    .collect();
                match architecture {
                    Architecture::Gbt => Learner::BoostedRegressor(fit_boosted_regressor(&x, &diffs, &hyper.gbt)?),
                    Architecture::Mlp => Learner::Mlp(mlp_train(&x, Targets::Values(&diffs), &hyper.mlp, seed)?),
                }
            } else {
                let labels: Vec<usize> = pd.pairs().iter().map(|p| p.label.index()).collect();
                let weights = match hyper.class_weighting {
                    ClassWeighting::None => None,
                    ClassWeighting::InverseFrequency => Some(inverse_frequency_weights(&labels)),
                };
                match architecture {
                    Architecture::Gbt => Learner::BoostedClassifier(fit_boosted_classifier_weighted(
                        &x,
                        &labels,
                        weights.as_deref(),
                        &hyper.gbt,
                    )?),
                    Architecture::Mlp => Learner::Mlp(mlp_train_weighted(
                        &x,
                        Targets::Classes(&labels),
                        weights.as_deref(),
                        &hyper.mlp,
                        seed,
                    )?),
                }
            };
            (learner, pd.len(), Some(n_all))
        }
    };

    Ok(DpcModel {
        format_version: MODEL_FORMAT_VERSION,
        kind,
        property_name: property_name.to_string(),
        threshold,
        feature_names: train.feature_names().to_vec(),
        symmetrize: hyper.symmetrize && kind.uses_pairs(),
        learner,
        manifest: TrainingManifest {
            architecture: Some(architecture),
            seed,
            hyperparams: hyper.clone(),
            dataset_fingerprint: train.fingerprint(),
            train_experiment_ids: train.experiment_ids().into_iter().map(String::from).collect(),
            n_train_samples: samples.len(),
            n_train_rows: n_rows,
            n_train_pairs: n_pairs,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedCandidate {
    /// Position in the input list.
    pub index: usize,
    pub wins: usize,
    pub same: usize,
    pub losses: usize,
}

/// Scores each candidate by how often it is predicted higher when placed
/// first against every other candidate. Sorted by wins, descending; ties
/// keep input order.
pub fn rank_candidates<P: PairPredictor>(model: &P, candidates: &[Vec<f64>]) -> Result<Vec<RankedCandidate>> {
    if candidates.is_empty() {
        return Err(DpcError::InvalidConfig("need at least one candidate".into()));
    }
    for c in candidates {
        if c.len() != model.n_features() {
            return Err(DpcError::DimensionMismatch {
                expected: model.n_features(),
                actual: c.len(),
            });
        }
    }
    let mut ranked = Vec::with_capacity(candidates.len());
    for (i, a) in candidates.iter().enumerate() {
        let mut entry = RankedCandidate {
            index: i,
            wins: 0,
            same: 0,
            losses: 0,
        };
        for (j, b) in candidates.iter().enumerate() {
            if i == j {
                continue;
            }
            match model.predict_pair(a, b)? {
                PairLabel::FirstHigher => entry.wins += 1,
                PairLabel::SecondHigher => entry.losses += 1,
                PairLabel::Same => entry.same += 1,
            }
        }
        ranked.push(entry);
    }
    ranked.sort_by(|a, b| b.wins.cmp(&a.wins).then(a.index.cmp(&b.index)));
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Experiment, Sample};
    use crate::synthgen::{generate, oracle_labels, SynthConfig};
    use proptest::prelude::*;

    fn tiny_dataset(ys: &[f64]) -> Dataset {
        let samples = ys
            .iter()
            .enumerate()
            .map(|(i, &y)| Sample {
                experiment_id: "e1".into(),
                sample_id: format!("s{i}"),
                features: vec![i as f64, (i * i) as f64],
                properties: [("y".to_string(), y)].into_iter().collect(),
            })
            .collect();
        Dataset::new(
            vec![Experiment { id: "e1".into(), samples }],
            vec!["a".into(), "b".into()],
            vec!["y".into()],
        )
        .unwrap()
    }

    fn fast() -> Hyperparams {
        Hyperparams {
            gbt: BoostParams {
                n_estimators: 30,
                ..Default::default()
            },
            mlp: MlpParams {
                epochs: 50,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    fn t(v: f64) -> Threshold {
        Threshold::absolute(v).unwrap()
    }

    #[test]
    fn manifest_records_default_hyperparams() {
        let ds = tiny_dataset(&[1.0, 5.0, 2.0, 8.0]);
        let m = train_backbone(
            BackboneKind::DirectRegression,
            Architecture::Gbt,
            &ds,
            "y",
            t(0.5),
            &Hyperparams::default(),
            0,
        )
        .unwrap();
        let g = m.manifest.hyperparams.gbt;
        assert_eq!((g.max_depth, g.n_estimators, g.learning_rate), (6, 1000, 0.1));
        assert_eq!(m.manifest.hyperparams.mlp.learning_rate, 0.009);
        assert_eq!(m.manifest.hyperparams.mlp.hidden, vec![35, 35]);
        assert_eq!(m.kind, BackboneKind::DirectRegression);
    }

    #[test]
    fn difference_regression_on_one_sample() {
        let ds = tiny_dataset(&[3.0]);
        let m = train_backbone(BackboneKind::DifferenceRegression, Architecture::Gbt, &ds, "y", t(0.1), &fast(), 0)
            .unwrap();
        assert_eq!(m.manifest.n_train_rows, 1);
        match &m.learner {
            Learner::BoostedRegressor(r) => assert_eq!(r.base_score, 0.0),
            other => panic!("unexpected learner {other:?}"),
        }
        assert_eq!(predict_pair(&m, &[0.0, 0.0], &[5.0, 1.0]).unwrap(), PairLabel::Same);
    }

    #[test]
    fn direct_classification_uses_pairing_labels() {
        let ds = tiny_dataset(&[0.0, 10.0, 20.0]);
        let m = train_backbone(
            BackboneKind::DirectClassification,
            Architecture::Gbt,
            &ds,
            "y",
            t(1.0),
            &Hyperparams {
                gbt: BoostParams {
                    n_estimators: 200,
                    min_child_weight: 0.0,
                    ..Default::default()
                },
                ..Default::default()
            },
            0,
        )
        .unwrap();
        assert_eq!(m.manifest.n_train_pairs, Some(9));
        let xs: Vec<Vec<f64>> = ds.samples().map(|s| s.features.clone()).collect();
        let expected = [[0, 2, 2], [1, 0, 2], [1, 1, 0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(predict_pair(&m, &xs[i], &xs[j]).unwrap() as u8, expected[i][j]);
            }
        }
    }

    #[test]
    fn empty_and_unknown_property() {
        let ds = tiny_dataset(&[1.0, 2.0]);
        assert!(matches!(
            train_backbone(BackboneKind::DirectRegression, Architecture::Gbt, &ds, "uts", t(0.0), &fast(), 0),
            Err(DpcError::UnknownProperty(_))
        ));
    }

    #[test]
    fn self_pair_and_dimension_checks() {
        let ds = tiny_dataset(&[1.0, 5.0, 2.0, 8.0]);
        let m = train_backbone(BackboneKind::DirectRegression, Architecture::Mlp, &ds, "y", t(0.5), &fast(), 3)
            .unwrap();
        for x in [[0.0, 0.0], [1.5, 2.0], [-4.0, 9.0]] {
            assert_eq!(predict_pair(&m, &x, &x).unwrap(), PairLabel::Same);
        }
        assert!(matches!(
            predict_pair(&m, &[1.0], &[1.0, 2.0]),
            Err(DpcError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn constant_difference_learner_predicts_same() {
        let ds = tiny_dataset(&[1.0, 5.0, 2.0, 8.0]);
        let hyper = Hyperparams {
            gbt: BoostParams {
                n_estimators: 0,
                ..Default::default()
            },
            ..Default::default()
        };
        let m = train_backbone(BackboneKind::DifferenceRegression, Architecture::Gbt, &ds, "y", t(0.5), &hyper, 0)
            .unwrap();
        for a in [[0.0, 0.0], [3.0, 9.0]] {
            for b in [[1.0, 1.0], [2.0, 4.0]] {
                assert_eq!(predict_pair(&m, &a, &b).unwrap(), PairLabel::Same);
            }
        }
    }

    #[test]
    fn predict_value_contract() {
        let ds = tiny_dataset(&[4.0, 4.0, 4.0]);
        let hyper = fast();
        let m = train_backbone(BackboneKind::DirectRegression, Architecture::Gbt, &ds, "y", t(0.5), &hyper, 0)
            .unwrap();
        for x in [[0.0, 0.0], [10.0, -3.0]] {
            assert_eq!(predict_value(&m, &x).unwrap(), 4.0);
        }
        let c = train_backbone(BackboneKind::DirectClassification, Architecture::Gbt, &ds, "y", t(0.5), &hyper, 0)
            .unwrap();
        assert!(matches!(predict_value(&c, &[0.0, 0.0]), Err(DpcError::WrongBackboneKind(_))));
    }

    #[test]
    fn oracle_model_matches_truth() {
        let (ds, truth) = generate(&SynthConfig {
            sigma_experiment: 0.0,
            sigma_sample: 0.0,
            n_experiments: 4,
            ..Default::default()
        })
        .unwrap();
        let uts = truth.property("uts").unwrap().clone();
        let th = t(0.3);
        let model = DpcModel::oracle(uts.clone(), th, ds.feature_names().to_vec());
        let reference = oracle_labels(&ds, &uts, th).unwrap();
        for p in reference.pairs() {
            let got = predict_pair(&model, reference.first_features(p), reference.second_features(p)).unwrap();
            assert_eq!(got, p.label);
        }
        for s in ds.samples() {
            assert_eq!(predict_value(&model, &s.features).unwrap(), s.properties["uts"]);
        }
    }

    #[test]
    fn symmetrized_pair_backbones_are_antisymmetric() {
        let ds = tiny_dataset(&[1.0, 5.0, 2.0, 8.0, 3.0]);
        let hyper = Hyperparams {
            symmetrize: true,
            ..fast()
        };
        for kind in [BackboneKind::DifferenceRegression, BackboneKind::DirectClassification] {
            for arch in Architecture::ALL {
                let m = train_backbone(kind, arch, &ds, "y", t(0.5), &hyper, 1).unwrap();
                assert!(m.symmetrize);
                let xs: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64 * 0.7, (i * i) as f64 * 0.3]).collect();
                for a in &xs {
                    for b in &xs {
                        let ab = predict_pair(&m, a, b).unwrap();
                        let ba = predict_pair(&m, b, a).unwrap();
                        assert_eq!(ab.swapped(), ba, "{kind} {arch}");
                    }
                }
            }
        }
    }

    #[test]
    fn inverse_frequency_weighting_trains() {
        let ds = tiny_dataset(&[0.0, 0.1, 5.0, 9.0]);
        let hyper = Hyperparams {
            class_weighting: ClassWeighting::InverseFrequency,
            ..fast()
        };
        for arch in Architecture::ALL {
            train_backbone(BackboneKind::DirectClassification, arch, &ds, "y", t(0.5), &hyper, 0).unwrap();
        }
        let w = inverse_frequency_weights(&[0, 1, 1, 1]);
        assert_eq!(w, vec![4.0 / 3.0, 4.0 / 9.0, 4.0 / 9.0, 4.0 / 9.0]);
    }

    #[test]
    fn ranking_examples() {
        let (ds, truth) = generate(&SynthConfig {
            n_experiments: 2,
            ..Default::default()
        })
        .unwrap();
        let uts = truth.property("uts").unwrap().clone();
        let model = DpcModel::oracle(uts.clone(), t(0.5), ds.feature_names().to_vec());

        let single = rank_candidates(&model, &[ds.samples().next().unwrap().features.clone()]).unwrap();
        assert_eq!(single, vec![RankedCandidate { index: 0, wins: 0, same: 0, losses: 0 }]);

        let x0 = ds.samples().next().unwrap().features.clone();
        let same = rank_candidates(&model, &[x0.clone(), x0.clone(), x0.clone()]).unwrap();
        assert_eq!(same.iter().map(|r| r.index).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(same.iter().all(|r| r.same == 2 && r.wins == 0));

        // candidates whose truth values are separated by more than t
        let mut cands: Vec<Vec<f64>> = Vec::new();
        for s in ds.samples() {
            let v = uts.value(&s.features);
            if cands.iter().all(|c| (uts.value(c) - v).abs() > 0.5) {
                cands.push(s.features.clone());
            }
        }
        let ranked = rank_candidates(&model, &cands).unwrap();
        let values: Vec<f64> = ranked.iter().map(|r| uts.value(&cands[r.index])).collect();
        assert!(values.windows(2).all(|w| w[0] > w[1]));
        assert!(matches!(rank_candidates(&model, &[vec![1.0]]), Err(DpcError::DimensionMismatch { .. })));
    }

    #[test]
    fn json_round_trip_preserves_predictions() {
        let ds = tiny_dataset(&[1.0, 5.0, 2.0, 8.0]);
        for kind in BackboneKind::ALL {
            for arch in Architecture::ALL {
                let m = train_backbone(kind, arch, &ds, "y", t(0.5), &fast(), 2).unwrap();
                let back = DpcModel::from_json(&m.to_json().unwrap()).unwrap();
                assert_eq!(back, m);
            }
        }
        let mut m = train_backbone(BackboneKind::DirectRegression, Architecture::Gbt, &ds, "y", t(0.5), &fast(), 2)
            .unwrap();
        m.format_version = 99;
        assert!(matches!(
            DpcModel::from_json(&m.to_json().unwrap()),
            Err(DpcError::UnsupportedVersion { found: 99, .. })
        ));
    }

    #[test]
    fn kind_and_architecture_parse() {
        assert_eq!("direct-classification".parse::<BackboneKind>().unwrap(), BackboneKind::DirectClassification);
        assert_eq!("mlp".parse::<Architecture>().unwrap(), Architecture::Mlp);
        assert!("xgboost".parse::<Architecture>().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(4))]
        #[test]
        fn direct_regression_pair_equals_value_composition(seed in 0u64..1000) {
            let (ds, _) = generate(&SynthConfig { n_experiments: 3, seed, ..Default::default() }).unwrap();
            let m = train_backbone(BackboneKind::DirectRegression, Architecture::Gbt, &ds, "uts", t(1.0), &fast(), 0).unwrap();
            let xs: Vec<&Vec<f64>> = ds.samples().map(|s| &s.features).collect();
            for a in &xs {
                for b in &xs {
                    let direct = predict_pair(&m, a, b).unwrap();
                    let composed = label_pair(predict_value(&m, a).unwrap(), predict_value(&m, b).unwrap(), 1.0);
                    prop_assert_eq!(direct, composed);
                    prop_assert_eq!(predict_pair(&m, b, a).unwrap(), direct.swapped());
                }
            }
        }
    }
}
