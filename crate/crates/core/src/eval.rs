//! Pairwise accuracy, confusion matrices, confidence intervals over repeated
//! seeds, and learning curves over the number of training experiments.

use std::fmt::Write as _;
use std::io::Write;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::backbones::{train_backbone, Architecture, BackboneKind, Hyperparams, PairPredictor};
use crate::dataset::Dataset;
use crate::error::{DpcError, Result};
use crate::pairing::{class_balance, PairDataset, PairLabel};
use crate::seed::{derive_seed, fingerprint, rng_for};
use crate::stats::{mean, sample_std};
use crate::threshold::Threshold;

/// Normal-approximation multiplier for a two-sided 95% interval.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportManifest {
    pub model_fingerprint: String,
    pub pairs_fingerprint: String,
    pub property_name: String,
    pub threshold: Threshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: [[usize; 3]; 3],
    pub n_pairs: usize,
    /// `None` where the class was never predicted.
    pub precision: [Option<f64>; 3],
    /// `None` where the class never occurs.
    pub recall: [Option<f64>; 3],
    pub manifest: ReportManifest,
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "property   {}", self.manifest.property_name);
        let _ = writeln!(out, "threshold  {}", self.manifest.threshold.value());
        let _ = writeln!(out, "pairs      {}", self.n_pairs);
        let _ = writeln!(out, "accuracy   {:.2}%", 100.0 * self.accuracy);
        let _ = writeln!(out);
        let _ = writeln!(out, "{:>12} {:>8} {:>8} {:>8} {:>10} {:>10}", "true\\pred", "0", "1", "2", "precision", "recall");
        let fmt_opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{:.2}%", 100.0 * x));
        for (c, row) in self.confusion.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:>12} {:>8} {:>8} {:>8} {:>10} {:>10}",
                c,
                row[0],
                row[1],
                row[2],
                fmt_opt(self.precision[c]),
                fmt_opt(self.recall[c])
            );
        }
        out
    }
}

fn pairs_fingerprint(pairs: &PairDataset) -> String {
    let mut buf = Vec::new();
    pairs.write_csv(&mut buf).expect("in-memory write");
    fingerprint(&buf)
}

/// Applies `model` to every pair and counts outcomes.
pub fn evaluate<P: PairPredictor>(model: &P, test_pairs: &PairDataset) -> Result<EvalReport> {
    if test_pairs.is_empty() {
        return Err(DpcError::EmptyDataset);
    }
    if model.n_features() != test_pairs.n_features() {
        return Err(DpcError::DimensionMismatch {
            expected: model.n_features(),
            actual: test_pairs.n_features(),
        });
    }
    let mut confusion = [[0usize; 3]; 3];
    for p in test_pairs.pairs() {
        let predicted = model.predict_pair(test_pairs.first_features(p), test_pairs.second_features(p))?;
        confusion[p.label.index()][predicted.index()] += 1;
    }
    let n_pairs = test_pairs.len();
    let correct: usize = (0..3).map(|c| confusion[c][c]).sum();
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    let precision = std::array::from_fn(|c| ratio(confusion[c][c], (0..3).map(|r| confusion[r][c]).sum()));
    let recall = std::array::from_fn(|c| ratio(confusion[c][c], confusion[c].iter().sum()));
    Ok(EvalReport {
        accuracy: correct as f64 / n_pairs as f64,
        confusion,
        n_pairs,
        precision,
        recall,
        manifest: ReportManifest {
            model_fingerprint: model.fingerprint(),
            pairs_fingerprint: pairs_fingerprint(test_pairs),
            property_name: test_pairs.property_name().to_string(),
            threshold: test_pairs.threshold(),
        },
    })
}

/// Accuracy of always predicting the most frequent label of `pairs`.
pub fn majority_baseline(pairs: &PairDataset) -> f64 {
    let counts = class_balance(pairs);
    let top = counts.values().copied().max().unwrap_or(0);
    top as f64 / pairs.len().max(1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub halfwidth: f64,
    pub n: usize,
    /// Normal quantile used; the interval is `mean ± z * s / sqrt(n)`.
    pub z: f64,
}

/// 95% interval `mean ± 1.96 * s / sqrt(n)`, `s` the sample std (n - 1).
pub fn confidence_interval(values: &[f64]) -> Result<Interval> {
    if values.len() < 2 {
        return Err(DpcError::TooFewValues { found: values.len() });
    }
    let n = values.len();
    Ok(Interval {
        mean: mean(values),
        halfwidth: Z_95 * sample_std(values) / (n as f64).sqrt(),
        n,
        z: Z_95,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatedEval {
    pub kind: BackboneKind,
    pub architecture: Architecture,
    pub seeds: Vec<u64>,
    pub accuracies: Vec<f64>,
    pub interval: Interval,
    pub reports: Vec<EvalReport>,
}

impl RepeatedEval {
    pub fn summary_line(&self) -> String {
        format!(
            "{:<22} {:<4} {:>7.2} ± {:.2}",
            self.kind.as_str(),
            self.architecture.as_str(),
            100.0 * self.interval.mean,
            100.0 * self.interval.halfwidth
        )
    }
}

/// Trains with seeds `base_seed..base_seed + n_repeats` and evaluates each
/// model on `test_pairs`, labelling training pairs with the same threshold.
pub fn repeated_eval(
    kind: BackboneKind,
    architecture: Architecture,
    train: &Dataset,
    test_pairs: &PairDataset,
    n_repeats: usize,
    base_seed: u64,
    hyper: &Hyperparams,
) -> Result<RepeatedEval> {
    if n_repeats < 2 {
        return Err(DpcError::TooFewValues { found: n_repeats });
    }
    let seeds: Vec<u64> = (0..n_repeats as u64).map(|i| base_seed.wrapping_add(i)).collect();
    let mut reports = Vec::with_capacity(n_repeats);
    for &seed in &seeds {
        let model = train_backbone(
            kind,
            architecture,
            train,
            test_pairs.property_name(),
            test_pairs.threshold(),
            hyper,
            seed,
        )?;
        reports.push(evaluate(&model, test_pairs)?);
    }
    let accuracies: Vec<f64> = reports.iter().map(|r| r.accuracy).collect();
    Ok(RepeatedEval {
        kind,
        architecture,
        interval: confidence_interval(&accuracies)?,
        seeds,
        accuracies,
        reports,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    pub accuracies: Vec<f64>,
    /// Training experiment ids of each repeat.
    pub subsets: Vec<Vec<String>>,
    pub mean: f64,
    /// `None` with a single repeat.
    pub ci_halfwidth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub kind: BackboneKind,
    pub architecture: Architecture,
    pub repeats: usize,
    pub seed: u64,
    pub points: Vec<CurvePoint>,
}

impl LearningCurve {
    /// `k,repeat,accuracy` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "k,repeat,accuracy")?;
        for p in &self.points {
            for (r, a) in p.accuracies.iter().enumerate() {
                writeln!(w, "{},{},{}", p.k, r, a)?;
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{:>4} {:>9} {:>9}\n", "k", "mean", "±95%");
        for p in &self.points {
            let hw = p.ci_halfwidth.map_or_else(|| "-".into(), |h| format!("{:.2}", 100.0 * h));
            let _ = writeln!(out, "{:>4} {:>8.2}% {:>9}", p.k, 100.0 * p.mean, hw);
        }
        out
    }
}

pub const DEFAULT_CURVE_KS: [usize; 7] = [3, 5, 7, 9, 11, 13, 15];

/// For each `k`, trains on `repeats` uniformly drawn k-experiment subsets of
/// `full_train` (independent per k) and evaluates on the fixed `test_pairs`.
#[allow(clippy::too_many_arguments)]
pub fn learning_curve(
    full_train: &Dataset,
    test_pairs: &PairDataset,
    kind: BackboneKind,
    architecture: Architecture,
    ks: &[usize],
    repeats: usize,
    seed: u64,
    hyper: &Hyperparams,
) -> Result<LearningCurve> {
    if repeats < 1 {
        return Err(DpcError::InvalidConfig("repeats must be >= 1".into()));
    }
    if ks.is_empty() || ks.contains(&0) || ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(DpcError::InvalidConfig(format!(
            "k values must be positive and strictly increasing, got {ks:?}"
        )));
    }
    let available = full_train.n_experiments();
    if let Some(&k) = ks.iter().find(|&&k| k > available) {
        return Err(DpcError::KTooLarge { k, available });
    }

    let mut points = Vec::with_capacity(ks.len());
    for &k in ks {
        let mut accuracies = Vec::with_capacity(repeats);
        let mut subsets = Vec::with_capacity(repeats);
        for r in 0..repeats {
            let purpose = format!("curve/k{k}/r{r}");
            let mut rng = rng_for(seed, &purpose);
            let mut chosen = index::sample(&mut rng, available, k).into_vec();
            chosen.sort_unstable();
            let subset = full_train.select_experiments(&chosen);
            let model = train_backbone(
                kind,
                architecture,
                &subset,
                test_pairs.property_name(),
                test_pairs.threshold(),
                hyper,
                derive_seed(seed, &format!("{purpose}/model")),
            )?;
            accuracies.push(evaluate(&model, test_pairs)?.accuracy);
            subsets.push(subset.experiment_ids().into_iter().map(String::from).collect());
        }
        let ci_halfwidth = if repeats >= 2 {
            Some(confidence_interval(&accuracies)?.halfwidth)
        } else {
            None
        };
        points.push(CurvePoint {
            k,
            mean: mean(&accuracies),
            accuracies,
            subsets,
            ci_halfwidth,
        });
    }
    Ok(LearningCurve {
        kind,
        architecture,
        repeats,
        seed,
        points,
    })
}

/// Confusion-matrix count of pairs with the given true and predicted labels.
pub fn confusion_count(report: &EvalReport, truth: PairLabel, predicted: PairLabel) -> usize {
    report.confusion[truth.index()][predicted.index()]
}
