//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any failed. Tolerances and time budgets are pinned
//! below.

use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use dpc::backbones::Learner;
use dpc::eval::{confusion_count, majority_baseline, DEFAULT_CURVE_KS};
use dpc::learners::{
    fit_boosted_classifier, fit_boosted_regressor, numerical_gradient_check, BoostParams, FeatureScaler, Matrix,
    MlpNetwork, MlpParams, Objective, Targets,
};
use dpc::seed::{derive_seed, rng_for};
use dpc::*;
use rand::Rng;

const GRAD_REL_TOL: f64 = 1e-4;
const GRAD_EPS: f64 = 1e-5;
const MONOTONE_TOL: f64 = 1e-9;
const SHRINKAGE_TOL: f64 = 1e-9;
const CI_TOL: f64 = 1e-9;
const CURVE_MIN_GAIN: f64 = 0.03;
const CURVE_FLOOR: f64 = 0.55;
const BASELINE_CEILING: f64 = 0.45;
const PARITY_MARGIN: f64 = 0.02;
/// Training-pair cap for pair-input backbones where all k² pairs would blow
/// the time budget on a single core.
const PAIR_CAP: usize = 2000;

const CLI_SEED: u64 = 0;

struct Outcome {
    pass: bool,
    detail: String,
}

#[derive(Default)]
struct Checks {
    parts: Vec<(bool, String)>,
}

impl Checks {
    fn check(&mut self, ok: bool, msg: impl Into<String>) {
        self.parts.push((ok, msg.into()));
    }

    fn done(self) -> Outcome {
        let pass = self.parts.iter().all(|(ok, _)| *ok);
        let detail = self
            .parts
            .iter()
            .map(|(ok, m)| if *ok { m.clone() } else { format!("FAILED {m}") })
            .collect::<Vec<_>>()
            .join("; ");
        Outcome { pass, detail }
    }
}

/// Default synthetic data split the way the CLI splits it with `--seed 0`.
fn default_split(cfg: &SynthConfig) -> (Dataset, Dataset, GroundTruth) {
    let (ds, truth) = generate(cfg).unwrap();
    let (train, test) = split_by_experiment(&ds, 0.75, derive_seed(CLI_SEED, "split")).unwrap();
    (train, test, truth)
}

fn uts_threshold(train: &Dataset) -> Threshold {
    compute_threshold(&train.property_values("uts").unwrap(), 0.01).unwrap()
}

fn reference_label(y1: f64, y2: f64, t: f64) -> PairLabel {
    if y1 - y2 > t {
        PairLabel::FirstHigher
    } else if y2 - y1 > t {
        PairLabel::SecondHigher
    } else {
        PairLabel::Same
    }
}

// ---------------------------------------------------------------------

fn c1_pair_cardinality() -> Outcome {
    let cfg = SynthConfig {
        n_experiments: 5,
        samples_per_experiment: 8,
        ..Default::default()
    };
    let (ds, _) = generate(&cfg).unwrap();
    let t = compute_threshold(&ds.property_values("uts").unwrap(), 0.01).unwrap();
    let pd = build_pair_dataset(&ds.samples_vec(), "uts", t).unwrap();
    let mut c = Checks::default();
    c.check(ds.n_samples() == 40, format!("{} samples", ds.n_samples()));
    c.check(pd.len() == 1600, format!("{} ordered pairs", pd.len()));
    c.done()
}

fn c2_label_oracle() -> Outcome {
    let mut rng = rng_for(2, "acceptance/labels");
    let mut mismatches = 0;
    let mut boundary = 0;
    for i in 0..10_000 {
        let t: f64 = if i % 10 == 0 { 0.0 } else { rng.random_range(0.0..5.0) };
        let y1: f64 = rng.random_range(-50.0..50.0);
        let y2 = match i % 4 {
            // exact boundary and exact ties
            0 => {
                boundary += 1;
                y1 - t
            }
            1 => y1,
            _ => rng.random_range(-50.0..50.0),
        };
        if label_pair(y1, y2, t) != reference_label(y1, y2, t) {
            mismatches += 1;
        }
    }
    let mut c = Checks::default();
    c.check(mismatches == 0, format!("{mismatches} mismatches in 10000 triples ({boundary} on the boundary)"));
    c.done()
}

fn c3_class_balance_limits() -> Outcome {
    let mut c = Checks::default();
    let mut bad = Vec::new();
    for k in 1..=25usize {
        let samples: Vec<Sample> = (0..k)
            .map(|i| Sample {
                experiment_id: "e".into(),
                sample_id: format!("s{i}"),
                features: vec![i as f64],
                properties: [("p".to_string(), (i * i) as f64 * 0.5 + i as f64)].into_iter().collect(),
            })
            .collect();
        let zero = build_pair_dataset(&samples, "p", Threshold::absolute(0.0).unwrap()).unwrap();
        let spread = {
            let v = zero.values();
            v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min)
        };
        let wide = build_pair_dataset(&samples, "p", Threshold::absolute(spread + 1.0).unwrap()).unwrap();
        let same0 = class_balance(&zero)[&PairLabel::Same];
        let same_wide = class_balance(&wide)[&PairLabel::Same];
        if same0 != k || same_wide != k * k {
            bad.push(k);
        }
    }
    c.check(bad.is_empty(), format!("k=1..25 limits hold (violations at {bad:?})"));
    c.done()
}

fn c4_direct_regression_antisymmetry() -> Outcome {
    let cfg = SynthConfig {
        samples_per_experiment: 8,
        ..Default::default()
    };
    let (train, test, _) = default_split(&cfg);
    let t = uts_threshold(&train);
    let pd = build_pair_dataset(&test.samples_vec(), "uts", t).unwrap();
    let model = train_backbone(
        BackboneKind::DirectRegression,
        Architecture::Gbt,
        &train,
        "uts",
        t,
        &Hyperparams::default(),
        CLI_SEED,
    )
    .unwrap();
    let mut violations = 0;
    for p in pd.pairs() {
        let a = pd.first_features(p);
        let b = pd.second_features(p);
        if predict_pair(&model, a, b).unwrap().swapped() != predict_pair(&model, b, a).unwrap() {
            violations += 1;
        }
    }
    let report = evaluate(&model, &pd).unwrap();
    let c12 = confusion_count(&report, PairLabel::FirstHigher, PairLabel::SecondHigher);
    let c21 = confusion_count(&report, PairLabel::SecondHigher, PairLabel::FirstHigher);
    let mut c = Checks::default();
    c.check(pd.len() == 1600, format!("{} test pairs", pd.len()));
    c.check(violations == 0, format!("{violations} swap violations"));
    c.check(c12 == c21, format!("count(1->2)={c12}, count(2->1)={c21}"));
    c.done()
}

fn c5_gradient_check() -> Outcome {
    let mut c = Checks::default();
    let mut worst: f64 = 0.0;
    for seed in 0..5u64 {
        let mut rng = rng_for(seed, "acceptance/gradcheck");
        for (objective, d) in [(Objective::Mse, 6), (Objective::CrossEntropy, 12)] {
            let net = MlpNetwork::initialize(d, &[35, 35], objective, FeatureScaler::identity(d), seed).unwrap();
            assert!(net.n_params() <= 10_000);
            let rows: Vec<Vec<f64>> = (0..16).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
            let x = Matrix::from_rows(&rows).unwrap();
            let values: Vec<f64> = (0..16).map(|_| rng.random_range(-3.0..3.0)).collect();
            let classes: Vec<usize> = (0..16).map(|_| rng.random_range(0..3)).collect();
            let targets = match objective {
                Objective::Mse => Targets::Values(&values),
                Objective::CrossEntropy => Targets::Classes(&classes),
            };
            let err = numerical_gradient_check(&net, &x, &targets, GRAD_EPS).unwrap();
            worst = worst.max(err);
        }
    }
    c.check(worst < GRAD_REL_TOL, format!("max relative error {worst:.3e} over 5 seeds x 2 objectives"));
    c.done()
}

fn non_increasing(trace: &[f64]) -> Option<usize> {
    trace.windows(2).position(|w| w[1] > w[0] + MONOTONE_TOL)
}

fn c6_boosting_monotone() -> Outcome {
    let (train, _, _) = default_split(&SynthConfig::default());
    let params = BoostParams::default();
    let mut c = Checks::default();

    let x = Matrix::from_rows(&train.samples().map(|s| s.features.clone()).collect::<Vec<_>>()).unwrap();
    let y = train.property_values("uts").unwrap();
    let reg = fit_boosted_regressor(&x, &y, &params).unwrap();
    c.check(reg.train_loss.len() == 1001, format!("{} regressor rounds", reg.train_loss.len() - 1));
    let r = non_increasing(&reg.train_loss);
    c.check(r.is_none(), format!("regressor MSE non-increasing (first rise at {r:?})"));

    let pd = build_pair_dataset(&train.samples_vec(), "uts", uts_threshold(&train)).unwrap();
    let rows: Vec<Vec<f64>> = pd
        .pairs()
        .iter()
        .map(|p| [pd.first_features(p), pd.second_features(p)].concat())
        .collect();
    let labels: Vec<usize> = pd.pairs().iter().map(|p| p.label.index()).collect();
    let clf = fit_boosted_classifier(&Matrix::from_rows(&rows).unwrap(), &labels, &params).unwrap();
    let r = non_increasing(&clf.train_loss);
    c.check(
        r.is_none(),
        format!("classifier cross-entropy non-increasing over {} pairs (first rise at {r:?})", pd.len()),
    );
    c.done()
}

fn c7_shrinkage_closed_form() -> Outcome {
    let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
    let params = BoostParams {
        n_estimators: 10,
        learning_rate: 0.1,
        max_depth: 1,
        lambda: 0.0,
        min_child_weight: 1.0,
    };
    let m = fit_boosted_regressor(&x, &[-5.0, 5.0], &params).unwrap();
    let worst = (0..=10)
        .map(|r| (m.train_loss[r] - 25.0 * 0.81f64.powi(r as i32)).abs())
        .fold(0.0, f64::max);
    let mut c = Checks::default();
    c.check(worst <= SHRINKAGE_TOL, format!("max |MSE_r - 25*0.81^r| = {worst:.2e} for r<=10"));
    c.done()
}

fn c8_learning_curve() -> Outcome {
    let (train, test, _) = default_split(&SynthConfig::default());
    let t = uts_threshold(&train);
    let pd = build_pair_dataset(&test.samples_vec(), "uts", t).unwrap();
    let baseline = majority_baseline(&pd);
    let curve = learning_curve(
        &train,
        &pd,
        BackboneKind::DirectRegression,
        Architecture::Gbt,
        &DEFAULT_CURVE_KS,
        5,
        CLI_SEED,
        &Hyperparams::default(),
    )
    .unwrap();
    let means: Vec<f64> = curve.points.iter().map(|p| p.mean).collect();
    let first = means[0];
    let last = *means.last().unwrap();
    let lowest = means.iter().cloned().fold(f64::MAX, f64::min);
    let shown: Vec<String> = means.iter().map(|m| format!("{:.2}", 100.0 * m)).collect();
    let mut c = Checks::default();
    c.check(
        last >= first + CURVE_MIN_GAIN,
        format!("acc(k=15) {:.2}% vs acc(k=3) {:.2}% + {:.0} pts", 100.0 * last, 100.0 * first, 100.0 * CURVE_MIN_GAIN),
    );
    c.check(lowest >= CURVE_FLOOR, format!("min mean acc {:.2}% >= {:.0}%", 100.0 * lowest, 100.0 * CURVE_FLOOR));
    c.check(
        baseline <= BASELINE_CEILING,
        format!("majority baseline {:.2}% <= {:.0}% (t = {:.4})", 100.0 * baseline, 100.0 * BASELINE_CEILING, t.value()),
    );
    let mut o = c.done();
    o.detail.push_str(&format!("; curve [{}]", shown.join(", ")));
    o
}

fn c9_backbone_parity() -> Outcome {
    let (train, test, _) = default_split(&SynthConfig::default());
    let t = uts_threshold(&train);
    let pd = build_pair_dataset(&test.samples_vec(), "uts", t).unwrap();
    let hyper = Hyperparams {
        max_pairs: Some(PAIR_CAP),
        ..Default::default()
    };
    let mut acc = std::collections::BTreeMap::new();
    let mut matrix = Vec::new();
    for kind in BackboneKind::ALL {
        for arch in Architecture::ALL {
            let model = train_backbone(kind, arch, &train, "uts", t, &hyper, CLI_SEED).unwrap();
            let r = evaluate(&model, &pd).unwrap();
            matrix.push(format!("{kind}/{arch} {:.2}%", 100.0 * r.accuracy));
            acc.insert((kind.as_str(), arch.as_str()), r.accuracy);
        }
    }
    let diff = acc[&("difference-regression", "gbt")];
    let direct = acc[&("direct-regression", "gbt")];
    let class = acc[&("direct-classification", "gbt")];
    let mut c = Checks::default();
    c.check(acc.len() == 6, "6/6 backbone x architecture runs");
    c.check(
        direct + PARITY_MARGIN >= diff,
        format!("direct-regression gbt {:.2}% vs difference {:.2}%", 100.0 * direct, 100.0 * diff),
    );
    c.check(
        class + PARITY_MARGIN >= diff,
        format!("direct-classification gbt {:.2}% vs difference {:.2}%", 100.0 * class, 100.0 * diff),
    );
    let mut o = c.done();
    o.detail.push_str(&format!("; [{}]", matrix.join(", ")));
    o
}

fn c10_repeated_eval_ci() -> Outcome {
    let (train, test, _) = default_split(&SynthConfig::default());
    let t = uts_threshold(&train);
    let pd = build_pair_dataset(&test.samples_vec(), "uts", t).unwrap();
    let hyper = Hyperparams::default();
    let mlp = repeated_eval(BackboneKind::DirectRegression, Architecture::Mlp, &train, &pd, 5, CLI_SEED, &hyper).unwrap();
    let gbt = repeated_eval(BackboneKind::DirectRegression, Architecture::Gbt, &train, &pd, 5, CLI_SEED, &hyper).unwrap();
    let ci = confidence_interval(&[0.76, 0.77, 0.77, 0.78, 0.77]).unwrap();
    // 1.96 * sqrt(0.0002 / 4) / sqrt(5)
    let hand_hw = 1.96 * (0.0002f64 / 4.0).sqrt() / 5f64.sqrt();
    let mut c = Checks::default();
    c.check(
        mlp.accuracies.len() == 5 && mlp.interval.halfwidth.is_finite(),
        format!("mlp {}", mlp.summary_line().trim()),
    );
    c.check(gbt.interval.halfwidth == 0.0, format!("gbt halfwidth {}", gbt.interval.halfwidth));
    c.check(
        (ci.mean - 0.77).abs() <= CI_TOL && (ci.halfwidth - hand_hw).abs() <= CI_TOL,
        format!("hand example {:.7} ± {:.7}", ci.mean, ci.halfwidth),
    );
    c.done()
}

fn run_cli(dir: &Path, args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_dpc"))
        .current_dir(dir)
        .args(args)
        .stdout(std::process::Stdio::null())
        .status()
        .unwrap();
    assert!(status.success(), "dpc {args:?} failed: {status}");
}

fn c11_reproducibility() -> Outcome {
    let runs: [&[&str]; 4] = [
        &["synth", "-o", "synth"],
        &["train", "--data", "synth/dataset.csv", "--property", "uts", "-o", "train"],
        &["eval", "--data", "synth/dataset.csv", "--model", "train/model.json", "-o", "eval"],
        &["curve", "--data", "synth/dataset.csv", "--property", "uts", "-o", "curve"],
    ];
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        for args in runs {
            run_cli(dir, args);
        }
    }
    let mut compared = 0;
    let mut differing = Vec::new();
    for sub in ["synth", "train", "eval", "curve"] {
        let mut names: Vec<_> = std::fs::read_dir(a.path().join(sub))
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        for name in names {
            let rel = Path::new(sub).join(&name);
            if std::fs::read(a.path().join(&rel)).unwrap() != std::fs::read(b.path().join(&rel)).unwrap() {
                differing.push(rel.display().to_string());
            }
            compared += 1;
        }
    }
    let mut c = Checks::default();
    c.check(compared >= 10, format!("{compared} output files compared"));
    c.check(differing.is_empty(), format!("byte-identical (differing: {differing:?})"));
    c.done()
}

fn raw_output(model: &DpcModel, a: &[f64], b: &[f64]) -> Vec<u64> {
    let mut bits = vec![predict_pair(model, a, b).unwrap().index() as u64];
    match model.kind {
        BackboneKind::DirectRegression => {
            bits.push(predict_value(model, a).unwrap().to_bits());
            bits.push(predict_value(model, b).unwrap().to_bits());
        }
        BackboneKind::DifferenceRegression => bits.push(model.predicted_difference(a, b).unwrap().to_bits()),
        BackboneKind::DirectClassification => {
            bits.extend(model.class_scores(a, b).unwrap().iter().map(|s| s.to_bits()))
        }
    }
    bits
}

fn c12_serialization_round_trip() -> Outcome {
    let (train, _, _) = default_split(&SynthConfig::default());
    let t = uts_threshold(&train);
    // Smaller learners: the check is about serialization, not accuracy.
    let hyper = Hyperparams {
        gbt: BoostParams {
            n_estimators: 100,
            ..Default::default()
        },
        mlp: MlpParams {
            epochs: 200,
            ..Default::default()
        },
        max_pairs: Some(500),
        ..Default::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let mut rng = rng_for(12, "acceptance/roundtrip");
    let inputs: Vec<(Vec<f64>, Vec<f64>)> = (0..1000)
        .map(|_| {
            let mut draw = || {
                vec![
                    rng.random_range(0.0..5.0),
                    rng.random_range(50.0..350.0),
                    rng.random_range(280.0..500.0),
                    rng.random_range(0.0..26.0),
                    rng.random_range(0..2) as f64,
                    rng.random_range(0..2) as f64,
                ]
            };
            (draw(), draw())
        })
        .collect();
    let mut c = Checks::default();
    for kind in BackboneKind::ALL {
        for arch in Architecture::ALL {
            let model = train_backbone(kind, arch, &train, "uts", t, &hyper, 3).unwrap();
            let path = dir.path().join(format!("{kind}-{arch}.json"));
            model.save(&path).unwrap();
            let loaded = DpcModel::load(&path).unwrap();
            let mismatches = inputs
                .iter()
                .filter(|(a, b)| raw_output(&model, a, b) != raw_output(&loaded, a, b))
                .count();
            let learner_ok = matches!(
                (&loaded.learner, arch),
                (Learner::Mlp(_), Architecture::Mlp)
                    | (Learner::BoostedRegressor(_) | Learner::BoostedClassifier(_), Architecture::Gbt)
            );
            c.check(mismatches == 0 && learner_ok, format!("{kind}/{arch} {mismatches} mismatches"));
        }
    }
    c.done()
}

fn main() {
    type Criterion = (u32, &'static str, fn() -> Outcome, Duration);
    let secs = Duration::from_secs;
    let criteria: [Criterion; 12] = [
        (1, "pair-set cardinality", c1_pair_cardinality, secs(1)),
        (2, "label-rule oracle equivalence", c2_label_oracle, secs(1)),
        (3, "class-balance limits", c3_class_balance_limits, secs(5)),
        (4, "direct-regression antisymmetry", c4_direct_regression_antisymmetry, secs(60)),
        (5, "mlp gradient correctness", c5_gradient_check, secs(30)),
        (6, "boosting monotonicity", c6_boosting_monotone, secs(120)),
        (7, "closed-form shrinkage", c7_shrinkage_closed_form, secs(1)),
        (8, "low-data learning curve", c8_learning_curve, secs(300)),
        (9, "backbone-protocol parity", c9_backbone_parity, secs(180)),
        (10, "repeated-eval interval shape", c10_repeated_eval_ci, secs(120)),
        (11, "cli reproducibility", c11_reproducibility, secs(300)),
        (12, "model serialization round-trip", c12_serialization_round_trip, secs(120)),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (id, name, f, budget) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| Outcome {
            pass: false,
            detail: format!(
                "panicked: {}",
                e.downcast_ref::<String>()
                    .map(String::as_str)
                    .or_else(|| e.downcast_ref::<&str>().copied())
                    .unwrap_or("?")
            ),
        });
        let elapsed = start.elapsed();
        let in_budget = elapsed <= budget;
        let pass = outcome.pass && in_budget;
        let budget_note = if in_budget { String::new() } else { format!(" OVER BUDGET {budget:?}") };
        println!(
            "criterion {id:>2} {}: {name}: {} [{:.1}s{budget_note}]",
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64()
        );
        if !pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
