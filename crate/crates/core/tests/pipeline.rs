//! End-to-end use of the public API: CSV on disk -> split -> threshold ->
//! train -> evaluate -> save/load.

use dpc::learners::{BoostParams, MlpParams};
use dpc::*;

fn small_hyper() -> Hyperparams {
    Hyperparams {
        gbt: BoostParams { n_estimators: 200, ..Default::default() },
        mlp: MlpParams { epochs: 300, ..Default::default() },
        max_pairs: Some(1500),
        ..Default::default()
    }
}

#[test]
fn csv_round_trip_through_disk() {
    let (ds, _) = generate(&SynthConfig { n_experiments: 4, seed: 8, ..Default::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    std::fs::write(&path, ds.to_csv_string()).unwrap();
    let loaded = load_dataset(&path, ds.property_names()).unwrap();
    assert_eq!(loaded, ds);
    assert_eq!(loaded.fingerprint(), ds.fingerprint());
}

#[test]
fn every_backbone_trains_evaluates_and_reloads() {
    let (ds, _) = generate(&SynthConfig { n_experiments: 8, seed: 2, ..Default::default() }).unwrap();
    let (train, test) = split_by_experiment(&ds, 0.75, 1).unwrap();
    let t = compute_threshold(&train.property_values("max_load").unwrap(), 0.01).unwrap();
    let pairs = build_pair_dataset(&test.samples_vec(), "max_load", t).unwrap();
    assert_eq!(pairs.len(), 400);
    let dir = tempfile::tempdir().unwrap();
    for kind in BackboneKind::ALL {
        for arch in Architecture::ALL {
            let model = train_backbone(kind, arch, &train, "max_load", t, &small_hyper(), 5).unwrap();
            let report = evaluate(&model, &pairs).unwrap();
            assert_eq!(report.confusion.iter().flatten().sum::<usize>(), 400);
            let path = dir.path().join("m.json");
            model.save(&path).unwrap();
            let again = evaluate(&DpcModel::load(&path).unwrap(), &pairs).unwrap();
            assert_eq!(again.confusion, report.confusion, "{kind}/{arch}");
        }
    }
}

#[test]
fn noiseless_training_pairs_near_ceiling() {
    // A flexible learner fit to noiseless data should label training pairs
    // like the oracle does.
    let cfg = SynthConfig { n_experiments: 6, sigma_experiment: 0.0, sigma_sample: 0.0, seed: 3, ..Default::default() };
    let (ds, truth) = generate(&cfg).unwrap();
    let t = compute_threshold(&ds.property_values("uts").unwrap(), 0.01).unwrap();
    let oracle = oracle_labels(&ds, truth.property("uts").unwrap(), t).unwrap();
    let hyper = Hyperparams { gbt: BoostParams { min_child_weight: 0.0, ..Default::default() }, ..Default::default() };
    let model = train_backbone(BackboneKind::DirectRegression, Architecture::Gbt, &ds, "uts", t, &hyper, 0).unwrap();
    let acc = evaluate(&model, &oracle).unwrap().accuracy;
    assert!(acc >= 0.99, "{acc}");
}

#[test]
fn measured_vs_oracle_disagreement_grows_with_noise() {
    let base = SynthConfig { sigma_experiment: 0.0, ..Default::default() };
    let (ds0, _) = generate(&base).unwrap();
    let t = compute_threshold(&ds0.property_values("uts").unwrap(), 0.01).unwrap().value();
    let mut last = -1.0;
    for mult in [0.0, 0.5, 1.0, 2.0, 5.0] {
        let mut rate = 0.0;
        for seed in 0..5 {
            let cfg = SynthConfig { sigma_sample: mult * t, seed, ..base.clone() };
            let (ds, truth) = generate(&cfg).unwrap();
            let th = Threshold::absolute(t).unwrap();
            let measured = build_pair_dataset(&ds.samples_vec(), "uts", th).unwrap();
            let oracle = oracle_labels(&ds, truth.property("uts").unwrap(), th).unwrap();
            let differ = measured.pairs().iter().zip(oracle.pairs()).filter(|(a, b)| a.label != b.label).count();
            rate += differ as f64 / measured.len() as f64 / 5.0;
        }
        assert!(rate >= last, "sigma {mult}t: {rate} < {last}");
        last = rate;
    }
}
