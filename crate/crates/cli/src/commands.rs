use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use dpc::backbones::ClassWeighting;
use dpc::eval::{majority_baseline, Z_95};
use dpc::learners::{BoostParams, MlpParams};
use dpc::seed::derive_seed;
use dpc::synthgen::TruthFunction;
use dpc::{
    build_pair_dataset, compute_threshold, evaluate, generate, learning_curve, predict_pair, predict_value,
    rank_candidates, repeated_eval, train_backbone, Architecture, BackboneKind, Dataset, DpcError, DpcModel,
    EvalReport, GroundTruth, Hyperparams, LearningCurve, PairDataset, PairLabel, SynthConfig, Threshold,
};
use serde::{Deserialize, Serialize};

use crate::args::{
    CompareArgs, CurveArgs, DataArgs, EvalArgs, HyperArgs, RankArgs, SplitArgs, SynthArgs, ThresholdArgs, TrainArgs,
};
use crate::files::{self, OutputDir, Schema};
use crate::CliError;

/// Global flags every subcommand sees.
#[derive(Debug, Clone, Serialize)]
pub struct Globals {
    pub seed: Option<u64>,
    pub json: bool,
    pub out_dir: PathBuf,
    pub properties: Option<Vec<String>>,
}

impl Globals {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

// ---------------------------------------------------------------- synth

#[derive(Debug, Serialize, Deserialize)]
pub struct GroundTruthFile {
    pub config: SynthConfig,
    pub truth: GroundTruth,
}

fn parse_truth(s: &str) -> Result<TruthFunction, CliError> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
        .map_err(|_| CliError::Config(format!("unknown truth function `{s}` (quadratic-interaction, linear)")))
}

pub fn synth(g: &Globals, args: &SynthArgs) -> Result<(), CliError> {
    let mut inputs = Vec::new();
    let mut cfg = match &args.config {
        Some(p) => {
            inputs.push(p.clone());
            serde_json::from_str::<SynthConfig>(&fs::read_to_string(p)?)?
        }
        None => SynthConfig::default(),
    };
    if let Some(v) = args.experiments {
        cfg.n_experiments = v;
    }
    if let Some(v) = args.samples {
        cfg.samples_per_experiment = v;
    }
    if let Some(v) = args.sigma_experiment {
        cfg.sigma_experiment = v;
    }
    if let Some(v) = args.sigma_sample {
        cfg.sigma_sample = v;
    }
    if let Some(v) = args.jitter {
        cfg.jitter_fraction = v;
    }
    if let Some(t) = &args.truth {
        cfg.truth = parse_truth(t)?;
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }

    let (ds, truth) = generate(&cfg)?;
    let mut out = OutputDir::create(&g.out_dir)?;
    let csv_path = out.write("dataset.csv", ds.to_csv_string().as_bytes())?;
    out.write_json(
        "dataset.schema.json",
        &Schema {
            properties: ds.property_names().to_vec(),
        },
    )?;
    out.write_json(
        "ground_truth.json",
        &GroundTruthFile {
            config: cfg.clone(),
            truth,
        },
    )?;
    out.finish("synth", &cfg, &inputs)?;

    if g.json {
        print_json(&serde_json::json!({
            "dataset": csv_path,
            "n_experiments": ds.n_experiments(),
            "n_samples": ds.n_samples(),
            "properties": ds.property_names(),
        }))
    } else {
        println!(
            "wrote {} samples from {} experiments to {}",
            ds.n_samples(),
            ds.n_experiments(),
            csv_path.display()
        );
        Ok(())
    }
}

// ------------------------------------------------------- shared pieces

fn require_property(data: &DataArgs) -> Result<&str, CliError> {
    data.property
        .as_deref()
        .ok_or_else(|| CliError::Config("--property is required".into()))
}

fn parse_list<T: std::str::FromStr<Err = DpcError> + Copy>(s: &str, all: &[T]) -> Result<Vec<T>, CliError> {
    if s == "all" {
        return Ok(all.to_vec());
    }
    s.split(',')
        .map(|p| p.trim().parse::<T>().map_err(CliError::from))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitInfo {
    pub seed: u64,
    pub train_experiment_ids: Vec<String>,
    pub test_experiment_ids: Vec<String>,
}

fn ids(ds: &Dataset) -> Vec<String> {
    ds.experiment_ids().into_iter().map(String::from).collect()
}

/// Train/test by experiment: an explicit id file, else a seeded shuffle.
fn split(ds: &Dataset, args: &SplitArgs, seed: u64, inputs: &mut Vec<PathBuf>) -> Result<(Dataset, Dataset, SplitInfo), CliError> {
    let split_seed = derive_seed(seed, "split");
    let (train, test) = match &args.train_ids {
        Some(p) => {
            inputs.push(p.clone());
            let train_ids = files::read_id_list(p)?;
            let train = ds.select_experiment_ids(&train_ids)?;
            let rest: Vec<String> = ids(ds).into_iter().filter(|id| !train_ids.contains(id)).collect();
            if rest.is_empty() {
                return Err(CliError::Config("no experiments left for the test set".into()));
            }
            (train, ds.select_experiment_ids(&rest)?)
        }
        None => dpc::split_by_experiment(ds, args.train_fraction, split_seed)?,
    };
    let info = SplitInfo {
        seed: split_seed,
        train_experiment_ids: ids(&train),
        test_experiment_ids: ids(&test),
    };
    Ok((train, test, info))
}

fn resolve_threshold(train: &Dataset, property: &str, args: &ThresholdArgs) -> Result<Threshold, CliError> {
    Ok(match args.threshold_abs {
        Some(v) => Threshold::absolute(v)?,
        None => compute_threshold(&train.property_values(property)?, args.threshold_fraction)?,
    })
}

fn hyperparams(args: &HyperArgs, seed: u64) -> Result<Hyperparams, CliError> {
    let class_weighting = match args.class_weights.as_str() {
        "none" => ClassWeighting::None,
        "inverse-frequency" => ClassWeighting::InverseFrequency,
        other => {
            return Err(CliError::Config(format!(
                "unknown class weighting `{other}` (none, inverse-frequency)"
            )))
        }
    };
    let gbt = BoostParams {
        n_estimators: args.n_estimators,
        learning_rate: args.learning_rate,
        max_depth: args.max_depth,
        lambda: args.lambda,
        min_child_weight: args.min_child_weight,
    };
    gbt.validate()?;
    if args.hidden.is_empty() || args.hidden.contains(&0) {
        return Err(CliError::Config("--hidden widths must be positive".into()));
    }
    if !(args.mlp_lr.is_finite() && args.mlp_lr >= 0.0) {
        return Err(CliError::Config("--mlp-lr must be finite and >= 0".into()));
    }
    Ok(Hyperparams {
        gbt,
        mlp: MlpParams {
            hidden: args.hidden.clone(),
            learning_rate: args.mlp_lr,
            epochs: args.epochs,
        },
        max_pairs: args.max_pairs,
        pair_subsample_seed: derive_seed(seed, "pairs/subsample"),
        class_weighting,
        symmetrize: args.symmetrize,
    })
}

/// Everything a run resolved beyond its flags.
#[derive(Debug, Serialize)]
struct Resolved<'a, A: Serialize> {
    args: &'a A,
    seed: u64,
    threshold: Threshold,
    split: &'a SplitInfo,
}

// ---------------------------------------------------------------- train

pub fn train(g: &Globals, args: &TrainArgs) -> Result<(), CliError> {
    let property = require_property(&args.data)?;
    let kind: BackboneKind = args.backbone.parse()?;
    let arch: Architecture = args.arch.parse()?;
    let seed = g.seed();
    let hyper = hyperparams(&args.hyper, seed)?;
    let (ds, mut inputs) = files::load(g.properties.as_deref(), &args.data.data, Some(property))?;
    let (train, _test, info) = split(&ds, &args.split, seed, &mut inputs)?;
    let threshold = resolve_threshold(&train, property, &args.threshold)?;

    let model = train_backbone(kind, arch, &train, property, threshold, &hyper, seed)?;

    let mut out = OutputDir::create(&g.out_dir)?;
    let model_path = out.write("model.json", (model.to_json()? + "\n").as_bytes())?;
    out.finish(
        "train",
        &Resolved {
            args,
            seed,
            threshold,
            split: &info,
        },
        &inputs,
    )?;

    let m = &model.manifest;
    if g.json {
        print_json(&serde_json::json!({
            "model": model_path,
            "kind": kind,
            "architecture": arch,
            "threshold": threshold.value(),
            "n_train_samples": m.n_train_samples,
            "n_train_pairs": m.n_train_pairs,
            "n_train_rows": m.n_train_rows,
        }))
    } else {
        println!("trained {kind} ({arch}) on {property}");
        println!("  training experiments  {}", info.train_experiment_ids.join(","));
        println!("  training samples      {}", m.n_train_samples);
        if let Some(n) = m.n_train_pairs {
            println!("  training pairs        {n} ({} used)", m.n_train_rows);
        }
        println!("  threshold             {}", threshold.value());
        println!("  model                 {}", model_path.display());
        Ok(())
    }
}

// ----------------------------------------------------------------- eval

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalEntry {
    pub kind: BackboneKind,
    /// `None` for the noiseless oracle.
    pub architecture: Option<Architecture>,
    pub seeds: Vec<u64>,
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// 95% halfwidth, normal approximation; `None` with a single run.
    pub ci_halfwidth: Option<f64>,
    pub ci_z: f64,
    pub reports: Vec<EvalReport>,
}

impl EvalEntry {
    fn single(kind: BackboneKind, architecture: Option<Architecture>, seed: u64, report: EvalReport) -> Self {
        EvalEntry {
            kind,
            architecture,
            seeds: vec![seed],
            accuracies: vec![report.accuracy],
            mean: report.accuracy,
            ci_halfwidth: None,
            ci_z: Z_95,
            reports: vec![report],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalOutput {
    pub property: String,
    pub threshold: Threshold,
    pub split: SplitInfo,
    pub n_test_samples: usize,
    pub n_test_pairs: usize,
    pub majority_baseline: f64,
    pub results: Vec<EvalEntry>,
}

impl EvalOutput {
    fn new(property: &str, split: SplitInfo, pairs: &PairDataset, results: Vec<EvalEntry>) -> Self {
        EvalOutput {
            property: property.to_string(),
            threshold: pairs.threshold(),
            split,
            n_test_samples: pairs.samples().len(),
            n_test_pairs: pairs.len(),
            majority_baseline: majority_baseline(pairs),
            results,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "property            {}", self.property);
        let _ = writeln!(s, "threshold           {}", self.threshold.value());
        let _ = writeln!(s, "test experiments    {}", self.split.test_experiment_ids.join(","));
        let _ = writeln!(s, "test pairs          {}", self.n_test_pairs);
        let _ = writeln!(s, "majority baseline   {:.2}%", 100.0 * self.majority_baseline);
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<22} {:<6} {:>5} {:>9} {:>8}", "backbone", "arch", "runs", "accuracy", "±95%");
        for r in &self.results {
            let arch = r.architecture.map_or("oracle", |a| a.as_str());
            let hw = r.ci_halfwidth.map_or_else(|| "-".to_string(), |h| format!("{:.2}", 100.0 * h));
            let _ = writeln!(
                s,
                "{:<22} {:<6} {:>5} {:>8.2}% {:>8}",
                r.kind.as_str(),
                arch,
                r.accuracies.len(),
                100.0 * r.mean,
                hw
            );
        }
        if let [only] = self.results.as_slice() {
            if let [report] = only.reports.as_slice() {
                let _ = writeln!(s);
                s.push_str(&report.to_text());
            }
        }
        s
    }
}

fn test_pairs(test: &Dataset, property: &str, threshold: Threshold) -> Result<PairDataset, CliError> {
    Ok(build_pair_dataset(&test.samples_vec(), property, threshold)?)
}

pub fn eval(g: &Globals, args: &EvalArgs) -> Result<(), CliError> {
    let seed = g.seed();
    let (output, inputs) = if let Some(model_path) = &args.model {
        eval_saved(g, args, model_path)?
    } else {
        eval_trained(g, args, seed)?
    };

    let mut out = OutputDir::create(&g.out_dir)?;
    out.write_json("report.json", &output)?;
    let text = output.to_text();
    out.write("report.txt", text.as_bytes())?;
    out.finish(
        "eval",
        &Resolved {
            args,
            seed,
            threshold: output.threshold,
            split: &output.split,
        },
        &inputs,
    )?;
    if g.json {
        print_json(&output)
    } else {
        print!("{text}");
        Ok(())
    }
}

fn eval_saved(g: &Globals, args: &EvalArgs, model_path: &PathBuf) -> Result<(EvalOutput, Vec<PathBuf>), CliError> {
    if args.repeats != 1 {
        return Err(CliError::Config("--repeats applies only when training; drop it with --model".into()));
    }
    let model = DpcModel::load(model_path)?;
    let property = model.property_name.clone();
    if let Some(p) = &args.data.property {
        if *p != property {
            return Err(CliError::Config(format!("model predicts `{property}`, not `{p}`")));
        }
    }
    let (ds, mut inputs) = files::load(g.properties.as_deref(), &args.data.data, Some(&property))?;
    inputs.push(model_path.clone());
    let trained_on = &model.manifest.train_experiment_ids;
    let test_ids: Vec<String> = ids(&ds).into_iter().filter(|id| !trained_on.contains(id)).collect();
    if test_ids.is_empty() {
        return Err(CliError::Config("every experiment in the data was used to train the model".into()));
    }
    let test = ds.select_experiment_ids(&test_ids)?;
    let pairs = test_pairs(&test, &property, model.threshold)?;
    let report = evaluate(&model, &pairs)?;
    let split = SplitInfo {
        seed: model.manifest.seed,
        train_experiment_ids: trained_on.clone(),
        test_experiment_ids: test_ids,
    };
    let entry = EvalEntry::single(model.kind, model.architecture(), model.manifest.seed, report);
    Ok((EvalOutput::new(&property, split, &pairs, vec![entry]), inputs))
}

fn eval_trained(g: &Globals, args: &EvalArgs, seed: u64) -> Result<(EvalOutput, Vec<PathBuf>), CliError> {
    let property = require_property(&args.data)?;
    if args.repeats == 0 {
        return Err(CliError::Config("--repeats must be >= 1".into()));
    }
    let (ds, mut inputs) = files::load(g.properties.as_deref(), &args.data.data, Some(property))?;
    let (train, test, info) = split(&ds, &args.split, seed, &mut inputs)?;
    let threshold = resolve_threshold(&train, property, &args.threshold)?;
    let pairs = test_pairs(&test, property, threshold)?;

    let mut results = Vec::new();
    if let Some(truth_path) = &args.oracle {
        inputs.push(truth_path.clone());
        let file: GroundTruthFile = serde_json::from_str(&fs::read_to_string(truth_path)?)?;
        let oracle = DpcModel::oracle(file.truth.property(property)?.clone(), threshold, ds.feature_names().to_vec());
        results.push(EvalEntry::single(BackboneKind::DirectRegression, None, 0, evaluate(&oracle, &pairs)?));
    } else {
        let kinds = parse_list(&args.backbone, &BackboneKind::ALL)?;
        let archs = parse_list(&args.arch, &Architecture::ALL)?;
        let hyper = hyperparams(&args.hyper, seed)?;
        for &kind in &kinds {
            for &arch in &archs {
                results.push(if args.repeats == 1 {
                    let model = train_backbone(kind, arch, &train, property, threshold, &hyper, seed)?;
                    EvalEntry::single(kind, Some(arch), seed, evaluate(&model, &pairs)?)
                } else {
                    let r = repeated_eval(kind, arch, &train, &pairs, args.repeats, seed, &hyper)?;
                    EvalEntry {
                        kind,
                        architecture: Some(arch),
                        seeds: r.seeds,
                        mean: r.interval.mean,
                        ci_halfwidth: Some(r.interval.halfwidth),
                        ci_z: r.interval.z,
                        accuracies: r.accuracies,
                        reports: r.reports,
                    }
                });
            }
        }
    }
    Ok((EvalOutput::new(property, info, &pairs, results), inputs))
}

// ---------------------------------------------------------------- curve

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveOutput {
    pub property: String,
    pub threshold: Threshold,
    pub split: SplitInfo,
    pub n_test_pairs: usize,
    pub majority_baseline: f64,
    pub curve: LearningCurve,
}

pub fn curve(g: &Globals, args: &CurveArgs) -> Result<(), CliError> {
    let property = require_property(&args.data)?;
    let kind: BackboneKind = args.backbone.parse()?;
    let arch: Architecture = args.arch.parse()?;
    let seed = g.seed();
    let hyper = hyperparams(&args.hyper, seed)?;
    let (ds, mut inputs) = files::load(g.properties.as_deref(), &args.data.data, Some(property))?;
    let (train, test, info) = split(&ds, &args.split, seed, &mut inputs)?;
    let threshold = resolve_threshold(&train, property, &args.threshold)?;
    let pairs = test_pairs(&test, property, threshold)?;

    let curve = learning_curve(&train, &pairs, kind, arch, &args.ks, args.repeats, seed, &hyper)?;

    let output = CurveOutput {
        property: property.to_string(),
        threshold,
        split: info,
        n_test_pairs: pairs.len(),
        majority_baseline: majority_baseline(&pairs),
        curve,
    };
    let mut out = OutputDir::create(&g.out_dir)?;
    let mut csv = Vec::new();
    output.curve.write_csv(&mut csv)?;
    out.write("curve.csv", &csv)?;
    out.write_json("curve.json", &output)?;
    out.finish(
        "curve",
        &Resolved {
            args,
            seed,
            threshold,
            split: &output.split,
        },
        &inputs,
    )?;
    if g.json {
        print_json(&output)
    } else {
        println!("{kind} ({arch}) on {property}, {} repeats per k", args.repeats);
        print!("{}", output.curve.to_text());
        Ok(())
    }
}

// -------------------------------------------------------------- compare

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicted {
    pub a: f64,
    pub b: f64,
}

/// `--json` output of `compare`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareOutput {
    /// "A higher", "B higher" or "same within threshold t=<t>".
    pub verdict: String,
    pub label: PairLabel,
    pub property: String,
    pub threshold: f64,
    /// Direct-regression models only.
    pub predicted: Option<Predicted>,
}

pub fn verdict(label: PairLabel, t: f64) -> String {
    match label {
        PairLabel::FirstHigher => "A higher".into(),
        PairLabel::SecondHigher => "B higher".into(),
        PairLabel::Same => format!("same within threshold t={t}"),
    }
}

pub fn compare(g: &Globals, args: &CompareArgs) -> Result<(), CliError> {
    let model = DpcModel::load(&args.model)?;
    let (a, b) = match (&args.a, &args.b, &args.pair_file) {
        (Some(a), Some(b), None) => (a.clone(), b.clone()),
        (None, None, Some(p)) => {
            let (_, mut rows) = files::read_candidates(p, &model.feature_names)?;
            if rows.len() != 2 {
                return Err(CliError::Config(format!("{} must hold exactly 2 rows, found {}", p.display(), rows.len())));
            }
            let b = rows.pop().expect("two rows");
            (rows.pop().expect("two rows"), b)
        }
        _ => return Err(CliError::Config("give either --a and --b, or --pair-file".into())),
    };
    let label = predict_pair(&model, &a, &b)?;
    let predicted = if model.kind == BackboneKind::DirectRegression {
        Some(Predicted {
            a: predict_value(&model, &a)?,
            b: predict_value(&model, &b)?,
        })
    } else {
        None
    };
    let t = model.threshold.value();
    let output = CompareOutput {
        verdict: verdict(label, t),
        label,
        property: model.property_name.clone(),
        threshold: t,
        predicted,
    };
    if g.json {
        return print_json(&output);
    }
    println!("{}", output.verdict);
    if let Some(p) = &output.predicted {
        println!("predicted {}: A = {}, B = {}", output.property, p.a, p.b);
    }
    Ok(())
}

// ----------------------------------------------------------------- rank

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub rank: usize,
    pub candidate_id: String,
    pub wins: usize,
    pub same: usize,
    pub losses: usize,
    /// Direct-regression models only.
    pub predicted: Option<f64>,
}

pub fn rank(g: &Globals, args: &RankArgs) -> Result<(), CliError> {
    let model = DpcModel::load(&args.model)?;
    let (ids, rows) = files::read_candidates(&args.candidates, &model.feature_names)?;
    let ranked = rank_candidates(&model, &rows)?;
    let direct = model.kind == BackboneKind::DirectRegression;
    let mut table = Vec::with_capacity(ranked.len());
    for (i, r) in ranked.iter().enumerate() {
        table.push(RankRow {
            rank: i + 1,
            candidate_id: ids[r.index].clone(),
            wins: r.wins,
            same: r.same,
            losses: r.losses,
            predicted: if direct { Some(predict_value(&model, &rows[r.index])?) } else { None },
        });
    }
    if g.json {
        return print_json(&table);
    }
    let id_w = table.iter().map(|r| r.candidate_id.len()).max().unwrap_or(0).max("candidate".len());
    let mut head = format!("{:>4}  {:<id_w$}  {:>5}  {:>5}  {:>6}", "rank", "candidate", "wins", "same", "losses");
    if direct {
        let _ = write!(head, "  {:>12}", format!("pred {}", model.property_name));
    }
    println!("{head}");
    for r in &table {
        let mut line = format!(
            "{:>4}  {:<id_w$}  {:>5}  {:>5}  {:>6}",
            r.rank, r.candidate_id, r.wins, r.same, r.losses
        );
        if let Some(p) = r.predicted {
            let _ = write!(line, "  {p:>12.3}");
        }
        println!("{line}");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_strings() {
        assert_eq!(verdict(PairLabel::FirstHigher, 1.0), "A higher");
        assert_eq!(verdict(PairLabel::SecondHigher, 1.0), "B higher");
        assert_eq!(verdict(PairLabel::Same, 0.25), "same within threshold t=0.25");
    }

    #[test]
    fn backbone_lists() {
        assert_eq!(parse_list(&"all".to_string(), &BackboneKind::ALL).unwrap().len(), 3);
        assert_eq!(
            parse_list("gbt,mlp", &Architecture::ALL).unwrap(),
            vec![Architecture::Gbt, Architecture::Mlp]
        );
        assert!(parse_list("gbt,svm", &Architecture::ALL).is_err());
    }

    #[test]
    fn truth_names() {
        assert_eq!(parse_truth("linear").unwrap(), TruthFunction::Linear);
        assert_eq!(parse_truth("quadratic-interaction").unwrap(), TruthFunction::QuadraticInteraction);
        assert!(parse_truth("cubic").is_err());
    }

    #[test]
    fn compare_output_round_trips() {
        let out = CompareOutput {
            verdict: verdict(PairLabel::Same, 0.5),
            label: PairLabel::Same,
            property: "uts".into(),
            threshold: 0.5,
            predicted: Some(Predicted { a: 1.0, b: 1.25 }),
        };
        let text = serde_json::to_string(&out).unwrap();
        assert_eq!(serde_json::from_str::<CompareOutput>(&text).unwrap(), out);
    }
}
