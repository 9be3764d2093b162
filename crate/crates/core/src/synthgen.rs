//! Deterministic generator of multi-experiment process/property datasets
//! with a known noiseless ground truth.
//!
//! Each experiment draws a feature center (feed rate, rotation rate, billet
//! temperature, heat-treatment time) plus homogenized/temper flags, and one
//! offset `e ~ N(0, sigma_experiment^2)` per property. Each sample jitters
//! the continuous features around the center and measures
//! `y = g(x) + e + N(0, sigma_sample^2)`.
//!
//! The ground truth `g` is quadratic in feed rate with a feed x rotation
//! interaction:
//!
//! ```text
//! g(x) = intercept + a*feed^2 + b*rotation + c*feed*rotation
//!        + d*heat_treat_time + e*homogenized + f*temper
//! ```
//!
//! Billet temperature does not enter `g`; it is a distractor feature.
//! Features and noise come from separate seeded streams, so changing only
//! the noise levels leaves every feature vector unchanged.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Experiment, Sample};
use crate::error::{DpcError, Result};
use crate::pairing::PairDataset;
use crate::seed::rng_for;
use crate::threshold::Threshold;

pub const FEATURE_NAMES: [&str; 6] = [
    "feed_rate",
    "rotation_rate",
    "billet_temp",
    "heat_treat_time",
    "homogenized",
    "temper",
];

const FEED: usize = 0;
const ROTATION: usize = 1;
const BILLET_TEMP: usize = 2;
const HEAT: usize = 3;
const HOMOGENIZED: usize = 4;
const TEMPER: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub low: f64,
    pub high: f64,
}

impl Range {
    fn width(&self) -> f64 {
        self.high - self.low
    }

    fn contains(&self, v: f64) -> bool {
        v >= self.low && v <= self.high
    }
}

/// Sampling ranges of the continuous features. Flags are always 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanges {
    /// mm/s
    pub feed_rate: Range,
    /// rpm
    pub rotation_rate: Range,
    /// deg C
    pub billet_temp: Range,
    /// hours
    pub heat_treat_time: Range,
}

impl Default for FeatureRanges {
    fn default() -> Self {
        FeatureRanges {
            feed_rate: Range { low: 1.0, high: 4.0 },
            rotation_rate: Range {
                low: 100.0,
                high: 300.0,
            },
            billet_temp: Range {
                low: 300.0,
                high: 480.0,
            },
            heat_treat_time: Range { low: 2.0, high: 24.0 },
        }
    }
}

impl FeatureRanges {
    fn continuous(&self) -> [(usize, Range); 4] {
        [
            (FEED, self.feed_rate),
            (ROTATION, self.rotation_rate),
            (BILLET_TEMP, self.billet_temp),
            (HEAT, self.heat_treat_time),
        ]
    }

    /// Whether a feature vector lies inside the configured box.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == FEATURE_NAMES.len()
            && self.continuous().iter().all(|(i, r)| r.contains(x[*i]))
            && [HOMOGENIZED, TEMPER].iter().all(|&i| x[i] == 0.0 || x[i] == 1.0)
    }
}

/// Coefficient presets for the ground-truth function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthFunction {
    /// Quadratic feed term plus feed x rotation interaction.
    QuadraticInteraction,
    /// Same intercept and linear terms, quadratic and interaction terms zeroed.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_experiments: usize,
    pub samples_per_experiment: usize,
    /// Std of the per-experiment property offset, property units.
    pub sigma_experiment: f64,
    /// Std of the per-sample measurement noise, property units.
    pub sigma_sample: f64,
    /// Per-sample jitter of continuous features, as a fraction of range width.
    pub jitter_fraction: f64,
    pub ranges: FeatureRanges,
    pub truth: TruthFunction,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_experiments: 20,
            samples_per_experiment: 10,
            sigma_experiment: 5.0,
            sigma_sample: 2.0,
            jitter_fraction: 0.1,
            ranges: FeatureRanges::default(),
            truth: TruthFunction::QuadraticInteraction,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(DpcError::InvalidConfig(msg));
        if self.n_experiments < 1 {
            return bad("n_experiments must be >= 1".into());
        }
        if self.samples_per_experiment < 1 {
            return bad("samples_per_experiment must be >= 1".into());
        }
        for (name, s) in [
            ("sigma_experiment", self.sigma_experiment),
            ("sigma_sample", self.sigma_sample),
            ("jitter_fraction", self.jitter_fraction),
        ] {
            if !(s.is_finite() && s >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {s}"));
            }
        }
        for (i, r) in self.ranges.continuous() {
            if !(r.low.is_finite() && r.high.is_finite() && r.low <= r.high) {
                return bad(format!("invalid range for {}: [{}, {}]", FEATURE_NAMES[i], r.low, r.high));
            }
        }
        Ok(())
    }
}

/// Noiseless property function of one property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyTruth {
    pub name: String,
    pub intercept: f64,
    pub feed_sq: f64,
    pub rotation: f64,
    pub feed_rotation: f64,
    pub heat_treat_time: f64,
    pub homogenized: f64,
    pub temper: f64,
}

impl PropertyTruth {
    /// `g(x)` for a feature vector in [`FEATURE_NAMES`] order.
    pub fn value(&self, x: &[f64]) -> f64 {
        let feed = x[FEED];
        let rot = x[ROTATION];
        self.intercept
            + self.feed_sq * feed * feed
            + self.rotation * rot
            + self.feed_rotation * feed * rot
            + self.heat_treat_time * x[HEAT]
            + self.homogenized * x[HOMOGENIZED]
            + self.temper * x[TEMPER]
    }

    fn linearized(mut self) -> Self {
        self.feed_sq = 0.0;
        self.feed_rotation = 0.0;
        self
    }
}

/// Ground truth for every generated property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub function: TruthFunction,
    pub properties: Vec<PropertyTruth>,
}

impl GroundTruth {
    pub fn new(function: TruthFunction) -> Self {
        // Spreads of a few hundred units over the default ranges, std roughly
        // a quarter of the spread for uts/yield.
        let presets = vec![
            PropertyTruth {
                name: "uts".into(),
                intercept: 420.0,
                feed_sq: 6.0,
                rotation: 0.15,
                feed_rotation: -0.05,
                heat_treat_time: 1.2,
                homogenized: 15.0,
                temper: 25.0,
            },
            PropertyTruth {
                name: "yield_strength".into(),
                intercept: 350.0,
                feed_sq: 4.5,
                rotation: 0.2,
                feed_rotation: -0.045,
                heat_treat_time: 1.5,
                homogenized: 10.0,
                temper: 30.0,
            },
            PropertyTruth {
                name: "max_load".into(),
                intercept: 1500.0,
                feed_sq: 14.0,
                rotation: 0.5,
                feed_rotation: -0.12,
                heat_treat_time: 2.5,
                homogenized: 40.0,
                temper: 55.0,
            },
        ];
        let properties = match function {
            TruthFunction::QuadraticInteraction => presets,
            TruthFunction::Linear => presets.into_iter().map(PropertyTruth::linearized).collect(),
        };
        GroundTruth { function, properties }
    }

    pub fn property(&self, name: &str) -> Result<&PropertyTruth> {
        self.properties
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| DpcError::UnknownProperty(name.to_string()))
    }

    pub fn property_names(&self) -> Vec<String> {
        self.properties.iter().map(|p| p.name.clone()).collect()
    }
}

fn uniform(rng: &mut ChaCha8Rng, r: Range) -> f64 {
    if r.width() > 0.0 {
        rng.random_range(r.low..=r.high)
    } else {
        r.low
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn generate(config: &SynthConfig) -> Result<(Dataset, GroundTruth)> {
    config.validate()?;
    let truth = GroundTruth::new(config.truth);
    let mut feature_rng = rng_for(config.seed, "synth/features");
    let mut noise_rng = rng_for(config.seed, "synth/noise");
    let exp_width = config.n_experiments.to_string().len().max(2);
    let sample_width = config.samples_per_experiment.to_string().len().max(2);

    let mut experiments = Vec::with_capacity(config.n_experiments);
    for e in 0..config.n_experiments {
        let id = format!("exp{:0w$}", e + 1, w = exp_width);
        let mut center = [0.0; 6];
        for (i, r) in config.ranges.continuous() {
            center[i] = uniform(&mut feature_rng, r);
        }
        center[HOMOGENIZED] = if feature_rng.random_bool(0.5) { 1.0 } else { 0.0 };
        center[TEMPER] = if feature_rng.random_bool(0.5) { 1.0 } else { 0.0 };
        let offsets: Vec<f64> = truth
            .properties
            .iter()
            .map(|_| config.sigma_experiment * normal(&mut noise_rng))
            .collect();

        let mut samples = Vec::with_capacity(config.samples_per_experiment);
        for s in 0..config.samples_per_experiment {
            let mut x = center;
            for (i, r) in config.ranges.continuous() {
                let half = config.jitter_fraction * r.width();
                let u: f64 = feature_rng.random_range(-1.0..=1.0);
                x[i] = (center[i] + u * half).clamp(r.low, r.high);
            }
            let properties = truth
                .properties
                .iter()
                .zip(&offsets)
                .map(|(p, off)| {
                    let noise = config.sigma_sample * normal(&mut noise_rng);
                    (p.name.clone(), p.value(&x) + off + noise)
                })
                .collect();
            samples.push(Sample {
                experiment_id: id.clone(),
                sample_id: format!("s{:0w$}", s + 1, w = sample_width),
                features: x.to_vec(),
                properties,
            });
        }
        experiments.push(Experiment { id, samples });
    }
    let ds = Dataset::new(
        experiments,
        FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        truth.property_names(),
    )?;
    Ok((ds, truth))
}

/// All ordered pairs of `ds`, labelled from the noiseless truth rather than
/// the measured property.
pub fn oracle_labels(ds: &Dataset, truth: &PropertyTruth, threshold: Threshold) -> Result<PairDataset> {
    if ds.n_features() != FEATURE_NAMES.len() {
        return Err(DpcError::DimensionMismatch {
            expected: FEATURE_NAMES.len(),
            actual: ds.n_features(),
        });
    }
    let samples = ds.samples_vec();
    let values = samples.iter().map(|s| truth.value(&s.features)).collect();
    PairDataset::exhaustive(samples, values, &truth.name, threshold)
}
