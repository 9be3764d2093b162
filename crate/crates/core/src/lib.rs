//! Differential property classification.
//!
//! Given two candidate process-parameter vectors for a manufacturing run,
//! predict whether the first yields a higher value of a chosen material
//! property, the second does, or both land within a threshold `t` of each
//! other. Models are trained on small multi-experiment datasets with
//! gradient-boosted trees or a small MLP behind one of three backbones.

pub mod backbones;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod learners;
pub mod pairing;
pub mod seed;
pub mod stats;
pub mod synthgen;
pub mod threshold;

pub use backbones::{
    predict_pair, predict_value, rank_candidates, train_backbone, Architecture, BackboneKind, DpcModel,
    Hyperparams, PairPredictor, RankedCandidate,
};
pub use dataset::{load_dataset, parse_dataset, split_by_experiment, Dataset, Experiment, Sample};
pub use error::{DpcError, Result};
pub use eval::{confidence_interval, evaluate, learning_curve, repeated_eval, EvalReport, LearningCurve};
pub use pairing::{build_pair_dataset, class_balance, label_pair, subsample_pairs, PairDataset, PairLabel};
pub use synthgen::{generate, oracle_labels, GroundTruth, SynthConfig};
pub use threshold::{compute_threshold, Threshold};
