//! From-scratch supervised learners: second-order regression trees, boosted
//! ensembles built from them, and a small ReLU MLP trained with Adam.

pub mod adam;
pub mod boost;
pub mod matrix;
pub mod mlp;
pub mod tree;

pub use adam::AdamState;
pub use boost::{
    argmax, fit_boosted_classifier, fit_boosted_classifier_weighted, fit_boosted_regressor, softmax,
    BoostParams, BoostedClassifier, BoostedRegressor, N_CLASSES,
};
pub use matrix::Matrix;
pub use mlp::{
    mlp_train, mlp_train_weighted, numerical_gradient_check, DenseLayer, FeatureScaler, MlpNetwork, MlpParams,
    Objective, Targets,
};
pub use tree::{fit_tree, RegressionTree, TreeNode, TreeParams};
