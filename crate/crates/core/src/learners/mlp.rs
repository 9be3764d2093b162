//! Fully-connected ReLU network trained with full-batch Adam.
//!
//! Layout: `d -> hidden[0] -> hidden[1] -> ... -> out`, ReLU after every
//! hidden layer, none after the output layer. Inputs are z-scored with
//! training statistics. Regression targets are z-scored for training and
//! mapped back on prediction.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::boost::{argmax, cross_entropy, softmax, N_CLASSES};
use super::matrix::Matrix;
use crate::error::{DpcError, Result};
use crate::stats::{mean, population_std};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Mean squared error on one output.
    Mse,
    /// Softmax cross-entropy over three logits.
    CrossEntropy,
}

impl Objective {
    pub fn n_outputs(self) -> usize {
        match self {
            Objective::Mse => 1,
            Objective::CrossEntropy => N_CLASSES,
        }
    }
}

/// Training targets; the variant selects the objective.
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    Values(&'a [f64]),
    Classes(&'a [usize]),
}

impl Targets<'_> {
    pub fn len(&self) -> usize {
        match self {
            Targets::Values(v) => v.len(),
            Targets::Classes(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn objective(&self) -> Objective {
        match self {
            Targets::Values(_) => Objective::Mse,
            Targets::Classes(_) => Objective::CrossEntropy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: vec![35, 35],
            learning_rate: 0.009,
            epochs: 2000,
        }
    }
}

/// Per-feature affine standardization `(x - mean) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl FeatureScaler {
    pub fn identity(d: usize) -> Self {
        FeatureScaler {
            mean: vec![0.0; d],
            scale: vec![1.0; d],
        }
    }

    /// Training mean and standard deviation; a zero-spread feature is only centered.
    pub fn fit(x: &Matrix) -> Self {
        let mut mean_v = Vec::with_capacity(x.n_cols());
        let mut scale = Vec::with_capacity(x.n_cols());
        for j in 0..x.n_cols() {
            let c = x.column(j);
            mean_v.push(mean(&c));
            let s = population_std(&c);
            scale.push(if s > 0.0 && s.is_finite() { s } else { 1.0 });
        }
        FeatureScaler { mean: mean_v, scale }
    }

    pub fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(x.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScaler {
    pub mean: f64,
    pub scale: f64,
}

impl TargetScaler {
    pub fn fit(y: &[f64]) -> Self {
        let s = population_std(y);
        TargetScaler {
            mean: mean(y),
            scale: if s > 0.0 && s.is_finite() { s } else { 1.0 },
        }
    }
}

/// Affine layer with row-major `weights` of shape `(n_out, n_in)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        DenseLayer {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            bias: vec![0.0; n_out],
        }
    }

    fn forward(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.n_out {
            let w = &self.weights[o * self.n_in..(o + 1) * self.n_in];
            let dot: f64 = w.iter().zip(input).map(|(a, b)| a * b).sum();
            out.push(dot + self.bias[o]);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpNetwork {
    pub objective: Objective,
    pub layers: Vec<DenseLayer>,
    pub feature_scaler: FeatureScaler,
    pub target_scaler: Option<TargetScaler>,
    /// Full-batch training loss at the start of each epoch.
    pub train_loss: Vec<f64>,
}

impl MlpNetwork {
    /// Network from explicit layers with identity target mapping.
    pub fn from_layers(
        objective: Objective,
        layers: Vec<DenseLayer>,
        feature_scaler: FeatureScaler,
    ) -> Result<Self> {
        let Some(first) = layers.first() else {
            return Err(DpcError::InvalidConfig("network needs at least one layer".into()));
        };
        if feature_scaler.mean.len() != first.n_in || feature_scaler.scale.len() != first.n_in {
            return Err(DpcError::DimensionMismatch {
                expected: first.n_in,
                actual: feature_scaler.mean.len(),
            });
        }
        for pair in layers.windows(2) {
            if pair[0].n_out != pair[1].n_in {
                return Err(DpcError::DimensionMismatch {
                    expected: pair[0].n_out,
                    actual: pair[1].n_in,
                });
            }
        }
        for l in &layers {
            if l.weights.len() != l.n_in * l.n_out || l.bias.len() != l.n_out {
                return Err(DpcError::InvalidConfig("layer parameter shape mismatch".into()));
            }
        }
        let out = layers.last().map_or(0, |l| l.n_out);
        if out != objective.n_outputs() {
            return Err(DpcError::DimensionMismatch {
                expected: objective.n_outputs(),
                actual: out,
            });
        }
        Ok(MlpNetwork {
            objective,
            layers,
            feature_scaler,
            target_scaler: None,
            train_loss: Vec::new(),
        })
    }

    /// He-uniform weights (`U(-sqrt(6/fan_in), sqrt(6/fan_in))`), zero biases.
    pub fn initialize(
        n_features: usize,
        hidden: &[usize],
        objective: Objective,
        feature_scaler: FeatureScaler,
        seed: u64,
    ) -> Result<Self> {
        if n_features == 0 || hidden.contains(&0) {
            return Err(DpcError::InvalidConfig("layer widths must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut widths = vec![n_features];
        widths.extend_from_slice(hidden);
        widths.push(objective.n_outputs());
        let layers = widths
            .windows(2)
            .map(|w| {
                let (n_in, n_out) = (w[0], w[1]);
                let limit = (6.0 / n_in as f64).sqrt();
                DenseLayer {
                    n_in,
                    n_out,
                    weights: (0..n_in * n_out).map(|_| rng.random_range(-limit..limit)).collect(),
                    bias: vec![0.0; n_out],
                }
            })
            .collect();
        MlpNetwork::from_layers(objective, layers, feature_scaler)
    }

    pub fn n_features(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameters flattened layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params(), "parameter count mismatch");
        let mut at = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[at..at + nw]);
            at += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&flat[at..at + nb]);
            at += nb;
        }
    }

    /// Raw network output: feature scaling, then affine/ReLU layers.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features() {
            return Err(DpcError::DimensionMismatch {
                expected: self.n_features(),
                actual: x.len(),
            });
        }
        let mut a = Vec::with_capacity(x.len());
        self.feature_scaler.apply(x, &mut a);
        let mut z = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward(&a, &mut z);
            if i < last {
                for v in z.iter_mut() {
                    *v = v.max(0.0);
                }
            }
            std::mem::swap(&mut a, &mut z);
        }
        Ok(a)
    }

    /// Regression output in target units.
    pub fn predict_value(&self, x: &[f64]) -> Result<f64> {
        let raw = self.forward(x)?[0];
        Ok(match self.target_scaler {
            Some(ts) => ts.mean + ts.scale * raw,
            None => raw,
        })
    }

    /// Class probabilities for a cross-entropy network.
    pub fn predict_proba(&self, x: &[f64]) -> Result<[f64; N_CLASSES]> {
        let raw = self.forward(x)?;
        let logits: [f64; N_CLASSES] = raw
            .as_slice()
            .try_into()
            .map_err(|_| DpcError::DimensionMismatch {
                expected: N_CLASSES,
                actual: raw.len(),
            })?;
        Ok(softmax(&logits))
    }

    pub fn predict_class(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.predict_proba(x)?))
    }

    fn training_targets(&self, targets: &Targets) -> Result<TrainTargets> {
        match (*targets, self.objective) {
            (Targets::Values(v), Objective::Mse) => Ok(TrainTargets::Values(match self.target_scaler {
                Some(ts) => v.iter().map(|y| (y - ts.mean) / ts.scale).collect(),
                None => v.to_vec(),
            })),
            (Targets::Classes(c), Objective::CrossEntropy) => {
                if let Some(&bad) = c.iter().find(|&&l| l >= N_CLASSES) {
                    return Err(DpcError::InvalidConfig(format!("class label {bad} out of range")));
                }
                Ok(TrainTargets::Classes(c.to_vec()))
            }
            _ => Err(DpcError::InvalidConfig("targets do not match the network objective".into())),
        }
    }

    /// Mean (optionally weighted) training loss and its gradient with respect
    /// to [`MlpNetwork::params`]. Targets are in user units.
    pub fn loss_and_gradient(
        &self,
        x: &Matrix,
        targets: &Targets,
        weights: Option<&[f64]>,
    ) -> Result<(f64, Vec<f64>)> {
        let tt = self.training_targets(targets)?;
        let scaled = self.scale_inputs(x)?;
        self.loss_grad_scaled(&scaled, &tt, weights)
    }

    fn scale_inputs(&self, x: &Matrix) -> Result<Vec<Vec<f64>>> {
        if x.n_cols() != self.n_features() {
            return Err(DpcError::DimensionMismatch {
                expected: self.n_features(),
                actual: x.n_cols(),
            });
        }
        Ok(x.rows()
            .map(|r| {
                let mut v = Vec::with_capacity(r.len());
                self.feature_scaler.apply(r, &mut v);
                v
            })
            .collect())
    }

    fn loss_grad_scaled(
        &self,
        inputs: &[Vec<f64>],
        targets: &TrainTargets,
        weights: Option<&[f64]>,
    ) -> Result<(f64, Vec<f64>)> {
        let n = inputs.len();
        if n == 0 {
            return Err(DpcError::EmptyDataset);
        }
        if targets.len() != n {
            return Err(DpcError::DimensionMismatch {
                expected: n,
                actual: targets.len(),
            });
        }
        if let Some(w) = weights {
            if w.len() != n {
                return Err(DpcError::DimensionMismatch {
                    expected: n,
                    actual: w.len(),
                });
            }
        }
        let total_w: f64 = weights.map_or(n as f64, |w| w.iter().sum());

        let n_layers = self.layers.len();
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> = self
            .layers
            .iter()
            .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
            .collect();
        // activations[0] is the input; activations[i + 1] the post-activation of layer i.
        let mut activations: Vec<Vec<f64>> = vec![Vec::new(); n_layers + 1];
        let mut delta = Vec::new();
        let mut next_delta = Vec::new();
        let mut loss = 0.0;

        for (i, input) in inputs.iter().enumerate() {
            let w_i = weights.map_or(1.0, |w| w[i]) / total_w;
            activations[0].clone_from(input);
            for (li, layer) in self.layers.iter().enumerate() {
                let (head, tail) = activations.split_at_mut(li + 1);
                layer.forward(&head[li], &mut tail[0]);
                if li + 1 < n_layers {
                    for v in tail[0].iter_mut() {
                        *v = v.max(0.0);
                    }
                }
            }
            let out = &activations[n_layers];
            delta.clear();
            match targets {
                TrainTargets::Values(y) => {
                    let r = out[0] - y[i];
                    loss += w_i * r * r;
                    delta.push(2.0 * w_i * r);
                }
                TrainTargets::Classes(c) => {
                    let logits = [out[0], out[1], out[2]];
                    loss += w_i * cross_entropy(&logits, c[i]);
                    let p = softmax(&logits);
                    for (k, pk) in p.iter().enumerate() {
                        let target = if k == c[i] { 1.0 } else { 0.0 };
                        delta.push(w_i * (pk - target));
                    }
                }
            }
            for li in (0..n_layers).rev() {
                let layer = &self.layers[li];
                let input = &activations[li];
                let (gw, gb) = &mut grads[li];
                for o in 0..layer.n_out {
                    let d = delta[o];
                    gb[o] += d;
                    if d != 0.0 {
                        let row = &mut gw[o * layer.n_in..(o + 1) * layer.n_in];
                        for (g, a) in row.iter_mut().zip(input) {
                            *g += d * a;
                        }
                    }
                }
                if li > 0 {
                    next_delta.clear();
                    next_delta.resize(layer.n_in, 0.0);
                    for o in 0..layer.n_out {
                        let d = delta[o];
                        if d == 0.0 {
                            continue;
                        }
                        let row = &layer.weights[o * layer.n_in..(o + 1) * layer.n_in];
                        for (nd, w) in next_delta.iter_mut().zip(row) {
                            *nd += d * w;
                        }
                    }
                    // ReLU derivative, taken as 0 at 0
                    for (nd, a) in next_delta.iter_mut().zip(input) {
                        if *a <= 0.0 {
                            *nd = 0.0;
                        }
                    }
                    std::mem::swap(&mut delta, &mut next_delta);
                }
            }
        }
        let mut flat = Vec::with_capacity(self.n_params());
        for (gw, gb) in grads {
            flat.extend(gw);
            flat.extend(gb);
        }
        Ok((loss, flat))
    }
}

enum TrainTargets {
    Values(Vec<f64>),
    Classes(Vec<usize>),
}

impl TrainTargets {
    fn len(&self) -> usize {
        match self {
            TrainTargets::Values(v) => v.len(),
            TrainTargets::Classes(c) => c.len(),
        }
    }
}

pub fn mlp_train(x: &Matrix, targets: Targets, params: &MlpParams, seed: u64) -> Result<MlpNetwork> {
    mlp_train_weighted(x, targets, None, params, seed)
}

/// Full-batch Adam from a seeded He-uniform start. The loss trace is
/// reproducible bit-for-bit for a given seed.
pub fn mlp_train_weighted(
    x: &Matrix,
    targets: Targets,
    weights: Option<&[f64]>,
    params: &MlpParams,
    seed: u64,
) -> Result<MlpNetwork> {
    if x.n_rows() == 0 {
        return Err(DpcError::EmptyDataset);
    }
    if targets.len() != x.n_rows() {
        return Err(DpcError::DimensionMismatch {
            expected: x.n_rows(),
            actual: targets.len(),
        });
    }
    if !(params.learning_rate.is_finite() && params.learning_rate >= 0.0) {
        return Err(DpcError::InvalidConfig(format!(
            "learning rate must be finite and non-negative, got {}",
            params.learning_rate
        )));
    }
    let objective = targets.objective();
    let mut net = MlpNetwork::initialize(
        x.n_cols(),
        &params.hidden,
        objective,
        FeatureScaler::fit(x),
        seed,
    )?;
    if let Targets::Values(y) = targets {
        net.target_scaler = Some(TargetScaler::fit(y));
    }
    let tt = net.training_targets(&targets)?;
    let inputs = net.scale_inputs(x)?;
    let mut adam = AdamState::new(net.n_params(), params.learning_rate);
    let mut flat = net.params();
    let mut trace = Vec::with_capacity(params.epochs);
    for epoch in 0..params.epochs {
        let (loss, grad) = net.loss_grad_scaled(&inputs, &tt, weights)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(DpcError::NonFiniteLoss { epoch });
        }
        trace.push(loss);
        adam.step(&mut flat, &grad);
        net.set_params(&flat);
    }
    net.train_loss = trace;
    Ok(net)
}

/// Central finite differences against backpropagation. Returns the largest
/// `|g_fd - g_an| / max(1e-8, |g_fd| + |g_an|)` over all parameters.
pub fn numerical_gradient_check(
    net: &MlpNetwork,
    x: &Matrix,
    targets: &Targets,
    epsilon: f64,
) -> Result<f64> {
    let (_, analytic) = net.loss_and_gradient(x, targets, None)?;
    let base = net.params();
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for (k, &g_an) in analytic.iter().enumerate() {
        let mut p = base.clone();
        p[k] = base[k] + epsilon;
        probe.set_params(&p);
        let (up, _) = probe.loss_and_gradient(x, targets, None)?;
        p[k] = base[k] - epsilon;
        probe.set_params(&p);
        let (down, _) = probe.loss_and_gradient(x, targets, None)?;
        let g_fd = (up - down) / (2.0 * epsilon);
        let rel = (g_fd - g_an).abs() / (g_fd.abs() + g_an.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}
