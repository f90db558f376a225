//! Seeded probabilistic binary classifiers and the competing set.
//!
//! A [`ScoreModel`] is a logistic regression or small tanh MLP with a
//! sigmoid output, trained by mini-batch SGD on log-loss. The seed fixes
//! both the weight initialization and the batch shuffling, so retraining
//! with the same `(data, config, seed)` reproduces the parameter vector
//! bit-for-bit; varying only the seed yields the ensemble whose
//! disagreement the multiplicity metrics quantify.
//!
//! [`build_competing_set`] keeps the models whose empirical error is within
//! `delta` of a reference model's error.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::seed::rng_from_seed;
use crate::tabular::EmbeddedDataset;

/// Current on-disk format version for serialized models.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Errors from training, evaluating, or assembling model sets.
#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("training set must contain both classes")]
    SingleClassTrainSet,
    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("input has dimension {got}, model expects {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("evaluation dataset is empty")]
    EmptyEvalSet,
    #[error("model list is empty")]
    EmptyModelList,
    #[error("reference index {index} out of range for {len} models")]
    BadReferenceIndex { index: usize, len: usize },
    #[error("delta must lie in (0, 1), got {0}")]
    BadDelta(f64),
    #[error("invalid hyperparameter: {0}")]
    BadHyperparameter(String),
    #[error("unsupported model format version {0}")]
    BadFormatVersion(u32),
    #[error("model deserialization failed: {0}")]
    Decode(#[from] serde_json::Error),
}

/// Anything that scores a point in the embedding space to a probability.
///
/// The predicted label follows the `p >= 0.5 => 1` rule, so an exact 0.5
/// maps to the positive class.
pub trait Predictor {
    /// Expected input dimension.
    fn input_dim(&self) -> usize;

    /// Probability of the positive class, in `[0, 1]`.
    ///
    /// Panics if `x.len() != self.input_dim()`.
    fn predict(&self, x: &[f64]) -> f64;

    /// Hard label under the `>= 0.5` threshold.
    fn predict_label(&self, x: &[f64]) -> u8 {
        u8::from(self.predict(x) >= 0.5)
    }
}

/// Model family of a [`ScoreModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Logistic,
    Mlp,
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub family: ModelFamily,
    /// Hidden layer widths; used by the MLP family only (1–2 layers).
    #[serde(default = "default_hidden")]
    pub hidden_widths: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// L2 penalty on weights (biases are not penalized).
    pub l2: f64,
}

fn default_hidden() -> Vec<usize> {
    vec![16]
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            family: ModelFamily::Logistic,
            hidden_widths: default_hidden(),
            learning_rate: 0.1,
            epochs: 30,
            batch_size: 16,
            l2: 1e-3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::BadHyperparameter(format!(
                "learning_rate {} must be positive",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(ModelError::BadHyperparameter("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(ModelError::BadHyperparameter(
                "batch_size must be >= 1".into(),
            ));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(ModelError::BadHyperparameter(format!(
                "l2 {} must be >= 0",
                self.l2
            )));
        }
        if self.family == ModelFamily::Mlp {
            if self.hidden_widths.is_empty() || self.hidden_widths.len() > 2 {
                return Err(ModelError::BadHyperparameter(
                    "mlp supports 1 or 2 hidden layers".into(),
                ));
            }
            if self.hidden_widths.iter().any(|&w| w == 0) {
                return Err(ModelError::BadHyperparameter(
                    "hidden widths must be positive".into(),
                ));
            }
        }
        Ok(())
    }
}

/// One dense layer, weights stored row-major as `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            biases: vec![0.0; out_dim],
        }
    }

    fn init_seeded(in_dim: usize, out_dim: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Self {
            in_dim,
            out_dim,
            weights,
            biases: vec![0.0; out_dim],
        }
    }

    fn forward(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.biases[o];
            for (w, x) in row.iter().zip(input) {
                acc += w * x;
            }
            out.push(acc);
        }
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(z)) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// A trained probabilistic binary classifier.
///
/// Layers before the last apply `tanh`; the final layer is a single unit
/// whose logit passes through the sigmoid. A logistic model has exactly one
/// layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreModel {
    format_version: u32,
    family: ModelFamily,
    input_dim: usize,
    layers: Vec<DenseLayer>,
    seed: u64,
    train_config: TrainConfig,
}

impl ScoreModel {
    /// A freshly initialized (untrained) model: weights uniform in
    /// `[-1/sqrt(fan_in), 1/sqrt(fan_in))` from the seed, biases zero.
    pub fn init(input_dim: usize, config: &TrainConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = rng_from_seed(seed);
        Ok(Self::init_with_rng(input_dim, config, seed, &mut rng))
    }

    fn init_with_rng(
        input_dim: usize,
        config: &TrainConfig,
        seed: u64,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Self {
        let mut dims = vec![input_dim];
        if config.family == ModelFamily::Mlp {
            dims.extend_from_slice(&config.hidden_widths);
        }
        dims.push(1);
        let layers = dims
            .windows(2)
            .map(|w| DenseLayer::init_seeded(w[0], w[1], rng))
            .collect();
        Self {
            format_version: MODEL_FORMAT_VERSION,
            family: config.family,
            input_dim,
            layers,
            seed,
            train_config: config.clone(),
        }
    }

    /// Hand-built logistic model; mostly useful for tests and diagnostics.
    pub fn logistic(weights: Vec<f64>, bias: f64) -> Self {
        let input_dim = weights.len();
        let layer = DenseLayer {
            in_dim: input_dim,
            out_dim: 1,
            weights,
            biases: vec![bias],
        };
        Self {
            format_version: MODEL_FORMAT_VERSION,
            family: ModelFamily::Logistic,
            input_dim,
            layers: vec![layer],
            seed: 0,
            train_config: TrainConfig {
                family: ModelFamily::Logistic,
                ..TrainConfig::default()
            },
        }
    }

    pub fn family(&self) -> ModelFamily {
        self.family
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn train_config(&self) -> &TrainConfig {
        &self.train_config
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    /// All parameters flattened in layer order (weights then biases).
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.biases);
        }
        out
    }

    /// Writes back a parameter vector produced by [`Self::flat_params`].
    pub fn set_flat_params(&mut self, params: &[f64]) {
        let mut cursor = 0;
        for layer in &mut self.layers {
            let w_len = layer.weights.len();
            layer.weights.copy_from_slice(&params[cursor..cursor + w_len]);
            cursor += w_len;
            let b_len = layer.biases.len();
            layer.biases.copy_from_slice(&params[cursor..cursor + b_len]);
            cursor += b_len;
        }
        assert_eq!(cursor, params.len(), "parameter vector length mismatch");
    }

    /// Pre-sigmoid output.
    fn logit(&self, x: &[f64]) -> f64 {
        assert_eq!(
            x.len(),
            self.input_dim,
            "input has dimension {}, model expects {}",
            x.len(),
            self.input_dim
        );
        let mut activ = x.to_vec();
        let mut buffer = Vec::new();
        let last = self.layers.len() - 1;
        for (idx, layer) in self.layers.iter().enumerate() {
            layer.forward(&activ, &mut buffer);
            if idx < last {
                for v in buffer.iter_mut() {
                    *v = v.tanh();
                }
            }
            std::mem::swap(&mut activ, &mut buffer);
        }
        activ[0]
    }

    /// Mean log-loss over `(xs, ys)` plus the L2 penalty on weights.
    pub fn loss(&self, xs: &[Vec<f64>], ys: &[u8], l2: f64) -> f64 {
        assert_eq!(xs.len(), ys.len());
        let mut total = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            let z = self.logit(x);
            total += softplus(z) - f64::from(y) * z;
        }
        let mut penalty = 0.0;
        for layer in &self.layers {
            for w in &layer.weights {
                penalty += w * w;
            }
        }
        total / xs.len() as f64 + 0.5 * l2 * penalty
    }

    /// Gradient of [`Self::loss`] with respect to [`Self::flat_params`].
    pub fn loss_gradient(&self, xs: &[Vec<f64>], ys: &[u8], l2: f64) -> Vec<f64> {
        assert_eq!(xs.len(), ys.len());
        let mut grads: Vec<DenseLayer> = self
            .layers
            .iter()
            .map(|l| DenseLayer::zeros(l.in_dim, l.out_dim))
            .collect();
        let inv_n = 1.0 / xs.len() as f64;
        let last = self.layers.len() - 1;

        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len() + 1);
        for (x, &y) in xs.iter().zip(ys) {
            activations.clear();
            activations.push(x.clone());
            let mut buffer = Vec::new();
            for (idx, layer) in self.layers.iter().enumerate() {
                layer.forward(activations.last().expect("nonempty"), &mut buffer);
                if idx < last {
                    for v in buffer.iter_mut() {
                        *v = v.tanh();
                    }
                }
                activations.push(buffer.clone());
            }
            let z = activations.last().expect("nonempty")[0];
            // d loss / d logit
            let mut delta = vec![(sigmoid(z) - f64::from(y)) * inv_n];
            for idx in (0..self.layers.len()).rev() {
                let layer = &self.layers[idx];
                let input = &activations[idx];
                let grad = &mut grads[idx];
                for o in 0..layer.out_dim {
                    grad.biases[o] += delta[o];
                    let grow = &mut grad.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (g, inp) in grow.iter_mut().zip(input) {
                        *g += delta[o] * inp;
                    }
                }
                if idx > 0 {
                    let mut next = vec![0.0; layer.in_dim];
                    for o in 0..layer.out_dim {
                        let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                        for (n, w) in next.iter_mut().zip(row) {
                            *n += delta[o] * w;
                        }
                    }
                    // input to this layer is tanh(pre-activation) of the previous
                    for (n, h) in next.iter_mut().zip(input) {
                        *n *= 1.0 - h * h;
                    }
                    delta = next;
                }
            }
        }

        for (grad, layer) in grads.iter_mut().zip(&self.layers) {
            for (g, w) in grad.weights.iter_mut().zip(&layer.weights) {
                *g += l2 * w;
            }
        }

        let mut flat = Vec::new();
        for grad in &grads {
            flat.extend_from_slice(&grad.weights);
            flat.extend_from_slice(&grad.biases);
        }
        flat
    }

    /// Serializes to the versioned JSON model document.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization cannot fail")
    }

    /// Parses a model document, checking the format version.
    pub fn from_json(doc: &str) -> Result<Self, ModelError> {
        let model: ScoreModel = serde_json::from_str(doc)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(ModelError::BadFormatVersion(model.format_version));
        }
        Ok(model)
    }
}

impl Predictor for ScoreModel {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }
}

/// Trains a model with mini-batch SGD on log-loss.
///
/// Deterministic in `(train, config, seed)`: the seed drives weight
/// initialization (uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in))`) and the
/// per-epoch shuffle, and the loop is single-threaded.
pub fn train_model(
    train: &EmbeddedDataset,
    config: &TrainConfig,
    seed: u64,
) -> Result<ScoreModel, ModelError> {
    config.validate()?;
    if train.is_empty() {
        return Err(ModelError::EmptyTrainSet);
    }
    let has_pos = train.labels().iter().any(|&y| y == 1);
    let has_neg = train.labels().iter().any(|&y| y == 0);
    if !has_pos || !has_neg {
        return Err(ModelError::SingleClassTrainSet);
    }

    let mut rng = rng_from_seed(seed);
    let mut model = ScoreModel::init_with_rng(train.dim(), config, seed, &mut rng);

    let n = train.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut params = model.flat_params();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let xs: Vec<Vec<f64>> = batch.iter().map(|&i| train.points()[i].clone()).collect();
            let ys: Vec<u8> = batch.iter().map(|&i| train.labels()[i]).collect();
            let grad = model.loss_gradient(&xs, &ys, config.l2);
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= config.learning_rate * g;
            }
            if params.iter().any(|p| !p.is_finite()) {
                return Err(ModelError::Diverged { epoch });
            }
            model.set_flat_params(&params);
        }
    }
    Ok(model)
}

/// Fraction of points whose predicted label differs from the true label.
pub fn empirical_error<P: Predictor + ?Sized>(
    model: &P,
    data: &EmbeddedDataset,
) -> Result<f64, ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptyEvalSet);
    }
    if data.dim() != model.input_dim() {
        return Err(ModelError::DimensionMismatch {
            got: data.dim(),
            expected: model.input_dim(),
        });
    }
    let mistakes = data
        .points()
        .iter()
        .zip(data.labels())
        .filter(|(x, &y)| model.predict_label(x) != y)
        .count();
    Ok(mistakes as f64 / data.len() as f64)
}

/// Models whose evaluation error is within `delta` of the reference model's.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompetingSet {
    members: Vec<ScoreModel>,
    member_errors: Vec<f64>,
    reference_index: usize,
    delta: f64,
    reference_error: f64,
}

impl CompetingSet {
    pub fn members(&self) -> &[ScoreModel] {
        &self.members
    }

    /// Test-set error of each member, aligned with [`Self::members`].
    pub fn member_errors(&self) -> &[f64] {
        &self.member_errors
    }

    /// Index of the reference model within [`Self::members`].
    pub fn reference_index(&self) -> usize {
        self.reference_index
    }

    pub fn reference(&self) -> &ScoreModel {
        &self.members[self.reference_index]
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn reference_error(&self) -> f64 {
        self.reference_error
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Filters `models` down to those with `err(m) <= err(reference) + delta`
/// on `eval`. The reference always survives its own filter.
///
/// `reference_index` addresses the reference model inside `models`.
pub fn build_competing_set(
    models: Vec<ScoreModel>,
    reference_index: usize,
    eval: &EmbeddedDataset,
    delta: f64,
) -> Result<CompetingSet, ModelError> {
    if models.is_empty() {
        return Err(ModelError::EmptyModelList);
    }
    if reference_index >= models.len() {
        return Err(ModelError::BadReferenceIndex {
            index: reference_index,
            len: models.len(),
        });
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(ModelError::BadDelta(delta));
    }
    let errors: Vec<f64> = models
        .iter()
        .map(|m| empirical_error(m, eval))
        .collect::<Result<_, _>>()?;
    let reference_error = errors[reference_index];

    let mut members = Vec::new();
    let mut member_errors = Vec::new();
    let mut new_reference_index = 0;
    for (idx, (model, &err)) in models.into_iter().zip(&errors).enumerate() {
        if err <= reference_error + delta {
            if idx == reference_index {
                new_reference_index = members.len();
            }
            members.push(model);
            member_errors.push(err);
        }
    }
    Ok(CompetingSet {
        members,
        member_errors,
        reference_index: new_reference_index,
        delta,
        reference_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{constant_model, embedded_from_raw, threshold_model, FixedPredictor};
    use proptest::prelude::*;

    fn xor_ish_data(n: usize) -> EmbeddedDataset {
        // Noisy linear-boundary data; seeds should disagree near the boundary.
        let mut rng = rng_from_seed(99);
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let x: f64 = rng.random_range(-1.5..1.5);
            let y: f64 = rng.random_range(-1.5..1.5);
            let noise: f64 = rng.random_range(-0.4..0.4);
            points.push(vec![x, y]);
            labels.push(u8::from(x + 0.5 * y + noise > 0.0));
        }
        if !labels.contains(&1) {
            labels[0] = 1;
        }
        if !labels.contains(&0) {
            labels[0] = 0;
        }
        embedded_from_raw(points, labels)
    }

    #[test]
    fn training_is_bit_deterministic() {
        let data = xor_ish_data(64);
        let config = TrainConfig::default();
        let a = train_model(&data, &config, 7).unwrap();
        let b = train_model(&data, &config, 7).unwrap();
        assert_eq!(a.flat_params(), b.flat_params());
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn separable_two_point_dataset_reaches_perfect_accuracy() {
        let data = embedded_from_raw(vec![vec![-1.0], vec![1.0]], vec![0, 1]);
        let config = TrainConfig {
            family: ModelFamily::Logistic,
            learning_rate: 0.5,
            epochs: 200,
            batch_size: 2,
            l2: 0.0,
            ..TrainConfig::default()
        };
        let model = train_model(&data, &config, 0).unwrap();
        assert_eq!(empirical_error(&model, &data).unwrap(), 0.0);
    }

    #[test]
    fn forty_seeds_give_forty_distinct_parameter_vectors() {
        let data = xor_ish_data(48);
        let config = TrainConfig {
            epochs: 5,
            ..TrainConfig::default()
        };
        let params: Vec<Vec<f64>> = (0..40)
            .map(|seed| train_model(&data, &config, seed).unwrap().flat_params())
            .collect();
        for i in 0..params.len() {
            for j in (i + 1)..params.len() {
                assert_ne!(params[i], params[j], "seeds {i} and {j} coincide");
            }
        }
    }

    #[test]
    fn train_rejects_empty_and_single_class() {
        let config = TrainConfig::default();
        let single = embedded_from_raw(vec![vec![0.0], vec![1.0]], vec![1, 1]);
        assert!(matches!(
            train_model(&single, &config, 0),
            Err(ModelError::SingleClassTrainSet)
        ));
    }

    #[test]
    fn training_divergence_is_reported_with_epoch() {
        let data = embedded_from_raw(vec![vec![1e3], vec![-1e3]], vec![1, 0]);
        let config = TrainConfig {
            family: ModelFamily::Logistic,
            learning_rate: 1e308,
            epochs: 3,
            batch_size: 2,
            l2: 1e308,
            ..TrainConfig::default()
        };
        match train_model(&data, &config, 0) {
            Err(ModelError::Diverged { epoch }) => assert!(epoch < 3),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn zero_weight_logistic_predicts_half_everywhere() {
        let model = ScoreModel::logistic(vec![0.0, 0.0], 0.0);
        assert_eq!(model.predict(&[3.0, -4.0]), 0.5);
        assert_eq!(model.predict_label(&[3.0, -4.0]), 1);
    }

    #[test]
    fn hand_set_logistic_matches_sigmoid() {
        let model = ScoreModel::logistic(vec![1.0], 0.0);
        assert_eq!(model.predict(&[0.0]), 0.5);
        assert!((model.predict(&[1.0]) - sigmoid(1.0)).abs() < 1e-15);
    }

    #[test]
    fn predictions_stay_in_unit_interval() {
        let data = xor_ish_data(32);
        let model = train_model(&data, &TrainConfig::default(), 3).unwrap();
        for point in data.points() {
            let p = model.predict(point);
            assert!((0.0..=1.0).contains(&p), "p = {p}");
        }
    }

    #[test]
    fn predict_label_threshold_rule() {
        let fixed = |value| FixedPredictor { dim: 1, value };
        assert_eq!(fixed(0.5).predict_label(&[0.0]), 1);
        assert_eq!(fixed(0.4999).predict_label(&[0.0]), 0);
        assert_eq!(fixed(0.7).predict_label(&[0.0]), 1);
    }

    #[test]
    fn empirical_error_counts_mistakes() {
        // Constant 0.5 predictor labels everything 1.
        let model = ScoreModel::logistic(vec![0.0], 0.0);
        let all_negative = embedded_from_raw(vec![vec![0.1], vec![0.2], vec![0.3]], vec![0, 0, 0]);
        assert_eq!(empirical_error(&model, &all_negative).unwrap(), 1.0);

        let mixed = embedded_from_raw(
            (0..10).map(|i| vec![i as f64]).collect(),
            vec![1, 1, 1, 0, 0, 0, 1, 1, 1, 1],
        );
        assert_eq!(empirical_error(&model, &mixed).unwrap(), 0.3);

        let all_positive = embedded_from_raw(vec![vec![0.0]; 10], vec![1; 10]);
        assert_eq!(empirical_error(&model, &all_positive).unwrap(), 0.0);
    }

    #[test]
    fn competing_set_filters_by_delta() {
        // Points 0..100 (centered), labels flip at index 10, so a threshold
        // model at index t makes |t - 10| mistakes.
        let eval = embedded_from_raw(
            (0..100).map(|i| vec![i as f64 - 50.0]).collect(),
            (0..100).map(|i| u8::from(i >= 10)).collect(),
        );
        let m_ref = threshold_model(20.0 - 50.0); // error 0.10
        let m1 = threshold_model(21.0 - 50.0); // error 0.11
        let m2 = threshold_model(23.0 - 50.0); // error 0.13
        assert_eq!(empirical_error(&m_ref, &eval).unwrap(), 0.10);
        assert_eq!(empirical_error(&m1, &eval).unwrap(), 0.11);
        assert_eq!(empirical_error(&m2, &eval).unwrap(), 0.13);

        let set = build_competing_set(vec![m_ref, m1, m2], 0, &eval, 0.02).unwrap();
        assert_eq!(set.reference_error(), 0.10);
        assert_eq!(set.len(), 2);
        assert_eq!(set.member_errors(), &[0.10, 0.11]);
        assert_eq!(set.reference_index(), 0);
    }

    #[test]
    fn competing_set_retains_all_when_delta_covers_spread() {
        let eval = embedded_from_raw(
            (0..100).map(|i| vec![i as f64 - 50.0]).collect(),
            (0..100).map(|i| u8::from(i >= 10)).collect(),
        );
        let models: Vec<ScoreModel> = (0..40)
            .map(|j| threshold_model(10.0 + (j % 2) as f64 - 50.0))
            .collect();
        let set = build_competing_set(models, 0, &eval, 0.02).unwrap();
        assert_eq!(set.len(), 40);
    }

    #[test]
    fn competing_set_degenerate_keeps_only_reference() {
        let eval = embedded_from_raw(
            (0..10).map(|i| vec![i as f64 - 5.0]).collect(),
            (0..10).map(|i| u8::from(i >= 5)).collect(),
        );
        let good = ScoreModel::logistic(vec![60.0], 60.0 * 0.5); // threshold -0.5: error 0
        let bad = constant_model(0.9); // error 0.5
        let set = build_competing_set(vec![good, bad], 0, &eval, 0.02).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.reference_index(), 0);
    }

    #[test]
    fn competing_set_monotone_in_delta() {
        let eval = embedded_from_raw(
            (0..50).map(|i| vec![i as f64 - 25.0]).collect(),
            (0..50).map(|i| u8::from(i >= 25)).collect(),
        );
        let models: Vec<ScoreModel> = (0..8)
            .map(|j| ScoreModel::logistic(vec![60.0], -60.0 * (j as f64 * 2.0 - 25.0 + 0.5)))
            .collect();
        let mut previous: Option<Vec<u64>> = None;
        for delta in [0.05, 0.1, 0.2, 0.4, 0.8] {
            let set = build_competing_set(models.clone(), 0, &eval, delta).unwrap();
            let seeds: Vec<u64> = set
                .members()
                .iter()
                .map(|m| m.flat_params()[1].to_bits())
                .collect();
            if let Some(prev) = &previous {
                for s in prev {
                    assert!(seeds.contains(s), "member lost when delta grew");
                }
            }
            previous = Some(seeds);
        }
    }

    #[test]
    fn competing_set_rejects_bad_inputs() {
        let eval = embedded_from_raw(vec![vec![0.0], vec![1.0]], vec![0, 1]);
        assert!(matches!(
            build_competing_set(vec![], 0, &eval, 0.02),
            Err(ModelError::EmptyModelList)
        ));
        let m = ScoreModel::logistic(vec![1.0], 0.0);
        assert!(matches!(
            build_competing_set(vec![m.clone()], 3, &eval, 0.02),
            Err(ModelError::BadReferenceIndex { .. })
        ));
        assert!(matches!(
            build_competing_set(vec![m], 0, &eval, 0.0),
            Err(ModelError::BadDelta(_))
        ));
    }

    #[test]
    fn model_json_round_trip() {
        let data = xor_ish_data(32);
        let config = TrainConfig {
            family: ModelFamily::Mlp,
            hidden_widths: vec![4],
            epochs: 3,
            ..TrainConfig::default()
        };
        let model = train_model(&data, &config, 11).unwrap();
        let doc = model.to_json();
        let back = ScoreModel::from_json(&doc).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn model_json_rejects_unknown_version() {
        let model = ScoreModel::logistic(vec![1.0], 0.0);
        let doc = model.to_json().replace("\"format_version\": 1", "\"format_version\": 99");
        assert!(matches!(
            ScoreModel::from_json(&doc),
            Err(ModelError::BadFormatVersion(99))
        ));
    }

    fn finite_difference_check(model: &ScoreModel, xs: &[Vec<f64>], ys: &[u8], l2: f64) {
        let analytic = model.loss_gradient(xs, ys, l2);
        let mut probe = model.clone();
        let params = model.flat_params();
        let step = 1e-5;
        for i in 0..params.len() {
            let mut plus = params.clone();
            plus[i] += step;
            probe.set_flat_params(&plus);
            let lp = probe.loss(xs, ys, l2);
            let mut minus = params.clone();
            minus[i] -= step;
            probe.set_flat_params(&minus);
            let lm = probe.loss(xs, ys, l2);
            let numeric = (lp - lm) / (2.0 * step);
            let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
            let rel = (analytic[i] - numeric).abs() / denom;
            assert!(
                rel < 1e-4,
                "param {i}: analytic {} vs numeric {} (rel {rel})",
                analytic[i],
                numeric
            );
        }
    }

    #[test]
    fn gradients_match_finite_differences_both_families() {
        let mut rng = rng_from_seed(2024);
        for case in 0..10 {
            let n = rng.random_range(2..6);
            let d = rng.random_range(1..4);
            let xs: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            let ys: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
            let l2 = if case % 2 == 0 { 0.0 } else { 0.01 };

            let logistic = ScoreModel::logistic(
                (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
                rng.random_range(-0.5..0.5),
            );
            finite_difference_check(&logistic, &xs, &ys, l2);

            let data = embedded_from_raw(xs.clone(), {
                let mut labels = ys.clone();
                labels[0] = 1;
                if labels.len() > 1 {
                    labels[1] = 0;
                }
                labels
            });
            let config = TrainConfig {
                family: ModelFamily::Mlp,
                hidden_widths: if case % 2 == 0 { vec![3] } else { vec![3, 2] },
                epochs: 1,
                ..TrainConfig::default()
            };
            let mlp = train_model(&data, &config, case as u64).unwrap();
            finite_difference_check(&mlp, &xs, &ys, l2);
        }
    }

    proptest! {
        // |sigmoid(a) - sigmoid(b)| <= |a - b| / 4, so the logistic family is
        // 1/4-Lipschitz in its logit.
        #[test]
        fn logistic_quarter_lipschitz_in_logit(
            w in proptest::collection::vec(-3.0f64..3.0, 1..5),
            b in -2.0f64..2.0,
            x in proptest::collection::vec(-5.0f64..5.0, 5),
            y in proptest::collection::vec(-5.0f64..5.0, 5),
        ) {
            let d = w.len();
            let model = ScoreModel::logistic(w.clone(), b);
            let xa = &x[..d];
            let xb = &y[..d];
            let gap = (model.predict(xa) - model.predict(xb)).abs();
            let logit_gap: f64 = w.iter().zip(xa.iter().zip(xb)).map(|(wi, (a, b))| wi * (a - b)).sum();
            prop_assert!(gap <= 0.25 * logit_gap.abs() + 1e-12);
        }
    }
}
