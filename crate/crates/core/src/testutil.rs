//! Shared fixtures for unit tests.

use crate::model::ScoreModel;
use crate::tabular::{encode, fit_encoder, ColumnKind, Dataset, EmbeddedDataset, Schema, Value};

/// Builds an `EmbeddedDataset` whose points equal `points` verbatim.
///
/// Goes through the public encode pipeline with a two-point fitting frame
/// whose per-coordinate mean is 0 and population std is 1, so z-scoring is
/// the identity.
pub(crate) fn embedded_from_raw(points: Vec<Vec<f64>>, labels: Vec<u8>) -> EmbeddedDataset {
    let dim = points[0].len();
    let schema = Schema::new(
        (0..dim)
            .map(|i| (format!("x{i}"), ColumnKind::Numeric))
            .collect(),
        "y",
        "1",
    )
    .unwrap();
    let rows: Vec<Vec<Value>> = points
        .iter()
        .map(|p| p.iter().map(|&v| Value::Number(v)).collect())
        .collect();
    let ds = Dataset::new(schema.clone(), rows, labels).unwrap();
    let frame_rows = vec![
        vec![Value::Number(1.0); dim],
        vec![Value::Number(-1.0); dim],
    ];
    let frame = Dataset::new(schema, frame_rows, vec![0, 1]).unwrap();
    let enc = fit_encoder(&frame).unwrap();
    encode(&ds, &enc).unwrap()
}

/// Constant-probability model built by solving `sigmoid(b) = p`.
pub(crate) fn constant_model(p: f64) -> ScoreModel {
    let b = (p / (1.0 - p)).ln();
    ScoreModel::logistic(vec![0.0], b)
}

/// Threshold model on 1-d points: labels 1 iff `x >= t` (steep logistic).
pub(crate) fn threshold_model(t: f64) -> ScoreModel {
    ScoreModel::logistic(vec![60.0], -60.0 * t)
}

/// A predictor with a hardwired output, for exercising label rules.
pub(crate) struct FixedPredictor {
    pub dim: usize,
    pub value: f64,
}

impl crate::model::Predictor for FixedPredictor {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn predict(&self, _: &[f64]) -> f64 {
        self.value
    }
}
