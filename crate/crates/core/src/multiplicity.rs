//! Per-point and aggregate multiplicity metrics over a prediction matrix.
//!
//! Given the m x n matrix of member probabilities over n evaluation points,
//! this module computes, per point:
//!
//! - arbitrariness flag: some pair of members assigns different labels;
//! - pairwise disagreement: fraction of ordered member pairs whose labels
//!   differ, `2a(m-a) / (m(m-1))` with `a` the count of positive labels;
//! - prediction variance: population variance (1/m normalization) of the
//!   member probabilities;
//! - prediction range: max minus min of the member probabilities;
//!
//! and, across points, the arbitrariness rate, the discrepancy (largest
//! per-competitor label-flip fraction against the reference row), and the
//! per-point metric averages. Label-based metrics are derived from integer
//! counts so results do not depend on float accumulation order.

use serde::{Deserialize, Serialize};

use crate::model::{CompetingSet, ModelError, Predictor};
use crate::tabular::EmbeddedDataset;

/// Errors from assembling or summarizing prediction matrices.
#[derive(Debug, thiserror::Error)]
pub enum MultiplicityError {
    #[error("prediction matrix must have at least one model row")]
    NoModels,
    #[error("prediction matrix must have at least one point")]
    NoPoints,
    #[error("matrix row {row} has {got} entries, expected {expected}")]
    RaggedMatrix {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("probability {value} at ({row}, {col}) outside [0, 1]")]
    OutOfRange { row: usize, col: usize, value: f64 },
    #[error("reference index {index} out of range for {rows} rows")]
    BadReferenceIndex { index: usize, rows: usize },
    #[error("point_ids length {got} does not match {expected} points")]
    BadPointIds { got: usize, expected: usize },
    #[error("pairwise disagreement needs at least 2 models")]
    TooFewModels,
    #[error("accuracies length {got} does not match {expected} models")]
    BadAccuracies { got: usize, expected: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Probabilities of the competing-set members over the evaluation points.
///
/// Rows are models, columns are points; `ref_index` marks the reference
/// model's row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionMatrix {
    probs: Vec<Vec<f64>>,
    ref_index: usize,
    point_ids: Vec<String>,
}

impl PredictionMatrix {
    /// Validates shape, entry range, and id alignment.
    pub fn new(
        probs: Vec<Vec<f64>>,
        ref_index: usize,
        point_ids: Vec<String>,
    ) -> Result<Self, MultiplicityError> {
        if probs.is_empty() {
            return Err(MultiplicityError::NoModels);
        }
        let n = probs[0].len();
        if n == 0 {
            return Err(MultiplicityError::NoPoints);
        }
        for (row, entries) in probs.iter().enumerate() {
            if entries.len() != n {
                return Err(MultiplicityError::RaggedMatrix {
                    row,
                    got: entries.len(),
                    expected: n,
                });
            }
            for (col, &p) in entries.iter().enumerate() {
                if !(0.0..=1.0).contains(&p) {
                    return Err(MultiplicityError::OutOfRange { row, col, value: p });
                }
            }
        }
        if ref_index >= probs.len() {
            return Err(MultiplicityError::BadReferenceIndex {
                index: ref_index,
                rows: probs.len(),
            });
        }
        if point_ids.len() != n {
            return Err(MultiplicityError::BadPointIds {
                got: point_ids.len(),
                expected: n,
            });
        }
        Ok(Self {
            probs,
            ref_index,
            point_ids,
        })
    }

    pub fn n_models(&self) -> usize {
        self.probs.len()
    }

    pub fn n_points(&self) -> usize {
        self.probs[0].len()
    }

    pub fn ref_index(&self) -> usize {
        self.ref_index
    }

    pub fn point_ids(&self) -> &[String] {
        &self.point_ids
    }

    pub fn probs(&self) -> &[Vec<f64>] {
        &self.probs
    }

    /// Count of members labeling point `j` positive (`p >= 0.5`).
    fn positive_count(&self, j: usize) -> usize {
        self.probs.iter().filter(|row| row[j] >= 0.5).count()
    }
}

/// Canonical per-point id used across reports: `p` + zero-padded index.
pub fn point_id(index: usize) -> String {
    format!("p{index:06}")
}

/// Evaluates every competing-set member on every point.
pub fn prediction_matrix(
    set: &CompetingSet,
    points: &EmbeddedDataset,
) -> Result<PredictionMatrix, MultiplicityError> {
    if points.is_empty() {
        return Err(MultiplicityError::NoPoints);
    }
    let expected = set.reference().input_dim();
    if points.dim() != expected {
        return Err(MultiplicityError::Model(ModelError::DimensionMismatch {
            got: points.dim(),
            expected,
        }));
    }
    let probs = set
        .members()
        .iter()
        .map(|model| points.points().iter().map(|x| model.predict(x)).collect())
        .collect();
    let point_ids = (0..points.len()).map(point_id).collect();
    PredictionMatrix::new(probs, set.reference_index(), point_ids)
}

/// Per-point conflicting-label flags and their mean.
///
/// A point is flagged when at least two member labels differ there; with a
/// single model every flag is 0.
pub fn arbitrariness(matrix: &PredictionMatrix) -> (Vec<u8>, f64) {
    let m = matrix.n_models();
    let flags: Vec<u8> = (0..matrix.n_points())
        .map(|j| {
            let a = matrix.positive_count(j);
            u8::from(a > 0 && a < m)
        })
        .collect();
    let rate = flags.iter().map(|&f| usize::from(f)).sum::<usize>() as f64 / flags.len() as f64;
    (flags, rate)
}

/// Largest fraction of label flips any single competitor achieves against
/// the reference row. Zero when the reference is the only member.
pub fn discrepancy(matrix: &PredictionMatrix) -> f64 {
    let n = matrix.n_points();
    let ref_labels: Vec<u8> = (0..n)
        .map(|j| u8::from(matrix.probs[matrix.ref_index][j] >= 0.5))
        .collect();
    let mut worst = 0usize;
    for (i, row) in matrix.probs.iter().enumerate() {
        if i == matrix.ref_index {
            continue;
        }
        let flips = row
            .iter()
            .zip(&ref_labels)
            .filter(|(&p, &r)| u8::from(p >= 0.5) != r)
            .count();
        worst = worst.max(flips);
    }
    worst as f64 / n as f64
}

/// Per-point fraction of ordered member pairs with differing labels.
pub fn pairwise_disagreement(matrix: &PredictionMatrix) -> Result<Vec<f64>, MultiplicityError> {
    let m = matrix.n_models();
    if m < 2 {
        return Err(MultiplicityError::TooFewModels);
    }
    let denom = (m * (m - 1)) as f64;
    Ok((0..matrix.n_points())
        .map(|j| {
            let a = matrix.positive_count(j);
            (2 * a * (m - a)) as f64 / denom
        })
        .collect())
}

/// Per-point population variance (1/m) of member probabilities.
pub fn prediction_variance(matrix: &PredictionMatrix) -> Vec<f64> {
    let m = matrix.n_models() as f64;
    (0..matrix.n_points())
        .map(|j| {
            let mut sum = 0.0;
            for row in &matrix.probs {
                sum += row[j];
            }
            let mean = sum / m;
            let mut ss = 0.0;
            for row in &matrix.probs {
                ss += (row[j] - mean) * (row[j] - mean);
            }
            ss / m
        })
        .collect()
}

/// Per-point max minus min of member probabilities.
pub fn prediction_range(matrix: &PredictionMatrix) -> Vec<f64> {
    (0..matrix.n_points())
        .map(|j| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for row in &matrix.probs {
                lo = lo.min(row[j]);
                hi = hi.max(row[j]);
            }
            hi - lo
        })
        .collect()
}

/// One evaluation point's multiplicity metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMultiplicity {
    pub point_id: String,
    pub arbitrariness: u8,
    pub pairwise_disagreement: f64,
    pub prediction_variance: f64,
    pub prediction_range: f64,
}

/// Ensemble-level summary of the per-point metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplicityAggregates {
    pub arbitrariness_rate: f64,
    pub discrepancy: f64,
    pub avg_pairwise_disagreement: f64,
    pub avg_prediction_variance: f64,
    pub avg_prediction_range: f64,
    pub mean_model_accuracy: f64,
}

/// Full multiplicity report: per-point rows plus aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplicityReport {
    pub n_models: usize,
    pub n_points: usize,
    pub aggregate: MultiplicityAggregates,
    pub per_point: Vec<PointMultiplicity>,
}

impl MultiplicityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn from_json(doc: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(doc)
    }

    /// One CSV row per point.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(
            "point_id,arbitrariness,pairwise_disagreement,prediction_variance,prediction_range\n",
        );
        for row in &self.per_point {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.point_id,
                row.arbitrariness,
                row.pairwise_disagreement,
                row.prediction_variance,
                row.prediction_range
            ));
        }
        out
    }
}

/// Assembles the per-point metrics and their aggregates.
///
/// `accuracies` holds one test accuracy per matrix row. A single-model
/// matrix yields all-zero multiplicity values.
pub fn multiplicity_report(
    matrix: &PredictionMatrix,
    accuracies: &[f64],
) -> Result<MultiplicityReport, MultiplicityError> {
    let m = matrix.n_models();
    let n = matrix.n_points();
    if accuracies.len() != m {
        return Err(MultiplicityError::BadAccuracies {
            got: accuracies.len(),
            expected: m,
        });
    }
    let (flags, rate) = arbitrariness(matrix);
    let pd = if m >= 2 {
        pairwise_disagreement(matrix)?
    } else {
        vec![0.0; n]
    };
    let pv = prediction_variance(matrix);
    let pr = prediction_range(matrix);
    let disc = discrepancy(matrix);

    let per_point: Vec<PointMultiplicity> = (0..n)
        .map(|j| PointMultiplicity {
            point_id: matrix.point_ids[j].clone(),
            arbitrariness: flags[j],
            pairwise_disagreement: pd[j],
            prediction_variance: pv[j],
            prediction_range: pr[j],
        })
        .collect();

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let aggregate = MultiplicityAggregates {
        arbitrariness_rate: rate,
        discrepancy: disc,
        avg_pairwise_disagreement: mean(&pd),
        avg_prediction_variance: mean(&pv),
        avg_prediction_range: mean(&pr),
        mean_model_accuracy: mean(accuracies),
    };
    Ok(MultiplicityReport {
        n_models: m,
        n_points: n,
        aggregate,
        per_point,
    })
}
