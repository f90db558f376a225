//! Rank statistics relating consistency scores to evaluated multiplicity.
//!
//! [`spearman`] is the Pearson correlation of average ranks (the covariance
//! form), which stays valid under ties; on tie-free data it agrees with the
//! classic `1 - 6 sum d_i^2 / (n (n^2 - 1))` formula. [`correlate_report`]
//! assembles the 2 x 4 table of absolute correlations between each measure
//! (consistency score, predicted probability) and each per-point
//! multiplicity metric.

use serde::{Deserialize, Serialize};

use crate::multiplicity::MultiplicityReport;

/// Errors from rank-correlation computations.
#[derive(Debug, thiserror::Error)]
pub enum StatsError {
    #[error("input contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("inputs have lengths {x} and {y}")]
    LengthMismatch { x: usize, y: usize },
    #[error("need at least 2 observations, got {0}")]
    TooFew(usize),
    #[error("correlation undefined: input column is constant")]
    ConstantInput,
    #[error("point sets are misaligned: {0}")]
    Misaligned(String),
}

/// Ranks 1..n with ties assigned the average of their positional ranks.
pub fn average_ranks(values: &[f64]) -> Result<Vec<f64>, StatsError> {
    if values.is_empty() {
        return Err(StatsError::TooFew(0));
    }
    for (i, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(StatsError::NonFinite(i));
        }
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end (0-based) share the average 1-based rank
        let avg = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    Ok(ranks)
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mean_x;
        let dy = b - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(StatsError::ConstantInput);
    }
    Ok((cov / (var_x * var_y).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation: Pearson correlation of the average ranks.
///
/// Errors on mismatched lengths, fewer than two observations, non-finite
/// values, or a constant input (undefined correlation).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch {
            x: x.len(),
            y: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(StatsError::TooFew(x.len()));
    }
    let rx = average_ranks(x)?;
    let ry = average_ranks(y)?;
    pearson(&rx, &ry)
}

/// Absolute correlations of one measure against the four per-point metrics.
///
/// `None` marks an undefined cell (constant column on either side).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCorrelations {
    pub arbitrariness: Option<f64>,
    pub pairwise_disagreement: Option<f64>,
    pub prediction_variance: Option<f64>,
    pub prediction_range: Option<f64>,
}

impl MetricCorrelations {
    pub fn cells(&self) -> [Option<f64>; 4] {
        [
            self.arbitrariness,
            self.pairwise_disagreement,
            self.prediction_variance,
            self.prediction_range,
        ]
    }
}

/// The 2 x 4 table of absolute Spearman correlations between the two
/// measures and the per-point multiplicity metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub n_points: usize,
    pub consistency: MetricCorrelations,
    pub predicted_probability: MetricCorrelations,
}

impl CorrelationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn from_json(doc: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(doc)
    }

    /// Plain-text table with one row per measure.
    pub fn render_text(&self) -> String {
        let fmt = |cell: Option<f64>| match cell {
            Some(v) => format!("{v:.3}"),
            None => "-".to_string(),
        };
        let mut out = String::new();
        out.push_str(&format!(
            "{:<14} {:>14} {:>22} {:>20} {:>17}\n",
            "Measure",
            "Arbitrariness",
            "Pairwise Disagreement",
            "Prediction Variance",
            "Prediction Range"
        ));
        for (name, row) in [
            ("Consistency", &self.consistency),
            ("Pred. Prob.", &self.predicted_probability),
        ] {
            let c = row.cells();
            out.push_str(&format!(
                "{:<14} {:>14} {:>22} {:>20} {:>17}\n",
                name,
                fmt(c[0]),
                fmt(c[1]),
                fmt(c[2]),
                fmt(c[3])
            ));
        }
        out.push_str(&format!(
            "\nn = {} points; cells are absolute Spearman correlations ('-' = undefined)\n",
            self.n_points
        ));
        out
    }

    /// True when the consistency row beats or ties the predicted-probability
    /// row on at least `wins_needed` defined cells.
    pub fn consistency_wins(&self, wins_needed: usize) -> bool {
        self.count_consistency_wins() >= wins_needed
    }

    pub fn count_consistency_wins(&self) -> usize {
        self.consistency
            .cells()
            .iter()
            .zip(self.predicted_probability.cells())
            .filter(|(c, p)| match (c, p) {
                (Some(c), Some(p)) => c >= p,
                _ => false,
            })
            .count()
    }
}

fn abs_corr_or_none(measure: &[f64], metric: &[f64]) -> Result<Option<f64>, StatsError> {
    match spearman(measure, metric) {
        Ok(rho) => Ok(Some(rho.abs())),
        Err(StatsError::ConstantInput) => Ok(None),
        Err(other) => Err(other),
    }
}

/// Builds the correlation table from aligned per-point series.
///
/// `consistency` and `pred_prob` must align with `multiplicity.per_point`;
/// constant columns produce undefined (`None`) cells instead of failing the
/// whole report.
pub fn correlate_report(
    consistency: &[f64],
    pred_prob: &[f64],
    multiplicity: &MultiplicityReport,
) -> Result<CorrelationReport, StatsError> {
    let n = multiplicity.per_point.len();
    if consistency.len() != n || pred_prob.len() != n {
        return Err(StatsError::Misaligned(format!(
            "consistency has {} points, pred_prob {}, multiplicity {}",
            consistency.len(),
            pred_prob.len(),
            n
        )));
    }
    if n < 2 {
        return Err(StatsError::TooFew(n));
    }

    let flags: Vec<f64> = multiplicity
        .per_point
        .iter()
        .map(|p| f64::from(p.arbitrariness))
        .collect();
    let pd: Vec<f64> = multiplicity
        .per_point
        .iter()
        .map(|p| p.pairwise_disagreement)
        .collect();
    let pv: Vec<f64> = multiplicity
        .per_point
        .iter()
        .map(|p| p.prediction_variance)
        .collect();
    let pr: Vec<f64> = multiplicity
        .per_point
        .iter()
        .map(|p| p.prediction_range)
        .collect();

    let row = |measure: &[f64]| -> Result<MetricCorrelations, StatsError> {
        Ok(MetricCorrelations {
            arbitrariness: abs_corr_or_none(measure, &flags)?,
            pairwise_disagreement: abs_corr_or_none(measure, &pd)?,
            prediction_variance: abs_corr_or_none(measure, &pv)?,
            prediction_range: abs_corr_or_none(measure, &pr)?,
        })
    };

    Ok(CorrelationReport {
        n_points: n,
        consistency: row(consistency)?,
        predicted_probability: row(pred_prob)?,
    })
}
