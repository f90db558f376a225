//! Neighborhood sampling and the single-model consistency score.
//!
//! For an input `x` and model `f`, the consistency score over a
//! neighborhood `N` of `k` points inside the radius-sigma ball around `x`
//! is
//!
//! ```text
//! S = (1/k) * sum_{x_i in N} ( f(x_i) - |f(x) - f(x_i)| )
//! ```
//!
//! the mean neighbor prediction minus the mean absolute local variation.
//! The paired divergence statistic between two models `f` and `f'` on the
//! same neighborhood is
//!
//! ```text
//! Z_i = f'(x_i) - f(x_i) + |f(x_i) - f(x)| - |f'(x_i) - f'(x)|
//! ```
//!
//! which satisfies the exact identity
//! `S(x, f') - Z = (1/k) * sum ( f(x_i) - |f(x_i) - f(x)| ) <= f(x)`
//! (reverse triangle inequality), so `Z < eps` forces `f(x) >= S - eps`.
//! For i.i.d. model draws `Z` has mean zero and `|Z_i| <= 2`, and
//! Bernstein concentration yields the failure-probability bound
//! implemented in [`theorem_bound`]:
//!
//! ```text
//! Pr( F(x) < S_{k,sigma}(x, F') - eps ) <= exp( -k eps^2 / (8 beta + (16/3) eps) )
//! ```
//!
//! with `beta` bounding the per-term variance of `Z_i` given the pair.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::Predictor;
use crate::seed::{derive_seed, fill_gaussian, rng_from_seed};
use crate::tabular::EmbeddedDataset;

/// Attempts per requested point before rejection sampling gives up.
const MAX_REJECTION_ATTEMPTS: usize = 10_000;

/// Errors from sampling or scoring neighborhoods.
#[derive(Debug, thiserror::Error)]
pub enum ConsistencyError {
    #[error("invalid sampler config: {0}")]
    InvalidConfig(String),
    #[error(
        "rejection sampling failed after {attempts} attempts; radius_sigma {radius_sigma} is too \
         small for gaussian_std {gaussian_std} in dimension {dim}"
    )]
    RejectionFailure {
        attempts: usize,
        radius_sigma: f64,
        gaussian_std: f64,
        dim: usize,
    },
    #[error("point has dimension {got}, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("neighborhood point {index} lies outside the open ball of radius {radius_sigma}")]
    OutsideBall { index: usize, radius_sigma: f64 },
    #[error("model pair list is empty")]
    EmptyPairList,
    #[error("n_rounds must be >= 1")]
    ZeroRounds,
    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("beta must be finite and >= 0, got {0}")]
    InvalidBeta(f64),
}

/// Configuration of the neighborhood sampler.
///
/// Offsets are drawn i.i.d. from an isotropic Gaussian with per-coordinate
/// `gaussian_std`, truncated by rejection to the open L2 ball of radius
/// `radius_sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Number of neighborhood points.
    pub k: usize,
    /// Per-coordinate Gaussian std of the offsets.
    pub gaussian_std: f64,
    /// Radius of the truncation ball.
    pub radius_sigma: f64,
    /// Seed for the offset stream.
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            k: 30,
            gaussian_std: 0.1,
            radius_sigma: 0.5,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), ConsistencyError> {
        if self.k == 0 {
            return Err(ConsistencyError::InvalidConfig("k must be >= 1".into()));
        }
        if !(self.gaussian_std > 0.0 && self.gaussian_std.is_finite()) {
            return Err(ConsistencyError::InvalidConfig(format!(
                "gaussian_std {} must be positive",
                self.gaussian_std
            )));
        }
        if !(self.radius_sigma > 0.0 && self.radius_sigma.is_finite()) {
            return Err(ConsistencyError::InvalidConfig(format!(
                "radius_sigma {} must be positive",
                self.radius_sigma
            )));
        }
        Ok(())
    }
}

/// `k` sampled points strictly inside the ball around a center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighborhood {
    center: Vec<f64>,
    offsets: Vec<Vec<f64>>,
    points: Vec<Vec<f64>>,
    config: SamplerConfig,
}

impl Neighborhood {
    /// Builds a neighborhood from explicit points, enforcing the ball
    /// invariant `||point - center||_2 < radius_sigma`.
    pub fn from_points(
        center: Vec<f64>,
        points: Vec<Vec<f64>>,
        config: SamplerConfig,
    ) -> Result<Self, ConsistencyError> {
        config.validate()?;
        for (index, point) in points.iter().enumerate() {
            if point.len() != center.len() {
                return Err(ConsistencyError::DimensionMismatch {
                    got: point.len(),
                    expected: center.len(),
                });
            }
            let dist2: f64 = point
                .iter()
                .zip(&center)
                .map(|(p, c)| (p - c) * (p - c))
                .sum();
            if !(dist2.sqrt() < config.radius_sigma) {
                return Err(ConsistencyError::OutsideBall {
                    index,
                    radius_sigma: config.radius_sigma,
                });
            }
        }
        let offsets = points
            .iter()
            .map(|p| p.iter().zip(&center).map(|(pi, ci)| pi - ci).collect())
            .collect();
        Ok(Self {
            center,
            offsets,
            points,
            config,
        })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn offsets(&self) -> &[Vec<f64>] {
        &self.offsets
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn k(&self) -> usize {
        self.points.len()
    }
}

/// Draws `config.k` points from the truncated Gaussian around `center`.
///
/// Deterministic in `config.seed`. Fails if the truncation ball is so small
/// relative to `gaussian_std * sqrt(dim)` that rejection sampling cannot
/// land inside it within a bounded number of attempts.
pub fn sample_neighborhood(
    center: &[f64],
    config: &SamplerConfig,
) -> Result<Neighborhood, ConsistencyError> {
    config.validate()?;
    let dim = center.len();
    let mut rng = rng_from_seed(config.seed);

    let mut offsets = Vec::with_capacity(config.k);
    let mut points = Vec::with_capacity(config.k);
    let mut candidate = vec![0.0; dim];
    while offsets.len() < config.k {
        let mut accepted = false;
        for _ in 0..MAX_REJECTION_ATTEMPTS {
            fill_gaussian(&mut rng, config.gaussian_std, &mut candidate);
            let norm2: f64 = candidate.iter().map(|c| c * c).sum();
            if norm2.sqrt() < config.radius_sigma {
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err(ConsistencyError::RejectionFailure {
                attempts: MAX_REJECTION_ATTEMPTS,
                radius_sigma: config.radius_sigma,
                gaussian_std: config.gaussian_std,
                dim,
            });
        }
        points.push(candidate.iter().zip(center).map(|(o, c)| o + c).collect());
        offsets.push(candidate.clone());
    }
    Ok(Neighborhood {
        center: center.to_vec(),
        offsets,
        points,
        config: *config,
    })
}

/// A consistency score and its two component terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyScore {
    /// `mean_neighbor_pred - mean_abs_variation`, in `[-1, 1]`.
    pub value: f64,
    /// Mean model output over the neighborhood points.
    pub mean_neighbor_pred: f64,
    /// Mean `|f(x) - f(x_i)|` over the neighborhood points.
    pub mean_abs_variation: f64,
    /// Model output at the center.
    pub center_pred: f64,
}

/// Scores one model at the neighborhood's center.
pub fn consistency<P: Predictor + ?Sized>(
    model: &P,
    nbhd: &Neighborhood,
) -> Result<ConsistencyScore, ConsistencyError> {
    if nbhd.center.len() != model.input_dim() {
        return Err(ConsistencyError::DimensionMismatch {
            got: nbhd.center.len(),
            expected: model.input_dim(),
        });
    }
    let center_pred = model.predict(&nbhd.center);
    let k = nbhd.k() as f64;
    let mut neighbor_sum = 0.0;
    let mut variation_sum = 0.0;
    for point in &nbhd.points {
        let p = model.predict(point);
        neighbor_sum += p;
        variation_sum += (center_pred - p).abs();
    }
    let mean_neighbor_pred = neighbor_sum / k;
    let mean_abs_variation = variation_sum / k;
    Ok(ConsistencyScore {
        value: mean_neighbor_pred - mean_abs_variation,
        mean_neighbor_pred,
        mean_abs_variation,
        center_pred,
    })
}

/// The per-neighborhood divergence statistic between two models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceSample {
    z_terms: Vec<f64>,
    z: f64,
}

impl DivergenceSample {
    fn new(z_terms: Vec<f64>) -> Self {
        debug_assert!(
            z_terms.iter().all(|t| t.abs() <= 2.0 + 1e-12),
            "divergence term outside [-2, 2]; a predictor violated its [0, 1] codomain"
        );
        let z = z_terms.iter().sum::<f64>() / z_terms.len() as f64;
        Self { z_terms, z }
    }

    pub fn z_terms(&self) -> &[f64] {
        &self.z_terms
    }

    /// Mean of the per-point terms.
    pub fn z(&self) -> f64 {
        self.z
    }
}

/// Computes the divergence terms of `(f, f_prime)` over one shared
/// neighborhood:
///
/// ```text
/// Z_i = f'(x_i) - f(x_i) + |f(x_i) - f(x)| - |f'(x_i) - f'(x)|
/// ```
///
/// Identical models give exactly zero; each term is bounded by 2 in
/// absolute value.
pub fn neighborhood_divergence<P: Predictor + ?Sized, Q: Predictor + ?Sized>(
    f: &P,
    f_prime: &Q,
    nbhd: &Neighborhood,
) -> Result<DivergenceSample, ConsistencyError> {
    for dim in [f.input_dim(), f_prime.input_dim()] {
        if nbhd.center.len() != dim {
            return Err(ConsistencyError::DimensionMismatch {
                got: nbhd.center.len(),
                expected: dim,
            });
        }
    }
    let f_center = f.predict(&nbhd.center);
    let fp_center = f_prime.predict(&nbhd.center);
    let z_terms = nbhd
        .points
        .iter()
        .map(|point| {
            let f_i = f.predict(point);
            let fp_i = f_prime.predict(point);
            fp_i - f_i + (f_i - f_center).abs() - (fp_i - fp_center).abs()
        })
        .collect();
    Ok(DivergenceSample::new(z_terms))
}

/// Plug-in estimate of the divergence-term variance envelope.
///
/// For each model pair, draws `n_rounds` fresh neighborhoods around
/// `center`, computes the empirical (population) variance of the divergence
/// terms per round, and averages over rounds; returns the maximum over
/// pairs.
pub fn estimate_beta<P: Predictor>(
    model_pairs: &[(P, P)],
    center: &[f64],
    config: &SamplerConfig,
    n_rounds: usize,
) -> Result<f64, ConsistencyError> {
    if model_pairs.is_empty() {
        return Err(ConsistencyError::EmptyPairList);
    }
    if n_rounds == 0 {
        return Err(ConsistencyError::ZeroRounds);
    }
    config.validate()?;
    let mut beta_hat: f64 = 0.0;
    for (pair_index, (f, f_prime)) in model_pairs.iter().enumerate() {
        let pair_seed = derive_seed(config.seed, pair_index as u64);
        let mut round_sum = 0.0;
        for round in 0..n_rounds {
            let round_config = SamplerConfig {
                seed: derive_seed(pair_seed, round as u64),
                ..*config
            };
            let nbhd = sample_neighborhood(center, &round_config)?;
            let sample = neighborhood_divergence(f, f_prime, &nbhd)?;
            let k = sample.z_terms.len() as f64;
            let mean = sample.z;
            let var = sample
                .z_terms
                .iter()
                .map(|t| (t - mean) * (t - mean))
                .sum::<f64>()
                / k;
            round_sum += var;
        }
        beta_hat = beta_hat.max(round_sum / n_rounds as f64);
    }
    Ok(beta_hat)
}

/// Failure-probability bound `exp(-k eps^2 / (8 beta + (16/3) eps))`,
/// clamped to `[0, 1]`.
pub fn theorem_bound(k: usize, beta: f64, epsilon: f64) -> Result<f64, ConsistencyError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(ConsistencyError::InvalidEpsilon(epsilon));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(ConsistencyError::InvalidBeta(beta));
    }
    let exponent = -(k as f64) * epsilon * epsilon / (8.0 * beta + (16.0 / 3.0) * epsilon);
    Ok(exponent.exp().clamp(0.0, 1.0))
}

/// Scores every point of `points`, deriving one sampler seed per point from
/// `(config.seed, point index)`.
///
/// Point evaluations run in parallel; the per-point seed derivation and the
/// ordered collection keep the output independent of thread count.
pub fn consistency_profile<P: Predictor + Sync + ?Sized>(
    model: &P,
    points: &EmbeddedDataset,
    config: &SamplerConfig,
) -> Result<Vec<ConsistencyScore>, ConsistencyError> {
    config.validate()?;
    if points.is_empty() {
        return Ok(Vec::new());
    }
    if points.dim() != model.input_dim() {
        return Err(ConsistencyError::DimensionMismatch {
            got: points.dim(),
            expected: model.input_dim(),
        });
    }
    points
        .points()
        .par_iter()
        .enumerate()
        .map(|(index, center)| {
            let point_config = SamplerConfig {
                seed: derive_seed(config.seed, index as u64),
                ..*config
            };
            let nbhd = sample_neighborhood(center, &point_config)?;
            consistency(model, &nbhd)
        })
        .collect()
}

/// Serializable consistency profile over a point set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyProfile {
    pub model_index: usize,
    pub sampler: SamplerConfig,
    pub point_ids: Vec<String>,
    pub scores: Vec<ConsistencyScore>,
}

impl ConsistencyProfile {
    pub fn new(
        model_index: usize,
        sampler: SamplerConfig,
        point_ids: Vec<String>,
        scores: Vec<ConsistencyScore>,
    ) -> Self {
        assert_eq!(point_ids.len(), scores.len(), "ids and scores must align");
        Self {
            model_index,
            sampler,
            point_ids,
            scores,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile serialization cannot fail")
    }

    pub fn from_json(doc: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(doc)
    }

    /// Columns: point_id, S, mean_neighbor_pred, mean_abs_variation, f_x.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("point_id,S,mean_neighbor_pred,mean_abs_variation,f_x\n");
        for (id, score) in self.point_ids.iter().zip(&self.scores) {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                id, score.value, score.mean_neighbor_pred, score.mean_abs_variation,
                score.center_pred
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ScoreModel;
    use crate::testutil::{constant_model, embedded_from_raw};
    use std::sync::atomic::{AtomicUsize, Ordering};

    /// Predictor that looks values up by the first coordinate.
    struct TablePredictor {
        dim: usize,
        entries: Vec<(f64, f64)>,
    }

    impl Predictor for TablePredictor {
        fn input_dim(&self) -> usize {
            self.dim
        }

        fn predict(&self, x: &[f64]) -> f64 {
            self.entries
                .iter()
                .find(|(key, _)| *key == x[0])
                .map(|(_, v)| *v)
                .unwrap_or_else(|| panic!("no table entry for {}", x[0]))
        }
    }

    /// Counts predict calls made through it.
    struct CountingPredictor<'a> {
        inner: &'a ScoreModel,
        calls: AtomicUsize,
    }

    impl Predictor for CountingPredictor<'_> {
        fn input_dim(&self) -> usize {
            self.inner.input_dim()
        }

        fn predict(&self, x: &[f64]) -> f64 {
            self.calls.fetch_add(1, Ordering::Relaxed);
            self.inner.predict(x)
        }
    }

    #[test]
    fn sample_neighborhood_respects_ball_and_determinism() {
        let config = SamplerConfig {
            seed: 5,
            ..SamplerConfig::default()
        };
        let center = vec![1.0, -2.0, 0.5, 3.0, 0.0];
        let a = sample_neighborhood(&center, &config).unwrap();
        let b = sample_neighborhood(&center, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.k(), 30);
        for offset in a.offsets() {
            let norm: f64 = offset.iter().map(|o| o * o).sum::<f64>().sqrt();
            assert!(norm < config.radius_sigma);
        }
        for (point, offset) in a.points().iter().zip(a.offsets()) {
            for ((p, c), o) in point.iter().zip(&center).zip(offset) {
                assert_eq!(*p, c + o);
            }
        }
    }

    #[test]
    fn sample_neighborhood_rejects_infeasible_truncation() {
        let config = SamplerConfig {
            gaussian_std: 1.0,
            radius_sigma: 1e-6,
            k: 3,
            seed: 0,
        };
        let err = sample_neighborhood(&[0.0; 8], &config).unwrap_err();
        assert!(matches!(err, ConsistencyError::RejectionFailure { .. }));
    }

    #[test]
    fn sample_neighborhood_different_seeds_differ() {
        let center = vec![0.0; 4];
        let a = sample_neighborhood(&center, &SamplerConfig::default()).unwrap();
        let b = sample_neighborhood(
            &center,
            &SamplerConfig {
                seed: 1,
                ..SamplerConfig::default()
            },
        )
        .unwrap();
        assert_ne!(a.points(), b.points());
    }

    #[test]
    fn neighborhood_from_points_validates_ball() {
        let config = SamplerConfig::default();
        let ok = Neighborhood::from_points(vec![0.0], vec![vec![0.49], vec![-0.3]], config);
        assert!(ok.is_ok());
        let err = Neighborhood::from_points(vec![0.0], vec![vec![0.5]], config).unwrap_err();
        assert!(matches!(err, ConsistencyError::OutsideBall { index: 0, .. }));
    }

    #[test]
    fn constant_model_scores_its_constant() {
        let model = constant_model(0.8);
        let nbhd = sample_neighborhood(&[0.0], &SamplerConfig::default()).unwrap();
        let score = consistency(&model, &nbhd).unwrap();
        assert!((score.value - 0.8).abs() < 1e-12);
        assert!(score.mean_abs_variation.abs() < 1e-12);
        assert!((score.mean_neighbor_pred - 0.8).abs() < 1e-12);
    }

    #[test]
    fn hand_case_k2_scores_half() {
        // f(center)=0.6, neighbors predict 0.5 and 0.9:
        // S = (0.5 - 0.1 + 0.9 - 0.3) / 2 = 0.5
        let model = TablePredictor {
            dim: 1,
            entries: vec![(0.0, 0.6), (0.1, 0.5), (-0.2, 0.9)],
        };
        let nbhd = Neighborhood::from_points(
            vec![0.0],
            vec![vec![0.1], vec![-0.2]],
            SamplerConfig {
                k: 2,
                ..SamplerConfig::default()
            },
        )
        .unwrap();
        let score = consistency(&model, &nbhd).unwrap();
        assert!((score.value - 0.5).abs() < 1e-12);
        assert!((score.mean_neighbor_pred - 0.7).abs() < 1e-12);
        assert!((score.mean_abs_variation - 0.2).abs() < 1e-12);
        assert!((score.center_pred - 0.6).abs() < 1e-12);
    }

    #[test]
    fn score_components_satisfy_identity_and_bounds() {
        let model = ScoreModel::logistic(vec![1.5, -2.0], 0.3);
        for seed in 0..50 {
            let config = SamplerConfig {
                seed,
                ..SamplerConfig::default()
            };
            let nbhd = sample_neighborhood(&[0.2, -0.4], &config).unwrap();
            let score = consistency(&model, &nbhd).unwrap();
            assert_eq!(
                score.value,
                score.mean_neighbor_pred - score.mean_abs_variation
            );
            assert!((-1.0..=1.0).contains(&score.value));
            assert!(score.value <= score.mean_neighbor_pred);
            assert!(score.mean_neighbor_pred <= 1.0);
            assert!(score.mean_abs_variation >= 0.0);
            // reverse triangle: S <= f(x)
            assert!(score.value <= score.center_pred + 1e-12);
        }
    }

    #[test]
    fn vanishing_std_recovers_center_prediction() {
        let model = ScoreModel::logistic(vec![0.7, -1.1], -0.2);
        let config = SamplerConfig {
            gaussian_std: 1e-12,
            ..SamplerConfig::default()
        };
        let center = [0.3, 0.9];
        let nbhd = sample_neighborhood(&center, &config).unwrap();
        let score = consistency(&model, &nbhd).unwrap();
        assert!((score.value - model.predict(&center)).abs() < 1e-6);
    }

    #[test]
    fn divergence_of_identical_models_is_exactly_zero() {
        let model = ScoreModel::logistic(vec![1.0, 2.0], -0.5);
        let nbhd = sample_neighborhood(&[0.1, 0.2], &SamplerConfig::default()).unwrap();
        let sample = neighborhood_divergence(&model, &model, &nbhd).unwrap();
        assert_eq!(sample.z(), 0.0);
        assert!(sample.z_terms().iter().all(|&t| t == 0.0));
    }

    #[test]
    fn divergence_of_constant_models_is_their_gap() {
        let f = constant_model(0.2);
        let f_prime = constant_model(0.9);
        let nbhd = sample_neighborhood(&[0.0], &SamplerConfig::default()).unwrap();
        let sample = neighborhood_divergence(&f, &f_prime, &nbhd).unwrap();
        for &term in sample.z_terms() {
            assert!((term - 0.7).abs() < 1e-12);
        }
        assert!((sample.z() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn divergence_terms_bounded_by_two_and_antisymmetric() {
        let f = ScoreModel::logistic(vec![3.0, -1.0], 0.5);
        let g = ScoreModel::logistic(vec![-2.0, 2.5], -1.0);
        for seed in 0..20 {
            let config = SamplerConfig {
                seed,
                ..SamplerConfig::default()
            };
            let nbhd = sample_neighborhood(&[0.4, -0.6], &config).unwrap();
            let fg = neighborhood_divergence(&f, &g, &nbhd).unwrap();
            let gf = neighborhood_divergence(&g, &f, &nbhd).unwrap();
            for (a, b) in fg.z_terms().iter().zip(gf.z_terms()) {
                assert!(a.abs() <= 2.0);
                assert!((a + b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn divergence_links_score_to_center_prediction() {
        // S(x, f') - Z equals the reverse-triangle lower bound for f(x).
        let f = ScoreModel::logistic(vec![2.0, 1.0], -0.3);
        let g = ScoreModel::logistic(vec![-1.0, 0.5], 0.8);
        let nbhd = sample_neighborhood(&[0.1, -0.9], &SamplerConfig::default()).unwrap();
        let s = consistency(&g, &nbhd).unwrap();
        let z = neighborhood_divergence(&f, &g, &nbhd).unwrap();
        let f_center = f.predict(&[0.1, -0.9]);
        assert!(f_center >= s.value - z.z() - 1e-12);
    }

    #[test]
    fn estimate_beta_degenerate_cases() {
        let center = [0.0];
        let config = SamplerConfig::default();
        let identical = vec![(constant_model(0.4), constant_model(0.4))];
        assert_eq!(estimate_beta(&identical, &center, &config, 4).unwrap(), 0.0);

        // Distinct constants: Z_i is the constant 0.5, so its variance is 0.
        let constants = vec![(constant_model(0.2), constant_model(0.7))];
        let beta = estimate_beta(&constants, &center, &config, 4).unwrap();
        assert!(beta.abs() < 1e-24);
    }

    #[test]
    fn estimate_beta_positive_for_differing_logistics() {
        let pairs = vec![(
            ScoreModel::logistic(vec![4.0, -3.0], 0.0),
            ScoreModel::logistic(vec![-2.0, 5.0], 0.4),
        )];
        let beta = estimate_beta(&pairs, &[0.0, 0.0], &SamplerConfig::default(), 8).unwrap();
        assert!(beta > 0.0);
        assert!(beta.is_finite());
    }

    #[test]
    fn estimate_beta_rejects_empty_pairs() {
        let pairs: Vec<(ScoreModel, ScoreModel)> = vec![];
        assert!(matches!(
            estimate_beta(&pairs, &[0.0], &SamplerConfig::default(), 4),
            Err(ConsistencyError::EmptyPairList)
        ));
    }

    #[test]
    fn theorem_bound_spot_value_and_limits() {
        let p = theorem_bound(30, 0.01, 0.2).unwrap();
        assert!((p - 0.35116059381808523).abs() < 1e-15);
        assert!((p - 0.3512).abs() < 1e-4);

        // eps -> 0+ with beta > 0: vacuous bound
        assert!((theorem_bound(30, 0.01, 1e-12).unwrap() - 1.0).abs() < 1e-9);
        // k -> large: bound -> 0
        assert!(theorem_bound(10_000_000, 0.01, 0.2).unwrap() < 1e-300);

        assert!(matches!(
            theorem_bound(30, 0.01, 0.0),
            Err(ConsistencyError::InvalidEpsilon(_))
        ));
        assert!(matches!(
            theorem_bound(30, -0.5, 0.1),
            Err(ConsistencyError::InvalidBeta(_))
        ));
    }

    #[test]
    fn theorem_bound_monotonicity_grids() {
        let ks = [1, 5, 10, 30, 100, 500];
        let betas = [0.0, 0.001, 0.01, 0.1, 1.0];
        let epsilons = [0.01, 0.05, 0.1, 0.2, 0.4, 1.0];
        for &beta in &betas {
            for &eps in &epsilons {
                let mut prev = f64::INFINITY;
                for &k in &ks {
                    let p = theorem_bound(k, beta, eps).unwrap();
                    assert!(p <= prev + 1e-15, "bound must not increase in k");
                    prev = p;
                }
            }
        }
        for &k in &ks {
            for &beta in &betas {
                let mut prev = f64::INFINITY;
                for &eps in &epsilons {
                    let p = theorem_bound(k, beta, eps).unwrap();
                    assert!(p <= prev + 1e-15, "bound must not increase in eps");
                    prev = p;
                }
            }
            for &eps in &epsilons {
                let mut prev = 0.0;
                for &beta in &betas {
                    let p = theorem_bound(k, beta, eps).unwrap();
                    assert!(p >= prev - 1e-15, "bound must not decrease in beta");
                    prev = p;
                }
            }
        }
    }

    #[test]
    fn profile_is_deterministic_and_counts_evaluations() {
        let points = embedded_from_raw(
            (0..20).map(|i| vec![i as f64 / 10.0, -(i as f64) / 7.0]).collect(),
            (0..20).map(|i| u8::from(i % 2 == 0)).collect(),
        );
        let model = ScoreModel::logistic(vec![1.0, -0.5], 0.1);
        let config = SamplerConfig {
            k: 30,
            seed: 9,
            ..SamplerConfig::default()
        };
        let a = consistency_profile(&model, &points, &config).unwrap();
        let b = consistency_profile(&model, &points, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);

        let counting = CountingPredictor {
            inner: &model,
            calls: AtomicUsize::new(0),
        };
        let _ = consistency_profile(&counting, &points, &config).unwrap();
        // k neighbor evaluations plus the center per point.
        assert_eq!(counting.calls.load(Ordering::Relaxed), 20 * 31);
    }

    #[test]
    fn profile_of_empty_point_set_is_empty() {
        let base = embedded_from_raw(vec![vec![0.0]], vec![0]);
        let empty = {
            // encode an empty dataset against the same encoder
            let schema = base.encoder().schema().clone();
            let ds = crate::tabular::Dataset::new(schema, vec![], vec![]).unwrap();
            crate::tabular::encode(&ds, base.encoder()).unwrap()
        };
        let model = ScoreModel::logistic(vec![1.0], 0.0);
        let profile = consistency_profile(&model, &empty, &SamplerConfig::default()).unwrap();
        assert!(profile.is_empty());
    }

    #[test]
    fn profile_report_round_trips_and_renders_csv() {
        let points = embedded_from_raw(vec![vec![0.0], vec![1.0]], vec![0, 1]);
        let model = ScoreModel::logistic(vec![1.0], 0.0);
        let config = SamplerConfig::default();
        let scores = consistency_profile(&model, &points, &config).unwrap();
        let ids = (0..scores.len())
            .map(crate::multiplicity::point_id)
            .collect();
        let profile = ConsistencyProfile::new(0, config, ids, scores);
        let back = ConsistencyProfile::from_json(&profile.to_json()).unwrap();
        assert_eq!(profile, back);
        let csv = profile.to_csv_string();
        assert!(csv.starts_with("point_id,S,mean_neighbor_pred,mean_abs_variation,f_x\n"));
        assert_eq!(csv.lines().count(), 3);
    }
}
