//! Monte Carlo verification of the divergence and consistency bounds on
//! synthetic stochastic model classes.
//!
//! A [`SyntheticClassConfig`] describes a family of smooth score functions
//! plus an i.i.d. parameter perturbation per draw, so two draws with
//! distinct sub-seeds are identically distributed by construction and the
//! conditional-mean slack of the bound premises is exactly zero. Each trial
//! draws a model pair and a fresh neighborhood, records the divergence
//! statistic `Z`, the consistency score `S` of the second model, and the
//! first model's center prediction `F(x)`, and the per-epsilon empirical
//! event rates are compared against the Bernstein-style bound with a
//! three-standard-error Monte Carlo allowance.
//!
//! Because `S - Z` equals the reverse-triangle lower bound for `F(x)`
//! algebraically, every logged trial must satisfy the implication
//! `Z < eps  =>  F(x) >= S - eps`; violations are counted and reported
//! (the expected count is zero).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::consistency::{
    consistency, estimate_beta, neighborhood_divergence, sample_neighborhood, theorem_bound,
    ConsistencyError, SamplerConfig,
};
use crate::model::{sigmoid, Predictor};
use crate::seed::{derive_seed, rng_from_seed, standard_normal};
use rand::Rng;

/// Float slack for the algebraic implication check.
const IMPLICATION_TOL: f64 = 1e-12;

/// Errors from configuring or running bound verification.
#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error("epsilon grid is empty")]
    EmptyGrid,
    #[error("epsilon {0} must be positive and finite")]
    BadEpsilon(f64),
    #[error("trials must be >= 1")]
    ZeroTrials,
    #[error("centers list is empty")]
    NoCenters,
    #[error("center has dimension {got}, expected {expected}")]
    BadCenter { got: usize, expected: usize },
    #[error("model_noise_std {0} must be finite and >= 0")]
    BadNoise(f64),
    #[error("dimension must be >= 1")]
    ZeroDim,
    #[error("beta_scale {0} must be positive and finite")]
    BadBetaScale(f64),
    #[error(transparent)]
    Consistency(#[from] ConsistencyError),
}

/// Base score function of a synthetic class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseLogitFn {
    /// Affine logit `w . x + b`.
    Linear,
    /// Quadratic bump `a (r^2 - ||x - c||^2)`.
    Radial,
    /// Sum of three Gaussian bumps with signed amplitudes.
    Mixture,
}

/// A stochastic class of smooth score models with i.i.d. parameter noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticClassConfig {
    pub base: BaseLogitFn,
    /// Std of the per-draw Gaussian parameter perturbation; 0 collapses the
    /// class to its base function.
    pub model_noise_std: f64,
    /// Embedding-space dimension.
    pub dim: usize,
    /// Seed fixing the base function and the draw streams.
    pub seed: u64,
}

impl SyntheticClassConfig {
    pub fn validate(&self) -> Result<(), VerifyError> {
        if !(self.model_noise_std >= 0.0 && self.model_noise_std.is_finite()) {
            return Err(VerifyError::BadNoise(self.model_noise_std));
        }
        if self.dim == 0 {
            return Err(VerifyError::ZeroDim);
        }
        Ok(())
    }

    fn base_seed(&self) -> u64 {
        derive_seed(self.seed, 0)
    }

    fn draw_seed(&self, sub_seed: u64) -> u64 {
        derive_seed(derive_seed(self.seed, 1), sub_seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum SynthKind {
    Linear {
        weights: Vec<f64>,
        bias: f64,
    },
    Radial {
        scale: f64,
        radius2: f64,
        center: Vec<f64>,
    },
    Mixture {
        amps: Vec<f64>,
        centers: Vec<Vec<f64>>,
        width2: f64,
        bias: f64,
    },
}

/// One draw from a synthetic class; scores via a sigmoid of its logit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticModel {
    dim: usize,
    kind: SynthKind,
}

impl SyntheticModel {
    fn logit(&self, x: &[f64]) -> f64 {
        match &self.kind {
            SynthKind::Linear { weights, bias } => {
                bias + weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            }
            SynthKind::Radial {
                scale,
                radius2,
                center,
            } => {
                let dist2: f64 = center.iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum();
                scale * (radius2 - dist2)
            }
            SynthKind::Mixture {
                amps,
                centers,
                width2,
                bias,
            } => {
                let mut acc = *bias;
                for (amp, c) in amps.iter().zip(centers) {
                    let dist2: f64 = c.iter().zip(x).map(|(ci, v)| (v - ci) * (v - ci)).sum();
                    acc += amp * (-dist2 / (2.0 * width2)).exp();
                }
                acc
            }
        }
    }
}

impl Predictor for SyntheticModel {
    fn input_dim(&self) -> usize {
        self.dim
    }

    fn predict(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim, "synthetic model dimension mismatch");
        sigmoid(self.logit(x))
    }
}

/// Draws one model: the config's base function plus seeded parameter noise.
///
/// Draws with distinct `sub_seed`s are i.i.d.; `model_noise_std == 0`
/// reproduces the base function exactly for every sub-seed.
pub fn draw_model(config: &SyntheticClassConfig, sub_seed: u64) -> SyntheticModel {
    let d = config.dim;
    let mut base_rng = rng_from_seed(config.base_seed());
    let mut noise_rng = rng_from_seed(config.draw_seed(sub_seed));
    let noise = config.model_noise_std;
    let mut perturb = |v: f64| v + noise * standard_normal(&mut noise_rng);

    let kind = match config.base {
        BaseLogitFn::Linear => {
            let weights: Vec<f64> = (0..d)
                .map(|_| 3.0 * standard_normal(&mut base_rng) / (d as f64).sqrt())
                .collect();
            let bias = 0.5 * standard_normal(&mut base_rng);
            SynthKind::Linear {
                weights: weights.into_iter().map(&mut perturb).collect(),
                bias: perturb(bias),
            }
        }
        BaseLogitFn::Radial => {
            let scale = 1.0 + 0.25 * standard_normal(&mut base_rng).abs();
            let center: Vec<f64> = (0..d)
                .map(|_| 0.5 * standard_normal(&mut base_rng))
                .collect();
            let radius2 = 0.5 * d as f64;
            SynthKind::Radial {
                scale: perturb(scale),
                radius2,
                center: center.into_iter().map(&mut perturb).collect(),
            }
        }
        BaseLogitFn::Mixture => {
            let n_bumps = 3;
            let centers: Vec<Vec<f64>> = (0..n_bumps)
                .map(|_| (0..d).map(|_| standard_normal(&mut base_rng)).collect())
                .collect();
            let amps: Vec<f64> = (0..n_bumps)
                .map(|_| 2.0 * standard_normal(&mut base_rng))
                .collect();
            let bias = 0.25 * standard_normal(&mut base_rng);
            SynthKind::Mixture {
                amps: amps.into_iter().map(&mut perturb).collect(),
                centers,
                width2: 0.36,
                bias: perturb(bias),
            }
        }
    };
    SyntheticModel { dim: d, kind }
}

/// Evaluation centers: the origin first, then seeded uniform draws from
/// `[-1, 1]^dim`.
pub fn default_centers(dim: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut centers = vec![vec![0.0; dim]];
    let mut rng = rng_from_seed(seed);
    for _ in 1..n {
        centers.push((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect());
    }
    centers
}

/// Which bound a report verifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Divergence,
    Theorem,
}

/// One `(k, epsilon, center)` verification cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCell {
    pub k: usize,
    pub epsilon: f64,
    pub center_index: usize,
    pub beta_hat: f64,
    pub theoretical_bound: f64,
    pub empirical_rate: f64,
    pub trials: usize,
    pub std_error: f64,
    pub pass: bool,
}

/// Verification outcome over a grid of cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub cells: Vec<BoundCell>,
    /// Count of logged trials violating `Z < eps => F(x) >= S - eps`;
    /// the implication is algebraic, so anything nonzero is a defect.
    pub implication_violations: usize,
    pub all_pass: bool,
}

impl BoundReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn from_json(doc: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(doc)
    }

    /// One CSV row per grid cell.
    pub fn to_csv_string(&self) -> String {
        let kind = match self.kind {
            BoundKind::Divergence => "divergence",
            BoundKind::Theorem => "theorem",
        };
        let mut out = String::from(
            "kind,k,epsilon,center_index,beta_hat,theoretical_bound,empirical_rate,trials,std_error,pass\n",
        );
        for cell in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                kind,
                cell.k,
                cell.epsilon,
                cell.center_index,
                cell.beta_hat,
                cell.theoretical_bound,
                cell.empirical_rate,
                cell.trials,
                cell.std_error,
                cell.pass
            ));
        }
        out
    }
}

/// Knobs for the verification driver beyond the spec'd arguments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// Multiplier applied to the estimated beta before computing the bound.
    /// 1.0 verifies the bound as stated; values < 1 deliberately understate
    /// beta to exercise the failure path.
    pub beta_scale: f64,
    /// Model pairs used to estimate beta.
    pub beta_pairs: usize,
    /// Fresh neighborhoods per pair in the beta estimate.
    pub beta_rounds: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            beta_scale: 1.0,
            beta_pairs: 12,
            beta_rounds: 8,
        }
    }
}

impl VerifyOptions {
    fn validate(&self) -> Result<(), VerifyError> {
        if !(self.beta_scale > 0.0 && self.beta_scale.is_finite()) {
            return Err(VerifyError::BadBetaScale(self.beta_scale));
        }
        if self.beta_pairs == 0 || self.beta_rounds == 0 {
            return Err(VerifyError::ZeroTrials);
        }
        Ok(())
    }
}

struct TrialOutcome {
    z: f64,
    s: f64,
    f_center: f64,
}

fn validate_grid(eps_grid: &[f64]) -> Result<(), VerifyError> {
    if eps_grid.is_empty() {
        return Err(VerifyError::EmptyGrid);
    }
    for &eps in eps_grid {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(VerifyError::BadEpsilon(eps));
        }
    }
    Ok(())
}

/// Runs `trials` independent draws of `(F, F', neighborhood)` at `center`.
///
/// Trial `t` uses model sub-seeds `(2(offset + t), 2(offset + t) + 1)` and a
/// neighborhood seed derived from `(sampler.seed, offset + t)`, so trials
/// are decorrelated and reproducible in any evaluation order.
fn run_trials(
    config: &SyntheticClassConfig,
    sampler: &SamplerConfig,
    center: &[f64],
    trials: usize,
    offset: u64,
) -> Result<Vec<TrialOutcome>, VerifyError> {
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let t_global = offset + t as u64;
            let f = draw_model(config, 2 * t_global);
            let f_prime = draw_model(config, 2 * t_global + 1);
            let nbhd_config = SamplerConfig {
                seed: derive_seed(sampler.seed, t_global),
                ..*sampler
            };
            let nbhd = sample_neighborhood(center, &nbhd_config)?;
            let z = neighborhood_divergence(&f, &f_prime, &nbhd)?.z();
            let s = consistency(&f_prime, &nbhd)?.value;
            let f_center = f.predict(center);
            Ok(TrialOutcome { z, s, f_center })
        })
        .collect::<Result<Vec<_>, ConsistencyError>>()
        .map_err(VerifyError::from)
}

/// Estimates beta for the class with pairs drawn from a sub-seed lane
/// disjoint from the trial lane.
fn class_beta_hat(
    config: &SyntheticClassConfig,
    sampler: &SamplerConfig,
    center: &[f64],
    options: &VerifyOptions,
) -> Result<f64, VerifyError> {
    let pairs: Vec<(SyntheticModel, SyntheticModel)> = (0..options.beta_pairs)
        .map(|j| {
            let j = j as u64;
            (
                draw_model(config, u64::MAX - 2 * j),
                draw_model(config, u64::MAX - 2 * j - 1),
            )
        })
        .collect();
    let beta_sampler = SamplerConfig {
        seed: derive_seed(sampler.seed, u64::MAX),
        ..*sampler
    };
    Ok(estimate_beta(
        &pairs,
        center,
        &beta_sampler,
        options.beta_rounds,
    )?)
}

fn count_events<F: Fn(&TrialOutcome) -> bool>(outcomes: &[TrialOutcome], event: F) -> usize {
    outcomes.iter().filter(|o| event(o)).count()
}

fn implication_violations(outcomes: &[TrialOutcome], eps_grid: &[f64]) -> usize {
    let mut violations = 0;
    for outcome in outcomes {
        for &eps in eps_grid {
            if outcome.z < eps && outcome.f_center < outcome.s - eps - IMPLICATION_TOL {
                violations += 1;
            }
        }
    }
    violations
}

fn make_cell(
    k: usize,
    epsilon: f64,
    center_index: usize,
    beta_hat: f64,
    rate: f64,
    trials: usize,
) -> Result<BoundCell, VerifyError> {
    let bound = theorem_bound(k, beta_hat, epsilon)?;
    let std_error = (rate * (1.0 - rate) / trials as f64).sqrt();
    Ok(BoundCell {
        k,
        epsilon,
        center_index,
        beta_hat,
        theoretical_bound: bound,
        empirical_rate: rate,
        trials,
        std_error,
        pass: rate <= bound + 3.0 * std_error,
    })
}

/// Checks `Pr(Z >= eps)` against `exp(-k eps^2 / (8 beta + (16/3) eps))`
/// for every epsilon in the grid. A cell passes when the empirical rate
/// stays within three binomial standard errors of the bound.
pub fn verify_divergence_bound(
    config: &SyntheticClassConfig,
    sampler: &SamplerConfig,
    center: &[f64],
    eps_grid: &[f64],
    trials: usize,
) -> Result<BoundReport, VerifyError> {
    verify_divergence_bound_with(
        config,
        sampler,
        center,
        eps_grid,
        trials,
        &VerifyOptions::default(),
    )
}

/// [`verify_divergence_bound`] with explicit [`VerifyOptions`].
pub fn verify_divergence_bound_with(
    config: &SyntheticClassConfig,
    sampler: &SamplerConfig,
    center: &[f64],
    eps_grid: &[f64],
    trials: usize,
    options: &VerifyOptions,
) -> Result<BoundReport, VerifyError> {
    config.validate()?;
    sampler.validate().map_err(VerifyError::from)?;
    options.validate()?;
    validate_grid(eps_grid)?;
    if trials == 0 {
        return Err(VerifyError::ZeroTrials);
    }
    if center.len() != config.dim {
        return Err(VerifyError::BadCenter {
            got: center.len(),
            expected: config.dim,
        });
    }

    let beta_hat = class_beta_hat(config, sampler, center, options)? * options.beta_scale;
    let outcomes = run_trials(config, sampler, center, trials, 0)?;
    let mut cells = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let hits = count_events(&outcomes, |o| o.z >= eps);
        cells.push(make_cell(
            sampler.k,
            eps,
            0,
            beta_hat,
            hits as f64 / trials as f64,
            trials,
        )?);
    }
    let violations = implication_violations(&outcomes, eps_grid);
    let all_pass = cells.iter().all(|c| c.pass) && violations == 0;
    Ok(BoundReport {
        kind: BoundKind::Divergence,
        cells,
        implication_violations: violations,
        all_pass,
    })
}

/// Checks `Pr(F(x) < S_{k,sigma}(x, F') - eps)` against the same bound,
/// per center and epsilon.
pub fn verify_theorem(
    config: &SyntheticClassConfig,
    sampler: &SamplerConfig,
    centers: &[Vec<f64>],
    eps_grid: &[f64],
    trials: usize,
) -> Result<BoundReport, VerifyError> {
    verify_theorem_with(
        config,
        sampler,
        centers,
        eps_grid,
        trials,
        &VerifyOptions::default(),
    )
}

/// [`verify_theorem`] with explicit [`VerifyOptions`].
pub fn verify_theorem_with(
    config: &SyntheticClassConfig,
    sampler: &SamplerConfig,
    centers: &[Vec<f64>],
    eps_grid: &[f64],
    trials: usize,
    options: &VerifyOptions,
) -> Result<BoundReport, VerifyError> {
    config.validate()?;
    sampler.validate().map_err(VerifyError::from)?;
    options.validate()?;
    validate_grid(eps_grid)?;
    if trials == 0 {
        return Err(VerifyError::ZeroTrials);
    }
    if centers.is_empty() {
        return Err(VerifyError::NoCenters);
    }
    for center in centers {
        if center.len() != config.dim {
            return Err(VerifyError::BadCenter {
                got: center.len(),
                expected: config.dim,
            });
        }
    }

    let mut cells = Vec::with_capacity(centers.len() * eps_grid.len());
    let mut violations = 0;
    for (center_index, center) in centers.iter().enumerate() {
        let beta_hat = class_beta_hat(config, sampler, center, options)? * options.beta_scale;
        let offset = (center_index * trials) as u64;
        let outcomes = run_trials(config, sampler, center, trials, offset)?;
        for &eps in eps_grid {
            let hits = count_events(&outcomes, |o| o.f_center < o.s - eps);
            cells.push(make_cell(
                sampler.k,
                eps,
                center_index,
                beta_hat,
                hits as f64 / trials as f64,
                trials,
            )?);
        }
        violations += implication_violations(&outcomes, eps_grid);
    }
    let all_pass = cells.iter().all(|c| c.pass) && violations == 0;
    Ok(BoundReport {
        kind: BoundKind::Theorem,
        cells,
        implication_violations: violations,
        all_pass,
    })
}
