//! Command implementations.
//!
//! Every command resolves the effective config, derives the artifact
//! directory from its content hash, and reads/writes artifacts there.
//! All randomness is derived from `base_seed` through fixed lanes, so a
//! rerun of any command with the same config reproduces its outputs byte
//! for byte regardless of `--threads`.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use rashomon_core::multiplicity::point_id;
use rashomon_core::seed::derive_seed;
use rashomon_core::{
    build_competing_set, consistency_profile, correlate_report, encode, fit_encoder,
    generate_demo, load_csv, multiplicity_report, prediction_matrix, split_shots, train_model,
    verify_divergence_bound_with, verify_theorem_with, BaseLogitFn, BoundReport, CompetingSet,
    ConsistencyProfile, Dataset, EmbeddedDataset, MultiplicityReport, SamplerConfig, ScoreModel,
    SyntheticClassConfig, VerifyOptions,
};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::manifest::RunManifest;

// Seed lanes keep the independent random streams decorrelated.
const SAMPLER_LANE: u64 = 101;
const VERIFY_CLASS_LANE: u64 = 102;
const VERIFY_SAMPLER_LANE: u64 = 103;
const VERIFY_CENTER_LANE: u64 = 104;

pub fn parse_base_fn(name: &str) -> Result<BaseLogitFn, CliError> {
    match name {
        "linear" => Ok(BaseLogitFn::Linear),
        "radial" => Ok(BaseLogitFn::Radial),
        "mixture" => Ok(BaseLogitFn::Mixture),
        other => Err(CliError::Config(format!(
            "verify.base must be linear, radial, or mixture; got {other:?}"
        ))),
    }
}

fn sampler_config(config: &ExperimentConfig) -> SamplerConfig {
    SamplerConfig {
        k: config.sampler.k,
        gaussian_std: config.sampler.gaussian_std,
        radius_sigma: config.sampler.radius_sigma,
        seed: derive_seed(config.base_seed, SAMPLER_LANE),
    }
}

struct PipelineData {
    train_emb: EmbeddedDataset,
    test_emb: EmbeddedDataset,
    dataset: Dataset,
    train_rows: usize,
    test_rows: usize,
}

/// Loads, splits, and encodes the dataset exactly as every command sees it:
/// the encoder is fit on the full dataset (the embedding is fixed before
/// any split), the split is seeded by `base_seed`.
fn prepare_data(config: &ExperimentConfig) -> Result<PipelineData, CliError> {
    let schema = config.dataset.schema()?;
    let dataset = load_csv(&config.dataset.path, &schema)?;
    let encoder = fit_encoder(&dataset)?;
    let (train, test) = split_shots(&dataset, config.n_shots, config.base_seed)?;
    let train_emb = encode(&train, &encoder)?;
    let test_emb = encode(&test, &encoder)?;
    Ok(PipelineData {
        train_rows: train.len(),
        test_rows: test.len(),
        train_emb,
        test_emb,
        dataset,
    })
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))
}

fn write_artifact(dir: &Path, rel: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    std::fs::write(&path, contents)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

/// Writes the resolved config into the artifact dir and opens the manifest.
fn open_run(config: &ExperimentConfig) -> Result<(PathBuf, RunManifest), CliError> {
    let dir = config.artifact_dir();
    ensure_dir(&dir)?;
    write_artifact(&dir, "config.resolved.toml", &config.render())?;
    let manifest = RunManifest::load_or_new(&dir, &config.content_hash())?;
    Ok((dir, manifest))
}

fn model_file(index: usize) -> String {
    format!("models/model_{index:04}.json")
}

/// Validates the dataset and reports the split and embedding geometry.
pub fn cmd_ingest(config: &ExperimentConfig) -> Result<(), CliError> {
    let (dir, mut manifest) = open_run(config)?;
    let data = prepare_data(config)?;
    let (neg, pos) = data.dataset.class_counts();

    let summary = serde_json::json!({
        "rows": data.dataset.len(),
        "n_features": data.dataset.schema().n_features(),
        "embedded_dim": data.test_emb.dim(),
        "label_counts": { "negative": neg, "positive": pos },
        "n_shots": config.n_shots,
        "train_rows": data.train_rows,
        "test_rows": data.test_rows,
    });
    write_artifact(&dir, "ingest.json", &format!("{summary:#}"))?;
    write_artifact(
        &dir,
        "encoder.json",
        &serde_json::to_string_pretty(data.test_emb.encoder()).expect("encoder serialization"),
    )?;
    manifest.record(
        &dir,
        "ingest",
        &[("ingest", "ingest.json"), ("encoder", "encoder.json")],
    )?;
    println!(
        "ingested {} rows ({} features -> {} dims); split {} train / {} test; artifacts in {}",
        data.dataset.len(),
        data.dataset.schema().n_features(),
        data.test_emb.dim(),
        data.train_rows,
        data.test_rows,
        dir.display()
    );
    Ok(())
}

/// Trains the seeded ensemble and records per-model test accuracy.
pub fn cmd_train_ensemble(config: &ExperimentConfig) -> Result<(), CliError> {
    let (dir, mut manifest) = open_run(config)?;
    let data = prepare_data(config)?;

    let models: Vec<ScoreModel> = (0..config.n_models)
        .into_par_iter()
        .map(|i| {
            train_model(&data.train_emb, &config.train, config.base_seed + i as u64)
                .map_err(|e| CliError::Data(format!("model {i}: {e}")))
        })
        .collect::<Result<_, _>>()?;

    let errors: Vec<f64> = models
        .iter()
        .map(|m| rashomon_core::empirical_error(m, &data.test_emb))
        .collect::<Result<_, _>>()
        .map_err(CliError::from)?;

    let mut recorded: Vec<(String, String)> = Vec::new();
    for (i, model) in models.iter().enumerate() {
        let rel = model_file(i);
        write_artifact(&dir, &rel, &model.to_json())?;
        recorded.push((format!("model_{i:04}"), rel));
    }

    let accuracy_rows: Vec<serde_json::Value> = models
        .iter()
        .zip(&errors)
        .enumerate()
        .map(|(i, (m, err))| {
            serde_json::json!({
                "model_index": i,
                "seed": m.seed(),
                "test_error": err,
                "test_accuracy": 1.0 - err,
            })
        })
        .collect();
    let accuracies = serde_json::json!({
        "n_models": config.n_models,
        "models": accuracy_rows,
    });
    write_artifact(&dir, "accuracies.json", &format!("{accuracies:#}"))?;
    let mut csv = String::from("model_index,seed,test_error,test_accuracy\n");
    for (i, (m, err)) in models.iter().zip(&errors).enumerate() {
        csv.push_str(&format!("{},{},{},{}\n", i, m.seed(), err, 1.0 - err));
    }
    write_artifact(&dir, "accuracies.csv", &csv)?;

    let mut artifacts: Vec<(&str, &str)> = vec![
        ("accuracies", "accuracies.json"),
        ("accuracies_csv", "accuracies.csv"),
    ];
    for (name, rel) in &recorded {
        artifacts.push((name.as_str(), rel.as_str()));
    }
    manifest.record(&dir, "train-ensemble", &artifacts)?;

    let mean_acc = 1.0 - errors.iter().sum::<f64>() / errors.len() as f64;
    println!(
        "trained {} models (seeds {}..{}), mean test accuracy {:.4}; artifacts in {}",
        config.n_models,
        config.base_seed,
        config.base_seed + config.n_models as u64 - 1,
        mean_acc,
        dir.display()
    );
    Ok(())
}

fn load_models(dir: &Path, config: &ExperimentConfig) -> Result<Vec<ScoreModel>, CliError> {
    (0..config.n_models)
        .map(|i| {
            let path = dir.join(model_file(i));
            let text = std::fs::read_to_string(&path).map_err(|_| {
                CliError::Data(format!(
                    "missing model file {}; run `train-ensemble` first",
                    path.display()
                ))
            })?;
            ScoreModel::from_json(&text).map_err(CliError::from)
        })
        .collect()
}

fn competing_set(
    dir: &Path,
    config: &ExperimentConfig,
    test_emb: &EmbeddedDataset,
) -> Result<CompetingSet, CliError> {
    let models = load_models(dir, config)?;
    build_competing_set(models, config.reference_index, test_emb, config.delta)
        .map_err(CliError::from)
}

/// Builds the competing set and writes the multiplicity report.
pub fn cmd_multiplicity(config: &ExperimentConfig) -> Result<(), CliError> {
    let (dir, mut manifest) = open_run(config)?;
    let data = prepare_data(config)?;
    let set = competing_set(&dir, config, &data.test_emb)?;
    let matrix = prediction_matrix(&set, &data.test_emb)?;
    let accuracies: Vec<f64> = set.member_errors().iter().map(|e| 1.0 - e).collect();
    let report = multiplicity_report(&matrix, &accuracies)?;

    write_artifact(&dir, "multiplicity.json", &report.to_json())?;
    write_artifact(&dir, "multiplicity.csv", &report.to_csv_string())?;
    manifest.record(
        &dir,
        "multiplicity",
        &[
            ("multiplicity", "multiplicity.json"),
            ("multiplicity_csv", "multiplicity.csv"),
        ],
    )?;
    println!(
        "competing set: {}/{} models within delta {} of reference error {:.4}",
        set.len(),
        config.n_models,
        config.delta,
        set.reference_error()
    );
    println!(
        "arbitrariness {:.4}, discrepancy {:.4}, avg PD {:.4}, avg PV {:.4}, avg PR {:.4}",
        report.aggregate.arbitrariness_rate,
        report.aggregate.discrepancy,
        report.aggregate.avg_pairwise_disagreement,
        report.aggregate.avg_prediction_variance,
        report.aggregate.avg_prediction_range
    );
    Ok(())
}

/// Profiles consistency for one ensemble member over the test split.
pub fn cmd_consistency(
    config: &ExperimentConfig,
    model_id: Option<usize>,
) -> Result<(), CliError> {
    let (dir, mut manifest) = open_run(config)?;
    let model_index = model_id.unwrap_or(config.reference_index);
    if model_index >= config.n_models {
        return Err(CliError::Data(format!(
            "unknown model id {model_index}; ensemble has {} models",
            config.n_models
        )));
    }
    let data = prepare_data(config)?;
    let path = dir.join(model_file(model_index));
    let text = std::fs::read_to_string(&path).map_err(|_| {
        CliError::Data(format!(
            "missing model file {}; run `train-ensemble` first",
            path.display()
        ))
    })?;
    let model = ScoreModel::from_json(&text)?;

    let sampler = sampler_config(config);
    let scores = consistency_profile(&model, &data.test_emb, &sampler)?;
    let ids = (0..scores.len()).map(point_id).collect();
    let profile = ConsistencyProfile::new(model_index, sampler, ids, scores);

    write_artifact(&dir, "consistency.json", &profile.to_json())?;
    write_artifact(&dir, "consistency.csv", &profile.to_csv_string())?;
    manifest.record(
        &dir,
        "consistency",
        &[
            ("consistency", "consistency.json"),
            ("consistency_csv", "consistency.csv"),
        ],
    )?;
    let mean_s = profile.scores.iter().map(|s| s.value).sum::<f64>()
        / profile.scores.len().max(1) as f64;
    println!(
        "profiled model {} over {} test points (k = {}); mean consistency {:.4}",
        model_index,
        profile.scores.len(),
        config.sampler.k,
        mean_s
    );
    Ok(())
}

/// Correlates the consistency profile with the multiplicity report.
pub fn cmd_correlate(config: &ExperimentConfig) -> Result<(), CliError> {
    let (dir, mut manifest) = open_run(config)?;
    let mult_path = manifest.require(&dir, "multiplicity", "multiplicity")?;
    let prof_path = manifest.require(&dir, "consistency", "consistency")?;

    let multiplicity = MultiplicityReport::from_json(&std::fs::read_to_string(mult_path)?)?;
    let profile = ConsistencyProfile::from_json(&std::fs::read_to_string(prof_path)?)?;

    let mult_ids: Vec<&String> = multiplicity.per_point.iter().map(|p| &p.point_id).collect();
    let prof_ids: Vec<&String> = profile.point_ids.iter().collect();
    if mult_ids != prof_ids {
        return Err(CliError::Data(
            "multiplicity and consistency artifacts cover different point sets".into(),
        ));
    }

    let s_values: Vec<f64> = profile.scores.iter().map(|s| s.value).collect();
    let pred_prob: Vec<f64> = profile.scores.iter().map(|s| s.center_pred).collect();
    let table = correlate_report(&s_values, &pred_prob, &multiplicity)?;

    if multiplicity.n_models < 2 {
        eprintln!(
            "warning: single-model ensemble upstream; every correlation is undefined"
        );
    }

    write_artifact(&dir, "correlation.json", &table.to_json())?;
    write_artifact(&dir, "correlation.txt", &table.render_text())?;
    manifest.record(
        &dir,
        "correlate",
        &[
            ("correlation", "correlation.json"),
            ("correlation_txt", "correlation.txt"),
        ],
    )?;
    print!("{}", table.render_text());
    Ok(())
}

fn merge_reports(mut reports: Vec<BoundReport>) -> BoundReport {
    let mut merged = reports.remove(0);
    for report in reports {
        merged.cells.extend(report.cells);
        merged.implication_violations += report.implication_violations;
        merged.all_pass = merged.all_pass && report.all_pass;
    }
    merged
}

/// Runs both bound verifications over the configured grid.
pub fn cmd_verify_bound(config: &ExperimentConfig) -> Result<(), CliError> {
    let (dir, mut manifest) = open_run(config)?;
    let class = SyntheticClassConfig {
        base: parse_base_fn(&config.verify.base)?,
        model_noise_std: config.verify.model_noise_std,
        dim: config.verify.dim,
        seed: derive_seed(config.base_seed, VERIFY_CLASS_LANE),
    };
    let options = VerifyOptions {
        beta_scale: config.verify.beta_scale,
        ..VerifyOptions::default()
    };

    let centers = rashomon_core::verifier::default_centers(
        class.dim,
        config.verify.n_centers,
        derive_seed(config.base_seed, VERIFY_CENTER_LANE),
    );

    let mut divergence_reports = Vec::new();
    let mut theorem_reports = Vec::new();
    for &k in &config.verify.k_grid {
        let sampler = SamplerConfig {
            k,
            gaussian_std: config.sampler.gaussian_std,
            radius_sigma: config.sampler.radius_sigma,
            seed: derive_seed(derive_seed(config.base_seed, VERIFY_SAMPLER_LANE), k as u64),
        };
        divergence_reports.push(verify_divergence_bound_with(
            &class,
            &sampler,
            &centers[0],
            &config.verify.eps_grid,
            config.verify.trials,
            &options,
        )?);
        theorem_reports.push(verify_theorem_with(
            &class,
            &sampler,
            &centers,
            &config.verify.eps_grid,
            config.verify.trials,
            &options,
        )?);
    }
    let divergence = merge_reports(divergence_reports);
    let theorem = merge_reports(theorem_reports);

    write_artifact(&dir, "bounds_divergence.json", &divergence.to_json())?;
    write_artifact(&dir, "bounds_divergence.csv", &divergence.to_csv_string())?;
    write_artifact(&dir, "bounds_theorem.json", &theorem.to_json())?;
    write_artifact(&dir, "bounds_theorem.csv", &theorem.to_csv_string())?;
    manifest.record(
        &dir,
        "verify-bound",
        &[
            ("bounds_divergence", "bounds_divergence.json"),
            ("bounds_divergence_csv", "bounds_divergence.csv"),
            ("bounds_theorem", "bounds_theorem.json"),
            ("bounds_theorem_csv", "bounds_theorem.csv"),
        ],
    )?;

    let total = divergence.cells.len() + theorem.cells.len();
    let failed = divergence.cells.iter().chain(&theorem.cells).filter(|c| !c.pass).count();
    println!(
        "verified {} cells ({} trials each): {} failed; implication violations: {}",
        total,
        config.verify.trials,
        failed,
        divergence.implication_violations + theorem.implication_violations
    );
    if !(divergence.all_pass && theorem.all_pass) {
        return Err(CliError::Verification(format!(
            "{failed} of {total} grid cells exceeded the bound (see {})",
            dir.join("bounds_theorem.csv").display()
        )));
    }
    Ok(())
}

/// Writes a demo dataset and a matching config file.
pub fn cmd_gen_data(rows: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    if rows < 4 {
        return Err(CliError::Config("need at least 4 rows".into()));
    }
    ensure_dir(out)?;
    let demo = generate_demo(rows, seed);
    let csv_path = out.join("demo.csv");
    std::fs::write(&csv_path, &demo.csv)?;

    let schema = demo.dataset.schema();
    let config = ExperimentConfig {
        output_dir: out.join("runs"),
        base_seed: 0,
        n_shots: 128,
        n_models: 40,
        delta: 0.02,
        reference_index: 0,
        dataset: crate::config::DatasetConfig {
            path: csv_path.clone(),
            label_column: schema.label_column().to_string(),
            positive_label: schema.positive_label().to_string(),
            columns: schema
                .columns()
                .iter()
                .map(|(name, kind)| crate::config::ColumnSpec {
                    name: name.clone(),
                    kind: *kind,
                })
                .collect(),
        },
        train: Default::default(),
        sampler: Default::default(),
        verify: Default::default(),
    };
    let config_path = out.join("demo-config.toml");
    std::fs::write(&config_path, config.render())?;

    let (neg, pos) = demo.dataset.class_counts();
    println!(
        "wrote {} rows ({} positive / {} negative) to {}",
        rows,
        pos,
        neg,
        csv_path.display()
    );
    println!("wrote config template to {}", config_path.display());
    Ok(())
}
