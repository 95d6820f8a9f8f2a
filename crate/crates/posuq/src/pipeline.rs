//! Stage orchestration: simulate -> train -> evaluate, with file-based
//! handoff between stages and a single root seed.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use posuq_core::eval::{build_report, empirical_cdf, position_error, EvaluationReport};
use posuq_core::gp::{train_gp_with_cap, GpModel};
use posuq_core::radiosim::{generate_dataset, split_dataset, MeasurementSet, SplitTag};
use posuq_core::rf::{
    cv_select_params, predict_knn, predict_rf, to_regression_data, train_rf, KnnModel,
};
use posuq_core::rng::derive_seed;
use posuq_core::scenario::build_indoor_open_office;
use posuq_core::uncertainty::{
    cnk_uncertainty, gp_sampling_uncertainty, rf_ensemble_uncertainty, MethodTag,
    PositionEstimate,
};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::dataset;
use crate::models;
use crate::report;

pub struct Paths {
    pub train_csv: PathBuf,
    pub test_csv: PathBuf,
    pub gp_models: PathBuf,
    pub rf_model: PathBuf,
}

impl Paths {
    pub fn of(cfg: &RunConfig) -> Self {
        Self {
            train_csv: cfg.dataset_dir.join("train.csv"),
            test_csv: cfg.dataset_dir.join("test.csv"),
            gp_models: cfg.models_dir.join("gp_models.txt"),
            rf_model: cfg.models_dir.join("rf_model.txt"),
        }
    }
}

/// Generate the dataset and write the train/test CSVs.
/// Returns (train rows, test rows).
pub fn cmd_simulate(cfg: &RunConfig) -> Result<(usize, usize)> {
    let deployment = build_indoor_open_office();
    let root = cfg.root_seed();
    let full = generate_dataset(&deployment, &cfg.scenario, derive_seed(root, "simulate", 0));
    let (train, test) = split_dataset(&full, cfg.split_fraction, derive_seed(root, "split", 0));
    std::fs::create_dir_all(&cfg.dataset_dir).with_context(|| {
        format!("cannot create dataset directory {}", cfg.dataset_dir.display())
    })?;
    let paths = Paths::of(cfg);
    dataset::write_csv(&train, &paths.train_csv)?;
    dataset::write_csv(&test, &paths.test_csv)?;
    Ok((train.len(), test.len()))
}

fn load_split(cfg: &RunConfig, which: SplitTag) -> Result<MeasurementSet> {
    let paths = Paths::of(cfg);
    let path = match which {
        SplitTag::Train => paths.train_csv,
        SplitTag::Test => paths.test_csv,
    };
    let deployment = build_indoor_open_office();
    dataset::read_csv(&path, &deployment, which).with_context(|| {
        format!(
            "cannot load dataset {}; run the `simulate` stage first",
            path.display()
        )
    })
}

/// Train the per-BS GP models and the random forest; write both model files.
/// Returns the number of GP models written.
pub fn cmd_train(cfg: &RunConfig) -> Result<usize> {
    let train = load_split(cfg, SplitTag::Train)?;
    if train.is_empty() {
        bail!("training split is empty");
    }
    let deployment = &train.deployment;
    let root = cfg.root_seed();

    // One GP per BS on (ToA, true 3D distance) pairs.
    let gp_models: Vec<GpModel> = (0..deployment.num_bs())
        .into_par_iter()
        .map(|bs| {
            let taus: Vec<f64> = train.records.iter().map(|r| r.toa[bs]).collect();
            let dists: Vec<f64> = train
                .records
                .iter()
                .map(|r| {
                    r.true_position
                        .at_height(deployment.ue_height)
                        .distance(&deployment.bs_positions[bs])
                })
                .collect();
            train_gp_with_cap(&taus, &dists, cfg.gp_subsample_cap)
                .with_context(|| format!("GP training failed for BS {bs}"))
        })
        .collect::<Result<Vec<_>>>()?;

    let (features, targets) = to_regression_data(&train);
    let rf_params = if cfg.rf_cross_validate {
        let selected = cv_select_params(&features, &targets, derive_seed(root, "cv", 0))
            .context("cross-validation failed")?;
        posuq_core::rf::RfParams {
            min_leaf_size: cfg.rf_params.min_leaf_size,
            features_per_split: cfg.rf_params.features_per_split,
            ..selected
        }
    } else {
        cfg.rf_params
    };
    let rf_model = train_rf(&features, &targets, &rf_params, derive_seed(root, "rf", 0))
        .context("random-forest training failed")?;

    std::fs::create_dir_all(&cfg.models_dir).with_context(|| {
        format!("cannot create models directory {}", cfg.models_dir.display())
    })?;
    let paths = Paths::of(cfg);
    models::write_gp_models(&gp_models, &paths.gp_models)?;
    models::write_rf_model(&rf_model, &paths.rf_model)?;
    Ok(gp_models.len())
}

pub struct EvaluateOutput {
    pub report: EvaluationReport,
    pub ue_indices: Vec<usize>,
    pub knn_errors: Vec<f64>,
    /// Per-method position estimates in test-record order.
    pub estimates: Vec<(MethodTag, Vec<PositionEstimate>)>,
}

/// Run the three estimators over the test split and write the report CSVs.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<EvaluateOutput> {
    let train = load_split(cfg, SplitTag::Train)?;
    let test = load_split(cfg, SplitTag::Test)?;
    if test.is_empty() {
        bail!("test split is empty");
    }
    let paths = Paths::of(cfg);
    let gp_models = models::read_gp_models(&paths.gp_models)
        .with_context(|| "cannot load GP models; run the `train` stage first")?;
    let rf_model = models::read_rf_model(&paths.rf_model)
        .with_context(|| "cannot load RF model; run the `train` stage first")?;
    let (train_features, train_targets) = to_regression_data(&train);
    let knn = KnnModel::new(train_features, train_targets, 3)
        .context("cannot build KNN baseline from the training split")?;

    let deployment = &test.deployment;
    let root = cfg.root_seed();
    struct PerUe {
        gp: PositionEstimate,
        rf: PositionEstimate,
        cnk: PositionEstimate,
        knn_error: f64,
    }
    let per_ue: Vec<PerUe> = test
        .records
        .par_iter()
        .map(|record| {
            let ue = record.ue_index;
            let gp = gp_sampling_uncertainty(
                &gp_models,
                deployment,
                &record.toa,
                cfg.num_samples,
                derive_seed(root, "uq", ue as u64),
                &cfg.solver,
            )
            .map_err(anyhow::Error::from)
            .with_context(|| format!("GP uncertainty failed for UE {ue}"))?;

            let (rf_pos, per_tree) = predict_rf(&rf_model, &record.toa);
            let rf_var = rf_ensemble_uncertainty(&per_tree, &rf_pos)
                .map_err(anyhow::Error::from)
                .with_context(|| format!("RF uncertainty failed for UE {ue}"))?;
            let rf = PositionEstimate::new(rf_pos, rf_var, MethodTag::Rf)
                .map_err(anyhow::Error::from)?;

            let knn_pos = predict_knn(&knn, &record.toa);
            let cnk_var = cnk_uncertainty(&rf_pos, &knn_pos);
            let cnk = PositionEstimate::new(rf_pos, cnk_var, MethodTag::RfCnk)
                .map_err(anyhow::Error::from)?;

            Ok(PerUe {
                gp,
                rf,
                cnk,
                knn_error: position_error(&knn_pos, &record.true_position),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let truths: Vec<_> = test.records.iter().map(|r| r.true_position).collect();
    let estimates = vec![
        (MethodTag::Gp, per_ue.iter().map(|p| p.gp).collect::<Vec<_>>()),
        (MethodTag::Rf, per_ue.iter().map(|p| p.rf).collect()),
        (MethodTag::RfCnk, per_ue.iter().map(|p| p.cnk).collect()),
    ];
    let report = build_report(&estimates, &truths)?;
    let ue_indices: Vec<usize> = test.records.iter().map(|r| r.ue_index).collect();
    let knn_errors: Vec<f64> = per_ue.iter().map(|p| p.knn_error).collect();
    report::write_all(
        &report,
        &ue_indices,
        &empirical_cdf(&knn_errors),
        &cfg.report_dir,
    )?;
    Ok(EvaluateOutput {
        report,
        ue_indices,
        knn_errors,
        estimates,
    })
}

/// Read back summary.csv and render it.
pub fn cmd_report(cfg: &RunConfig) -> Result<String> {
    let path = cfg.report_dir.join("summary.csv");
    let text = std::fs::read_to_string(&path).with_context(|| {
        format!(
            "cannot read {}; run the `evaluate` stage first",
            path.display()
        )
    })?;
    Ok(report::render_summary(&text))
}
