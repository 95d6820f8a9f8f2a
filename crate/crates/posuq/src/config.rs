//! Run configuration: one TOML file drives the whole pipeline.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use posuq_core::otdoa::SolverSettings;
use posuq_core::rf::RfParams;
use posuq_core::{LosModel, ScenarioConfig};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub split_fraction: Option<f64>,
    #[serde(default)]
    pub scenario: RawScenario,
    #[serde(default)]
    pub solver: RawSolver,
    #[serde(default)]
    pub gp: RawGp,
    #[serde(default)]
    pub rf: RawRf,
    #[serde(default)]
    pub uncertainty: RawUncertainty,
    #[serde(default)]
    pub paths: RawPaths,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RawScenario {
    pub n_ues: Option<usize>,
    pub rng_seed: Option<u64>,
    pub noise_std_s: Option<f64>,
    pub nlos_excess_mean_s: Option<f64>,
    pub los_model: Option<String>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RawSolver {
    pub max_iterations: Option<usize>,
    pub position_tolerance_m: Option<f64>,
    pub damping_init: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RawGp {
    pub subsample_cap: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RawRf {
    pub n_trees: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_leaf_size: Option<usize>,
    pub features_per_split: Option<usize>,
    pub cross_validate: Option<bool>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RawUncertainty {
    pub num_samples: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RawPaths {
    pub dataset_dir: Option<PathBuf>,
    pub models_dir: Option<PathBuf>,
    pub report_dir: Option<PathBuf>,
}

impl Default for RawConfig {
    fn default() -> Self {
        Self {
            split_fraction: None,
            scenario: RawScenario::default(),
            solver: RawSolver::default(),
            gp: RawGp::default(),
            rf: RawRf::default(),
            uncertainty: RawUncertainty::default(),
            paths: RawPaths::default(),
        }
    }
}

/// Fully resolved configuration for one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub split_fraction: f64,
    pub solver: SolverSettings,
    pub gp_subsample_cap: usize,
    pub rf_params: RfParams,
    pub rf_cross_validate: bool,
    pub num_samples: usize,
    pub dataset_dir: PathBuf,
    pub models_dir: PathBuf,
    pub report_dir: PathBuf,
}

/// CLI overrides applied on top of the config file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub num_samples: Option<usize>,
    pub max_iterations: Option<usize>,
    pub position_tolerance: Option<f64>,
    pub cross_validate: Option<bool>,
}

const N_BS: usize = 12;

impl RunConfig {
    pub fn resolve(raw: &RawConfig, overrides: &Overrides) -> Result<Self> {
        let los_model = match raw.scenario.los_model.as_deref() {
            None | Some("distance-probabilistic") => LosModel::DistanceProbabilistic,
            Some("always-los") => LosModel::AlwaysLos,
            Some(other) => bail!(
                "unknown los_model {other:?}: expected \"always-los\" or \"distance-probabilistic\""
            ),
        };
        let defaults = ScenarioConfig::default();
        let scenario = ScenarioConfig {
            n_ues: raw.scenario.n_ues.unwrap_or(defaults.n_ues),
            rng_seed: overrides
                .seed
                .or(raw.scenario.rng_seed)
                .unwrap_or(defaults.rng_seed),
            noise_std: raw.scenario.noise_std_s.unwrap_or(defaults.noise_std),
            nlos_excess_mean: raw
                .scenario
                .nlos_excess_mean_s
                .unwrap_or(defaults.nlos_excess_mean),
            los_model,
        };
        if scenario.n_ues == 0 {
            bail!("n_ues must be >= 1");
        }
        if scenario.noise_std < 0.0 || scenario.nlos_excess_mean < 0.0 {
            bail!("noise_std_s and nlos_excess_mean_s must be >= 0");
        }
        let split_fraction = raw.split_fraction.unwrap_or(0.7);
        if !(split_fraction > 0.0 && split_fraction < 1.0) {
            bail!("split_fraction must lie strictly between 0 and 1");
        }
        let solver_defaults = SolverSettings::default();
        let solver = SolverSettings {
            max_iterations: overrides
                .max_iterations
                .or(raw.solver.max_iterations)
                .unwrap_or(solver_defaults.max_iterations),
            position_tolerance: overrides
                .position_tolerance
                .or(raw.solver.position_tolerance_m)
                .unwrap_or(solver_defaults.position_tolerance),
            damping_init: raw.solver.damping_init.unwrap_or(solver_defaults.damping_init),
        };
        if solver.max_iterations == 0 || solver.position_tolerance <= 0.0 {
            bail!("solver needs max_iterations >= 1 and position_tolerance_m > 0");
        }
        let rf_defaults = RfParams::defaults_for(N_BS);
        let rf_params = RfParams {
            n_trees: raw.rf.n_trees.unwrap_or(rf_defaults.n_trees),
            max_depth: raw.rf.max_depth.unwrap_or(rf_defaults.max_depth),
            min_leaf_size: raw.rf.min_leaf_size.unwrap_or(rf_defaults.min_leaf_size),
            features_per_split: raw
                .rf
                .features_per_split
                .unwrap_or(rf_defaults.features_per_split),
            bootstrap: true,
        };
        let num_samples = overrides
            .num_samples
            .or(raw.uncertainty.num_samples)
            .unwrap_or(200);
        if num_samples < 2 {
            bail!("num_samples must be >= 2");
        }
        let paths = &raw.paths;
        Ok(Self {
            scenario,
            split_fraction,
            solver,
            gp_subsample_cap: raw.gp.subsample_cap.unwrap_or(1000),
            rf_params,
            rf_cross_validate: overrides
                .cross_validate
                .or(raw.rf.cross_validate)
                .unwrap_or(false),
            num_samples,
            dataset_dir: paths.dataset_dir.clone().unwrap_or_else(|| "out/dataset".into()),
            models_dir: paths.models_dir.clone().unwrap_or_else(|| "out/models".into()),
            report_dir: paths.report_dir.clone().unwrap_or_else(|| "out/report".into()),
        })
    }

    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let raw = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("cannot read config file {}", p.display()))?;
                toml::from_str(&text)
                    .with_context(|| format!("invalid config file {}", p.display()))?
            }
            None => RawConfig::default(),
        };
        Self::resolve(&raw, overrides)
    }

    /// The single root seed every stage seed is derived from.
    pub fn root_seed(&self) -> u64 {
        self.scenario.rng_seed
    }
}
