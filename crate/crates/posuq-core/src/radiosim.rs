//! ToA synthesis: geometry plus measurement noise and NLoS excess delay.

use alloc::vec::Vec;

use rand_core::RngCore;

use crate::geo::{Point2, Point3, SPEED_OF_LIGHT};
use crate::rng;
use crate::scenario::{Deployment, LosModel, ScenarioConfig};

/// One UE's measurements: ToA per BS, LoS flags, ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ToaRecord {
    pub ue_index: usize,
    pub toa: Vec<f64>,
    pub los_flags: Vec<bool>,
    pub true_position: Point2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitTag {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub records: Vec<ToaRecord>,
    pub deployment: Deployment,
    pub split_tag: SplitTag,
}

impl MeasurementSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Ideal ToA: 3D Euclidean distance over the speed of light.
pub fn geometric_toa(ue: &Point2, bs: &Point3, ue_height: f64) -> f64 {
    ue.at_height(ue_height).distance(bs) / SPEED_OF_LIGHT
}

/// True ToA plus Gaussian noise plus (for NLoS) exponential excess delay.
/// The result is clamped to >= true_toa - 3*noise_std and >= 0.
pub fn synthesize_toa(
    true_toa: f64,
    los: bool,
    noise_std: f64,
    nlos_excess_mean: f64,
    rng: &mut impl RngCore,
) -> f64 {
    let mut toa = true_toa + noise_std * rng::standard_normal(rng);
    if !los {
        toa += rng::exponential(rng, nlos_excess_mean);
    }
    toa.max(true_toa - 3.0 * noise_std).max(0.0)
}

/// LoS probability as a function of 2D UE-BS distance (indoor hotspot shape).
pub fn los_probability(d2: f64) -> f64 {
    if d2 <= 5.0 {
        1.0
    } else {
        libm::exp(-(d2 - 5.0) / 70.8)
    }
}

/// Simulate one measurement campaign: drop `config.n_ues` UEs and record
/// noisy ToAs to every BS. Each UE draws from its own RNG stream, so the
/// output is independent of evaluation order.
pub fn generate_dataset(
    deployment: &Deployment,
    config: &ScenarioConfig,
    seed: u64,
) -> MeasurementSet {
    let ues = crate::scenario::drop_ues(deployment, config.n_ues, rng::derive_seed(seed, "drop", 0));
    let records = ues
        .iter()
        .enumerate()
        .map(|(ue_index, ue)| {
            let mut ue_rng = rng::stream(seed, "ue", ue_index as u64);
            let mut toa = Vec::with_capacity(deployment.num_bs());
            let mut los_flags = Vec::with_capacity(deployment.num_bs());
            for bs in &deployment.bs_positions {
                let los = match config.los_model {
                    LosModel::AlwaysLos => true,
                    LosModel::DistanceProbabilistic => {
                        rng::uniform(&mut ue_rng) < los_probability(ue.distance(&bs.xy()))
                    }
                };
                let t = geometric_toa(ue, bs, deployment.ue_height);
                toa.push(synthesize_toa(
                    t,
                    los,
                    config.noise_std,
                    config.nlos_excess_mean,
                    &mut ue_rng,
                ));
                los_flags.push(los);
            }
            ToaRecord {
                ue_index,
                toa,
                los_flags,
                true_position: *ue,
            }
        })
        .collect();
    MeasurementSet {
        records,
        deployment: deployment.clone(),
        split_tag: SplitTag::Train,
    }
}

/// Random train/test split by UE. `train_fraction` of the records (rounded)
/// go to the train set; both halves keep ascending ue_index order.
pub fn split_dataset(
    set: &MeasurementSet,
    train_fraction: f64,
    seed: u64,
) -> (MeasurementSet, MeasurementSet) {
    let n = set.len();
    let n_train = ((n as f64 * train_fraction) as usize).clamp(1, n.saturating_sub(1).max(1));
    let mut order: Vec<usize> = (0..n).collect();
    let mut split_rng = rng::stream(seed, "split", 0);
    // Fisher-Yates
    for i in (1..n).rev() {
        let j = rng::index(&mut split_rng, i + 1);
        order.swap(i, j);
    }
    let mut train_idx: Vec<usize> = order[..n_train].to_vec();
    let mut test_idx: Vec<usize> = order[n_train..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let pick = |idx: &[usize], tag| MeasurementSet {
        records: idx.iter().map(|&i| set.records[i].clone()).collect(),
        deployment: set.deployment.clone(),
        split_tag: tag,
    };
    (
        pick(&train_idx, SplitTag::Train),
        pick(&test_idx, SplitTag::Test),
    )
}
