//! Indoor open-office deployment and UE drops.

use alloc::vec::Vec;

use crate::geo::{Point2, Point3};
use crate::rng;

/// The geometric world: BS anchors plus the area footprint.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub bs_positions: Vec<Point3>,
    /// Extent along y, meters.
    pub area_width: f64,
    /// Extent along x, meters.
    pub area_length: f64,
    pub bs_height: f64,
    pub ue_height: f64,
}

impl Deployment {
    pub fn num_bs(&self) -> usize {
        self.bs_positions.len()
    }

    pub fn contains(&self, p: &Point2) -> bool {
        (0.0..=self.area_length).contains(&p.x) && (0.0..=self.area_width).contains(&p.y)
    }

    pub fn centroid(&self) -> Point2 {
        Point2::new(self.area_length / 2.0, self.area_width / 2.0)
    }
}

/// How LoS/NLoS is assigned to each UE-BS link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LosModel {
    AlwaysLos,
    DistanceProbabilistic,
}

/// Simulation knobs for one scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n_ues: usize,
    pub rng_seed: u64,
    /// ToA measurement noise, seconds.
    pub noise_std: f64,
    /// Mean of the NLoS excess delay, seconds.
    pub nlos_excess_mean: f64,
    pub los_model: LosModel,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_ues: 1000,
            rng_seed: 5,
            noise_std: 1e-9,
            nlos_excess_mean: 6e-9,
            los_model: LosModel::DistanceProbabilistic,
        }
    }
}

/// The 12-BS indoor open office: 120 m x 50 m footprint, two rows of six
/// ceiling-mounted BSs at 3 m, UEs at 1.5 m.
pub fn build_indoor_open_office() -> Deployment {
    let mut bs_positions = Vec::with_capacity(12);
    for &y in &[15.0, 35.0] {
        for i in 0..6 {
            let x = 10.0 + 20.0 * i as f64;
            bs_positions.push(Point3::new(x, y, 3.0));
        }
    }
    Deployment {
        bs_positions,
        area_width: 50.0,
        area_length: 120.0,
        bs_height: 3.0,
        ue_height: 1.5,
    }
}

/// Drop `n` UEs uniformly over the footprint. Identical seeds give
/// identical points bit-for-bit.
pub fn drop_ues(deployment: &Deployment, n: usize, seed: u64) -> Vec<Point2> {
    let mut rng = rng::stream(seed, "ue-drop", 0);
    (0..n)
        .map(|_| {
            let x = rng::uniform_in(&mut rng, 0.0, deployment.area_length);
            let y = rng::uniform_in(&mut rng, 0.0, deployment.area_width);
            Point2::new(x, y)
        })
        .collect()
}
