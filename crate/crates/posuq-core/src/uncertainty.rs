//! The three uncertainty estimators: GP sampling, RF ensemble variance,
//! and CNK, plus the combined scalar metric sqrt(v_x + v_y).

use alloc::vec::Vec;

use rand_core::RngCore;

use crate::geo::Point2;
use crate::gp::GpModel;
use crate::otdoa::{solve_from_distances, OtdoaError, SolverSettings};
use crate::rng;
use crate::scenario::Deployment;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodTag {
    Gp,
    Rf,
    RfCnk,
}

impl MethodTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            MethodTag::Gp => "gp",
            MethodTag::Rf => "rf",
            MethodTag::RfCnk => "rf_cnk",
        }
    }
}

/// A position with per-coordinate uncertainty variances and the combined
/// scalar metric c = sqrt(v_x + v_y).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionEstimate {
    pub position: Point2,
    pub variance: (f64, f64),
    pub combined: f64,
    pub method_tag: MethodTag,
}

impl PositionEstimate {
    pub fn new(
        position: Point2,
        variance: (f64, f64),
        method_tag: MethodTag,
    ) -> Result<Self, UncertaintyError> {
        let combined = combined_metric(variance)?;
        Ok(Self {
            position,
            variance,
            combined,
            method_tag,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UncertaintyError {
    /// Fewer than 2 usable samples survived the sampling loop.
    Unavailable,
    /// Ensemble variance needs at least 2 trees.
    InsufficientEnsemble,
    InvalidInput,
    Solver(OtdoaError),
}

impl core::fmt::Display for UncertaintyError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            UncertaintyError::Unavailable => write!(f, "uncertainty unavailable: too few samples"),
            UncertaintyError::InsufficientEnsemble => write!(f, "need at least 2 trees"),
            UncertaintyError::InvalidInput => write!(f, "invalid uncertainty input"),
            UncertaintyError::Solver(e) => write!(f, "position solve failed: {e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for UncertaintyError {}

impl From<OtdoaError> for UncertaintyError {
    fn from(e: OtdoaError) -> Self {
        UncertaintyError::Solver(e)
    }
}

/// c = sqrt(v_x + v_y).
pub fn combined_metric(v: (f64, f64)) -> Result<f64, UncertaintyError> {
    if v.0 < 0.0 || v.1 < 0.0 || !v.0.is_finite() || !v.1.is_finite() {
        return Err(UncertaintyError::InvalidInput);
    }
    Ok(libm::sqrt(v.0 + v.1))
}

/// Draw one distance from N(mean, var), truncated at >= 0 by resampling.
fn sample_distance(mean: f64, var: f64, rng: &mut impl RngCore) -> f64 {
    let std = libm::sqrt(var.max(0.0));
    for _ in 0..64 {
        let d = mean + std * rng::standard_normal(rng);
        if d >= 0.0 {
            return d;
        }
    }
    0.0
}

/// Sampling-based uncertainty for the GP route: position from the mean
/// predicted distances, then `n_samples` re-solves on distances drawn from
/// each per-BS predictive Gaussian; the spread around the mean-distance
/// position is the uncertainty.
pub fn gp_sampling_uncertainty(
    gp_models: &[GpModel],
    deployment: &Deployment,
    toa: &[f64],
    n_samples: usize,
    seed: u64,
    settings: &SolverSettings,
) -> Result<PositionEstimate, UncertaintyError> {
    if n_samples < 2 || toa.len() != gp_models.len() || toa.len() != deployment.num_bs() {
        return Err(UncertaintyError::InvalidInput);
    }
    let predictions: Vec<(f64, f64)> = gp_models
        .iter()
        .zip(toa)
        .map(|(m, t)| m.predict(*t))
        .collect();
    let means: Vec<f64> = predictions.iter().map(|p| p.0).collect();
    let center = solve_from_distances(&means, deployment, settings)?;

    let mut spread = (0.0, 0.0);
    let mut used = 0usize;
    for s in 0..n_samples {
        let mut sample_rng = rng::stream(seed, "uq-sample", s as u64);
        let mut solved = None;
        for _attempt in 0..5 {
            let draws: Vec<f64> = predictions
                .iter()
                .map(|&(m, v)| sample_distance(m, v, &mut sample_rng))
                .collect();
            if let Ok(p) = solve_from_distances(&draws, deployment, settings) {
                solved = Some(p);
                break;
            }
        }
        if let Some(p) = solved {
            spread.0 += (p.x - center.x) * (p.x - center.x);
            spread.1 += (p.y - center.y) * (p.y - center.y);
            used += 1;
        }
    }
    if used < 2 {
        return Err(UncertaintyError::Unavailable);
    }
    let denom = (used - 1) as f64;
    PositionEstimate::new(center, (spread.0 / denom, spread.1 / denom), MethodTag::Gp)
}

/// Ensemble variance of the k per-tree predictions around their mean.
pub fn rf_ensemble_uncertainty(
    per_tree: &[Point2],
    mean: &Point2,
) -> Result<(f64, f64), UncertaintyError> {
    if per_tree.len() < 2 {
        return Err(UncertaintyError::InsufficientEnsemble);
    }
    let denom = (per_tree.len() - 1) as f64;
    let vx = per_tree.iter().map(|p| (p.x - mean.x) * (p.x - mean.x)).sum::<f64>() / denom;
    let vy = per_tree.iter().map(|p| (p.y - mean.y) * (p.y - mean.y)).sum::<f64>() / denom;
    Ok((vx, vy))
}

/// CNK: squared per-coordinate difference to the KNN learner's prediction.
pub fn cnk_uncertainty(prediction: &Point2, knn_prediction: &Point2) -> (f64, f64) {
    let dx = prediction.x - knn_prediction.x;
    let dy = prediction.y - knn_prediction.y;
    (dx * dx, dy * dy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{GpHyperparams, GpModel};
    use crate::radiosim::geometric_toa;
    use crate::scenario::build_indoor_open_office;
    use alloc::vec;

    #[test]
    fn combined_metric_values() {
        assert_eq!(combined_metric((0.0, 0.0)).unwrap(), 0.0);
        assert_eq!(combined_metric((9.0, 16.0)).unwrap(), 5.0);
        assert!((combined_metric((2.0, 8.0)).unwrap() - 10.0f64.sqrt()).abs() < 1e-15);
        assert_eq!(
            combined_metric((-1.0, 0.0)),
            Err(UncertaintyError::InvalidInput)
        );
    }

    #[test]
    fn combined_metric_monotone() {
        let base = combined_metric((2.0, 3.0)).unwrap();
        assert!(combined_metric((2.5, 3.0)).unwrap() > base);
        assert!(combined_metric((2.0, 3.5)).unwrap() > base);
    }

    #[test]
    fn ensemble_variance_cases() {
        let p = Point2::new(1.0, 2.0);
        let same = vec![p; 5];
        assert_eq!(rf_ensemble_uncertainty(&same, &p).unwrap(), (0.0, 0.0));

        let two = vec![Point2::new(0.0, 0.0), Point2::new(2.0, 4.0)];
        assert_eq!(
            rf_ensemble_uncertainty(&two, &Point2::new(1.0, 2.0)).unwrap(),
            (2.0, 8.0)
        );

        assert_eq!(
            rf_ensemble_uncertainty(&[p], &p),
            Err(UncertaintyError::InsufficientEnsemble)
        );
    }

    #[test]
    fn ensemble_variance_matches_direct_formula() {
        let pts = vec![
            Point2::new(1.0, 5.0),
            Point2::new(2.0, 3.0),
            Point2::new(4.0, 8.0),
            Point2::new(0.5, 1.0),
            Point2::new(2.5, 3.0),
        ];
        let mean = Point2::new(
            pts.iter().map(|p| p.x).sum::<f64>() / 5.0,
            pts.iter().map(|p| p.y).sum::<f64>() / 5.0,
        );
        let (vx, vy) = rf_ensemble_uncertainty(&pts, &mean).unwrap();
        // independent accumulation
        let mut ex = 0.0;
        let mut ey = 0.0;
        for p in &pts {
            ex += (p.x - mean.x).powi(2);
            ey += (p.y - mean.y).powi(2);
        }
        assert!((vx - ex / 4.0).abs() < 1e-15);
        assert!((vy - ey / 4.0).abs() < 1e-15);
    }

    #[test]
    fn cnk_cases() {
        let p = Point2::new(3.0, 0.0);
        let q = Point2::new(0.0, 4.0);
        assert_eq!(cnk_uncertainty(&p, &p), (0.0, 0.0));
        assert_eq!(cnk_uncertainty(&p, &q), (9.0, 16.0));
        assert_eq!(cnk_uncertainty(&p, &q), cnk_uncertainty(&q, &p));
    }

    fn tight_gp_models(deployment: &Deployment, ue: &Point2, noise: f64) -> (Vec<GpModel>, Vec<f64>) {
        // One GP per BS trained on a dense ToA->distance grid so the
        // posterior mean is accurate near the query.
        let mut models = Vec::new();
        let mut toas = Vec::new();
        for bs in &deployment.bs_positions {
            let t_star = geometric_toa(ue, bs, deployment.ue_height);
            let taus: Vec<f64> = (0..25)
                .map(|i| t_star * (0.5 + 0.05 * i as f64))
                .collect();
            let ds: Vec<f64> = taus.iter().map(|t| t * crate::geo::SPEED_OF_LIGHT).collect();
            let h = GpHyperparams {
                signal_std: 20.0,
                length_scale: t_star,
                noise_std: noise,
            };
            models.push(GpModel::from_parts(taus, ds, h).unwrap());
            toas.push(t_star);
        }
        (models, toas)
    }

    #[test]
    fn near_zero_variance_collapses_spread() {
        let d = build_indoor_open_office();
        let ue = Point2::new(40.0, 20.0);
        let (models, toas) = tight_gp_models(&d, &ue, 1e-6);
        let est = gp_sampling_uncertainty(&models, &d, &toas, 50, 7, &Default::default()).unwrap();
        // predictive variance ~1e-12 m^2 -> sampled positions equal the center
        assert!(est.variance.0 >= 0.0 && est.variance.1 >= 0.0);
        assert!(est.combined < 1e-3, "combined {}", est.combined);
        assert!(est.position.distance(&ue) < 0.1);
    }

    #[test]
    fn sampling_is_bit_reproducible() {
        let d = build_indoor_open_office();
        let ue = Point2::new(80.0, 30.0);
        let (models, toas) = tight_gp_models(&d, &ue, 0.5);
        let a = gp_sampling_uncertainty(&models, &d, &toas, 64, 11, &Default::default()).unwrap();
        let b = gp_sampling_uncertainty(&models, &d, &toas, 64, 11, &Default::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn variance_nonnegative_and_centered_on_mean_solution() {
        let d = build_indoor_open_office();
        let ue = Point2::new(100.0, 10.0);
        let (models, toas) = tight_gp_models(&d, &ue, 1.0);
        let est = gp_sampling_uncertainty(&models, &d, &toas, 200, 3, &Default::default()).unwrap();
        assert!(est.variance.0 >= 0.0);
        assert!(est.variance.1 >= 0.0);
        assert_eq!(est.combined, libm::sqrt(est.variance.0 + est.variance.1));
    }

    #[test]
    fn centering_on_mean_position_dominates_sample_mean_centering() {
        // Spread around a fixed center is >= spread around the empirical
        // mean of the same draws.
        let d = build_indoor_open_office();
        let ue = Point2::new(60.0, 25.0);
        let (models, toas) = tight_gp_models(&d, &ue, 1.5);
        let settings = SolverSettings::default();
        let est = gp_sampling_uncertainty(&models, &d, &toas, 100, 5, &settings).unwrap();
        // Re-draw the same samples and center on their empirical mean.
        let predictions: Vec<(f64, f64)> = models.iter().zip(&toas).map(|(m, t)| m.predict(*t)).collect();
        let mut pts = Vec::new();
        for s in 0..100u64 {
            let mut r = rng::stream(5, "uq-sample", s);
            let draws: Vec<f64> = predictions
                .iter()
                .map(|&(m, v)| sample_distance(m, v, &mut r))
                .collect();
            pts.push(solve_from_distances(&draws, &d, &settings).unwrap());
        }
        let mean = Point2::new(
            pts.iter().map(|p| p.x).sum::<f64>() / pts.len() as f64,
            pts.iter().map(|p| p.y).sum::<f64>() / pts.len() as f64,
        );
        let n1 = (pts.len() - 1) as f64;
        let vx_mean = pts.iter().map(|p| (p.x - mean.x).powi(2)).sum::<f64>() / n1;
        let vy_mean = pts.iter().map(|p| (p.y - mean.y).powi(2)).sum::<f64>() / n1;
        assert!(est.variance.0 >= vx_mean - 1e-12);
        assert!(est.variance.1 >= vy_mean - 1e-12);
    }

    #[test]
    fn shrinking_predictive_variance_shrinks_uncertainty() {
        let d = build_indoor_open_office();
        let ue = Point2::new(50.0, 35.0);
        let settings = SolverSettings::default();
        let mut last = f64::INFINITY;
        for lambda in [1.0f64, 0.5, 0.1] {
            let (models, toas) = tight_gp_models(&d, &ue, 2.0 * lambda);
            let est =
                gp_sampling_uncertainty(&models, &d, &toas, 150, 17, &settings).unwrap();
            assert!(
                est.combined <= last + 1e-9,
                "lambda {lambda}: {} > {last}",
                est.combined
            );
            last = est.combined;
        }
    }

    #[test]
    fn too_few_samples_rejected() {
        let d = build_indoor_open_office();
        let ue = Point2::new(40.0, 20.0);
        let (models, toas) = tight_gp_models(&d, &ue, 0.1);
        assert_eq!(
            gp_sampling_uncertainty(&models, &d, &toas, 1, 0, &Default::default()),
            Err(UncertaintyError::InvalidInput)
        );
    }
}
