//! RSTD formation and hyperbolic multilateration.
//!
//! The position solver minimizes the sum of squared range-difference
//! residuals with a damped Gauss-Newton (Levenberg-Marquardt) iteration.
//! Ranges are 3D (UE lifted to its known height) so that noiseless
//! measurements are exactly invertible.

use alloc::vec::Vec;

use crate::geo::{Point2, Point3, SPEED_OF_LIGHT};
use crate::scenario::Deployment;

/// Time differences relative to one reference BS, in BS-index order with
/// the reference excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct RstdVector {
    pub reference_bs: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub max_iterations: usize,
    /// Step-norm convergence threshold, meters.
    pub position_tolerance: f64,
    pub damping_init: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            position_tolerance: 1e-4,
            damping_init: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OtdoaError {
    /// Fewer than 3 BSs: the hyperbolic system is underdetermined.
    InsufficientGeometry,
    /// The Jacobian was rank-deficient at every iterate.
    DegenerateGeometry,
    InvalidInput,
}

impl core::fmt::Display for OtdoaError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            OtdoaError::InsufficientGeometry => write!(f, "need at least 3 base stations"),
            OtdoaError::DegenerateGeometry => {
                write!(f, "degenerate geometry: Jacobian rank-deficient at every iterate")
            }
            OtdoaError::InvalidInput => write!(f, "non-finite input"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for OtdoaError {}

/// values[k] = toa_ref - toa_j for every non-reference BS j, in BS order.
pub fn form_rstd(toas: &[f64], reference_bs: usize) -> Result<RstdVector, OtdoaError> {
    if toas.len() < 3 {
        return Err(OtdoaError::InsufficientGeometry);
    }
    if reference_bs >= toas.len() {
        return Err(OtdoaError::InvalidInput);
    }
    let t_ref = toas[reference_bs];
    let values = toas
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != reference_bs)
        .map(|(_, t)| t_ref - t)
        .collect();
    Ok(RstdVector { reference_bs, values })
}

fn range(p: &Point2, bs: &Point3, ue_height: f64) -> f64 {
    p.at_height(ue_height).distance(bs)
}

/// Margin around the deployment footprint that bounds the solver's search
/// box. The range-difference objective flattens far from the BS array and
/// can develop spurious far-field minima under biased measurements; iterates
/// are kept inside the expanded footprint so the solver returns the best
/// nearby fix instead of escaping. Solutions outside the footprint proper
/// (but inside the box) are still returned as-is.
const SEARCH_MARGIN: f64 = 60.0;

fn clamp_to_search_box(p: Point2, deployment: &Deployment) -> Point2 {
    Point2::new(
        p.x.clamp(-SEARCH_MARGIN, deployment.area_length + SEARCH_MARGIN),
        p.y.clamp(-SEARCH_MARGIN, deployment.area_width + SEARCH_MARGIN),
    )
}

/// Non-reference BS indices in order, paired with the RSTD entries.
fn neighbor_indices(rstd: &RstdVector, n_bs: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
    (0..n_bs)
        .filter(move |j| *j != rstd.reference_bs)
        .enumerate()
        .map(|(k, j)| (k, j))
}

/// Sum of squared residuals r_j = c·RSTD_j - (‖p - bs_ref‖ - ‖p - bs_j‖).
pub fn objective(rstd: &RstdVector, deployment: &Deployment, p: &Point2) -> f64 {
    let bs = &deployment.bs_positions;
    let d_ref = range(p, &bs[rstd.reference_bs], deployment.ue_height);
    neighbor_indices(rstd, bs.len())
        .map(|(k, j)| {
            let r = SPEED_OF_LIGHT * rstd.values[k]
                - (d_ref - range(p, &bs[j], deployment.ue_height));
            r * r
        })
        .sum()
}

struct SolveOutcome {
    position: Point2,
}

/// Lowest-objective point of a ~10 m grid over the footprint; a cheap
/// global scan that seeds the local solver inside the right basin.
fn coarse_grid_start(rstd: &RstdVector, deployment: &Deployment) -> Point2 {
    let (nx, ny) = (13usize, 6usize);
    let mut best = (f64::INFINITY, deployment.centroid());
    for ix in 0..=nx {
        for iy in 0..=ny {
            let p = Point2::new(
                deployment.area_length * ix as f64 / nx as f64,
                deployment.area_width * iy as f64 / ny as f64,
            );
            let o = objective(rstd, deployment, &p);
            if o < best.0 {
                best = (o, p);
            }
        }
    }
    best.1
}

fn lm_solve(
    rstd: &RstdVector,
    deployment: &Deployment,
    init: Point2,
    settings: &SolverSettings,
) -> Result<SolveOutcome, OtdoaError> {
    let bs = &deployment.bs_positions;
    let n = bs.len();
    if rstd.values.len() != n - 1 || rstd.values.len() < 2 {
        return Err(OtdoaError::InsufficientGeometry);
    }
    if !init.is_finite() || rstd.values.iter().any(|v| !v.is_finite()) {
        return Err(OtdoaError::InvalidInput);
    }

    let h = deployment.ue_height;
    let mut p = clamp_to_search_box(init, deployment);
    let mut cost = objective(rstd, deployment, &p);
    let mut lambda = settings.damping_init;
    let mut any_full_rank = false;
    let mut converged = false;

    for _ in 0..settings.max_iterations {
        // Accumulate JᵀJ and Jᵀr at the current iterate.
        let d_ref = range(&p, &bs[rstd.reference_bs], h);
        let u_ref = if d_ref > 0.0 {
            [
                (p.x - bs[rstd.reference_bs].x) / d_ref,
                (p.y - bs[rstd.reference_bs].y) / d_ref,
            ]
        } else {
            [0.0, 0.0]
        };
        let (mut jtj_xx, mut jtj_xy, mut jtj_yy) = (0.0, 0.0, 0.0);
        let mut jtr = [0.0, 0.0];
        for (k, j) in neighbor_indices(rstd, n) {
            let d_j = range(&p, &bs[j], h);
            let u_j = if d_j > 0.0 {
                [(p.x - bs[j].x) / d_j, (p.y - bs[j].y) / d_j]
            } else {
                [0.0, 0.0]
            };
            let r = SPEED_OF_LIGHT * rstd.values[k] - (d_ref - d_j);
            let g = [-(u_ref[0] - u_j[0]), -(u_ref[1] - u_j[1])];
            jtj_xx += g[0] * g[0];
            jtj_xy += g[0] * g[1];
            jtj_yy += g[1] * g[1];
            jtr[0] += g[0] * r;
            jtr[1] += g[1] * r;
        }

        // Damping retries at this iterate until a step lowers the cost.
        let mut accepted = false;
        for _ in 0..25 {
            let dxx = jtj_xx + lambda * jtj_xx.max(1e-12);
            let dyy = jtj_yy + lambda * jtj_yy.max(1e-12);
            let step = match crate::linalg::solve_sym2(dxx, jtj_xy, dyy, [-jtr[0], -jtr[1]]) {
                Some(s) => {
                    any_full_rank = true;
                    s
                }
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let trial =
                clamp_to_search_box(Point2::new(p.x + step[0], p.y + step[1]), deployment);
            let trial_cost = objective(rstd, deployment, &trial);
            if trial_cost.is_finite() && trial_cost <= cost {
                let step_norm = libm::hypot(trial.x - p.x, trial.y - p.y);
                p = trial;
                cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-12);
                if step_norm < settings.position_tolerance {
                    converged = true;
                }
                accepted = true;
                break;
            }
            lambda *= 10.0;
        }
        if converged {
            break;
        }
        if !accepted {
            // No downhill step available at this iterate.
            break;
        }
    }

    if !any_full_rank {
        return Err(OtdoaError::DegenerateGeometry);
    }
    Ok(SolveOutcome { position: p })
}

/// Least-squares hyperbolic position fix from RSTDs.
pub fn solve_position(
    rstd: &RstdVector,
    deployment: &Deployment,
    init: Point2,
    settings: &SolverSettings,
) -> Result<Point2, OtdoaError> {
    lm_solve(rstd, deployment, init, settings).map(|o| o.position)
}

/// Position fix from predicted UE-BS distances: convert to pseudo-ToAs,
/// pick the nearest BS as reference, solve from the footprint centroid
/// with one restart from the nearest BS if the first run stalls.
pub fn solve_from_distances(
    distances: &[f64],
    deployment: &Deployment,
    settings: &SolverSettings,
) -> Result<Point2, OtdoaError> {
    if distances.len() != deployment.num_bs() {
        return Err(OtdoaError::InvalidInput);
    }
    if distances.iter().any(|d| !d.is_finite()) {
        return Err(OtdoaError::InvalidInput);
    }
    let toas: Vec<f64> = distances.iter().map(|d| d / SPEED_OF_LIGHT).collect();
    let reference_bs = toas
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.partial_cmp(b).expect("finite toas"))
        .map(|(i, _)| i)
        .expect("non-empty");
    let rstd = form_rstd(&toas, reference_bs)?;
    // The objective is non-convex; run from a few starts and keep the lowest
    // objective. The coarse-grid start catches basins the other two miss.
    let starts = [
        deployment.centroid(),
        deployment.bs_positions[reference_bs].xy(),
        coarse_grid_start(&rstd, deployment),
    ];
    let mut best: Option<(f64, Point2)> = None;
    for init in starts {
        let solved = lm_solve(&rstd, deployment, init, settings)?;
        let obj = objective(&rstd, deployment, &solved.position);
        if best.map_or(true, |(b, _)| obj < b) {
            best = Some((obj, solved.position));
        }
    }
    Ok(best.expect("at least one start").1)
}
