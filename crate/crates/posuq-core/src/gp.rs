//! Per-BS Gaussian-process regression from ToA to distance.
//!
//! One scalar GP per BS with a squared-exponential kernel and zero mean.
//! Training maximizes the log marginal likelihood with a deterministic
//! derivative-free scheme: a log-spaced multi-start grid followed by
//! coordinate-wise golden-section refinement. All linear algebra goes
//! through a Cholesky factor of K + sigma^2 I.

use alloc::vec::Vec;

use crate::linalg::{cholesky, CholeskyFactor, SquareMatrix};
use crate::rng;

const LOG_2PI: f64 = 1.8378770664093453;

/// SE-kernel hyperparameters: signal std (m), length scale (s), noise std (m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpHyperparams {
    pub signal_std: f64,
    pub length_scale: f64,
    pub noise_std: f64,
}

impl GpHyperparams {
    pub fn is_valid(&self) -> bool {
        self.signal_std > 0.0 && self.length_scale > 0.0 && self.noise_std > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GpError {
    /// Kernel matrix not positive definite even after jitter escalation.
    NotPositiveDefinite,
    /// No optimizer start produced a factorizable model.
    TrainingFailed,
    InvalidInput,
}

impl core::fmt::Display for GpError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            GpError::NotPositiveDefinite => write!(f, "kernel matrix not positive definite"),
            GpError::TrainingFailed => write!(f, "GP training failed at every optimizer start"),
            GpError::InvalidInput => write!(f, "invalid GP input"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for GpError {}

/// sigma_k^2 * exp(-(tau - tau')^2 / (2 l^2))
pub fn se_kernel(a: f64, b: f64, h: &GpHyperparams) -> f64 {
    let d = (a - b) / h.length_scale;
    h.signal_std * h.signal_std * libm::exp(-0.5 * d * d)
}

pub fn kernel_matrix(taus: &[f64], h: &GpHyperparams) -> SquareMatrix {
    let m = taus.len();
    let mut k = SquareMatrix::zeros(m);
    for i in 0..m {
        for j in 0..=i {
            let v = se_kernel(taus[i], taus[j], h);
            k.set(i, j, v);
            k.set(j, i, v);
        }
    }
    k
}

/// Cholesky of K + sigma^2 I with escalating diagonal jitter
/// (1e-10..1e-4 times sigma_k^2).
fn factorize(taus: &[f64], h: &GpHyperparams) -> Result<CholeskyFactor, GpError> {
    let base = kernel_matrix(taus, h);
    let noise_var = h.noise_std * h.noise_std;
    let sig2 = h.signal_std * h.signal_std;
    let mut jitter = 0.0;
    loop {
        let mut a = base.clone();
        for i in 0..a.n {
            let v = a.get(i, i) + noise_var + jitter;
            a.set(i, i, v);
        }
        match cholesky(&a) {
            Ok(f) => return Ok(f),
            Err(_) => {
                jitter = if jitter == 0.0 { 1e-10 * sig2 } else { jitter * 10.0 };
                if jitter > 1e-4 * sig2 {
                    return Err(GpError::NotPositiveDefinite);
                }
            }
        }
    }
}

/// log p(d | tau) for a zero-mean GP:
/// -1/2 d' (K + s^2 I)^-1 d - 1/2 log det(K + s^2 I) - M/2 log 2pi.
pub fn log_marginal_likelihood(
    taus: &[f64],
    distances: &[f64],
    h: &GpHyperparams,
) -> Result<f64, GpError> {
    if taus.len() != distances.len() || taus.is_empty() || !h.is_valid() {
        return Err(GpError::InvalidInput);
    }
    let f = factorize(taus, h)?;
    let y = f.solve_lower(distances);
    let quad: f64 = y.iter().map(|v| v * v).sum();
    let m = taus.len() as f64;
    Ok(-0.5 * quad - 0.5 * f.log_det() - 0.5 * m * LOG_2PI)
}

/// Trained per-BS model: data, hyperparameters, Cholesky factor, and
/// alpha = (K + s^2 I)^-1 d.
#[derive(Debug, Clone)]
pub struct GpModel {
    pub train_toas: Vec<f64>,
    pub train_distances: Vec<f64>,
    pub hyperparams: GpHyperparams,
    pub chol_factor: CholeskyFactor,
    pub alpha: Vec<f64>,
}

impl GpModel {
    /// Rebuild the factorization for given data and hyperparameters
    /// (used both after training and when loading a serialized model).
    pub fn from_parts(
        train_toas: Vec<f64>,
        train_distances: Vec<f64>,
        hyperparams: GpHyperparams,
    ) -> Result<Self, GpError> {
        if train_toas.len() != train_distances.len() || train_toas.is_empty() {
            return Err(GpError::InvalidInput);
        }
        if !hyperparams.is_valid()
            || train_toas.iter().chain(&train_distances).any(|v| !v.is_finite())
        {
            return Err(GpError::InvalidInput);
        }
        let chol_factor = factorize(&train_toas, &hyperparams)?;
        let alpha = chol_factor.solve(&train_distances);
        Ok(Self {
            train_toas,
            train_distances,
            hyperparams,
            chol_factor,
            alpha,
        })
    }

    /// Posterior mean and variance at a test ToA.
    pub fn predict(&self, tau: f64) -> (f64, f64) {
        let h = &self.hyperparams;
        let kstar: Vec<f64> = self
            .train_toas
            .iter()
            .map(|t| se_kernel(tau, *t, h))
            .collect();
        let mean: f64 = kstar.iter().zip(&self.alpha).map(|(k, a)| k * a).sum();
        let q = self.chol_factor.solve_lower(&kstar);
        let explained: f64 = q.iter().map(|v| v * v).sum();
        let var = se_kernel(tau, tau, h) + h.noise_std * h.noise_std - explained;
        (mean, var.max(0.0))
    }
}

/// Posterior predictive distance at `tau`: (mean in m, variance in m^2).
pub fn predict_distance(model: &GpModel, tau: f64) -> (f64, f64) {
    model.predict(tau)
}

fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    libm::sqrt(var)
}

#[derive(Clone, Copy)]
struct LogParams([f64; 3]);

impl LogParams {
    fn to_hyper(self) -> GpHyperparams {
        GpHyperparams {
            signal_std: libm::exp(self.0[0]),
            length_scale: libm::exp(self.0[1]),
            noise_std: libm::exp(self.0[2]),
        }
    }
}

/// Golden-section maximization of f over [a, b].
fn golden_max(mut a: f64, mut b: f64, f: &mut impl FnMut(f64) -> f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..24 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        c
    } else {
        d
    }
}

/// Cap on rows used during hyperparameter search; the final factorization
/// uses the full (capped) training set.
const SEARCH_CAP: usize = 256;
/// Cap on retained training rows.
const TRAIN_CAP: usize = 1000;

fn subsample(taus: &[f64], ds: &[f64], cap: usize, label: &str) -> (Vec<f64>, Vec<f64>) {
    let m = taus.len();
    if m <= cap {
        return (taus.to_vec(), ds.to_vec());
    }
    let mut order: Vec<usize> = (0..m).collect();
    let mut r = rng::stream(0x9e37_79b9, label, m as u64);
    for i in (1..m).rev() {
        let j = rng::index(&mut r, i + 1);
        order.swap(i, j);
    }
    let mut keep = order[..cap].to_vec();
    keep.sort_unstable();
    (
        keep.iter().map(|&i| taus[i]).collect(),
        keep.iter().map(|&i| ds[i]).collect(),
    )
}

/// Train a per-BS GP by maximizing the log marginal likelihood.
/// Deterministic: a 27-point log grid seeded from data scales, then two
/// sweeps of coordinate-wise golden-section refinement in log space.
pub fn train_gp(taus: &[f64], distances: &[f64]) -> Result<GpModel, GpError> {
    train_gp_with_cap(taus, distances, TRAIN_CAP)
}

/// `train_gp` with an explicit cap on retained training rows.
pub fn train_gp_with_cap(taus: &[f64], distances: &[f64], cap: usize) -> Result<GpModel, GpError> {
    if taus.len() != distances.len() || taus.len() < 2 || cap < 2 {
        return Err(GpError::InvalidInput);
    }
    if taus.iter().chain(distances).any(|v| !v.is_finite()) {
        return Err(GpError::InvalidInput);
    }
    let (taus_full, ds_full) = subsample(taus, distances, cap, "gp-cap");
    let (taus_s, ds_s) = subsample(&taus_full, &ds_full, SEARCH_CAP, "gp-search");

    let d_scale = std_dev(&ds_s).max(1e-3);
    let t_scale = std_dev(&taus_s).max(1e-12);

    let mut best: Option<(f64, LogParams)> = None;
    let eval = |p: LogParams| -> f64 {
        log_marginal_likelihood(&taus_s, &ds_s, &p.to_hyper()).unwrap_or(f64::NEG_INFINITY)
    };

    for &fk in &[0.5, 1.0, 2.0] {
        for &fl in &[0.3, 1.0, 3.0] {
            for &fs in &[0.01, 0.1, 0.3] {
                let p = LogParams([
                    libm::log(d_scale * fk),
                    libm::log(t_scale * fl),
                    libm::log(d_scale * fs),
                ]);
                let ll = eval(p);
                if ll.is_finite() && best.map_or(true, |(b, _)| ll > b) {
                    best = Some((ll, p));
                }
            }
        }
    }
    let (mut best_ll, mut best_p) = best.ok_or(GpError::TrainingFailed)?;

    let half_window = libm::log(100.0);
    for _ in 0..2 {
        for coord in 0..3 {
            let center = best_p.0[coord];
            let opt = golden_max(center - half_window, center + half_window, &mut |x| {
                let mut p = best_p;
                p.0[coord] = x;
                eval(p)
            });
            let mut cand = best_p;
            cand.0[coord] = opt;
            let ll = eval(cand);
            if ll > best_ll {
                best_ll = ll;
                best_p = cand;
            }
        }
    }

    GpModel::from_parts(taus_full, ds_full, best_p.to_hyper())
}
