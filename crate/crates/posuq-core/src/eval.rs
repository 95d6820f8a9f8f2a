//! Positioning-error statistics and uncertainty-quality scoring.

use alloc::vec::Vec;

use crate::geo::Point2;
use crate::uncertainty::{MethodTag, PositionEstimate};

#[derive(Debug, Clone, PartialEq)]
pub struct MethodReport {
    pub method_tag: MethodTag,
    pub per_ue_errors: Vec<f64>,
    pub per_ue_uncertainty: Vec<f64>,
    /// Pearson correlation of (uncertainty, error), `None` when undefined
    /// (constant input).
    pub correlation: Option<f64>,
    pub cdf: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvaluationReport {
    pub per_method: Vec<MethodReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalError {
    UndefinedCorrelation,
    LengthMismatch,
    EmptyInput,
}

impl core::fmt::Display for EvalError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            EvalError::UndefinedCorrelation => {
                write!(f, "correlation undefined for constant input")
            }
            EvalError::LengthMismatch => write!(f, "input lengths differ"),
            EvalError::EmptyInput => write!(f, "empty input"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for EvalError {}

/// 2D Euclidean error of one estimate.
pub fn position_error(estimate: &Point2, truth: &Point2) -> f64 {
    estimate.distance(truth)
}

/// Step CDF at the sorted values with probabilities i/n.
pub fn empirical_cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = sorted.len() as f64;
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v, (i + 1) as f64 / n))
        .collect()
}

/// Linear interpolation of the p-quantile from a CDF built by
/// `empirical_cdf` (nearest-rank).
pub fn quantile(cdf: &[(f64, f64)], p: f64) -> f64 {
    cdf.iter()
        .find(|(_, prob)| *prob >= p)
        .map(|(v, _)| *v)
        .unwrap_or_else(|| cdf.last().map(|(v, _)| *v).unwrap_or(f64::NAN))
}

/// Pearson product-moment correlation.
pub fn pearson_correlation(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch);
    }
    if a.len() < 2 {
        return Err(EvalError::EmptyInput);
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(EvalError::UndefinedCorrelation);
    }
    Ok(cov / libm::sqrt(va * vb))
}

/// Assemble the evaluation report: per-UE errors, uncertainties, the
/// uncertainty-error correlation and the error CDF, per method.
pub fn build_report(
    estimates_per_method: &[(MethodTag, Vec<PositionEstimate>)],
    truths: &[Point2],
) -> Result<EvaluationReport, EvalError> {
    let mut per_method = Vec::new();
    for (tag, estimates) in estimates_per_method {
        if estimates.len() != truths.len() {
            return Err(EvalError::LengthMismatch);
        }
        if estimates.is_empty() {
            return Err(EvalError::EmptyInput);
        }
        let per_ue_errors: Vec<f64> = estimates
            .iter()
            .zip(truths)
            .map(|(e, t)| position_error(&e.position, t))
            .collect();
        let per_ue_uncertainty: Vec<f64> = estimates.iter().map(|e| e.combined).collect();
        let correlation = pearson_correlation(&per_ue_uncertainty, &per_ue_errors).ok();
        let cdf = empirical_cdf(&per_ue_errors);
        per_method.push(MethodReport {
            method_tag: *tag,
            per_ue_errors,
            per_ue_uncertainty,
            correlation,
            cdf,
        });
    }
    Ok(EvaluationReport { per_method })
}
