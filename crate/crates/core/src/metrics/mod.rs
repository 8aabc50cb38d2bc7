//! Hedging-error statistics, equity exposure and comparison reports.
//!
//! Errors follow the sign convention `payoff - portfolio value`: positive
//! numbers are hedging losses.

mod report;

pub use report::{
    read_stats_csv, report, write_stats_csv, ComparisonReport, ExperimentStats, ReferenceRow,
    ReferenceTables, ReportRow, Statistic,
};

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{HedgeError, Result};

/// Summary of a sample of hedging errors, in currency units except `skew`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HedgeStats {
    pub mean: f64,
    pub rmse: f64,
    pub semi_rmse: f64,
    pub var_95: f64,
    pub var_99: f64,
    pub cvar_95: f64,
    pub cvar_99: f64,
    pub skew: f64,
}

impl HedgeStats {
    /// Multiplies every currency statistic by `c`; skew is unchanged for `c > 0`.
    pub fn scaled(&self, c: f64) -> HedgeStats {
        HedgeStats {
            mean: self.mean * c,
            rmse: self.rmse * c,
            semi_rmse: self.semi_rmse * c,
            var_95: self.var_95 * c,
            var_99: self.var_99 * c,
            cvar_95: self.cvar_95 * c,
            cvar_99: self.cvar_99 * c,
            skew: self.skew,
        }
    }
}

/// Average portfolio delta over every path and rebalance date.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExposureStats {
    pub avg_exposure: f64,
}

/// One-based rank `ceil(alpha n)` of the empirical VaR order statistic.
///
/// `alpha n` within a few ulp of an integer counts as that integer, so
/// `0.95 * 100` selects rank 95.
pub fn var_rank(alpha: f64, n: usize) -> usize {
    let x = alpha * n as f64;
    let r = x.round();
    let rank = if (x - r).abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
        r
    } else {
        x.ceil()
    };
    (rank as usize).clamp(1, n)
}

/// Empirical `(VaR_alpha, CVaR_alpha)` of an ascending sample.
///
/// VaR is the order statistic at rank `ceil(alpha n)`; CVaR averages every
/// observation at or above it.
pub fn tail_risk(sorted: &[f64], alpha: f64) -> Result<(f64, f64)> {
    if sorted.is_empty() {
        return Err(HedgeError::Contract("tail risk of an empty sample".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(HedgeError::invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    let var = sorted[var_rank(alpha, sorted.len()) - 1];
    let start = sorted.partition_point(|&x| x < var);
    let tail = &sorted[start..];
    let cvar = tail.iter().sum::<f64>() / tail.len() as f64;
    Ok((var, cvar))
}

/// Empirical statistics of a test-set error vector.
pub fn hedge_stats(errors: &[f64]) -> Result<HedgeStats> {
    let n = errors.len();
    if n < 2 {
        return Err(HedgeError::Contract(format!("hedge statistics need at least 2 errors, got {n}")));
    }
    if let Some(bad) = errors.iter().find(|e| !e.is_finite()) {
        return Err(HedgeError::invalid("errors", format!("contains non-finite value {bad}")));
    }
    let nf = n as f64;
    let mean = errors.iter().sum::<f64>() / nf;
    let mean_sq = errors.iter().map(|e| e * e).sum::<f64>() / nf;
    let semi_sq = errors.iter().map(|e| e.max(0.0).powi(2)).sum::<f64>() / nf;

    let (m2, m3) = errors.iter().fold((0.0, 0.0), |(m2, m3), e| {
        let d = e - mean;
        (m2 + d * d, m3 + d * d * d)
    });
    let (m2, m3) = (m2 / nf, m3 / nf);
    let skew = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };

    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (var_95, cvar_95) = tail_risk(&sorted, 0.95)?;
    let (var_99, cvar_99) = tail_risk(&sorted, 0.99)?;

    Ok(HedgeStats {
        mean,
        rmse: mean_sq.sqrt(),
        semi_rmse: semi_sq.sqrt(),
        var_95,
        var_99,
        cvar_95,
        cvar_99,
        skew,
    })
}

/// Grand mean of a paths x dates matrix of portfolio deltas.
pub fn average_exposure(delta_paths: ArrayView2<f64>) -> Result<ExposureStats> {
    if delta_paths.is_empty() {
        return Err(HedgeError::Contract("average exposure of an empty delta matrix".into()));
    }
    let avg = delta_paths.iter().sum::<f64>() / delta_paths.len() as f64;
    if !avg.is_finite() {
        return Err(HedgeError::invalid("delta_paths", "contains non-finite deltas"));
    }
    Ok(ExposureStats { avg_exposure: avg })
}
