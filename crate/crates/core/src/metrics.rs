//! Point and interval forecast accuracy on the Lorenz scale.
//!
//! The divergence-style measures apply the printed formulas directly to
//! curve values without renormalizing them into probability masses; they
//! are discrepancy measures between curves, not divergences between
//! distributions. Curve values are clamped away from zero before any
//! logarithm, sharing the clamp constant with the logit transform.

use crate::lorenz::{LorenzCurve, DEFAULT_EPSILON};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("actual and forecast series have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("curves in position {0} live on different grids")]
    GridMismatch(usize),
    #[error("empty series")]
    Empty,
    #[error("band ordering violated at position {pair}, grid point {point}")]
    BandOrdering { pair: usize, point: usize },
    #[error("alpha must lie in (0, 1), got {0}")]
    BadAlpha(f64),
}

/// Evaluation settings: nominal interval levels and the number of
/// one-step folds the measures average over.
#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub horizons: usize,
    pub alphas: Vec<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { horizons: 5, alphas: vec![0.2, 0.05] }
    }
}

fn check_pairs(a: &[LorenzCurve], b: &[LorenzCurve]) -> Result<(), MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(MetricsError::Empty);
    }
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        if x.grid() != y.grid() {
            return Err(MetricsError::GridMismatch(i));
        }
    }
    Ok(())
}

fn clamp(v: f64) -> f64 {
    v.clamp(DEFAULT_EPSILON, 1.0)
}

/// Symmetric Kullback–Leibler discrepancy averaged over the grid and all
/// supplied forecast periods.
pub fn kld(actual: &[LorenzCurve], forecast: &[LorenzCurve]) -> Result<f64, MetricsError> {
    check_pairs(actual, forecast)?;
    let cells = (actual.len() * actual[0].grid().len()) as f64;
    let mut acc = 0.0;
    for (a, f) in actual.iter().zip(forecast) {
        for (x, y) in a.values().iter().zip(f.values()) {
            let (x, y) = (clamp(*x), clamp(*y));
            acc += x * (x.ln() - y.ln()) + y * (y.ln() - x.ln());
        }
    }
    Ok(acc / cells)
}

/// Square root of the Jensen–Shannon discrepancy with geometric-mean
/// midpoint, averaged like [`kld`].
pub fn jsd_sqrt(actual: &[LorenzCurve], forecast: &[LorenzCurve]) -> Result<f64, MetricsError> {
    check_pairs(actual, forecast)?;
    let cells = (actual.len() * actual[0].grid().len()) as f64;
    let mut acc = 0.0;
    for (a, f) in actual.iter().zip(forecast) {
        for (x, y) in a.values().iter().zip(f.values()) {
            let (x, y) = (clamp(*x), clamp(*y));
            let mid = (x * y).sqrt();
            acc += 0.5 * x * (x.ln() - mid.ln()) + 0.5 * y * (y.ln() - mid.ln());
        }
    }
    Ok((acc / cells).max(0.0).sqrt())
}

/// Mean interval score: band width plus 2/α times any exceedance.
pub fn interval_score(
    lower: &[LorenzCurve],
    upper: &[LorenzCurve],
    actual: &[LorenzCurve],
    alpha: f64,
) -> Result<f64, MetricsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(MetricsError::BadAlpha(alpha));
    }
    check_pairs(lower, upper)?;
    check_pairs(lower, actual)?;
    let cells = (actual.len() * actual[0].grid().len()) as f64;
    let mut acc = 0.0;
    for (pair, ((lo, hi), act)) in lower.iter().zip(upper).zip(actual).enumerate() {
        for (point, ((l, u), a)) in
            lo.values().iter().zip(hi.values()).zip(act.values()).enumerate()
        {
            if l > u {
                return Err(MetricsError::BandOrdering { pair, point });
            }
            let mut s = u - l;
            if a < l {
                s += 2.0 / alpha * (l - a);
            }
            if a > u {
                s += 2.0 / alpha * (a - u);
            }
            acc += s;
        }
    }
    Ok(acc / cells)
}

/// Empirical coverage probability and its absolute deviation from the
/// nominal level 1 − α.
pub fn ecp_cpd(
    lower: &[LorenzCurve],
    upper: &[LorenzCurve],
    actual: &[LorenzCurve],
    alpha: f64,
) -> Result<(f64, f64), MetricsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(MetricsError::BadAlpha(alpha));
    }
    check_pairs(lower, upper)?;
    check_pairs(lower, actual)?;
    let cells = (actual.len() * actual[0].grid().len()) as f64;
    let mut exceed = 0.0;
    for (pair, ((lo, hi), act)) in lower.iter().zip(upper).zip(actual).enumerate() {
        for (point, ((l, u), a)) in
            lo.values().iter().zip(hi.values()).zip(act.values()).enumerate()
        {
            if l > u {
                return Err(MetricsError::BandOrdering { pair, point });
            }
            if a < l || a > u {
                exceed += 1.0;
            }
        }
    }
    let ecp = 1.0 - exceed / cells;
    Ok((ecp, (ecp - (1.0 - alpha)).abs()))
}
