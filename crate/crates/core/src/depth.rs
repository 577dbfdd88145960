//! Modified band depth and the functional median of a finite curve set.
//!
//! Depth of a curve is the average, over all unordered pairs of curves in
//! the set, of the fraction of the grid where the curve lies inside the
//! band spanned by the pair (order J = 2, the candidate itself counts as a
//! band endpoint). The functional median is the deepest observed curve.

use crate::lorenz::Grid;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DepthError {
    #[error("modified band depth needs at least 2 curves, got {0}")]
    InsufficientCurves(usize),
    #[error("curve {0} has length {1}, expected {2}")]
    RaggedCurves(usize, usize, usize),
    #[error("empty curve set")]
    Empty,
}

/// A set of curves sharing one grid, stored row-major (n × grid size).
#[derive(Debug, Clone)]
pub struct CurveSet {
    grid: Grid,
    curves: Vec<Vec<f64>>,
}

impl CurveSet {
    pub fn new(grid: Grid, curves: Vec<Vec<f64>>) -> Result<Self, DepthError> {
        if curves.is_empty() {
            return Err(DepthError::Empty);
        }
        for (i, c) in curves.iter().enumerate() {
            if c.len() != grid.len() {
                return Err(DepthError::RaggedCurves(i, c.len(), grid.len()));
            }
        }
        Ok(CurveSet { grid, curves })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn curves(&self) -> &[Vec<f64>] {
        &self.curves
    }

    pub fn modified_band_depth(&self) -> Result<Vec<f64>, DepthError> {
        let refs: Vec<&[f64]> = self.curves.iter().map(|c| c.as_slice()).collect();
        modified_band_depth(&refs)
    }

    pub fn functional_median(&self) -> usize {
        let refs: Vec<&[f64]> = self.curves.iter().map(|c| c.as_slice()).collect();
        functional_median(&refs)
    }
}

/// Modified band depth of every curve in the set.
///
/// Rank-counting form: at each grid point a pair fails to cover curve c
/// exactly when both members are strictly below or strictly above c, so
/// the covering count is C(n,2) − C(below,2) − C(above,2).
pub fn modified_band_depth(curves: &[&[f64]]) -> Result<Vec<f64>, DepthError> {
    let n = curves.len();
    if n < 2 {
        return Err(DepthError::InsufficientCurves(n));
    }
    let g = curves[0].len();
    for (i, c) in curves.iter().enumerate() {
        if c.len() != g {
            return Err(DepthError::RaggedCurves(i, c.len(), g));
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    let mut cover = vec![0.0f64; n];
    let mut order: Vec<usize> = (0..n).collect();
    for j in 0..g {
        order.sort_by(|&a, &b| curves[a][j].partial_cmp(&curves[b][j]).unwrap());
        // walk tie groups to get strict below/above counts
        let mut i = 0;
        while i < n {
            let mut k = i;
            while k + 1 < n && curves[order[k + 1]][j] == curves[order[i]][j] {
                k += 1;
            }
            let below = i;
            let above = n - 1 - k;
            let not_covering = choose2(below) + choose2(above);
            for &idx in &order[i..=k] {
                cover[idx] += pairs - not_covering;
            }
            i = k + 1;
        }
    }
    Ok(cover.into_iter().map(|c| c / (pairs * g as f64)).collect())
}

fn choose2(m: usize) -> f64 {
    (m * m.saturating_sub(1) / 2) as f64
}

/// Index of the deepest curve; ties break to the lowest index, a
/// one-curve set returns 0.
pub fn functional_median(curves: &[&[f64]]) -> usize {
    if curves.len() < 2 {
        return 0;
    }
    let depths = modified_band_depth(curves).expect("validated above");
    let mut best = 0;
    for (i, d) in depths.iter().enumerate() {
        if *d > depths[best] {
            best = i;
        }
    }
    best
}
