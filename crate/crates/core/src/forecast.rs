//! End-to-end forecasting of Lorenz curves with bootstrap pointwise
//! prediction intervals.
//!
//! Two pipelines share the same score machinery. The univariate pipeline
//! fits FPCA to one region's transformed curves and extrapolates the
//! scores with automatically selected ARIMA models. The FANOVA pipeline
//! first runs the functional median polish on the whole panel, models
//! each region's residual functions the same way, and adds the grand and
//! row effects back. Either way the transformed forecast is mapped
//! through the inverse logit and projected onto monotone curves, so every
//! emitted point forecast and interval bound is a valid Lorenz curve.
//!
//! Interval uncertainty combines two resampled sources: in-sample h-step
//! score forecast errors (the score model is refit per truncated history
//! with the full-sample order held fixed; histories too short to refit
//! reuse the full-sample coefficients) and the FPCA residual functions.
//! Replicates are assembled, projected, and reduced to pointwise
//! empirical quantiles. Bands for several nominal levels come from one
//! replicate set, so wider levels always contain narrower ones.

use crate::fanova::{median_polish, CurvePanel, FanovaDecomposition, FanovaError};
use crate::fpca::{fit_fpca, FpcaError, FpcaModel, FunctionalSeries};
use crate::lorenz::{sigmoid, Grid, LorenzCurve, LorenzError};
use crate::tsmodel::{
    auto_arima, fallback_fit, fit_arima, forecast_arima, ArimaFit, TsError, DEFAULT_D_MAX,
    DEFAULT_P_MAX, DEFAULT_Q_MAX,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::io::Write;
use thiserror::Error;

/// Minimum history length before score models are refit per truncation.
const MIN_REFIT_LEN: usize = 4;

#[derive(Debug, Error)]
pub enum ForecastError {
    #[error("need at least {need} curves, got {got}")]
    SeriesTooShort { got: usize, need: usize },
    #[error("bootstrap needs at least 100 replicates, got {0}")]
    TooFewReplicates(usize),
    #[error("alpha must lie in (0, 1), got {0}")]
    BadAlpha(f64),
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("no in-sample score forecast errors could be formed")]
    InsufficientErrorPool,
    #[error(transparent)]
    Fpca(#[from] FpcaError),
    #[error(transparent)]
    Ts(#[from] TsError),
    #[error(transparent)]
    Fanova(#[from] FanovaError),
    #[error(transparent)]
    Lorenz(#[from] LorenzError),
    #[error("csv write failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One pointwise prediction band at nominal coverage 1 − alpha.
#[derive(Debug, Clone)]
pub struct IntervalBand {
    pub alpha: f64,
    pub lower: LorenzCurve,
    pub upper: LorenzCurve,
}

/// Point forecast plus interval bands for one region and horizon.
#[derive(Debug, Clone)]
pub struct ForecastResult {
    pub region: String,
    pub horizon: usize,
    pub point: LorenzCurve,
    pub bands: Vec<IntervalBand>,
    /// Bootstrap replicate curves on the Lorenz scale, when retained.
    pub replicates: Option<Vec<Vec<f64>>>,
}

/// Bootstrap settings; `alphas` lists every nominal level wanted from the
/// same replicate set.
#[derive(Debug, Clone)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub alphas: Vec<f64>,
    pub seed: u64,
    pub keep_replicates: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            replicates: 1000,
            alphas: vec![0.2, 0.05],
            seed: 0,
            keep_replicates: false,
        }
    }
}

impl BootstrapConfig {
    fn validate(&self) -> Result<(), ForecastError> {
        if self.replicates < 100 {
            return Err(ForecastError::TooFewReplicates(self.replicates));
        }
        for a in &self.alphas {
            if !(*a > 0.0 && *a < 1.0) {
                return Err(ForecastError::BadAlpha(*a));
            }
        }
        Ok(())
    }
}

// Per-region score machinery: FPCA model plus one ARIMA fit per retained
// component.
struct ScoreModels {
    model: FpcaModel,
    fits: Vec<ArimaFit>,
}

fn fit_scores(series: &FunctionalSeries) -> Result<ScoreModels, ForecastError> {
    let model = fit_fpca(series)?;
    let mut fits = Vec::with_capacity(model.k_selected());
    for k in 0..model.k_selected() {
        let scores = model.score_series(k);
        let fit = if scores.len() >= MIN_REFIT_LEN {
            auto_arima(&scores, DEFAULT_P_MAX, DEFAULT_Q_MAX, DEFAULT_D_MAX)?
        } else {
            fallback_fit(&scores)
        };
        fits.push(fit);
    }
    Ok(ScoreModels { model, fits })
}

impl ScoreModels {
    fn point_scores(&self, h: usize) -> Result<Vec<f64>, ForecastError> {
        let mut out = Vec::with_capacity(self.fits.len());
        for (k, fit) in self.fits.iter().enumerate() {
            let scores = self.model.score_series(k);
            out.push(forecast_arima(fit, &scores, h)?[h - 1]);
        }
        Ok(out)
    }

    // In-sample h-step forecast errors per component: the observed score
    // at ω minus its forecast from the first ω − h scores.
    fn error_pools(&self, h: usize) -> Result<Vec<Vec<f64>>, ForecastError> {
        let n = self.model.n_curves();
        let mut pools = Vec::with_capacity(self.fits.len());
        for (k, fit) in self.fits.iter().enumerate() {
            let scores = self.model.score_series(k);
            let mut pool = Vec::new();
            for omega in (h + 1)..=n {
                let hist = &scores[..omega - h];
                let pred = if hist.len() >= MIN_REFIT_LEN {
                    match fit_arima(hist, &fit.order) {
                        Ok(refit) => forecast_arima(&refit, hist, h),
                        Err(_) => forecast_arima(fit, hist, h),
                    }
                } else {
                    forecast_arima(fit, hist, h)
                };
                if let Ok(pred) = pred {
                    let nu = scores[omega - 1] - pred[h - 1];
                    if nu.is_finite() {
                        pool.push(nu);
                    }
                }
            }
            if pool.is_empty() {
                return Err(ForecastError::InsufficientErrorPool);
            }
            pools.push(pool);
        }
        Ok(pools)
    }
}

// Transformed-scale forecast → valid Lorenz curve.
fn to_lorenz(grid: &Grid, transformed: &[f64]) -> Result<LorenzCurve, ForecastError> {
    let values: Vec<f64> = transformed.iter().map(|y| sigmoid(*y)).collect();
    Ok(LorenzCurve::from_unconstrained(grid.clone(), values)?)
}

fn add_offset(mut curve: Vec<f64>, offset: Option<&[f64]>) -> Vec<f64> {
    if let Some(off) = offset {
        for (c, o) in curve.iter_mut().zip(off) {
            *c += o;
        }
    }
    curve
}

// Linear-interpolation (type 7) quantile of a sorted sample.
fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n as f64 - 1.0) * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 < n {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[n - 1]
    }
}

fn bands_from_replicates(
    grid: &Grid,
    replicates: &[Vec<f64>],
    alphas: &[f64],
) -> Result<Vec<IntervalBand>, ForecastError> {
    let g = grid.len();
    // sort each grid column once; every level reads the same order stats
    let mut columns: Vec<Vec<f64>> = (0..g)
        .map(|i| replicates.iter().map(|r| r[i]).collect::<Vec<f64>>())
        .collect();
    for col in columns.iter_mut() {
        col.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    let mut bands = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let lower: Vec<f64> = columns.iter().map(|c| quantile_type7(c, alpha / 2.0)).collect();
        let upper: Vec<f64> =
            columns.iter().map(|c| quantile_type7(c, 1.0 - alpha / 2.0)).collect();
        bands.push(IntervalBand {
            alpha,
            lower: LorenzCurve::from_unconstrained(grid.clone(), lower)?,
            upper: LorenzCurve::from_unconstrained(grid.clone(), upper)?,
        });
    }
    Ok(bands)
}

// Bootstrap one region given its fitted score machinery and an optional
// deterministic offset (grand + row effect) on the transformed scale.
fn bootstrap_region(
    scores: &ScoreModels,
    offset: Option<&[f64]>,
    region: &str,
    h: usize,
    cfg: &BootstrapConfig,
) -> Result<ForecastResult, ForecastError> {
    cfg.validate()?;
    if h == 0 {
        return Err(ForecastError::ZeroHorizon);
    }
    let grid = scores.model.grid().clone();
    let point_scores = scores.point_scores(h)?;
    let pools = scores.error_pools(h)?;
    let residuals = scores.model.residuals();
    let n = residuals.len();

    let point_transformed =
        add_offset(scores.model.assemble(&point_scores, None), offset);
    let point = to_lorenz(&grid, &point_transformed)?;

    let replicates: Vec<Vec<f64>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(
                cfg.seed ^ (b as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15),
            );
            let mut beta = point_scores.clone();
            for (k, pool) in pools.iter().enumerate() {
                beta[k] += pool[rng.gen_range(0..pool.len())];
            }
            let e = &residuals[rng.gen_range(0..n)];
            let y = add_offset(scores.model.assemble(&beta, Some(e)), offset);
            // project each replicate so quantiles are taken over valid curves
            let curve = LorenzCurve::from_unconstrained(grid.clone(), y.iter().map(|v| sigmoid(*v)).collect())
                .expect("sigmoid output is finite");
            curve.values().to_vec()
        })
        .collect();

    let bands = bands_from_replicates(&grid, &replicates, &cfg.alphas)?;
    Ok(ForecastResult {
        region: region.to_string(),
        horizon: h,
        point,
        bands,
        replicates: if cfg.keep_replicates { Some(replicates) } else { None },
    })
}

/// Point forecast of one region's transformed curve series, h steps ahead.
pub fn forecast_ufts(
    series: &FunctionalSeries,
    region: &str,
    h: usize,
) -> Result<ForecastResult, ForecastError> {
    if series.len() < 3 {
        return Err(ForecastError::SeriesTooShort { got: series.len(), need: 3 });
    }
    if h == 0 {
        return Err(ForecastError::ZeroHorizon);
    }
    let scores = fit_scores(series)?;
    let point_scores = scores.point_scores(h)?;
    let transformed = scores.model.assemble(&point_scores, None);
    Ok(ForecastResult {
        region: region.to_string(),
        horizon: h,
        point: to_lorenz(series.grid(), &transformed)?,
        bands: Vec::new(),
        replicates: None,
    })
}

/// Univariate pipeline with bootstrap interval bands.
pub fn bootstrap_ufts(
    series: &FunctionalSeries,
    region: &str,
    h: usize,
    cfg: &BootstrapConfig,
) -> Result<ForecastResult, ForecastError> {
    if series.len() < 3 {
        return Err(ForecastError::SeriesTooShort { got: series.len(), need: 3 });
    }
    let scores = fit_scores(series)?;
    bootstrap_region(&scores, None, region, h, cfg)
}

fn region_series(panel: &CurvePanel, dec: &FanovaDecomposition, s: usize) -> FunctionalSeries {
    FunctionalSeries::new(panel.grid().clone(), dec.residual_series(s).to_vec())
        .expect("residuals share the panel grid")
}

fn region_offset(dec: &FanovaDecomposition, s: usize) -> Vec<f64> {
    dec.grand().iter().zip(dec.row_effect(s)).map(|(g, r)| g + r).collect()
}

/// FANOVA pipeline point forecasts: polish, forecast each region's
/// residual functions, and add the grand and row effects back.
pub fn forecast_fanova(panel: &CurvePanel, h: usize) -> Result<Vec<ForecastResult>, ForecastError> {
    if h == 0 {
        return Err(ForecastError::ZeroHorizon);
    }
    let dec = median_polish(panel, crate::fanova::DEFAULT_MAX_ITER, crate::fanova::DEFAULT_TOL)?;
    (0..panel.n_regions())
        .into_par_iter()
        .map(|s| {
            let scores = fit_scores(&region_series(panel, &dec, s))?;
            let point_scores = scores.point_scores(h)?;
            let offset = region_offset(&dec, s);
            let transformed = add_offset(scores.model.assemble(&point_scores, None), Some(&offset));
            Ok(ForecastResult {
                region: panel.regions()[s].clone(),
                horizon: h,
                point: to_lorenz(panel.grid(), &transformed)?,
                bands: Vec::new(),
                replicates: None,
            })
        })
        .collect()
}

/// FANOVA pipeline with bootstrap interval bands for every region.
pub fn bootstrap_fanova(
    panel: &CurvePanel,
    h: usize,
    cfg: &BootstrapConfig,
) -> Result<Vec<ForecastResult>, ForecastError> {
    cfg.validate()?;
    if h == 0 {
        return Err(ForecastError::ZeroHorizon);
    }
    let dec = median_polish(panel, crate::fanova::DEFAULT_MAX_ITER, crate::fanova::DEFAULT_TOL)?;
    (0..panel.n_regions())
        .into_par_iter()
        .map(|s| {
            let scores = fit_scores(&region_series(panel, &dec, s))?;
            let offset = region_offset(&dec, s);
            // decorrelate region streams while keeping runs reproducible
            let mut region_cfg = cfg.clone();
            region_cfg.seed = cfg.seed.wrapping_add(0x5851_f42d_4c95_7f2d_u64.wrapping_mul(s as u64 + 1));
            bootstrap_region(&scores, Some(&offset), &panel.regions()[s], h, &region_cfg)
        })
        .collect()
}

/// Forecast CSV: `region,horizon,p,point,lower{level},upper{level},…`
/// with one pair of bound columns per nominal level.
pub fn export_csv<W: Write>(results: &[ForecastResult], writer: W) -> Result<(), ForecastError> {
    let mut w = csv::Writer::from_writer(writer);
    let levels: Vec<String> = results
        .first()
        .map(|r| {
            r.bands
                .iter()
                .map(|b| format!("{}", ((1.0 - b.alpha) * 100.0).round() as u32))
                .collect()
        })
        .unwrap_or_default();
    let mut header = vec!["region".to_string(), "horizon".to_string(), "p".to_string(), "point".to_string()];
    for level in &levels {
        header.push(format!("lower{level}"));
        header.push(format!("upper{level}"));
    }
    w.write_record(&header)?;
    for r in results {
        let points = r.point.grid().points();
        for (i, p) in points.iter().enumerate() {
            let mut rec = vec![
                r.region.clone(),
                r.horizon.to_string(),
                p.to_string(),
                r.point.values()[i].to_string(),
            ];
            for band in &r.bands {
                rec.push(band.lower.values()[i].to_string());
                rec.push(band.upper.values()[i].to_string());
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}
