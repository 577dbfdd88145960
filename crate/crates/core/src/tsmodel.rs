//! Scalar time series models for principal component scores: KPSS-based
//! differencing, ARIMA estimation by conditional sum of squares, and
//! exhaustive AICc order selection.
//!
//! Score series here are very short (around a dozen points), which drives
//! two choices. Estimation is conditional sum of squares rather than a
//! full state-space likelihood: the conditional Gaussian likelihood is
//! evaluated from the CSS residuals, which is standard for small ARMA
//! orders and keeps candidate comparisons consistent. Order search is an
//! exhaustive grid over (p, q) at the KPSS-selected d; with p, q ≤ 2 the
//! grid has at most nine candidates per d, so a stepwise search would buy
//! nothing and cost determinism.

use thiserror::Error;

/// 5% critical value of the level-stationarity KPSS test.
pub const KPSS_CRIT_5PCT: f64 = 0.463;

/// Default order-search bounds for score series.
pub const DEFAULT_P_MAX: usize = 2;
pub const DEFAULT_Q_MAX: usize = 2;
pub const DEFAULT_D_MAX: usize = 1;

/// Root moduli must exceed 1 + this margin for a candidate to be kept.
const ROOT_MARGIN: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum TsError {
    #[error("series too short: {got} points, need at least {need}")]
    TooShort { got: usize, need: usize },
    #[error("series contains non-finite values")]
    NonFinite,
    #[error("candidate ({p},{d},{q}) infeasible on {len} points")]
    CandidateInfeasible { p: usize, d: usize, q: usize, len: usize },
    #[error("optimum rejected: AR or MA roots inside the unit circle")]
    UnstableRoots,
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("history of {got} points cannot support d = {d}")]
    HistoryTooShort { got: usize, d: usize },
}

/// ARIMA model orders; drift is only meaningful at d = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub include_drift: bool,
}

impl ArimaOrder {
    pub fn new(p: usize, d: usize, q: usize) -> Self {
        ArimaOrder { p, d, q, include_drift: false }
    }

    pub fn with_drift(p: usize, d: usize, q: usize) -> Self {
        ArimaOrder { p, d, q, include_drift: true }
    }

    /// Whether a mean term is estimated on the differenced scale.
    fn has_mean(&self) -> bool {
        self.d == 0 || (self.d == 1 && self.include_drift)
    }

    /// Estimated parameter count including the innovation variance.
    fn n_params(&self) -> usize {
        self.p + self.q + usize::from(self.has_mean()) + 1
    }
}

/// A fitted ARIMA model. `mean` is the intercept of the differenced
/// series: the process mean at d = 0 and the drift at d = 1.
#[derive(Debug, Clone)]
pub struct ArimaFit {
    pub order: ArimaOrder,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub mean: f64,
    pub sigma2: f64,
    pub loglik: f64,
    pub aicc: f64,
}

fn difference(series: &[f64], d: usize) -> Vec<f64> {
    let mut w = series.to_vec();
    for _ in 0..d {
        w = w.windows(2).map(|x| x[1] - x[0]).collect();
    }
    w
}

/// KPSS level-stationarity statistic with Bartlett-kernel long-run
/// variance at bandwidth floor(4 · (T/100)^{1/4}). A constant series is
/// perfectly level-stationary and scores 0.
pub fn kpss_level_stat(series: &[f64]) -> Result<f64, TsError> {
    let t = series.len();
    if t < 4 {
        return Err(TsError::TooShort { got: t, need: 4 });
    }
    if !series.iter().all(|v| v.is_finite()) {
        return Err(TsError::NonFinite);
    }
    let mean = series.iter().sum::<f64>() / t as f64;
    let e: Vec<f64> = series.iter().map(|v| v - mean).collect();

    let gamma0 = e.iter().map(|v| v * v).sum::<f64>() / t as f64;
    if gamma0 < 1e-300 {
        return Ok(0.0);
    }
    let bw = (4.0 * (t as f64 / 100.0).powf(0.25)).floor() as usize;
    let mut lrv = gamma0;
    for j in 1..=bw.min(t - 1) {
        let gj = e[j..].iter().zip(&e).map(|(a, b)| a * b).sum::<f64>() / t as f64;
        lrv += 2.0 * (1.0 - j as f64 / (bw as f64 + 1.0)) * gj;
    }
    if lrv <= 0.0 {
        // Bartlett weights keep this non-negative up to rounding
        return Ok(0.0);
    }
    let mut acc = 0.0;
    let mut partial = 0.0;
    for v in &e {
        partial += v;
        acc += partial * partial;
    }
    Ok(acc / ((t as f64) * (t as f64) * lrv))
}

/// Smallest d ≤ d_max whose d-times-differenced series passes the KPSS
/// test at the 5% level; d_max when every candidate rejects.
pub fn select_d(series: &[f64], d_max: usize) -> Result<usize, TsError> {
    if series.len() < d_max + 4 {
        return Err(TsError::TooShort { got: series.len(), need: d_max + 4 });
    }
    for d in 0..=d_max {
        let w = difference(series, d);
        if kpss_level_stat(&w)? <= KPSS_CRIT_5PCT {
            return Ok(d);
        }
    }
    Ok(d_max)
}

// Conditional sum of squares of the mean-adjusted ARMA recursion.
// Pre-sample lags are padded with the mean and pre-sample innovations
// with zero, so every candidate order is scored over all T residuals and
// the AICc comparison stays on a common footing. Returns (sse, residuals).
fn css(w: &[f64], mu: f64, ar: &[f64], ma: &[f64]) -> (f64, Vec<f64>) {
    let t_len = w.len();
    let mut eps = vec![0.0f64; t_len];
    let mut sse = 0.0;
    for t in 0..t_len {
        let mut pred = 0.0;
        for (i, phi) in ar.iter().enumerate() {
            if t >= i + 1 {
                pred += phi * (w[t - 1 - i] - mu);
            }
        }
        for (j, theta) in ma.iter().enumerate() {
            if t >= j + 1 {
                pred += theta * eps[t - 1 - j];
            }
        }
        let e = (w[t] - mu) - pred;
        eps[t] = e;
        sse += e * e;
    }
    (sse, eps)
}

// Deterministic Nelder-Mead on an unconstrained objective. Small and
// dependency-free; the CSS surfaces here have a handful of parameters.
fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], step: f64, max_iter: usize) -> Vec<f64> {
    let n = x0.len();
    if n == 0 {
        return Vec::new();
    }
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        simplex.push(x);
    }
    let mut fv: Vec<f64> = simplex.iter().map(|x| f(x)).collect();

    for _ in 0..max_iter {
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| fv[a].partial_cmp(&fv[b]).unwrap_or(std::cmp::Ordering::Equal));
        let best = idx[0];
        let worst = idx[n];
        let second_worst = idx[n - 1];

        if (fv[worst] - fv[best]).abs() < 1e-12 * (1.0 + fv[best].abs()) {
            break;
        }

        let mut centroid = vec![0.0; n];
        for &i in idx.iter().take(n) {
            for (c, x) in centroid.iter_mut().zip(&simplex[i]) {
                *c += x;
            }
        }
        for c in centroid.iter_mut() {
            *c /= n as f64;
        }

        let make = |coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[worst])
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };

        let reflected = make(1.0);
        let fr = f(&reflected);
        if fr < fv[best] {
            let expanded = make(2.0);
            let fe = f(&expanded);
            if fe < fr {
                simplex[worst] = expanded;
                fv[worst] = fe;
            } else {
                simplex[worst] = reflected;
                fv[worst] = fr;
            }
        } else if fr < fv[second_worst] {
            simplex[worst] = reflected;
            fv[worst] = fr;
        } else {
            let contracted = make(-0.5);
            let fc = f(&contracted);
            if fc < fv[worst] {
                simplex[worst] = contracted;
                fv[worst] = fc;
            } else {
                // shrink toward the best vertex
                let best_x = simplex[best].clone();
                for i in 0..=n {
                    if i == best {
                        continue;
                    }
                    for (x, b) in simplex[i].iter_mut().zip(&best_x) {
                        *x = b + 0.5 * (*x - b);
                    }
                    fv[i] = f(&simplex[i]);
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..=n {
        if fv[i] < fv[best] {
            best = i;
        }
    }
    simplex.swap_remove(best)
}

// All roots of 1 + c₁z + … + c_k z^k strictly outside the unit circle
// (by ROOT_MARGIN). Degrees ≤ 2 are handled in closed form; higher
// degrees go through the companion matrix.
fn roots_outside_unit(coeffs: &[f64]) -> bool {
    let mut c: Vec<f64> = coeffs.to_vec();
    while let Some(last) = c.last() {
        if last.abs() < 1e-10 {
            c.pop();
        } else {
            break;
        }
    }
    match c.len() {
        0 => true,
        1 => (1.0 / c[0]).abs() > 1.0 + ROOT_MARGIN,
        2 => {
            // roots of c2 z² + c1 z + 1
            let (c1, c2) = (c[0], c[1]);
            let disc = c1 * c1 - 4.0 * c2;
            if disc >= 0.0 {
                let r = disc.sqrt();
                let z1 = (-c1 + r) / (2.0 * c2);
                let z2 = (-c1 - r) / (2.0 * c2);
                z1.abs() > 1.0 + ROOT_MARGIN && z2.abs() > 1.0 + ROOT_MARGIN
            } else {
                // complex pair: |z|² = 1/c2
                (1.0 / c2.abs()).sqrt() > 1.0 + ROOT_MARGIN
            }
        }
        k => {
            // companion matrix of the monic reversal z^k + (c_{k-1}/c_k) z^{k-1} + ... + 1/c_k
            let ck = c[k - 1];
            let mut m = nalgebra::DMatrix::<f64>::zeros(k, k);
            for i in 1..k {
                m[(i, i - 1)] = 1.0;
            }
            m[(0, k - 1)] = -1.0 / ck;
            for i in 1..k {
                m[(i, k - 1)] = -c[i - 1] / ck;
            }
            // eigenvalues of the companion are 1/roots
            m.complex_eigenvalues().iter().all(|z| z.norm() < 1.0 / (1.0 + ROOT_MARGIN))
        }
    }
}

/// Fits an ARIMA model of the given order by conditional sum of squares.
///
/// The conditional Gaussian log-likelihood, an AICc of
/// −2ℓ + 2kT/(T − k − 1), and the innovation variance come along.
/// Candidates whose optimum is explosive or non-invertible are rejected.
pub fn fit_arima(series: &[f64], order: &ArimaOrder) -> Result<ArimaFit, TsError> {
    if !series.iter().all(|v| v.is_finite()) {
        return Err(TsError::NonFinite);
    }
    if series.len() <= order.d {
        return Err(TsError::HistoryTooShort { got: series.len(), d: order.d });
    }
    let w = difference(series, order.d);
    let t_len = w.len();
    let k = order.n_params();
    // AICc needs T − k − 1 ≥ 1; CSS needs residual degrees of freedom
    if t_len <= order.p + order.q + 1 || t_len < k + 2 {
        return Err(TsError::CandidateInfeasible {
            p: order.p,
            d: order.d,
            q: order.q,
            len: series.len(),
        });
    }

    let has_mean = order.has_mean();
    let w_mean = w.iter().sum::<f64>() / t_len as f64;

    let (mu, ar, ma) = if order.p == 0 && order.q == 0 {
        // closed form: μ is the sample mean of the differenced series
        (if has_mean { w_mean } else { 0.0 }, Vec::new(), Vec::new())
    } else {
        let n_free = order.p + order.q + usize::from(has_mean);
        let mut x0 = vec![0.0; n_free];
        if has_mean {
            x0[order.p + order.q] = w_mean;
        }
        let objective = |x: &[f64]| -> f64 {
            let ar = &x[..order.p];
            let ma = &x[order.p..order.p + order.q];
            let mu = if has_mean { x[order.p + order.q] } else { 0.0 };
            let (sse, _) = css(&w, mu, ar, ma);
            sse
        };
        let spread = w.iter().map(|v| (v - w_mean).abs()).fold(0.0f64, f64::max).max(0.1);
        let best = nelder_mead(&objective, &x0, 0.25_f64.min(spread), 400 * n_free);
        let ar = best[..order.p].to_vec();
        let ma = best[order.p..order.p + order.q].to_vec();
        let mu = if has_mean { best[order.p + order.q] } else { 0.0 };
        (mu, ar, ma)
    };

    // stationarity of 1 − Σφᵢzⁱ, invertibility of 1 + Σθⱼzʲ
    let ar_poly: Vec<f64> = ar.iter().map(|v| -v).collect();
    if !roots_outside_unit(&ar_poly) || !roots_outside_unit(&ma) {
        return Err(TsError::UnstableRoots);
    }

    let (sse, _) = css(&w, mu, &ar, &ma);
    let n_eff = t_len as f64;
    let sigma2 = sse / n_eff;
    let loglik = if sigma2 > 0.0 {
        -0.5 * n_eff * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0)
    } else {
        f64::INFINITY
    };
    let t_f = t_len as f64;
    let k_f = k as f64;
    let aicc = -2.0 * loglik + 2.0 * k_f * t_f / (t_f - k_f - 1.0);

    Ok(ArimaFit { order: *order, ar, ma, mean: mu, sigma2, loglik, aicc })
}

/// The guaranteed fallback: a random walk when at least two points exist,
/// a constant-mean model on a single point.
pub fn fallback_fit(series: &[f64]) -> ArimaFit {
    if series.len() >= 2 {
        let diffs = difference(series, 1);
        let n = diffs.len() as f64;
        let sigma2 = diffs.iter().map(|v| v * v).sum::<f64>() / n;
        ArimaFit {
            order: ArimaOrder::new(0, 1, 0),
            ar: Vec::new(),
            ma: Vec::new(),
            mean: 0.0,
            sigma2,
            loglik: f64::NAN,
            aicc: f64::INFINITY,
        }
    } else {
        ArimaFit {
            order: ArimaOrder::new(0, 0, 0),
            ar: Vec::new(),
            ma: Vec::new(),
            mean: series.first().copied().unwrap_or(0.0),
            sigma2: 0.0,
            loglik: f64::NAN,
            aicc: f64::INFINITY,
        }
    }
}

/// Automatic order selection: d from successive KPSS tests, then an
/// exhaustive (p, q) grid minimizing AICc, with drift tried as an extra
/// candidate when d = 1. Falls back to a random walk with drift if every
/// candidate fails, so a model is always returned.
pub fn auto_arima(
    series: &[f64],
    p_max: usize,
    q_max: usize,
    d_max: usize,
) -> Result<ArimaFit, TsError> {
    if series.len() < 4 {
        return Err(TsError::TooShort { got: series.len(), need: 4 });
    }
    if !series.iter().all(|v| v.is_finite()) {
        return Err(TsError::NonFinite);
    }
    let d_cap = d_max.min(series.len().saturating_sub(4));
    let d = select_d(series, d_cap)?;

    let mut best: Option<ArimaFit> = None;
    for p in 0..=p_max {
        for q in 0..=q_max {
            let mut orders = vec![ArimaOrder { p, d, q, include_drift: false }];
            if d == 1 {
                orders.push(ArimaOrder { p, d, q, include_drift: true });
            }
            for order in orders {
                if let Ok(fit) = fit_arima(series, &order) {
                    if fit.aicc.is_nan() {
                        continue;
                    }
                    let better = match &best {
                        None => true,
                        Some(b) => fit.aicc < b.aicc,
                    };
                    if better {
                        best = Some(fit);
                    }
                }
            }
        }
    }
    match best {
        Some(fit) => Ok(fit),
        None => {
            let mut fb = fallback_fit(series);
            if series.len() >= 2 {
                // random walk with drift
                let diffs = difference(series, 1);
                fb.order.include_drift = true;
                fb.mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
                fb.sigma2 = diffs.iter().map(|v| (v - fb.mean).powi(2)).sum::<f64>()
                    / diffs.len() as f64;
            }
            Ok(fb)
        }
    }
}

/// Point forecasts 1..=h from the fitted model, applied to `series` as
/// history. Histories shorter than the AR order are padded with the model
/// mean; future innovations are zero.
pub fn forecast_arima(fit: &ArimaFit, series: &[f64], h: usize) -> Result<Vec<f64>, TsError> {
    if h == 0 {
        return Err(TsError::ZeroHorizon);
    }
    let d = fit.order.d;
    if series.len() < d.max(1) {
        return Err(TsError::HistoryTooShort { got: series.len(), d });
    }
    let w = difference(series, d);
    // innovations aligned with w
    let (_, eps) = css(&w, fit.mean, &fit.ar, &fit.ma);
    let mut w_ext = w.clone();
    let mut w_forecasts = Vec::with_capacity(h);
    for _step in 0..h {
        let t = w_ext.len();
        let mut pred = fit.mean;
        for (i, phi) in fit.ar.iter().enumerate() {
            let lag = if t >= i + 1 { w_ext[t - 1 - i] - fit.mean } else { 0.0 };
            pred += phi * lag;
        }
        for (j, theta) in fit.ma.iter().enumerate() {
            // future innovations are zero; indexes past the history too
            if t >= j + 1 && t - 1 - j < eps.len() {
                pred += theta * eps[t - 1 - j];
            }
        }
        w_ext.push(pred);
        w_forecasts.push(pred);
    }

    // integrate back through the d difference levels
    let mut forecasts = w_forecasts;
    for level in (0..d).rev() {
        let last = *difference(series, level).last().unwrap();
        let mut acc = last;
        for f in forecasts.iter_mut() {
            acc += *f;
            *f = acc;
        }
    }
    Ok(forecasts)
}
