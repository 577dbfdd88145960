//! Lorenz curves on a shared grid: construction from samples, logit
//! transforms, isotonic projection, and the inequality functionals
//! (Gini index, share density, mean percentile).
//!
//! Curves are stored at abscissae strictly inside (0, 1); the endpoint
//! values L(0) = 0 and L(1) = 1 are known analytically and are reattached
//! for quadrature, so the logit transform never sees the diverging ends.

use thiserror::Error;

/// Default clamping constant for the logit transform; keeps |Y| ≤ ~13.8.
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Relative slope-decrease tolerance used by the convexity diagnostic.
pub const CONVEXITY_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum LorenzError {
    #[error("grid needs at least 3 points, got {0}")]
    GridTooSmall(usize),
    #[error("grid points must be strictly increasing inside (0, 1)")]
    GridNotIncreasing,
    #[error("curve has {values} values for a grid of {grid} points")]
    LengthMismatch { values: usize, grid: usize },
    #[error("curve values must be finite")]
    NonFinite,
    #[error("curve values must lie in [0, 1]")]
    OutOfRange,
    #[error("curve values must be non-decreasing")]
    NotMonotone,
    #[error("incomes must be non-negative")]
    NegativeIncome,
    #[error("degenerate income distribution: all incomes are zero")]
    DegenerateDistribution,
    #[error("weights must be positive with a positive sum")]
    BadWeights,
    #[error("incomes and weights differ in length")]
    SampleLengthMismatch,
    #[error("epsilon must lie in (0, 1e-3], got {0}")]
    BadEpsilon(f64),
    #[error("empty input")]
    Empty,
}

/// Ordered abscissae p_i strictly inside the open interval (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
}

impl Grid {
    pub fn new(points: Vec<f64>) -> Result<Self, LorenzError> {
        if points.len() < 3 {
            return Err(LorenzError::GridTooSmall(points.len()));
        }
        let inside = points.iter().all(|p| p.is_finite() && *p > 0.0 && *p < 1.0);
        let increasing = points.windows(2).all(|w| w[0] < w[1]);
        if !inside || !increasing {
            return Err(LorenzError::GridNotIncreasing);
        }
        Ok(Grid { points })
    }

    /// Uniform interior grid p_i = i / (size + 1), i = 1..=size.
    pub fn uniform(size: usize) -> Result<Self, LorenzError> {
        let step = 1.0 / (size as f64 + 1.0);
        Grid::new((1..=size).map(|i| i as f64 * step).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A Lorenz curve sampled on a grid: values non-decreasing and in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct LorenzCurve {
    grid: Grid,
    values: Vec<f64>,
}

impl LorenzCurve {
    /// Validating constructor; rejects non-finite, out-of-range, or
    /// decreasing values. Convexity is a diagnostic, not a constraint.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, LorenzError> {
        if values.len() != grid.len() {
            return Err(LorenzError::LengthMismatch { values: values.len(), grid: grid.len() });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(LorenzError::NonFinite);
        }
        if !values.iter().all(|v| (0.0..=1.0).contains(v)) {
            return Err(LorenzError::OutOfRange);
        }
        if !values.windows(2).all(|w| w[0] <= w[1]) {
            return Err(LorenzError::NotMonotone);
        }
        Ok(LorenzCurve { grid, values })
    }

    /// Builds a valid curve from arbitrary finite values by isotonic
    /// projection followed by clamping into [0, 1].
    pub fn from_unconstrained(grid: Grid, values: Vec<f64>) -> Result<Self, LorenzError> {
        if !values.iter().all(|v| v.is_finite()) {
            return Err(LorenzError::NonFinite);
        }
        let mut proj = isotonic_project(&values);
        for v in &mut proj {
            *v = v.clamp(0.0, 1.0);
        }
        LorenzCurve::new(grid, proj)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// True when L(p_i) ≤ p_i everywhere (curves built from samples are).
    pub fn lies_below_diagonal(&self) -> bool {
        self.values.iter().zip(self.grid.points()).all(|(v, p)| *v <= *p + 1e-12)
    }

    /// Number of grid cells where the slope decreases by more than `tol`
    /// relative to the preceding slope. Zero for a discretely convex curve.
    pub fn convexity_violations(&self, tol: f64) -> usize {
        let p = self.grid.points();
        let mut count = 0;
        let mut prev_slope = f64::NEG_INFINITY;
        for i in 1..self.values.len() {
            let slope = (self.values[i] - self.values[i - 1]) / (p[i] - p[i - 1]);
            if slope < prev_slope - tol * prev_slope.abs().max(1.0) {
                count += 1;
            }
            prev_slope = slope;
        }
        count
    }
}

/// A logit-transformed curve; values live on the whole real line.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedCurve {
    grid: Grid,
    values: Vec<f64>,
}

impl TransformedCurve {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, LorenzError> {
        if values.len() != grid.len() {
            return Err(LorenzError::LengthMismatch { values: values.len(), grid: grid.len() });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(LorenzError::NonFinite);
        }
        Ok(TransformedCurve { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Builds the Lorenz curve of a weighted income sample.
///
/// Incomes are sorted ascending; the curve interpolates linearly between
/// the cumulative population shares and the cumulative income shares,
/// with (0, 0) and (1, 1) as anchors.
pub fn lorenz_from_samples(
    incomes: &[f64],
    weights: &[f64],
    grid: &Grid,
) -> Result<LorenzCurve, LorenzError> {
    if incomes.is_empty() {
        return Err(LorenzError::Empty);
    }
    if incomes.len() != weights.len() {
        return Err(LorenzError::SampleLengthMismatch);
    }
    if incomes.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(LorenzError::NegativeIncome);
    }
    if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
        return Err(LorenzError::BadWeights);
    }
    let mut order: Vec<usize> = (0..incomes.len()).collect();
    order.sort_by(|&a, &b| incomes[a].partial_cmp(&incomes[b]).unwrap());

    let total_weight: f64 = weights.iter().sum();
    let total_income: f64 = order.iter().map(|&i| incomes[i] * weights[i]).sum();
    if total_income <= 0.0 {
        return Err(LorenzError::DegenerateDistribution);
    }

    // Knots of the piecewise-linear curve: (cum. population, cum. income share).
    let mut knots_p = Vec::with_capacity(incomes.len() + 1);
    let mut knots_l = Vec::with_capacity(incomes.len() + 1);
    knots_p.push(0.0);
    knots_l.push(0.0);
    let mut cw = 0.0;
    let mut ci = 0.0;
    for &i in &order {
        cw += weights[i];
        ci += incomes[i] * weights[i];
        knots_p.push(cw / total_weight);
        knots_l.push(ci / total_income);
    }
    *knots_p.last_mut().unwrap() = 1.0;
    *knots_l.last_mut().unwrap() = 1.0;

    let values = grid.points().iter().map(|&p| interp(&knots_p, &knots_l, p)).collect();
    LorenzCurve::new(grid.clone(), values)
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    // xs non-decreasing with xs[0] <= x <= xs[last]
    match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(j) => ys[j],
        Err(j) => {
            let (j0, j1) = (j - 1, j);
            let span = xs[j1] - xs[j0];
            if span <= 0.0 {
                ys[j1]
            } else {
                ys[j0] + (ys[j1] - ys[j0]) * (x - xs[j0]) / span
            }
        }
    }
}

/// Logit transform Y = ln(L / (1 − L)) with values clamped to
/// [epsilon, 1 − epsilon] first so the output is finite everywhere.
pub fn logit_transform(
    curve: &LorenzCurve,
    epsilon: f64,
) -> Result<TransformedCurve, LorenzError> {
    if !(epsilon > 0.0 && epsilon <= 1e-3) {
        return Err(LorenzError::BadEpsilon(epsilon));
    }
    let values = curve
        .values()
        .iter()
        .map(|&l| {
            let c = l.clamp(epsilon, 1.0 - epsilon);
            (c / (1.0 - c)).ln()
        })
        .collect();
    TransformedCurve::new(curve.grid().clone(), values)
}

/// Numerically stable sigmoid, split on the sign of the argument.
pub fn sigmoid(y: f64) -> f64 {
    if y >= 0.0 {
        1.0 / (1.0 + (-y).exp())
    } else {
        let e = y.exp();
        e / (1.0 + e)
    }
}

/// Inverse logit applied pointwise. Monotonicity of the result is not
/// guaranteed; feed the output to [`LorenzCurve::from_unconstrained`].
pub fn inverse_logit(curve: &TransformedCurve) -> Vec<f64> {
    curve.values().iter().map(|&y| sigmoid(y)).collect()
}

/// Least-squares projection onto non-decreasing sequences
/// (pool-adjacent-violators). Idempotent and mean-preserving.
pub fn isotonic_project(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n <= 1 {
        return values.to_vec();
    }
    // Blocks as (mean, count), merged while the tail decreases.
    let mut mean: Vec<f64> = Vec::with_capacity(n);
    let mut count: Vec<usize> = Vec::with_capacity(n);
    for &v in values {
        mean.push(v);
        count.push(1);
        while mean.len() > 1 && mean[mean.len() - 2] > mean[mean.len() - 1] {
            let (m1, c1) = (mean.pop().unwrap(), count.pop().unwrap());
            let j = mean.len() - 1;
            let merged = count[j] + c1;
            mean[j] = (mean[j] * count[j] as f64 + m1 * c1 as f64) / merged as f64;
            count[j] = merged;
        }
    }
    let mut out = Vec::with_capacity(n);
    for (m, c) in mean.iter().zip(&count) {
        out.extend(std::iter::repeat(*m).take(*c));
    }
    out
}

/// Grid extended with the analytic endpoints, paired curve values included.
fn extended(curve: &LorenzCurve) -> (Vec<f64>, Vec<f64>) {
    let g = curve.grid().points();
    let mut p = Vec::with_capacity(g.len() + 2);
    let mut l = Vec::with_capacity(g.len() + 2);
    p.push(0.0);
    l.push(0.0);
    p.extend_from_slice(g);
    l.extend_from_slice(curve.values());
    p.push(1.0);
    l.push(1.0);
    (p, l)
}

/// Gini index G = 2 ∫ (p − L(p)) dp via the trapezoidal rule on the
/// endpoint-extended grid; exact for the piecewise-linear representation.
pub fn gini(curve: &LorenzCurve) -> f64 {
    let (p, l) = extended(curve);
    let mut acc = 0.0;
    for i in 1..p.len() {
        let f0 = p[i - 1] - l[i - 1];
        let f1 = p[i] - l[i];
        acc += 0.5 * (f0 + f1) * (p[i] - p[i - 1]);
    }
    2.0 * acc
}

/// Share density dL/dp at the grid points, by central differences on the
/// endpoint-extended curve. Non-negative for a monotone curve.
pub fn share_density(curve: &LorenzCurve) -> Vec<f64> {
    let (p, l) = extended(curve);
    (1..p.len() - 1).map(|i| (l[i + 1] - l[i - 1]) / (p[i + 1] - p[i - 1])).collect()
}

/// Mean percentile p̄ = ∫ p dL(p), the percentile of the household earning
/// the average dollar. Integrated segment-exactly so that G = 2 p̄ − 1
/// holds to machine precision for any curve on any grid.
pub fn mean_percentile(curve: &LorenzCurve) -> f64 {
    let (p, l) = extended(curve);
    let mut acc = 0.0;
    for i in 1..p.len() {
        // ∫ p ϑ(p) dp over the segment with ϑ constant equals
        // slope · (p1² − p0²)/2 = ΔL · (p0 + p1)/2.
        acc += (l[i] - l[i - 1]) * 0.5 * (p[i] + p[i - 1]);
    }
    acc
}
