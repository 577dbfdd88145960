//! Seeded synthetic panels for desk-scale verification: a smooth grand
//! effect, depth-median-zero row effects, and rank-one residual functions
//! driven by independent AR(1) score processes per region.

use super::{HarnessError, PanelData};
use crate::depth::functional_median;
use crate::fanova::CurvePanel;
use crate::lorenz::{sigmoid, Grid, LorenzCurve};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

/// Generator settings; everything is deterministic given `seed`.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub regions: usize,
    pub years: usize,
    pub grid_size: usize,
    /// Curvature of the baseline curve L₀(p) = p^(1 + grand_exponent).
    pub grand_exponent: f64,
    /// Magnitude of the region effects.
    pub row_scale: f64,
    /// AR(1) coefficient of the residual score process.
    pub ar_coeff: f64,
    /// Innovation standard deviation of the score process.
    pub innovation_scale: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            regions: 20,
            years: 11,
            grid_size: 942,
            grand_exponent: 1.0,
            row_scale: 0.3,
            ar_coeff: 0.5,
            innovation_scale: 0.05,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    fn validate(&self) -> Result<(), HarnessError> {
        if self.regions < 2 || self.years < 2 {
            return Err(HarnessError::BadConfig(
                "synthetic panel needs at least 2 regions and 2 years".into(),
            ));
        }
        if self.grid_size < 3 {
            return Err(HarnessError::BadConfig("grid size must be at least 3".into()));
        }
        if !(self.ar_coeff.abs() < 1.0) {
            return Err(HarnessError::BadConfig("AR coefficient must satisfy |ρ| < 1".into()));
        }
        if self.innovation_scale < 0.0 || self.row_scale < 0.0 {
            return Err(HarnessError::BadConfig("scales must be non-negative".into()));
        }
        Ok(())
    }
}

/// The components the generator assembled, for recovery studies.
#[derive(Debug, Clone)]
pub struct SyntheticTruth {
    pub grand: Vec<f64>,
    pub row_effects: Vec<Vec<f64>>,
    /// AR(1) scores, regions × years.
    pub scores: Vec<Vec<f64>>,
    /// The single residual eigenfunction (sup-norm one).
    pub eigenfunction: Vec<f64>,
}

/// A generated panel with its ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticPanel {
    pub data: PanelData,
    pub truth: SyntheticTruth,
}

/// Builds a synthetic transformed-scale panel plus its Lorenz-scale
/// curves and the true components.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticPanel, HarnessError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let grid = Grid::uniform(spec.grid_size)?;
    let points = grid.points();

    // baseline on the transformed scale; clamp keeps the logit finite
    let eps = crate::lorenz::DEFAULT_EPSILON;
    let theta0: Vec<f64> = points
        .iter()
        .map(|p| {
            let l = p.powf(1.0 + spec.grand_exponent).clamp(eps, 1.0 - eps);
            (l / (1.0 - l)).ln()
        })
        .collect();

    // region effects: one smooth bump scaled by a per-region draw
    let bump: Vec<f64> = points.iter().map(|p| 4.0 * p * (1.0 - p)).collect();
    let mut row0: Vec<Vec<f64>> = Vec::with_capacity(spec.regions);
    for _ in 0..spec.regions {
        let z: f64 = rng.gen_range(-1.0..1.0);
        row0.push(bump.iter().map(|b| spec.row_scale * z * b).collect());
    }
    // shift so the functional median of the row effects is the zero function
    let med = {
        let refs: Vec<&[f64]> = row0.iter().map(|r| r.as_slice()).collect();
        functional_median(&refs)
    };
    let med_curve = row0[med].clone();
    let grand: Vec<f64> = theta0.iter().zip(&med_curve).map(|(t, m)| t + m).collect();
    let row_effects: Vec<Vec<f64>> = row0
        .iter()
        .map(|r| r.iter().zip(&med_curve).map(|(v, m)| v - m).collect())
        .collect();

    let eigenfunction: Vec<f64> = points.iter().map(|p| (PI * p).sin()).collect();

    // stationary AR(1) scores, one independent stream per region
    let stationary_sd = spec.innovation_scale / (1.0 - spec.ar_coeff * spec.ar_coeff).sqrt();
    let mut scores = Vec::with_capacity(spec.regions);
    for _ in 0..spec.regions {
        let mut beta = stationary_sd * rng.sample::<f64, _>(StandardNormal);
        let mut stream = Vec::with_capacity(spec.years);
        for t in 0..spec.years {
            if t > 0 {
                let e: f64 = rng.sample(StandardNormal);
                beta = spec.ar_coeff * beta + spec.innovation_scale * e;
            }
            stream.push(beta);
        }
        scores.push(stream);
    }

    let g = grid.len();
    let mut data = Vec::with_capacity(spec.regions * spec.years * g);
    let mut actual = Vec::with_capacity(spec.regions);
    for s in 0..spec.regions {
        let mut region_curves = Vec::with_capacity(spec.years);
        for t in 0..spec.years {
            let beta = scores[s][t];
            let transformed: Vec<f64> = grand
                .iter()
                .zip(&row_effects[s])
                .zip(&eigenfunction)
                .map(|((th, eta), phi)| th + eta + beta * phi)
                .collect();
            let lorenz = LorenzCurve::from_unconstrained(
                grid.clone(),
                transformed.iter().map(|y| sigmoid(*y)).collect(),
            )?;
            data.extend(transformed);
            region_curves.push(lorenz);
        }
        actual.push(region_curves);
    }

    let panel = CurvePanel::new(
        grid,
        (1..=spec.regions).map(|s| format!("region{s:02}")).collect(),
        (1..=spec.years).map(|t| format!("{t}")).collect(),
        data,
    )?;
    Ok(SyntheticPanel {
        data: PanelData { panel, actual },
        truth: SyntheticTruth { grand, row_effects, scores, eigenfunction },
    })
}
