//! Data ingestion, synthetic panel generation, and the expanding-window
//! evaluation protocol.

mod eval;
mod ingest;
mod synthetic;

pub use eval::{expanding_window_eval, EvalOutput, FoldForecast, MetricReport, ReportRow};
pub use ingest::{ingest_csv, CsvFormat};
pub use synthetic::{generate_synthetic, SyntheticPanel, SyntheticSpec, SyntheticTruth};

use crate::fanova::{CurvePanel, FanovaError};
use crate::forecast::ForecastError;
use crate::fpca::FpcaError;
use crate::lorenz::{LorenzCurve, LorenzError};
use crate::metrics::MetricsError;
use crate::tsmodel::TsError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("csv parse error at line {line}: {message}")]
    MalformedRow { line: u64, message: String },
    #[error("missing column `{0}` in header")]
    MissingColumn(String),
    #[error("ragged panel: region `{region}` has no data for year `{year}`")]
    RaggedPanel { region: String, year: String },
    #[error("no data rows found")]
    EmptyInput,
    #[error("panel has {n} years but the protocol needs m + horizons = {need}")]
    InfeasibleSplit { n: usize, need: usize },
    #[error("config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Lorenz(#[from] LorenzError),
    #[error(transparent)]
    Fanova(#[from] FanovaError),
    #[error(transparent)]
    Fpca(#[from] FpcaError),
    #[error(transparent)]
    Ts(#[from] TsError),
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Forecasting methods the harness can evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Univariate functional time series per region.
    Ufts,
    /// Functional median polish plus residual forecasting.
    Fmp,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Ufts => "ufts",
            Method::Fmp => "fmp",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ufts" => Ok(Method::Ufts),
            "fmp" | "fanova" => Ok(Method::Fmp),
            other => Err(format!("unknown method `{other}` (expected ufts or fmp)")),
        }
    }
}

/// A transformed-scale panel together with the original Lorenz curves
/// used as evaluation targets.
#[derive(Debug, Clone)]
pub struct PanelData {
    pub panel: CurvePanel,
    /// actual\[s\]\[t\] is region s's observed curve at time t.
    pub actual: Vec<Vec<LorenzCurve>>,
}

/// Settings of one evaluation study.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub grid_size: usize,
    /// Initial training length m.
    pub m: usize,
    /// Number of one-step folds Ξ.
    pub horizons: usize,
    /// Bootstrap replicates B.
    pub replicates: usize,
    pub alphas: Vec<f64>,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub epsilon: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            grid_size: 942,
            m: 6,
            horizons: 5,
            replicates: 1000,
            alphas: vec![0.2, 0.05],
            seed: 0,
            methods: vec![Method::Ufts, Method::Fmp],
            epsilon: crate::lorenz::DEFAULT_EPSILON,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.grid_size < 3 {
            return Err(HarnessError::BadConfig("grid size must be at least 3".into()));
        }
        if self.m < 3 || self.horizons == 0 {
            return Err(HarnessError::BadConfig(
                "need m ≥ 3 and at least one horizon".into(),
            ));
        }
        if self.replicates < 100 {
            return Err(HarnessError::BadConfig("need at least 100 replicates".into()));
        }
        if self.methods.is_empty() {
            return Err(HarnessError::BadConfig("no methods selected".into()));
        }
        if self.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(HarnessError::BadConfig("alpha levels must lie in (0,1)".into()));
        }
        Ok(())
    }
}
