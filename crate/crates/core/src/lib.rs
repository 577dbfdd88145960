//! Forecasting time series of Lorenz curves.
//!
//! A panel of Lorenz curves (regions × years) is mapped to the real line
//! with a logit transform, decomposed by a one-way functional ANOVA
//! (functional median polish), and the time-varying part is forecast by
//! functional principal component scores driven by automatically selected
//! ARIMA models. Pointwise prediction intervals come from a bootstrap over
//! score forecast errors and model residual functions. A harness module
//! provides CSV ingestion, a synthetic panel generator, and the
//! expanding-window evaluation protocol with the point and interval
//! accuracy measures.

pub mod depth;
pub mod fanova;
pub mod forecast;
pub mod fpca;
pub mod harness;
pub mod lorenz;
pub mod metrics;
pub mod tsmodel;

pub use depth::CurveSet;
pub use fanova::{CurvePanel, FanovaDecomposition};
pub use forecast::{BootstrapConfig, ForecastResult, IntervalBand};
pub use fpca::{FpcaModel, FunctionalSeries};
pub use harness::{Method, StudyConfig, SyntheticSpec};
pub use lorenz::{Grid, LorenzCurve, TransformedCurve};
pub use tsmodel::{ArimaFit, ArimaOrder};
