//! Expanding-window, one-step-ahead evaluation: fit on the first
//! m + ξ − 1 years, forecast the next, ξ = 1..Ξ, and aggregate the point
//! and interval measures per region with a final Mean row.

use super::{HarnessError, Method, PanelData, StudyConfig};
use crate::fanova::CurvePanel;
use crate::forecast::{bootstrap_fanova, bootstrap_ufts, BootstrapConfig, ForecastResult};
use crate::fpca::FunctionalSeries;
use crate::lorenz::LorenzCurve;
use crate::metrics::{ecp_cpd, interval_score, jsd_sqrt, kld};
use rayon::prelude::*;
use std::io::Write;

/// One region's forecast from one fold of one method.
#[derive(Debug, Clone)]
pub struct FoldForecast {
    pub method: Method,
    /// ξ, counted from 1.
    pub fold: usize,
    /// Index of the forecast year in the full panel (0-based).
    pub target: usize,
    pub result: ForecastResult,
}

#[derive(Debug, Clone)]
pub struct ReportRow {
    pub region: String,
    pub method: Method,
    pub metric: String,
    pub alpha: Option<f64>,
    pub value: f64,
}

/// Tidy metric report: per-region rows plus a Mean row per metric.
#[derive(Debug, Clone)]
pub struct MetricReport {
    pub rows: Vec<ReportRow>,
}

impl MetricReport {
    pub fn value(
        &self,
        region: &str,
        method: Method,
        metric: &str,
        alpha: Option<f64>,
    ) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| {
                r.region == region
                    && r.method == method
                    && r.metric == metric
                    && match (r.alpha, alpha) {
                        (None, None) => true,
                        (Some(a), Some(b)) => (a - b).abs() < 1e-12,
                        _ => false,
                    }
            })
            .map(|r| r.value)
    }

    /// CSV export `region,method,metric,alpha,value`. With `x100` the
    /// divergence rows are scaled by 100 and renamed `kld_x100`/`jsd_x100`,
    /// mirroring the usual table convention.
    pub fn export_csv<W: Write>(&self, writer: W, x100: bool) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["region", "method", "metric", "alpha", "value"])?;
        for row in &self.rows {
            let scaled = x100 && (row.metric == "kld" || row.metric == "jsd");
            let metric = if scaled { format!("{}_x100", row.metric) } else { row.metric.clone() };
            let value = if scaled { row.value * 100.0 } else { row.value };
            w.write_record([
                row.region.as_str(),
                row.method.name(),
                metric.as_str(),
                &row.alpha.map(|a| a.to_string()).unwrap_or_default(),
                &value.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Human-readable tables: point accuracy first (KLD/JSD, ×100 when
    /// asked, flagged in the header), then one interval block per level.
    pub fn render_table(&self, x100: bool) -> String {
        let mut out = String::new();
        let methods: Vec<Method> = {
            let mut seen = Vec::new();
            for r in &self.rows {
                if !seen.contains(&r.method) {
                    seen.push(r.method);
                }
            }
            seen
        };
        let regions: Vec<String> = {
            let mut seen = Vec::new();
            for r in &self.rows {
                if !seen.contains(&r.region) {
                    seen.push(r.region.clone());
                }
            }
            seen
        };
        let alphas: Vec<f64> = {
            let mut seen: Vec<f64> = Vec::new();
            for r in &self.rows {
                if let Some(a) = r.alpha {
                    if !seen.iter().any(|x| (x - a).abs() < 1e-12) {
                        seen.push(a);
                    }
                }
            }
            seen
        };

        let suffix = if x100 { " (x100)" } else { "" };
        let scale = if x100 { 100.0 } else { 1.0 };
        out.push_str(&format!("{:<16}", "region"));
        for m in &methods {
            out.push_str(&format!(
                "{:>14}{:>14}",
                format!("{} kld{}", m.name(), suffix),
                format!("{} jsd{}", m.name(), suffix)
            ));
        }
        out.push('\n');
        for region in &regions {
            out.push_str(&format!("{region:<16}"));
            for m in &methods {
                let k = self.value(region, *m, "kld", None).unwrap_or(f64::NAN) * scale;
                let j = self.value(region, *m, "jsd", None).unwrap_or(f64::NAN) * scale;
                out.push_str(&format!("{k:>14.4}{j:>14.4}"));
            }
            out.push('\n');
        }
        for alpha in &alphas {
            out.push_str(&format!("\nalpha = {alpha}\n"));
            out.push_str(&format!("{:<16}", "region"));
            for m in &methods {
                out.push_str(&format!(
                    "{:>14}{:>12}{:>12}",
                    format!("{} score", m.name()),
                    format!("{} ecp", m.name()),
                    format!("{} cpd", m.name())
                ));
            }
            out.push('\n');
            for region in &regions {
                out.push_str(&format!("{region:<16}"));
                for m in &methods {
                    let s = self
                        .value(region, *m, "interval_score", Some(*alpha))
                        .unwrap_or(f64::NAN);
                    let e = self.value(region, *m, "ecp", Some(*alpha)).unwrap_or(f64::NAN);
                    let c = self.value(region, *m, "cpd", Some(*alpha)).unwrap_or(f64::NAN);
                    out.push_str(&format!("{s:>14.4}{e:>12.4}{c:>12.4}"));
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Everything one evaluation run produced.
#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub report: MetricReport,
    pub forecasts: Vec<FoldForecast>,
}

// splitmix64-style mixing for derived seeds
fn mix_seed(base: u64, parts: &[u64]) -> u64 {
    let mut z = base;
    for p in parts {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(*p);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
    }
    z
}

type Forecaster<'a> =
    Box<dyn Fn(&CurvePanel, usize) -> Result<Vec<ForecastResult>, HarnessError> + Sync + 'a>;

fn region_series(panel: &CurvePanel, s: usize) -> FunctionalSeries {
    let curves = (0..panel.n_years()).map(|t| panel.curve(s, t).to_vec()).collect();
    FunctionalSeries::new(panel.grid().clone(), curves).expect("panel curves are rectangular")
}

fn eval_with(
    data: &PanelData,
    cfg: &StudyConfig,
    forecasters: &[(Method, Forecaster)],
) -> Result<EvalOutput, HarnessError> {
    cfg.validate()?;
    let panel = &data.panel;
    let n = panel.n_years();
    if cfg.m + cfg.horizons > n {
        return Err(HarnessError::InfeasibleSplit { n, need: cfg.m + cfg.horizons });
    }
    let s_count = panel.n_regions();

    let mut forecasts: Vec<FoldForecast> = Vec::new();
    for (method, forecaster) in forecasters {
        for fold in 1..=cfg.horizons {
            let train_len = cfg.m + fold - 1;
            let training = panel.truncate_years(train_len)?;
            let results = forecaster(&training, fold)?;
            debug_assert_eq!(results.len(), s_count);
            for result in results {
                forecasts.push(FoldForecast {
                    method: *method,
                    fold,
                    target: train_len,
                    result,
                });
            }
        }
    }

    // aggregate measures per region, then the Mean row
    let mut rows = Vec::new();
    for (method, _) in forecasters {
        let per_region: Vec<(Vec<LorenzCurve>, Vec<&ForecastResult>)> = (0..s_count)
            .map(|s| {
                let actuals: Vec<LorenzCurve> = (1..=cfg.horizons)
                    .map(|fold| data.actual[s][cfg.m + fold - 1].clone())
                    .collect();
                let region = panel.regions()[s].as_str();
                let results: Vec<&ForecastResult> = (1..=cfg.horizons)
                    .map(|fold| {
                        forecasts
                            .iter()
                            .find(|f| {
                                f.method == *method
                                    && f.fold == fold
                                    && f.result.region == region
                            })
                            .map(|f| &f.result)
                            .expect("forecast present for every fold and region")
                    })
                    .collect();
                (actuals, results)
            })
            .collect();

        let mut kld_vals = Vec::with_capacity(s_count);
        let mut jsd_vals = Vec::with_capacity(s_count);
        for (actuals, results) in &per_region {
            let points: Vec<LorenzCurve> =
                results.iter().map(|r| r.point.clone()).collect();
            kld_vals.push(kld(actuals, &points)?);
            jsd_vals.push(jsd_sqrt(actuals, &points)?);
        }
        push_metric(&mut rows, panel.regions(), *method, "kld", None, &kld_vals);
        push_metric(&mut rows, panel.regions(), *method, "jsd", None, &jsd_vals);

        for (ai, alpha) in cfg.alphas.iter().enumerate() {
            let mut score_vals = Vec::with_capacity(s_count);
            let mut ecp_vals = Vec::with_capacity(s_count);
            let mut cpd_vals = Vec::with_capacity(s_count);
            for (actuals, results) in &per_region {
                let lower: Vec<LorenzCurve> =
                    results.iter().map(|r| r.bands[ai].lower.clone()).collect();
                let upper: Vec<LorenzCurve> =
                    results.iter().map(|r| r.bands[ai].upper.clone()).collect();
                score_vals.push(interval_score(&lower, &upper, actuals, *alpha)?);
                let (e, c) = ecp_cpd(&lower, &upper, actuals, *alpha)?;
                ecp_vals.push(e);
                cpd_vals.push(c);
            }
            push_metric(&mut rows, panel.regions(), *method, "interval_score", Some(*alpha), &score_vals);
            push_metric(&mut rows, panel.regions(), *method, "ecp", Some(*alpha), &ecp_vals);
            push_metric(&mut rows, panel.regions(), *method, "cpd", Some(*alpha), &cpd_vals);
        }
    }

    Ok(EvalOutput { report: MetricReport { rows }, forecasts })
}

fn push_metric(
    rows: &mut Vec<ReportRow>,
    regions: &[String],
    method: Method,
    metric: &str,
    alpha: Option<f64>,
    values: &[f64],
) {
    for (region, value) in regions.iter().zip(values) {
        rows.push(ReportRow {
            region: region.clone(),
            method,
            metric: metric.to_string(),
            alpha,
            value: *value,
        });
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    rows.push(ReportRow {
        region: "Mean".to_string(),
        method,
        metric: metric.to_string(),
        alpha,
        value: mean,
    });
}

/// Runs the expanding-window protocol for every configured method.
pub fn expanding_window_eval(
    data: &PanelData,
    cfg: &StudyConfig,
) -> Result<EvalOutput, HarnessError> {
    cfg.validate()?;
    let mut forecasters: Vec<(Method, Forecaster)> = Vec::new();
    for method in &cfg.methods {
        match method {
            Method::Ufts => {
                let cfg = cfg.clone();
                forecasters.push((
                    Method::Ufts,
                    Box::new(move |training: &CurvePanel, fold: usize| {
                        (0..training.n_regions())
                            .into_par_iter()
                            .map(|s| {
                                let series = region_series(training, s);
                                let bcfg = BootstrapConfig {
                                    replicates: cfg.replicates,
                                    alphas: cfg.alphas.clone(),
                                    seed: mix_seed(cfg.seed, &[1, fold as u64, s as u64]),
                                    keep_replicates: false,
                                };
                                bootstrap_ufts(
                                    &series,
                                    &training.regions()[s],
                                    1,
                                    &bcfg,
                                )
                                .map_err(HarnessError::from)
                            })
                            .collect()
                    }),
                ));
            }
            Method::Fmp => {
                let cfg = cfg.clone();
                forecasters.push((
                    Method::Fmp,
                    Box::new(move |training: &CurvePanel, fold: usize| {
                        let bcfg = BootstrapConfig {
                            replicates: cfg.replicates,
                            alphas: cfg.alphas.clone(),
                            seed: mix_seed(cfg.seed, &[2, fold as u64]),
                            keep_replicates: false,
                        };
                        bootstrap_fanova(training, 1, &bcfg).map_err(HarnessError::from)
                    }),
                ));
            }
        }
    }
    eval_with(data, cfg, &forecasters)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::IntervalBand;
    use crate::harness::{generate_synthetic, SyntheticSpec};
    use approx::assert_abs_diff_eq;

    fn small_panel(seed: u64) -> PanelData {
        generate_synthetic(&SyntheticSpec {
            regions: 4,
            years: 9,
            grid_size: 21,
            seed,
            ..Default::default()
        })
        .unwrap()
        .data
    }

    fn small_cfg() -> StudyConfig {
        StudyConfig {
            grid_size: 21,
            m: 6,
            horizons: 3,
            replicates: 100,
            alphas: vec![0.2, 0.05],
            seed: 3,
            methods: vec![Method::Ufts, Method::Fmp],
            epsilon: 1e-6,
        }
    }

    // A stub that returns the holdout itself with degenerate bands.
    fn perfect_foresight<'a>(data: &'a PanelData, cfg: &'a StudyConfig) -> Forecaster<'a> {
        Box::new(move |training: &CurvePanel, fold: usize| {
            let target = training.n_years();
            let _ = fold;
            Ok((0..training.n_regions())
                .map(|s| {
                    let actual = data.actual[s][target].clone();
                    ForecastResult {
                        region: training.regions()[s].clone(),
                        horizon: 1,
                        point: actual.clone(),
                        bands: cfg
                            .alphas
                            .iter()
                            .map(|a| IntervalBand {
                                alpha: *a,
                                lower: actual.clone(),
                                upper: actual.clone(),
                            })
                            .collect(),
                        replicates: None,
                    }
                })
                .collect())
        })
    }

    #[test]
    fn protocol_shape() {
        let data = small_panel(1);
        let cfg = small_cfg();
        let out = expanding_window_eval(&data, &cfg).unwrap();
        // folds × regions × methods
        assert_eq!(out.forecasts.len(), 3 * 4 * 2);
        for method in [Method::Ufts, Method::Fmp] {
            let count = out.forecasts.iter().filter(|f| f.method == method).count();
            assert_eq!(count, 12);
        }
        // per metric: regions + Mean
        let kld_rows: Vec<_> = out
            .report
            .rows
            .iter()
            .filter(|r| r.metric == "kld" && r.method == Method::Ufts)
            .collect();
        assert_eq!(kld_rows.len(), 5);
        assert_eq!(kld_rows.last().unwrap().region, "Mean");
    }

    #[test]
    fn perfect_foresight_scores_perfectly() {
        let data = small_panel(5);
        let cfg = small_cfg();
        let forecasters: Vec<(Method, Forecaster)> =
            vec![(Method::Ufts, perfect_foresight(&data, &cfg))];
        let out = eval_with(&data, &cfg, &forecasters).unwrap();
        for region in data.panel.regions() {
            let k = out.report.value(region, Method::Ufts, "kld", None).unwrap();
            let j = out.report.value(region, Method::Ufts, "jsd", None).unwrap();
            assert_abs_diff_eq!(k, 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!(j, 0.0, epsilon = 1e-14);
            let e = out.report.value(region, Method::Ufts, "ecp", Some(0.2)).unwrap();
            let c = out.report.value(region, Method::Ufts, "cpd", Some(0.2)).unwrap();
            let s = out
                .report
                .value(region, Method::Ufts, "interval_score", Some(0.2))
                .unwrap();
            assert_abs_diff_eq!(e, 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(c, 0.2, epsilon = 1e-14);
            assert_abs_diff_eq!(s, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn report_matches_manual_metric_composition() {
        let data = small_panel(8);
        let cfg = small_cfg();
        let out = expanding_window_eval(&data, &cfg).unwrap();

        // recompute region 2's UFTS numbers from the stored forecasts
        let s = 2;
        let region = data.panel.regions()[s].as_str();
        let actuals: Vec<LorenzCurve> =
            (1..=cfg.horizons).map(|f| data.actual[s][cfg.m + f - 1].clone()).collect();
        let results: Vec<&ForecastResult> = (1..=cfg.horizons)
            .map(|fold| {
                &out.forecasts
                    .iter()
                    .find(|f| {
                        f.method == Method::Ufts && f.fold == fold && f.result.region == region
                    })
                    .unwrap()
                    .result
            })
            .collect();
        let points: Vec<LorenzCurve> = results.iter().map(|r| r.point.clone()).collect();
        let want_kld = kld(&actuals, &points).unwrap();
        assert_abs_diff_eq!(
            out.report.value(region, Method::Ufts, "kld", None).unwrap(),
            want_kld,
            epsilon = 1e-15
        );
        let lower: Vec<LorenzCurve> = results.iter().map(|r| r.bands[0].lower.clone()).collect();
        let upper: Vec<LorenzCurve> = results.iter().map(|r| r.bands[0].upper.clone()).collect();
        let want_score = interval_score(&lower, &upper, &actuals, 0.2).unwrap();
        assert_abs_diff_eq!(
            out.report
                .value(region, Method::Ufts, "interval_score", Some(0.2))
                .unwrap(),
            want_score,
            epsilon = 1e-15
        );
    }

    #[test]
    fn mean_row_is_the_arithmetic_mean() {
        let data = small_panel(11);
        let cfg = small_cfg();
        let out = expanding_window_eval(&data, &cfg).unwrap();
        for method in [Method::Ufts, Method::Fmp] {
            for metric in ["kld", "jsd"] {
                let vals: Vec<f64> = data
                    .panel
                    .regions()
                    .iter()
                    .map(|r| out.report.value(r, method, metric, None).unwrap())
                    .collect();
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let reported = out.report.value("Mean", method, metric, None).unwrap();
                assert_abs_diff_eq!(mean, reported, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn no_leakage_from_future_years() {
        let base = small_panel(21);
        let cfg = StudyConfig { methods: vec![Method::Ufts, Method::Fmp], ..small_cfg() };

        // corrupt every year past the largest training window
        let mut corrupted = base.clone();
        let n = corrupted.panel.n_years();
        let mut data = Vec::new();
        for s in 0..corrupted.panel.n_regions() {
            for t in 0..n {
                if t >= cfg.m + cfg.horizons - 1 {
                    data.extend(corrupted.panel.curve(s, t).iter().map(|v| v + 25.0));
                } else {
                    data.extend_from_slice(corrupted.panel.curve(s, t));
                }
            }
        }
        corrupted.panel = CurvePanel::new(
            corrupted.panel.grid().clone(),
            corrupted.panel.regions().to_vec(),
            corrupted.panel.years().to_vec(),
            data,
        )
        .unwrap();

        let a = expanding_window_eval(&base, &cfg).unwrap();
        let b = expanding_window_eval(&corrupted, &cfg).unwrap();
        for (fa, fb) in a.forecasts.iter().zip(&b.forecasts) {
            assert_eq!(fa.result.point.values(), fb.result.point.values());
            for (ba, bb) in fa.result.bands.iter().zip(&fb.result.bands) {
                assert_eq!(ba.lower.values(), bb.lower.values());
                assert_eq!(ba.upper.values(), bb.upper.values());
            }
        }
    }

    #[test]
    fn infeasible_split_is_rejected() {
        let data = small_panel(2);
        let cfg = StudyConfig { m: 6, horizons: 5, ..small_cfg() };
        assert!(matches!(
            expanding_window_eval(&data, &cfg),
            Err(HarnessError::InfeasibleSplit { .. })
        ));
    }

    #[test]
    fn report_rendering_and_export() {
        let data = small_panel(4);
        let cfg = small_cfg();
        let out = expanding_window_eval(&data, &cfg).unwrap();

        let table = out.report.render_table(true);
        assert!(table.contains("kld (x100)"));
        assert!(table.contains("alpha = 0.2"));
        assert!(table.contains("Mean"));

        let mut buf = Vec::new();
        out.report.export_csv(&mut buf, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("region,method,metric,alpha,value"));
        assert!(text.contains("kld_x100"));
        // scaling is exactly ×100
        let raw = out.report.value("Mean", Method::Ufts, "kld", None).unwrap();
        let line = text
            .lines()
            .find(|l| l.starts_with("Mean,ufts,kld_x100"))
            .expect("mean row present");
        let scaled: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert_abs_diff_eq!(scaled, raw * 100.0, epsilon = 1e-9);
    }
}
