//! CSV ingestion of pre-tabulated curves or household microdata into a
//! complete region × year panel.
//!
//! Long format, UTF-8, header row required, `.` decimal separator.
//! Curves: `region,year,p,L`; microdata: `region,year,weight,income`.
//! Regions keep their input order; years are sorted (numerically when the
//! labels parse as numbers). A year missing for one region but present
//! for another is a hard error naming both.

use super::{HarnessError, PanelData};
use crate::fanova::CurvePanel;
use crate::lorenz::{logit_transform, lorenz_from_samples, Grid, LorenzCurve};
use std::collections::BTreeMap;
use std::io::Read;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvFormat {
    /// Rows tabulate the curve itself: `region,year,p,L`.
    Curves,
    /// Rows are weighted observations: `region,year,weight,income`.
    Microdata,
}

impl std::str::FromStr for CsvFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "curves" => Ok(CsvFormat::Curves),
            "microdata" => Ok(CsvFormat::Microdata),
            other => Err(format!("unknown format `{other}` (expected curves or microdata)")),
        }
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize, HarnessError> {
    headers
        .iter()
        .position(|h| h.trim().eq_ignore_ascii_case(name))
        .ok_or_else(|| HarnessError::MissingColumn(name.to_string()))
}

fn parse_f64(record: &csv::StringRecord, idx: usize, line: u64) -> Result<f64, HarnessError> {
    let raw = record.get(idx).ok_or(HarnessError::MalformedRow {
        line,
        message: "missing field".into(),
    })?;
    raw.trim().parse::<f64>().map_err(|_| HarnessError::MalformedRow {
        line,
        message: format!("`{raw}` is not a number"),
    })
}

fn year_sort_key(year: &str) -> (i64, String) {
    match year.trim().parse::<i64>() {
        Ok(v) => (v, String::new()),
        Err(_) => (i64::MAX, year.to_string()),
    }
}

/// Reads a long-format CSV into a logit-scale panel plus the observed
/// Lorenz curves on the requested grid.
pub fn ingest_csv<R: Read>(
    reader: R,
    format: CsvFormat,
    grid: &Grid,
    epsilon: f64,
) -> Result<PanelData, HarnessError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col_region = column(&headers, "region")?;
    let col_year = column(&headers, "year")?;
    let (col_a, col_b) = match format {
        CsvFormat::Curves => (column(&headers, "p")?, column(&headers, "L")?),
        CsvFormat::Microdata => (column(&headers, "weight")?, column(&headers, "income")?),
    };

    // (region, year) -> list of (a, b) rows, with first-appearance region order
    let mut regions: Vec<String> = Vec::new();
    let mut cells: BTreeMap<(usize, String), Vec<(f64, f64)>> = BTreeMap::new();
    let mut years: Vec<String> = Vec::new();

    for result in rdr.records() {
        let record = result?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let region = record
            .get(col_region)
            .ok_or(HarnessError::MalformedRow { line, message: "missing region".into() })?
            .to_string();
        let year = record
            .get(col_year)
            .ok_or(HarnessError::MalformedRow { line, message: "missing year".into() })?
            .to_string();
        if region.is_empty() || year.is_empty() {
            return Err(HarnessError::MalformedRow {
                line,
                message: "empty region or year".into(),
            });
        }
        let a = parse_f64(&record, col_a, line)?;
        let b = parse_f64(&record, col_b, line)?;

        let s = match regions.iter().position(|r| *r == region) {
            Some(s) => s,
            None => {
                regions.push(region.clone());
                regions.len() - 1
            }
        };
        if !years.contains(&year) {
            years.push(year.clone());
        }
        cells.entry((s, year)).or_default().push((a, b));
    }

    if regions.is_empty() {
        return Err(HarnessError::EmptyInput);
    }
    years.sort_by_key(|y| year_sort_key(y));

    // completeness before any numerics
    for (s, region) in regions.iter().enumerate() {
        for year in &years {
            if !cells.contains_key(&(s, year.clone())) {
                return Err(HarnessError::RaggedPanel {
                    region: region.clone(),
                    year: year.clone(),
                });
            }
        }
    }

    let g = grid.len();
    let mut actual: Vec<Vec<LorenzCurve>> = Vec::with_capacity(regions.len());
    let mut data = Vec::with_capacity(regions.len() * years.len() * g);
    for s in 0..regions.len() {
        let mut row = Vec::with_capacity(years.len());
        for year in &years {
            let rows = &cells[&(s, year.clone())];
            let curve = match format {
                CsvFormat::Curves => curve_from_table(rows, grid)?,
                CsvFormat::Microdata => {
                    let weights: Vec<f64> = rows.iter().map(|(w, _)| *w).collect();
                    let incomes: Vec<f64> = rows.iter().map(|(_, x)| *x).collect();
                    lorenz_from_samples(&incomes, &weights, grid)?
                }
            };
            let transformed = logit_transform(&curve, epsilon)?;
            data.extend_from_slice(transformed.values());
            row.push(curve);
        }
        actual.push(row);
    }

    let panel = CurvePanel::new(grid.clone(), regions, years, data)?;
    Ok(PanelData { panel, actual })
}

// Piecewise-linear interpolation of tabulated (p, L) rows onto the grid,
// anchored at (0,0) and (1,1).
fn curve_from_table(rows: &[(f64, f64)], grid: &Grid) -> Result<LorenzCurve, HarnessError> {
    let mut knots: Vec<(f64, f64)> = rows.to_vec();
    knots.retain(|(p, _)| (0.0..=1.0).contains(p));
    knots.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    knots.dedup_by(|a, b| a.0 == b.0);
    if knots.first().map_or(true, |(p, _)| *p > 0.0) {
        knots.insert(0, (0.0, 0.0));
    }
    if knots.last().map_or(true, |(p, _)| *p < 1.0) {
        knots.push((1.0, 1.0));
    }
    let values: Vec<f64> = grid
        .points()
        .iter()
        .map(|&p| {
            let pos = knots.partition_point(|(kp, _)| *kp < p);
            if pos < knots.len() && knots[pos].0 == p {
                knots[pos].1
            } else {
                let (p0, l0) = knots[pos - 1];
                let (p1, l1) = knots[pos];
                l0 + (l1 - l0) * (p - p0) / (p1 - p0)
            }
        })
        .collect();
    Ok(LorenzCurve::new(grid.clone(), values)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid() -> Grid {
        Grid::new(vec![0.25, 0.5, 0.75]).unwrap()
    }

    #[test]
    fn two_by_two_curve_panel() {
        let csv = "\
region,year,p,L
north,2000,0.5,0.3
north,1998,0.5,0.25
south,1998,0.5,0.2
south,2000,0.5,0.35
";
        let loaded = ingest_csv(csv.as_bytes(), CsvFormat::Curves, &grid(), 1e-6).unwrap();
        assert_eq!(loaded.panel.regions(), &["north".to_string(), "south".to_string()]);
        assert_eq!(loaded.panel.years(), &["1998".to_string(), "2000".to_string()]);
        assert_eq!(loaded.actual.len(), 2);
        assert_eq!(loaded.actual[0].len(), 2);
        // years sorted: north 1998 first
        assert_abs_diff_eq!(loaded.actual[0][0].values()[1], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(loaded.actual[0][1].values()[1], 0.3, epsilon = 1e-12);
    }

    #[test]
    fn ragged_panel_names_the_hole() {
        let csv = "\
region,year,p,L
north,1998,0.5,0.3
north,2000,0.5,0.3
south,1998,0.5,0.2
";
        let err = ingest_csv(csv.as_bytes(), CsvFormat::Curves, &grid(), 1e-6).unwrap_err();
        match err {
            HarnessError::RaggedPanel { region, year } => {
                assert_eq!(region, "south");
                assert_eq!(year, "2000");
            }
            other => panic!("expected ragged panel error, got {other}"),
        }
    }

    #[test]
    fn malformed_row_reports_line() {
        let csv = "\
region,year,p,L
north,1998,0.5,0.3
north,2000,oops,0.3
";
        let err = ingest_csv(csv.as_bytes(), CsvFormat::Curves, &grid(), 1e-6).unwrap_err();
        match err {
            HarnessError::MalformedRow { line, .. } => assert_eq!(line, 3),
            other => panic!("expected malformed row error, got {other}"),
        }
    }

    #[test]
    fn missing_header_is_detected() {
        let csv = "region,year,prob,L\nnorth,1998,0.5,0.3\n";
        let err = ingest_csv(csv.as_bytes(), CsvFormat::Curves, &grid(), 1e-6).unwrap_err();
        assert!(matches!(err, HarnessError::MissingColumn(c) if c == "p"));
    }

    #[test]
    fn microdata_matches_direct_construction() {
        let csv = "\
region,year,weight,income
a,1998,1,1
a,1998,1,2
a,1998,1,3
a,1998,1,4
a,2000,1,7
a,2000,1,7
b,1998,1,5
b,1998,1,5
b,2000,1,2
b,2000,1,6
";
        let g = grid();
        let loaded = ingest_csv(csv.as_bytes(), CsvFormat::Microdata, &g, 1e-6).unwrap();
        let direct =
            lorenz_from_samples(&[1.0, 2.0, 3.0, 4.0], &[1.0; 4], &g).unwrap();
        assert_eq!(loaded.actual[0][0].values(), direct.values());
        assert_abs_diff_eq!(loaded.actual[0][0].values()[1], 0.3, epsilon = 1e-12);
        // equal incomes give the diagonal
        for (v, p) in loaded.actual[0][1].values().iter().zip(g.points()) {
            assert_abs_diff_eq!(*v, *p, epsilon = 1e-12);
        }
    }
}
