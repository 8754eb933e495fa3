//! Monthly excess-return panels and their CSV form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::simulation::synthetic_panel;

/// `n × p` excess returns in decimal units with monthly date labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnsPanel {
    dates: Vec<String>,
    assets: Vec<String>,
    values: Matrix,
}

/// `(year, month)` of a `YYYY-MM` label.
pub fn parse_month(s: &str) -> Option<(u32, u32)> {
    let (y, m) = s.split_once('-')?;
    if y.len() != 4 || m.len() != 2 || !y.bytes().chain(m.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let (y, m): (u32, u32) = (y.parse().ok()?, m.parse().ok()?);
    (1..=12).contains(&m).then_some((y, m))
}

/// `count` consecutive month labels starting at `start` (`YYYY-MM`).
pub fn month_range(start: &str, count: usize) -> Result<Vec<String>> {
    let (y0, m0) = parse_month(start)
        .ok_or_else(|| Error::InvalidParams(format!("'{start}' is not a YYYY-MM date")))?;
    let first = y0 as usize * 12 + (m0 as usize - 1);
    Ok((first..first + count)
        .map(|i| format!("{:04}-{:02}", i / 12, i % 12 + 1))
        .collect())
}

impl ReturnsPanel {
    /// Validates labels and values. Data rows are numbered from line 2 in
    /// errors, matching the CSV layout.
    pub fn new(dates: Vec<String>, assets: Vec<String>, values: Matrix) -> Result<Self> {
        if values.shape() != (dates.len(), assets.len()) {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", dates.len(), assets.len()),
                found: format!("{}x{}", values.nrows(), values.ncols()),
            });
        }
        if assets.is_empty() {
            return Err(Error::InvalidParams("panel has no assets".into()));
        }
        let mut prev: Option<(u32, u32)> = None;
        for (i, d) in dates.iter().enumerate() {
            let line = i + 2;
            let ym = parse_month(d).ok_or_else(|| Error::Parse {
                line,
                column: 1,
                message: format!("'{d}' is not a YYYY-MM date"),
            })?;
            if prev.is_some_and(|p| ym <= p) {
                return Err(Error::NonMonotoneDates {
                    line,
                    date: d.clone(),
                });
            }
            prev = Some(ym);
        }
        if let Some((idx, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let (row, col) = (idx % values.nrows(), idx / values.nrows());
            return Err(Error::Parse {
                line: row + 2,
                column: col + 2,
                message: format!("non-finite value {v} for {}", assets[col]),
            });
        }
        Ok(Self {
            dates,
            assets,
            values,
        })
    }

    pub fn dates(&self) -> &[String] {
        &self.dates
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }
}

/// Reads `date,asset1,...,assetP` with `YYYY-MM` dates.
pub fn load_returns(path: &Path) -> Result<ReturnsPanel> {
    let mut r = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let header = r.headers()?.clone();
    if header.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: "header must be 'date,asset1,...'".into(),
        });
    }
    let assets: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    let p = assets.len();
    let mut dates = Vec::new();
    let mut data = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() > p + 1 {
            return Err(Error::Parse {
                line,
                column: p + 2,
                message: format!("{} fields, header has {}", rec.len(), p + 1),
            });
        }
        dates.push(rec.get(0).unwrap_or("").trim().to_string());
        for (c, name) in assets.iter().enumerate() {
            let cell = rec.get(c + 1).map(str::trim).unwrap_or("");
            if cell.is_empty() {
                return Err(Error::MissingValue {
                    line,
                    column: c + 2,
                    name: name.clone(),
                });
            }
            data.push(cell.parse::<f64>().map_err(|_| Error::Parse {
                line,
                column: c + 2,
                message: format!("'{cell}' is not a number"),
            })?);
        }
    }
    let n = dates.len();
    ReturnsPanel::new(dates, assets, Matrix::from_row_slice(n, p, &data))
}

/// Writes a panel in the layout [`load_returns`] reads. Values use the
/// shortest text that parses back to the same `f64`.
pub fn write_returns(path: &Path, panel: &ReturnsPanel) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["date".to_string()];
    header.extend(panel.assets.iter().cloned());
    w.write_record(&header)?;
    for (d, row) in panel.dates.iter().zip(panel.values.row_iter()) {
        let mut rec = vec![d.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Simulation-design panel scaled by `scale`, dated monthly from 1995-01,
/// with assets `a1..ap`.
pub fn synthetic_returns(k: usize, n: usize, p: usize, seed: u64, scale: f64) -> Result<ReturnsPanel> {
    let (_, values) = synthetic_panel(k, n, p, seed, scale)?;
    let dates = month_range("1995-01", n)?;
    let assets = (1..=p).map(|j| format!("a{j}")).collect();
    ReturnsPanel::new(dates, assets, values)
}
