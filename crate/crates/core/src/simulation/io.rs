//! CSV and JSON artifacts of simulation runs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use super::{McCell, McResult, McSummary, Moments, SweepPoint};
use crate::error::{Error, Result};
use crate::output::{fmt_num, round_sig, write_csv, write_json};

pub const CELL_HEADER: [&str; 8] = [
    "method",
    "n",
    "p",
    "k_true",
    "rep",
    "mean_abs_error",
    "max_row_l2_error",
    "selected_k_histogram",
];

pub const SWEEP_HEADER: [&str; 9] = [
    "alpha",
    "n",
    "p",
    "xi_bar",
    "method",
    "mean_abs_error",
    "mean_abs_se",
    "max_row_l2_error",
    "max_row_l2_se",
];

/// `k:count` pairs joined by `;`, e.g. `2:10;3:590`.
fn fmt_histogram(h: &BTreeMap<usize, usize>) -> String {
    h.iter()
        .map(|(k, c)| format!("{k}:{c}"))
        .collect::<Vec<_>>()
        .join(";")
}

fn parse_histogram(s: &str) -> Option<BTreeMap<usize, usize>> {
    if s.is_empty() {
        return Some(BTreeMap::new());
    }
    s.split(';')
        .map(|pair| {
            let (k, c) = pair.split_once(':')?;
            Some((k.parse().ok()?, c.parse().ok()?))
        })
        .collect()
}

/// One row per cell under [`CELL_HEADER`].
pub fn write_cells_csv(path: &Path, result: &McResult) -> Result<()> {
    let rows: Vec<Vec<String>> = result
        .cells
        .iter()
        .map(|c| {
            vec![
                c.method.clone(),
                c.n.to_string(),
                c.p.to_string(),
                c.k_true.to_string(),
                c.rep.to_string(),
                fmt_num(c.mean_abs_error),
                fmt_num(c.max_row_l2_error),
                fmt_histogram(&c.selected_k_histogram),
            ]
        })
        .collect();
    write_csv(path, &CELL_HEADER, &rows)
}

/// Reads a file written by [`write_cells_csv`].
pub fn read_cells_csv(path: &Path) -> Result<Vec<McCell>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let field = |c: usize| -> Result<&str> {
            rec.get(c).ok_or(Error::MissingValue {
                line,
                column: c + 1,
                name: CELL_HEADER[c].to_string(),
            })
        };
        let num = |c: usize| -> Result<f64> {
            field(c)?.parse().map_err(|_| Error::Parse {
                line,
                column: c + 1,
                message: format!("'{}' is not a number", rec.get(c).unwrap_or("")),
            })
        };
        let count = |c: usize| -> Result<usize> { Ok(num(c)? as usize) };
        out.push(McCell {
            method: field(0)?.to_string(),
            n: count(1)?,
            p: count(2)?,
            k_true: count(3)?,
            rep: count(4)?,
            mean_abs_error: num(5)?,
            max_row_l2_error: num(6)?,
            selected_k_histogram: parse_histogram(field(7)?).ok_or(Error::Parse {
                line,
                column: 8,
                message: "malformed histogram".into(),
            })?,
        });
    }
    Ok(out)
}

fn round_moments(m: Moments) -> Moments {
    Moments {
        mean: round_sig(m.mean),
        se: round_sig(m.se),
    }
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    summaries: Vec<McSummary>,
    cells: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    config: Option<&'a super::SimConfig>,
}

/// Summary block (rounded to ten significant digits) as pretty JSON.
pub fn write_summary_json(
    path: &Path,
    result: &McResult,
    config: Option<&super::SimConfig>,
) -> Result<()> {
    let summaries = result
        .summaries
        .iter()
        .map(|s| McSummary {
            mean_abs_error: round_moments(s.mean_abs_error),
            max_row_l2_error: round_moments(s.max_row_l2_error),
            share_k_true: round_sig(s.share_k_true),
            ..s.clone()
        })
        .collect();
    write_json(
        path,
        &SummaryFile {
            summaries,
            cells: result.cells.len(),
            config,
        },
    )
}

/// One row per `(α, design, method)` under [`SWEEP_HEADER`].
pub fn write_sweep_csv(path: &Path, points: &[SweepPoint]) -> Result<()> {
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|s| {
            vec![
                fmt_num(s.alpha),
                s.n.to_string(),
                s.p.to_string(),
                fmt_num(s.xi_bar),
                s.method.clone(),
                fmt_num(s.mean_abs_error.mean),
                fmt_num(s.mean_abs_error.se),
                fmt_num(s.max_row_l2_error.mean),
                fmt_num(s.max_row_l2_error.se),
            ]
        })
        .collect();
    write_csv(path, &SWEEP_HEADER, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_text_round_trips() {
        let mut h = BTreeMap::new();
        h.insert(0, 3);
        h.insert(3, 597);
        let s = fmt_histogram(&h);
        assert_eq!(s, "0:3;3:597");
        assert_eq!(parse_histogram(&s).unwrap(), h);
        assert_eq!(parse_histogram("").unwrap(), BTreeMap::new());
        assert!(parse_histogram("3-4").is_none());
    }
}
