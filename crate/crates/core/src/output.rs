//! Numeric formatting shared by every CSV and JSON artifact.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::linalg::Matrix;

/// Significant digits kept in written artifacts.
pub const SIG_DIGITS: usize = 10;

/// `x` rounded to [`SIG_DIGITS`] significant digits. Non-finite values pass
/// through unchanged.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x)
        .parse()
        .expect("formatted float parses")
}

/// Shortest decimal text of `round_sig(x)`.
pub fn fmt_num(x: f64) -> String {
    let r = round_sig(x);
    let mag = r.abs();
    if r == 0.0 {
        "0".to_string()
    } else if (1e-6..1e15).contains(&mag) || !r.is_finite() {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Matrix as CSV with header `c0,c1,...` (or the given names).
pub fn write_matrix_csv(path: &Path, m: &Matrix, names: Option<&[String]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let header: Vec<String> = match names {
        Some(n) => n.to_vec(),
        None => (0..m.ncols()).map(|j| format!("c{j}")).collect(),
    };
    w.write_record(&header)?;
    for row in m.row_iter() {
        w.write_record(row.iter().map(|&v| fmt_num(v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `rows` (already formatted) under `header`.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Serializes a vector of rounded numbers (for JSON fields).
pub fn rounded(values: &[f64]) -> Vec<f64> {
    values.iter().map(|&v| round_sig(v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_ten_digits() {
        assert_eq!(round_sig(0.123456789012345), 0.1234567890);
        assert_eq!(round_sig(-98765.4321098765), -98765.43211);
        assert_eq!(round_sig(0.0), 0.0);
        assert!(round_sig(f64::NAN).is_nan());
        assert_eq!(fmt_num(0.0302), "0.0302");
        assert_eq!(fmt_num(1e-20), "1e-20");
        assert_eq!(fmt_num(2.5e17), "2.5e17");
    }

    #[test]
    fn rounded_values_round_trip_through_text() {
        for x in [1.0 / 3.0, 2.0e-7 / 7.0, 12345.678901234, -0.5] {
            let s = fmt_num(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, round_sig(x));
            assert_eq!(round_sig(back), back);
        }
    }
}
