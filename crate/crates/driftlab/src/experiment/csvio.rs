//! Tiny fixed-schema CSV helpers.
//!
//! Report files round numeric columns to six significant digits; data files
//! meant to be re-read (threshold cache, per-cell curves) keep full `f64`
//! round-trip precision via the default float formatting. No quoting is
//! supported or needed: every field in the fixed schemas is a number or a
//! short identifier.

use std::path::Path;

use crate::error::{Error, Result};

/// Six significant digits, trailing zeros trimmed, `printf %g` style:
/// scientific notation when the decimal exponent is below -4 or at least 6.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        let s = format!("{x:.5e}");
        let (mantissa, e) = s.split_once('e').expect("exponential format");
        format!("{}e{}", trim_zeros(mantissa), e)
    }
}

fn trim_zeros(s: &str) -> String {
    if !s.contains('.') {
        return s.to_string();
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    t.to_string()
}

/// Join one row; rejects fields that would break the format.
pub fn row(fields: &[String]) -> Result<String> {
    for f in fields {
        if f.contains(',') || f.contains('\n') || f.contains('"') {
            return Err(Error::Config(format!("field {f:?} not representable in CSV")));
        }
    }
    Ok(fields.join(","))
}

/// Write a CSV file with the given header and rows, atomically enough for
/// our purposes: the file appears complete or a later parse fails loudly.
pub fn write_csv(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<()> {
    let mut text = String::with_capacity(rows.len() * 32 + header.len() + 1);
    text.push_str(header);
    text.push('\n');
    for r in rows {
        text.push_str(&row(r)?);
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Read a CSV file written by `write_csv`: checks the header, splits rows.
pub fn read_csv(path: &Path, expect_header: &str) -> Result<Vec<Vec<String>>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse(format!("{}: empty file", path.display())))?;
    if header != expect_header {
        return Err(Error::Parse(format!(
            "{}: header {header:?} does not match expected {expect_header:?}",
            path.display()
        )));
    }
    let ncols = expect_header.split(',').count();
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split(',').map(|s| s.to_string()).collect();
        if fields.len() != ncols {
            return Err(Error::Parse(format!(
                "{}: row {} has {} fields, expected {ncols}",
                path.display(),
                idx + 2,
                fields.len()
            )));
        }
        rows.push(fields);
    }
    Ok(rows)
}

/// Parse one numeric field with file/row context in the error.
pub fn field_f64(fields: &[String], col: usize, what: &str) -> Result<f64> {
    fields[col]
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("bad {what} value {:?}", fields[col])))
}

pub fn field_u64(fields: &[String], col: usize, what: &str) -> Result<u64> {
    fields[col]
        .parse::<u64>()
        .map_err(|_| Error::Parse(format!("bad {what} value {:?}", fields[col])))
}

pub fn field_usize(fields: &[String], col: usize, what: &str) -> Result<usize> {
    fields[col]
        .parse::<usize>()
        .map_err(|_| Error::Parse(format!("bad {what} value {:?}", fields[col])))
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt_sig6(0.0), "0");
        assert_eq!(fmt_sig6(1.0), "1");
        assert_eq!(fmt_sig6(0.05), "0.05");
        assert_eq!(fmt_sig6(1.35809863932), "1.3581");
        assert_eq!(fmt_sig6(0.123456789), "0.123457");
        assert_eq!(fmt_sig6(-0.5), "-0.5");
        assert_eq!(fmt_sig6(123456.4), "123456");
        assert_eq!(fmt_sig6(0.0001234564), "0.000123456");
        assert_eq!(fmt_sig6(0.00001234564), "1.23456e-5");
        assert_eq!(fmt_sig6(1.5e8), "1.5e8");
        assert_eq!(fmt_sig6(2_000_000.0), "2e6");
    }

    #[test]
    fn sig6_survives_reparsing_near_original() {
        for &x in &[0.0443_f64, 0.0719, 1.3581, 0.841621233573, 3.0e-7] {
            let back: f64 = fmt_sig6(x).parse().unwrap();
            assert!((back - x).abs() <= 1e-5 * x.abs().max(1e-30));
        }
    }

    #[test]
    fn csv_round_trip_and_header_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let rows = vec![
            vec!["1".to_string(), "0.5".to_string()],
            vec!["2".to_string(), "0.25".to_string()],
        ];
        write_csv(&path, "n,value", &rows).unwrap();
        let back = read_csv(&path, "n,value").unwrap();
        assert_eq!(back, rows);
        assert!(read_csv(&path, "n,weight").is_err());
    }

    #[test]
    fn malformed_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, "a,b\n1,2,3\n").unwrap();
        assert!(read_csv(&path, "a,b").is_err());
        assert!(row(&["x,y".to_string()]).is_err());
    }
}
