//! Text and binary serialization of dense matrices.
//!
//! Complex CSV cells use `re+imj` syntax (`0.5-1.25j`, `3+0j`); a bare real
//! number is also accepted. Lines starting with `#` are comments.
//!
//! The binary layout is a 16-byte header (`rows`, `cols` as little-endian
//! `u64`) followed by row-major little-endian `f64` pairs `re, im`.

use std::path::Path;

use num_complex::Complex64;

use crate::error::{MilacError, Result};
use crate::linalg::{CMat, RMat};

fn format_complex(z: Complex64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{}{}{}j", z.re, sign, z.im.abs())
}

fn parse_complex(cell: &str) -> Result<Complex64> {
    let cell = cell.trim();
    let bad = || MilacError::Parse(format!("bad complex cell '{cell}'"));
    let Some(body) = cell.strip_suffix(['j', 'i']) else {
        return cell
            .parse::<f64>()
            .map(|re| Complex64::new(re, 0.0))
            .map_err(|_| bad());
    };
    // The split is the last sign that is neither leading nor part of an exponent.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| matches!(bytes[i], b'+' | b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    match split {
        Some(i) => {
            let re = body[..i].parse::<f64>().map_err(|_| bad())?;
            let im = match &body[i..] {
                "+" => 1.0,
                "-" => -1.0,
                s => s.parse::<f64>().map_err(|_| bad())?,
            };
            Ok(Complex64::new(re, im))
        }
        None => {
            let im = match body {
                "" | "+" => 1.0,
                "-" => -1.0,
                s => s.parse::<f64>().map_err(|_| bad())?,
            };
            Ok(Complex64::new(0.0, im))
        }
    }
}

fn read_cells<T>(text: &str, parse: impl Fn(&str) -> Result<T>) -> Result<(usize, usize, Vec<T>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut cols = None;
    let mut rows = 0;
    let mut data = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| MilacError::Parse(e.to_string()))?;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(MilacError::Parse(format!(
                    "row {} has {} cells, expected {c}",
                    rows + 1,
                    record.len()
                )))
            }
            _ => {}
        }
        for cell in record.iter() {
            data.push(parse(cell)?);
        }
        rows += 1;
    }
    Ok((rows, cols.unwrap_or(0), data))
}

fn write_cells(rows: usize, cols: usize, cell: impl Fn(usize, usize) -> String) -> String {
    let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
    for r in 0..rows {
        writer
            .write_record((0..cols).map(|c| cell(r, c)))
            .expect("in-memory CSV write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory CSV flush")).expect("ASCII CSV")
}

pub fn complex_to_csv(m: &CMat) -> String {
    write_cells(m.nrows(), m.ncols(), |r, c| format_complex(m[(r, c)]))
}

pub fn complex_from_csv(text: &str) -> Result<CMat> {
    let (rows, cols, data) = read_cells(text, parse_complex)?;
    Ok(CMat::from_row_slice(rows, cols, &data))
}

pub fn real_to_csv(m: &RMat) -> String {
    write_cells(m.nrows(), m.ncols(), |r, c| m[(r, c)].to_string())
}

pub fn real_from_csv(text: &str) -> Result<RMat> {
    let (rows, cols, data) = read_cells(text, |cell| {
        cell.parse::<f64>()
            .map_err(|_| MilacError::Parse(format!("bad real cell '{cell}'")))
    })?;
    Ok(RMat::from_row_slice(rows, cols, &data))
}

pub fn complex_to_bytes(m: &CMat) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 16 * m.len());
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.extend_from_slice(&m[(r, c)].re.to_le_bytes());
            out.extend_from_slice(&m[(r, c)].im.to_le_bytes());
        }
    }
    out
}

pub fn complex_from_bytes(bytes: &[u8]) -> Result<CMat> {
    let word = |i: usize| -> [u8; 8] { bytes[i..i + 8].try_into().expect("8-byte slice") };
    if bytes.len() < 16 {
        return Err(MilacError::Parse("binary matrix shorter than its header".into()));
    }
    let rows = u64::from_le_bytes(word(0)) as usize;
    let cols = u64::from_le_bytes(word(8)) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(16))
        .and_then(|n| n.checked_add(16));
    if expected != Some(bytes.len()) {
        return Err(MilacError::Parse(format!(
            "binary matrix of {rows}x{cols} needs {expected:?} bytes, got {}",
            bytes.len()
        )));
    }
    Ok(CMat::from_fn(rows, cols, |r, c| {
        let at = 16 + 16 * (r * cols + c);
        Complex64::new(f64::from_le_bytes(word(at)), f64::from_le_bytes(word(at + 8)))
    }))
}

pub fn read_complex_matrix(path: &Path) -> Result<CMat> {
    if path.extension().is_some_and(|e| e == "bin") {
        complex_from_bytes(&std::fs::read(path)?)
    } else {
        complex_from_csv(&std::fs::read_to_string(path)?)
    }
}

pub fn read_real_matrix(path: &Path) -> Result<RMat> {
    real_from_csv(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_cells_parse() {
        let cases = [
            ("1+2j", Complex64::new(1.0, 2.0)),
            ("-1.5-0.25j", Complex64::new(-1.5, -0.25)),
            ("1e-3+2E+2j", Complex64::new(1e-3, 200.0)),
            ("-2.5e-10-1e-5j", Complex64::new(-2.5e-10, -1e-5)),
            ("3", Complex64::new(3.0, 0.0)),
            ("-4j", Complex64::new(0.0, -4.0)),
            ("j", Complex64::new(0.0, 1.0)),
            ("2-j", Complex64::new(2.0, -1.0)),
        ];
        for (text, want) in cases {
            assert_eq!(parse_complex(text).unwrap(), want, "{text}");
        }
        assert!(parse_complex("1+2k").is_err());
        assert!(parse_complex("abc").is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let m = CMat::from_fn(3, 2, |r, c| {
            Complex64::new(0.1 * r as f64 - 1.0 / 3.0, -(c as f64) * 1e-17 + 2.0_f64.sqrt())
        });
        let text = complex_to_csv(&m);
        assert_eq!(complex_from_csv(&text).unwrap(), m);
        let neg_zero = CMat::from_element(1, 1, Complex64::new(0.0, -0.0));
        assert_eq!(complex_to_csv(&neg_zero).trim(), "0-0j");
    }

    #[test]
    fn real_csv_skips_comments_and_checks_shape() {
        let m = real_from_csv("# header\n1, 2\n3,4\n").unwrap();
        assert_eq!(m, RMat::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        assert!(real_from_csv("1,2\n3\n").is_err());
        let r = RMat::from_row_slice(1, 2, &[0.1, -7.25]);
        assert_eq!(real_from_csv(&real_to_csv(&r)).unwrap(), r);
    }

    #[test]
    fn binary_round_trip_and_layout() {
        let m = CMat::from_row_slice(1, 2, &[Complex64::new(1.0, -2.0), Complex64::new(0.5, 4.0)]);
        let bytes = complex_to_bytes(&m);
        assert_eq!(bytes.len(), 16 + 32);
        assert_eq!(&bytes[0..8], &1u64.to_le_bytes());
        assert_eq!(&bytes[16..24], &1.0f64.to_le_bytes());
        assert_eq!(&bytes[24..32], &(-2.0f64).to_le_bytes());
        assert_eq!(complex_from_bytes(&bytes).unwrap(), m);
        assert!(complex_from_bytes(&bytes[..40]).is_err());
    }
}
