//! Plain-text matrix files.
//!
//! ```text
//! 2 3
//! 1.5-0.25i 0+1i -2-0i
//! ...
//! ```
//!
//! Input files start with `N M`; covariance outputs start with the single
//! side length and hold the dense Hermitian reconstruction. Entries are
//! written with 17 significant digits so every `f64` survives the trip
//! through decimal.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::matrix::{ComplexScalar, CovarianceMatrix, InputMatrix};

pub fn format_complex(z: ComplexScalar) -> String {
    let mut s = String::new();
    push_complex(&mut s, z);
    s
}

fn push_complex(out: &mut String, z: ComplexScalar) {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    let _ = write!(out, "{:.16e}{}{:.16e}i", z.re, sign, z.im.abs());
}

pub fn parse_complex(token: &str) -> Option<ComplexScalar> {
    let body = token.strip_suffix('i')?;
    let bytes = body.as_bytes();
    // The imaginary sign is the last '+'/'-' not at the start and not part
    // of an exponent.
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'))?;
    let re: f64 = body[..split].parse().ok()?;
    let im: f64 = body[split..].parse().ok()?;
    if !re.is_finite() || !im.is_finite() {
        return None;
    }
    Some(ComplexScalar::new(re, im))
}

pub fn write_input_matrix(a: &InputMatrix) -> String {
    let mut out = format!("{} {}\n", a.rows(), a.cols());
    for row in a.data().chunks(a.cols()) {
        push_row(&mut out, row);
    }
    out
}

pub fn write_covariance(c: &CovarianceMatrix) -> String {
    let n = c.dim();
    let mut out = format!("{n}\n");
    let dense = c.to_dense();
    for row in dense.chunks(n.max(1)) {
        push_row(&mut out, row);
    }
    out
}

fn push_row(out: &mut String, row: &[ComplexScalar]) {
    for (k, &z) in row.iter().enumerate() {
        if k > 0 {
            out.push(' ');
        }
        push_complex(out, z);
    }
    out.push('\n');
}

pub fn parse_input_matrix(text: &str) -> Result<InputMatrix> {
    let mut lines = body_lines(text);
    let (line_no, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "missing header".into(),
    })?;
    let dims = parse_header(line_no, header, 2)?;
    let (rows, cols) = (dims[0], dims[1]);
    let data = parse_rows(&mut lines, rows, cols)?;
    trailing(lines)?;
    InputMatrix::new(rows, cols, data)
}

/// Reads a dense covariance file back into packed form, checking that the
/// lower triangle mirrors the upper one.
pub fn parse_covariance(text: &str) -> Result<CovarianceMatrix> {
    let mut lines = body_lines(text);
    let (line_no, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "missing header".into(),
    })?;
    let n = parse_header(line_no, header, 1)?[0];
    let dense = parse_rows(&mut lines, n, n)?;
    trailing(lines)?;
    let mut packed = Vec::with_capacity(n * (n + 1) / 2);
    for r in 0..n {
        for c in r..n {
            let upper = dense[r * n + c];
            if c > r && dense[c * n + r] != upper.conj() {
                return Err(Error::Parse {
                    line: r + 2,
                    msg: format!("entry ({}, {}) is not Hermitian", r + 1, c + 1),
                });
            }
            packed.push(upper);
        }
    }
    CovarianceMatrix::from_packed(n, packed)
}

fn body_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_header(line: usize, header: &str, expected: usize) -> Result<Vec<usize>> {
    let dims = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Parse {
            line,
            msg: format!("bad header: {e}"),
        })?;
    if dims.len() != expected || dims.contains(&0) {
        return Err(Error::Parse {
            line,
            msg: format!("expected {expected} positive dimension(s), got {header:?}"),
        });
    }
    Ok(dims)
}

fn parse_rows<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    rows: usize,
    cols: usize,
) -> Result<Vec<ComplexScalar>> {
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let (line, text) = lines.next().ok_or(Error::Parse {
            line: r + 2,
            msg: format!("expected {rows} rows, found {r}"),
        })?;
        let before = data.len();
        for token in text.split_whitespace() {
            let z = parse_complex(token).ok_or_else(|| Error::Parse {
                line,
                msg: format!("bad complex entry {token:?}"),
            })?;
            data.push(z);
        }
        if data.len() - before != cols {
            return Err(Error::Parse {
                line,
                msg: format!("expected {cols} entries, found {}", data.len() - before),
            });
        }
    }
    Ok(data)
}

fn trailing<'a>(mut lines: impl Iterator<Item = (usize, &'a str)>) -> Result<()> {
    match lines.next() {
        Some((line, _)) => Err(Error::Parse {
            line,
            msg: "unexpected trailing content".into(),
        }),
        None => Ok(()),
    }
}
