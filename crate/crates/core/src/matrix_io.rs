//! Plain-text matrices: a `rows cols` line, then one line per row of
//! space-separated values in `{:.17e}` form, which round-trips every `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if c > 0 {
                out.push(' ');
            }
            write!(out, "{:.17e}", m[(r, c)]).expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::MalformedMatrix("empty input".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::MalformedMatrix(format!("bad header `{header}`")))?;
    let [rows, cols] = dims[..] else {
        return Err(Error::MalformedMatrix(format!("bad header `{header}`")));
    };
    let mut m = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        let line = lines
            .next()
            .ok_or_else(|| Error::MalformedMatrix(format!("missing row {r}")))?;
        let vals: Vec<&str> = line.split_whitespace().collect();
        if vals.len() != cols {
            return Err(Error::MalformedMatrix(format!(
                "row {r} has {} values, expected {cols}",
                vals.len()
            )));
        }
        for (c, t) in vals.iter().enumerate() {
            m[(r, c)] = t
                .parse()
                .map_err(|_| Error::MalformedMatrix(format!("row {r}: bad value `{t}`")))?;
        }
    }
    if lines.next().is_some() {
        return Err(Error::MalformedMatrix(format!("more than {rows} rows")));
    }
    Ok(m)
}

pub fn write_matrix(m: &DMatrix<f64>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_matrix(m))?;
    Ok(())
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    parse_matrix(&fs::read_to_string(path)?)
}
