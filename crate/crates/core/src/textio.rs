//! Plain-text matrix format shared by operators and signal batches.
//!
//! ```text
//! <rows> <cols>
//! <cols values of row 0>
//! ...
//! ```
//!
//! Values are written in scientific notation with 17 significant digits, so
//! a write/read cycle reproduces every `f64` exactly.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::error::{AolError, Result};

pub fn write_matrix<W: Write>(mut out: W, m: &DMatrix<f64>) -> Result<()> {
    writeln!(out, "{} {}", m.nrows(), m.ncols())?;
    let mut line = String::new();
    for i in 0..m.nrows() {
        line.clear();
        for j in 0..m.ncols() {
            if j > 0 {
                line.push(' ');
            }
            line.push_str(&format!("{:.16e}", m[(i, j)]));
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_matrix<R: BufRead>(input: R) -> Result<DMatrix<f64>> {
    let mut lines = input
        .lines()
        .map(|l| l.map_err(AolError::from))
        .filter(|l| !matches!(l, Ok(s) if s.trim().is_empty()));

    let header = lines
        .next()
        .ok_or_else(|| AolError::Parse("missing header line".into()))??;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| AolError::Parse(format!("bad header {header:?}: {e}")))?;
    let [rows, cols] = dims[..] else {
        return Err(AolError::Parse(format!(
            "header must hold two integers, got {header:?}"
        )));
    };

    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        let line = lines
            .next()
            .ok_or_else(|| AolError::Parse(format!("expected {rows} rows, found {i}")))??;
        let mut count = 0;
        for (j, tok) in line.split_whitespace().enumerate() {
            if j >= cols {
                return Err(AolError::Parse(format!("row {i} has more than {cols} values")));
            }
            m[(i, j)] = tok
                .parse::<f64>()
                .map_err(|e| AolError::Parse(format!("row {i}, column {j}: {e}")))?;
            count += 1;
        }
        if count != cols {
            return Err(AolError::Parse(format!(
                "row {i} has {count} values, expected {cols}"
            )));
        }
    }
    if let Some(extra) = lines.next() {
        extra?;
        return Err(AolError::Parse(format!("more than {rows} rows")));
    }
    Ok(m)
}
