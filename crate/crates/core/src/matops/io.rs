//! Binary layout: `rows: u64 LE`, `cols: u64 LE`, then `rows·cols` row-major
//! `f64 LE`. CSV: one matrix row per line, values in shortest round-trip form.

use std::io::{BufRead, Read, Write};

use super::Matrix;
use crate::error::{Error, Result};

pub fn write_binary<W: Write>(m: &Matrix, mut w: W) -> Result<()> {
    w.write_all(&(m.rows() as u64).to_le_bytes())?;
    w.write_all(&(m.cols() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(m.data().len() * 8);
    for v in m.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<Matrix> {
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word);
    r.read_exact(&mut word)?;
    let cols = u64::from_le_bytes(word);
    let len = rows
        .checked_mul(cols)
        .filter(|&l| l <= (1 << 32))
        .ok_or_else(|| Error::InvalidInput(format!("implausible matrix header {rows}x{cols}")))?;
    let mut data = Vec::with_capacity(len as usize);
    for _ in 0..len {
        r.read_exact(&mut word)?;
        data.push(f64::from_le_bytes(word));
    }
    Matrix::new(rows as usize, cols as usize, data)
}

pub fn write_csv<W: Write>(m: &Matrix, mut w: W) -> Result<()> {
    for r in 0..m.rows() {
        let line: Vec<String> = m.row(r).iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn read_csv<R: BufRead>(r: R) -> Result<Matrix> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|t| {
                t.trim().parse::<f64>().map_err(|e| {
                    Error::InvalidInput(format!("line {}: bad value {t:?}: {e}", lineno + 1))
                })
            })
            .collect::<Result<_>>()?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(Error::InvalidInput(format!(
                    "line {}: expected {c} values, found {}",
                    lineno + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        data.extend(row);
        rows += 1;
    }
    Matrix::new(rows, cols.unwrap_or(0), data)
}
