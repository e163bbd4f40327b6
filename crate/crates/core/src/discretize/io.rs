//! Field I/O.
//!
//! CSV: header `index,x,y,value`, one row per active cell (`y = 0` in 1D).
//!
//! Binary, little-endian: magic `LGFB`, `u32` version (1), `u64` cell count
//! `N`, `u32` dimension `m`, `f64` spacing `h`, then `N` `f64` values in
//! active-cell order.

use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::field::GridField;
use super::grid::Grid;

pub const BINARY_MAGIC: &[u8; 4] = b"LGFB";
pub const BINARY_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    index: usize,
    x: f64,
    y: f64,
    value: f64,
}

pub fn write_csv<W: Write>(field: &GridField, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let grid = field.grid();
    for (c, v) in field.values().iter().enumerate() {
        let [x, y] = grid.center(c);
        w.serialize(Row {
            index: c,
            x,
            y,
            value: *v,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV field written for `grid`; indices and centers must match.
pub fn read_csv<R: Read>(grid: &Arc<Grid>, input: R) -> Result<GridField> {
    let mut r = csv::Reader::from_reader(input);
    let mut values = vec![f64::NAN; grid.len()];
    let tol = 1e-9 * grid.spacing();
    for (line, row) in r.deserialize::<Row>().enumerate() {
        let row = row?;
        if row.index >= grid.len() {
            return Err(Error::input(format!(
                "row {}: cell index {} out of range",
                line + 2,
                row.index
            )));
        }
        let [x, y] = grid.center(row.index);
        if (x - row.x).abs() > tol || (y - row.y).abs() > tol {
            return Err(Error::input(format!(
                "row {}: coordinates ({}, {}) do not match cell {}",
                line + 2,
                row.x,
                row.y,
                row.index
            )));
        }
        values[row.index] = row.value;
    }
    if let Some(missing) = values.iter().position(|v| v.is_nan()) {
        return Err(Error::input(format!("cell {missing} missing from CSV field")));
    }
    GridField::new(grid.clone(), values)
}

pub fn write_binary<W: Write>(field: &GridField, mut out: W) -> Result<()> {
    let grid = field.grid();
    out.write_all(BINARY_MAGIC)?;
    out.write_all(&BINARY_VERSION.to_le_bytes())?;
    out.write_all(&(grid.len() as u64).to_le_bytes())?;
    out.write_all(&(grid.dim() as u32).to_le_bytes())?;
    out.write_all(&grid.spacing().to_le_bytes())?;
    for v in field.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(grid: &Arc<Grid>, mut input: R) -> Result<GridField> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(Error::input("not a binary field file"));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    input.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != BINARY_VERSION {
        return Err(Error::input(format!("unsupported binary field version {version}")));
    }
    input.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8) as usize;
    input.read_exact(&mut b4)?;
    let m = u32::from_le_bytes(b4) as usize;
    input.read_exact(&mut b8)?;
    let h = f64::from_le_bytes(b8);
    if n != grid.len() || m != grid.dim() || (h - grid.spacing()).abs() > 1e-12 * h.abs() {
        return Err(Error::input(format!(
            "binary header (N={n}, m={m}, h={h}) does not match the grid"
        )));
    }
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        input.read_exact(&mut b8)?;
        values.push(f64::from_le_bytes(b8));
    }
    GridField::new(grid.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;

    #[test]
    fn round_trips() {
        let g = Arc::new(Grid::new(Domain::disc([0.0, 0.0], 1.0).unwrap(), 12).unwrap());
        let f = GridField::from_fn(&g, |p| (3.0 * p[0]).sin() + p[1]).unwrap();
        let mut buf = Vec::new();
        write_csv(&f, &mut buf).unwrap();
        assert!(buf.starts_with(b"index,x,y,value\n"));
        assert_eq!(read_csv(&g, buf.as_slice()).unwrap(), f);
        let mut bin = Vec::new();
        write_binary(&f, &mut bin).unwrap();
        assert_eq!(bin.len(), 4 + 4 + 8 + 4 + 8 + 8 * g.len());
        assert_eq!(read_binary(&g, bin.as_slice()).unwrap(), f);
        bin[0] = b'X';
        assert!(read_binary(&g, bin.as_slice()).is_err());
    }
}
