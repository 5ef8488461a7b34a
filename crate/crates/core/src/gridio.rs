//! Binary dumps of real 2-D arrays.
//!
//! Layout: 8-byte magic `RSGRID01`, `u64` rows, `u64` cols, 8 reserved zero
//! bytes, then `rows * cols` little-endian `f64` values in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"RSGRID01";
pub const HEADER_LEN: usize = 32;

pub fn write_grid<W: Write>(mut w: W, values: &Array2<f64>) -> Result<()> {
    let (rows, cols) = values.dim();
    w.write_all(MAGIC)?;
    w.write_all(&(rows as u64).to_le_bytes())?;
    w.write_all(&(cols as u64).to_le_bytes())?;
    w.write_all(&[0u8; 8])?;
    for v in values.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_grid<R: Read>(mut r: R) -> Result<Array2<f64>> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)?;
    if &header[..8] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let rows = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(header[16..24].try_into().unwrap()) as usize;
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("dimension overflow".into()))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(Error::Format(format!(
            "expected {} payload bytes, found {}",
            count * 8,
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Format(e.to_string()))
}

pub fn save_grid(path: impl AsRef<Path>, values: &Array2<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_grid(&mut w, values)?;
    w.flush()?;
    Ok(())
}

pub fn load_grid(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    read_grid(BufReader::new(File::open(path)?))
}

/// Convenience for 1-D samples, stored as a single row.
pub fn save_row(path: impl AsRef<Path>, values: &[f64]) -> Result<()> {
    let arr = Array2::from_shape_vec((1, values.len()), values.to_vec())
        .map_err(|e| Error::Format(e.to_string()))?;
    save_grid(path, &arr)
}
