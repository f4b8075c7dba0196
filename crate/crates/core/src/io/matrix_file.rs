//! Dense `f32` matrices: magic `F32M`, `u32` rows and columns, then the
//! values row-major, all little-endian.

use std::io::{Read, Write};
use std::path::Path;

use super::{create, open, LeReader};
use crate::{Error, Matrix, Result};

pub const MAGIC: &[u8; 4] = b"F32M";

pub fn write_matrix<W: Write>(m: &Matrix<f64>, mut out: W) -> std::io::Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&(m.rows() as u32).to_le_bytes())?;
    out.write_all(&(m.cols() as u32).to_le_bytes())?;
    for &v in m.as_slice() {
        out.write_all(&(v as f32).to_le_bytes())?;
    }
    out.flush()
}

pub fn read_matrix<R: Read>(input: R, location: &str) -> Result<Matrix<f64>> {
    let mut r = LeReader::new(input, location);
    if &r.bytes::<4>("magic")? != MAGIC {
        return Err(Error::format(location, "not a matrix file (bad magic)"));
    }
    let rows = r.u32("rows")? as usize;
    let cols = r.u32("cols")? as usize;
    let values = r.f32s(rows * cols, "values")?;
    r.finish()?;
    Matrix::from_vec(rows, cols, values.into_iter().map(f64::from).collect())
}

pub fn save_matrix(m: &Matrix<f64>, path: &Path) -> Result<()> {
    write_matrix(m, create(path)?).map_err(|e| Error::io(path, e))
}

pub fn load_matrix(path: &Path) -> Result<Matrix<f64>> {
    read_matrix(open(path)?, &path.display().to_string())
}
