//! Binary model files.
//!
//! Layout: the magic `SINR`, a `u16` version, then `hidden_dim`,
//! `num_blocks` and `num_species` as `u32`, then every weight as an `f32`,
//! all little-endian, in the network's parameter order.

use std::io::{Read, Write};
use std::path::Path;

use super::{create, open, LeReader};
use crate::{Error, ModelShape, Result, SinrModel};

pub const MAGIC: &[u8; 4] = b"SINR";
pub const VERSION: u16 = 1;

pub fn write_model<W: Write>(model: &SinrModel, mut out: W) -> std::io::Result<()> {
    let shape = model.shape();
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    for d in [shape.hidden_dim, shape.num_blocks, shape.num_species] {
        out.write_all(&(d as u32).to_le_bytes())?;
    }
    for w in model.params() {
        out.write_all(&w.to_le_bytes())?;
    }
    out.flush()
}

pub fn read_model<R: Read>(input: R, location: &str) -> Result<SinrModel> {
    let mut r = LeReader::new(input, location);
    if &r.bytes::<4>("magic")? != MAGIC {
        return Err(Error::format(location, "not a model file (bad magic)"));
    }
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(Error::format(
            location,
            format!("unsupported model version {version}, expected {VERSION}"),
        ));
    }
    let hidden = r.u32("hidden_dim")? as usize;
    let blocks = r.u32("num_blocks")? as usize;
    let species = r.u32("num_species")? as usize;
    let shape =
        ModelShape::new(hidden, blocks, species).map_err(|e| Error::format(location, e.to_string()))?;
    let params = r.f32s(shape.num_params(), "weights")?;
    r.finish()?;
    SinrModel::from_params(shape, params)
}

pub fn save_model(model: &SinrModel, path: &Path) -> Result<()> {
    write_model(model, create(path)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<SinrModel> {
    read_model(open(path)?, &path.display().to_string())
}
