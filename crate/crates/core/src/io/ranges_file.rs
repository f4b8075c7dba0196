//! Expert range fixtures.
//!
//! The first line is a JSON header giving the grid shape, the species ids
//! in file order and whether a land mask follows. After the newline come
//! the packed bitsets (LSB-first, row-major cells): the mask if present,
//! then one bitset per species.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{create, open, LeReader};
use crate::raster::{Bitset, ExpertRangeSet, GridSpec};
use crate::{Error, Result};

pub const FORMAT: &str = "geoprior-ranges";
pub const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    n_rows: usize,
    n_cols: usize,
    species_ids: Vec<usize>,
    has_mask: bool,
    bit_order: String,
}

pub fn write_ranges<W: Write>(set: &ExpertRangeSet, mut out: W) -> std::io::Result<()> {
    let grid = set.grid();
    let header = Header {
        format: FORMAT.into(),
        version: VERSION,
        n_rows: grid.n_rows,
        n_cols: grid.n_cols,
        species_ids: set.species_ids().to_vec(),
        has_mask: grid.mask.is_some(),
        bit_order: "lsb0".into(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    if let Some(m) = &grid.mask {
        out.write_all(m.as_bytes())?;
    }
    for r in set.ranges() {
        out.write_all(r.as_bytes())?;
    }
    out.flush()
}

pub fn read_ranges<R: BufRead>(mut input: R, location: &str) -> Result<ExpertRangeSet> {
    let mut line = Vec::new();
    input
        .read_until(b'\n', &mut line)
        .map_err(|e| Error::format(location, e.to_string()))?;
    if line.last() != Some(&b'\n') {
        return Err(Error::format(location, "missing header line"));
    }
    let header: Header = serde_json::from_slice(&line)
        .map_err(|e| Error::format(format!("{location}: header"), e.to_string()))?;
    if header.format != FORMAT || header.version != VERSION {
        return Err(Error::format(
            location,
            format!(
                "unsupported range file {} v{}, expected {FORMAT} v{VERSION}",
                header.format, header.version
            ),
        ));
    }
    if header.bit_order != "lsb0" {
        return Err(Error::format(
            location,
            format!("unsupported bit order {}", header.bit_order),
        ));
    }
    let grid =
        GridSpec::new(header.n_rows, header.n_cols).map_err(|e| Error::format(location, e.to_string()))?;
    let cells = grid.num_cells();
    let mut r = LeReader::new(input.by_ref(), location);
    let mut bitset = |what: &str| -> Result<Bitset> {
        let mut bytes = vec![0u8; cells.div_ceil(8)];
        r.fill(&mut bytes, what)?;
        Bitset::from_bytes(cells, bytes).map_err(|e| Error::format(location, format!("{what}: {e}")))
    };
    let grid = if header.has_mask {
        grid.with_mask(bitset("mask")?)?
    } else {
        grid
    };
    let ranges = header
        .species_ids
        .iter()
        .map(|id| bitset(&format!("raster for species {id}")))
        .collect::<Result<Vec<_>>>()?;
    r.finish()?;
    ExpertRangeSet::new(grid, header.species_ids, ranges)
}

pub fn save_ranges(set: &ExpertRangeSet, path: &Path) -> Result<()> {
    write_ranges(set, create(path)?).map_err(|e| Error::io(path, e))
}

pub fn load_ranges(path: &Path) -> Result<ExpertRangeSet> {
    read_ranges(open(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(mask: bool) -> ExpertRangeSet {
        let mut g = GridSpec::new(3, 5).unwrap();
        if mask {
            g = g.with_mask(Bitset::from_bools(&[true; 15])).unwrap();
        }
        let r1 = Bitset::from_bools(&(0..15).map(|i| i % 3 == 0).collect::<Vec<_>>());
        let r2 = Bitset::from_bools(&(0..15).map(|i| i > 10).collect::<Vec<_>>());
        ExpertRangeSet::new(g, vec![7, 2], vec![r1, r2]).unwrap()
    }

    #[test]
    fn round_trip_with_and_without_mask() {
        for mask in [false, true] {
            let set = sample(mask);
            let mut buf = vec![];
            write_ranges(&set, &mut buf).unwrap();
            assert_eq!(read_ranges(&buf[..], "r").unwrap(), set);
        }
    }

    #[test]
    fn rejects_truncation_and_garbage() {
        let mut buf = vec![];
        write_ranges(&sample(false), &mut buf).unwrap();
        let err = read_ranges(&buf[..buf.len() - 1], "r").unwrap_err().to_string();
        assert!(err.contains("species 2"), "{err}");
        assert!(read_ranges(&b"{}\n"[..], "r").is_err());
        assert!(read_ranges(&b"no newline"[..], "r").is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(read_ranges(&extra[..], "r").is_err());
    }
}
