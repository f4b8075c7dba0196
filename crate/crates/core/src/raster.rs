//! Evaluation grids and per-species presence bitsets.

use serde::{Deserialize, Serialize};

use crate::{Error, GeoCoordinate, Result};

/// Fixed-length bitset packed LSB-first into bytes; bit `i` lives in byte
/// `i / 8` at position `i % 8`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitset {
    len: usize,
    bytes: Vec<u8>,
}

impl Bitset {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            bytes: vec![0; len.div_ceil(8)],
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut b = Self::zeros(bits.len());
        for (i, &v) in bits.iter().enumerate() {
            if v {
                b.set(i, true);
            }
        }
        b
    }

    /// Wraps packed bytes; padding bits past `len` must be zero.
    pub fn from_bytes(len: usize, bytes: Vec<u8>) -> Result<Self> {
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::structure(format!(
                "{len} bits need {} bytes, got {}",
                len.div_ceil(8),
                bytes.len()
            )));
        }
        if !len.is_multiple_of(8) {
            let last = bytes[bytes.len() - 1];
            if last >> (len % 8) != 0 {
                return Err(Error::structure("non-zero padding bits"));
            }
        }
        Ok(Self { len, bytes })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        self.bytes[i / 8] >> (i % 8) & 1 == 1
    }

    pub fn set(&mut self, i: usize, v: bool) {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        if v {
            self.bytes[i / 8] |= 1 << (i % 8);
        } else {
            self.bytes[i / 8] &= !(1 << (i % 8));
        }
    }

    pub fn count_ones(&self) -> usize {
        self.bytes.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn intersects(&self, other: &Bitset) -> bool {
        self.bytes.iter().zip(&other.bytes).any(|(a, b)| a & b != 0)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }
}

/// Regular lon/lat raster covering the globe. Row 0 is the northernmost row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_rows: usize,
    pub n_cols: usize,
    /// Cells that take part in evaluation; `None` means all of them.
    #[serde(skip)]
    pub mask: Option<Bitset>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_rows: 180,
            n_cols: 360,
            mask: None,
        }
    }
}

impl GridSpec {
    pub fn new(n_rows: usize, n_cols: usize) -> Result<Self> {
        let g = Self {
            n_rows,
            n_cols,
            mask: None,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_mask(mut self, mask: Bitset) -> Result<Self> {
        self.mask = Some(mask);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_rows == 0 || self.n_cols == 0 {
            return Err(Error::domain(format!(
                "degenerate grid {}x{}",
                self.n_rows, self.n_cols
            )));
        }
        if let Some(m) = &self.mask {
            if m.len() != self.num_cells() {
                return Err(Error::structure(format!(
                    "mask has {} bits for {} cells",
                    m.len(),
                    self.num_cells()
                )));
            }
        }
        Ok(())
    }

    pub fn num_cells(&self) -> usize {
        self.n_rows * self.n_cols
    }

    pub fn cell_center(&self, row: usize, col: usize) -> GeoCoordinate {
        GeoCoordinate {
            lon_deg: -180.0 + (col as f64 + 0.5) * 360.0 / self.n_cols as f64,
            lat_deg: 90.0 - (row as f64 + 0.5) * 180.0 / self.n_rows as f64,
        }
    }

    /// Centre of the cell with row-major index `cell`.
    pub fn center_of(&self, cell: usize) -> GeoCoordinate {
        self.cell_center(cell / self.n_cols, cell % self.n_cols)
    }

    pub fn centers(&self) -> Vec<GeoCoordinate> {
        (0..self.num_cells()).map(|c| self.center_of(c)).collect()
    }

    /// Row-major indices of cells that take part in evaluation.
    pub fn evaluable_cells(&self) -> Vec<usize> {
        match &self.mask {
            Some(m) => (0..self.num_cells()).filter(|&c| m.get(c)).collect(),
            None => (0..self.num_cells()).collect(),
        }
    }
}

/// Binary presence rasters for a list of species on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertRangeSet {
    grid: GridSpec,
    species_ids: Vec<usize>,
    ranges: Vec<Bitset>,
}

impl ExpertRangeSet {
    pub fn new(grid: GridSpec, species_ids: Vec<usize>, ranges: Vec<Bitset>) -> Result<Self> {
        grid.validate()?;
        if species_ids.len() != ranges.len() {
            return Err(Error::structure(format!(
                "{} species ids but {} rasters",
                species_ids.len(),
                ranges.len()
            )));
        }
        for (id, r) in species_ids.iter().zip(&ranges) {
            if r.len() != grid.num_cells() {
                return Err(Error::structure(format!(
                    "raster for species {id} has {} bits, grid has {} cells",
                    r.len(),
                    grid.num_cells()
                )));
            }
        }
        Ok(Self {
            grid,
            species_ids,
            ranges,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn species_ids(&self) -> &[usize] {
        &self.species_ids
    }

    pub fn ranges(&self) -> &[Bitset] {
        &self.ranges
    }

    pub fn len(&self) -> usize {
        self.species_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.species_ids.is_empty()
    }

    /// A species can be scored only if it has presence cells that survive
    /// the mask.
    pub fn is_evaluable(&self, i: usize) -> bool {
        let r = &self.ranges[i];
        match &self.grid.mask {
            Some(m) => r.intersects(m),
            None => r.count_ones() > 0,
        }
    }
}
