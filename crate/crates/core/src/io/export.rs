//! Range map images: one 8-bit grayscale pixel per grid cell, row 0 at the
//! north, with value `round(255 * p)`. A JSON file next to the image records
//! the grid and species.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{create, write_json};
use crate::raster::GridSpec;
use crate::{Error, Result, SpeciesScorer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSidecar {
    pub species: String,
    pub species_index: usize,
    pub n_rows: usize,
    pub n_cols: usize,
    pub lon_min: f64,
    pub lon_max: f64,
    pub lat_min: f64,
    pub lat_max: f64,
}

/// Quantised predictions for every grid cell, row-major.
pub fn range_map_pixels<M: SpeciesScorer + ?Sized>(
    model: &M,
    species: usize,
    grid: &GridSpec,
) -> Result<Vec<u8>> {
    grid.validate()?;
    if species >= model.num_species() {
        return Err(Error::domain(format!(
            "species index {species} outside {} species",
            model.num_species()
        )));
    }
    let preds = model.predict_batch(&grid.centers())?;
    Ok(preds
        .iter_rows()
        .map(|row| (255.0 * row[species]).round().clamp(0.0, 255.0) as u8)
        .collect())
}

pub fn write_png(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    let loc = path.display().to_string();
    let mut enc = png::Encoder::new(create(path)?, width as u32, height as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let mut w = enc
        .write_header()
        .map_err(|e| Error::format(&loc, e.to_string()))?;
    w.write_image_data(pixels)
        .map_err(|e| Error::format(&loc, e.to_string()))?;
    w.finish().map_err(|e| Error::format(&loc, e.to_string()))
}

/// Writes `path` and `path` with a `.json` extension.
pub fn export_range_map<M: SpeciesScorer + ?Sized>(
    model: &M,
    species: usize,
    species_name: &str,
    grid: &GridSpec,
    path: &Path,
) -> Result<()> {
    let pixels = range_map_pixels(model, species, grid)?;
    write_png(path, grid.n_cols, grid.n_rows, &pixels)?;
    write_json(
        &path.with_extension("json"),
        &MapSidecar {
            species: species_name.to_string(),
            species_index: species,
            n_rows: grid.n_rows,
            n_cols: grid.n_cols,
            lon_min: -180.0,
            lon_max: 180.0,
            lat_min: -90.0,
            lat_max: 90.0,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{ModelShape, SinrModel};

    #[test]
    fn constant_model_gives_flat_image() {
        let mut m = SinrModel::zeros(ModelShape::new(4, 1, 2).unwrap());
        m.head_bias_mut().copy_from_slice(&[0.0, 50.0]);
        let g = GridSpec::new(3, 6).unwrap();
        assert_eq!(range_map_pixels(&m, 0, &g).unwrap(), vec![128; 18]);
        assert_eq!(range_map_pixels(&m, 1, &g).unwrap(), vec![255; 18]);
        assert!(range_map_pixels(&m, 2, &g).is_err());

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("map.png");
        export_range_map(&m, 0, "sp", &g, &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[1..4], b"PNG");
        assert!(dir.path().join("map.json").exists());
    }
}
