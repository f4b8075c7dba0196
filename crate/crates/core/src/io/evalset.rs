//! Evaluation items: a CSV of `lat,lon,species_id` rows naming the true
//! vision species, and an `F32M` matrix of classifier probabilities with one
//! row per item.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::matrix_file::{load_matrix, save_matrix};
use super::{create, open};
use crate::eval::GeoPriorEvalSet;
use crate::{Error, GeoCoordinate, Result};

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    lat: f64,
    lon: f64,
    species_id: String,
}

pub fn load_evalset(items: &Path, probs: &Path, vision: &[String]) -> Result<GeoPriorEvalSet> {
    let loc = items.display().to_string();
    let index: HashMap<&str, usize> = vision.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut coords = vec![];
    let mut truths = vec![];
    for (i, row) in csv::Reader::from_reader(open(items)?)
        .deserialize::<Row>()
        .enumerate()
    {
        let at = format!("{loc}: row {}", i + 2);
        let row = row.map_err(|e| Error::format(&at, e.to_string()))?;
        coords.push(GeoCoordinate::new(row.lon, row.lat).map_err(|e| Error::format(&at, e.to_string()))?);
        truths.push(
            *index
                .get(row.species_id.as_str())
                .ok_or_else(|| Error::format(&at, format!("unknown vision species {}", row.species_id)))?,
        );
    }
    let matrix = load_matrix(probs)?;
    if matrix.cols() != vision.len() {
        return Err(Error::structure(format!(
            "{}: {} columns for {} vision species",
            probs.display(),
            matrix.cols(),
            vision.len()
        )));
    }
    GeoPriorEvalSet::new(matrix, coords, truths)
}

pub fn save_evalset(items: &Path, probs: &Path, set: &GeoPriorEvalSet, vision: &[String]) -> Result<()> {
    if vision.len() != set.num_vision() {
        return Err(Error::structure("species list does not match the evaluation set"));
    }
    let mut w = csv::Writer::from_writer(create(items)?);
    for (c, &t) in set.coords().iter().zip(set.truths()) {
        w.serialize(Row {
            lat: c.lat_deg,
            lon: c.lon_deg,
            species_id: vision[t].clone(),
        })
        .map_err(|e| Error::format(items.display().to_string(), e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(items, e))?;
    save_matrix(set.vision(), probs)
}
