//! Presence-only observation CSV files and species lists.
//!
//! Observations use the header `species_id,lat,lon`. Species ids are names;
//! a species list (a JSON array of names) fixes their dense indices.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{create, open, read_json, write_json};
use crate::train::{Observation, ObservationSet};
use crate::{Error, GeoCoordinate, Result};

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    species_id: String,
    lat: f64,
    lon: f64,
}

fn read_rows(path: &Path) -> Result<Vec<(usize, Row)>> {
    let loc = path.display().to_string();
    let mut reader = csv::Reader::from_reader(open(path)?);
    let headers = reader
        .headers()
        .map_err(|e| Error::format(&loc, e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["species_id", "lat", "lon"] {
        return Err(Error::format(
            &loc,
            format!(
                "expected header species_id,lat,lon, found {}",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    reader
        .deserialize::<Row>()
        .enumerate()
        .map(|(i, row)| {
            // row 1 is the header, as in a spreadsheet
            let row_no = i + 2;
            let row = row.map_err(|e| Error::format(format!("{loc}: row {row_no}"), e.to_string()))?;
            GeoCoordinate::new(row.lon, row.lat)
                .map_err(|e| Error::format(format!("{loc}: row {row_no}"), e.to_string()))?;
            Ok((row_no, row))
        })
        .collect()
}

/// Reads observations, numbering species by first appearance.
pub fn read_observations(path: &Path) -> Result<(ObservationSet, Vec<String>)> {
    let rows = read_rows(path)?;
    let mut names: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut records = Vec::with_capacity(rows.len());
    for (_, row) in rows {
        let next = names.len();
        let s = *index.entry(row.species_id.clone()).or_insert_with(|| {
            names.push(row.species_id.clone());
            next
        });
        records.push(Observation {
            species_index: s,
            coord: GeoCoordinate {
                lon_deg: row.lon,
                lat_deg: row.lat,
            },
        });
    }
    let set = ObservationSet::new(records, names.len())?;
    Ok((set, names))
}

/// Reads observations whose species must all appear in `species`.
pub fn read_observations_with_species(path: &Path, species: &[String]) -> Result<ObservationSet> {
    let loc = path.display().to_string();
    let index: HashMap<&str, usize> = species.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let records = read_rows(path)?
        .into_iter()
        .map(|(row_no, row)| {
            let s = *index.get(row.species_id.as_str()).ok_or_else(|| {
                Error::format(
                    format!("{loc}: row {row_no}"),
                    format!("species {} not in the species list", row.species_id),
                )
            })?;
            Ok(Observation {
                species_index: s,
                coord: GeoCoordinate {
                    lon_deg: row.lon,
                    lat_deg: row.lat,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ObservationSet::new(records, species.len())
}

pub fn write_observations(path: &Path, set: &ObservationSet, species: &[String]) -> Result<()> {
    if species.len() != set.num_species() {
        return Err(Error::structure(format!(
            "{} species names for {} species",
            species.len(),
            set.num_species()
        )));
    }
    let mut w = csv::Writer::from_writer(create(path)?);
    let csv_err = |e: csv::Error| Error::format(path.display().to_string(), e.to_string());
    for o in set.records() {
        w.serialize(Row {
            species_id: species[o.species_index].clone(),
            lat: o.coord.lat_deg,
            lon: o.coord.lon_deg,
        })
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_species_list(path: &Path) -> Result<Vec<String>> {
    let names: Vec<String> = read_json(path)?;
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
        return Err(Error::format(
            path.display().to_string(),
            format!("duplicate species {dup}"),
        ));
    }
    Ok(names)
}

pub fn write_species_list(path: &Path, names: &[String]) -> Result<()> {
    write_json(path, names)
}
