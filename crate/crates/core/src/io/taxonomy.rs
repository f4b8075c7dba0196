//! Taxonomy files: a JSON object from vision species name to geo species
//! name, or `null` for species the geo model does not cover.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use super::{read_json, write_json};
use crate::{Error, Result, TaxonomyMap};

pub type RawTaxonomy = BTreeMap<String, Option<String>>;

/// Resolves names to indices. Every vision species must have an entry.
pub fn compile_taxonomy(raw: &RawTaxonomy, vision: &[String], geo: &[String]) -> Result<TaxonomyMap> {
    let geo_index: HashMap<&str, usize> = geo.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    if let Some(extra) = raw.keys().find(|k| !vision.contains(k)) {
        return Err(Error::structure(format!(
            "taxonomy names unknown vision species {extra}"
        )));
    }
    let entries = vision
        .iter()
        .map(|v| match raw.get(v) {
            None => Err(Error::structure(format!(
                "taxonomy has no entry for vision species {v}"
            ))),
            Some(None) => Ok(None),
            Some(Some(g)) => geo_index.get(g.as_str()).map(|&i| Some(i)).ok_or_else(|| {
                Error::structure(format!("vision species {v} maps to unknown geo species {g}"))
            }),
        })
        .collect::<Result<Vec<_>>>()?;
    TaxonomyMap::new(entries, geo.len())
}

pub fn decompile_taxonomy(map: &TaxonomyMap, vision: &[String], geo: &[String]) -> Result<RawTaxonomy> {
    if vision.len() != map.num_vision() || geo.len() != map.num_geo() {
        return Err(Error::structure("species lists do not match the taxonomy"));
    }
    Ok(vision
        .iter()
        .zip(map.entries())
        .map(|(v, g)| (v.clone(), g.map(|g| geo[g].clone())))
        .collect())
}

pub fn load_taxonomy(path: &Path, vision: &[String], geo: &[String]) -> Result<TaxonomyMap> {
    let raw: RawTaxonomy = read_json(path)?;
    compile_taxonomy(&raw, vision, geo).map_err(|e| Error::format(path.display().to_string(), e.to_string()))
}

pub fn save_taxonomy(path: &Path, map: &TaxonomyMap, vision: &[String], geo: &[String]) -> Result<()> {
    write_json(path, &decompile_taxonomy(map, vision, geo)?)
}
