//! Presence-only observation sets, per-class capping and random background
//! locations.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::{Error, GeoCoordinate, Result, SeededRng};

/// ChaCha stream reserved for observation capping so it never shares draws
/// with weight initialisation or batching.
const CAP_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub species_index: usize,
    pub coord: GeoCoordinate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    records: Vec<Observation>,
    num_species: usize,
}

impl ObservationSet {
    pub fn new(records: Vec<Observation>, num_species: usize) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            if r.species_index >= num_species {
                return Err(Error::domain(format!(
                    "record {i}: species index {} >= {num_species}",
                    r.species_index
                )));
            }
            r.coord
                .validate()
                .map_err(|e| Error::domain(format!("record {i}: {e}")))?;
        }
        Ok(Self { records, num_species })
    }

    pub fn records(&self) -> &[Observation] {
        &self.records
    }

    pub fn num_species(&self) -> usize {
        self.num_species
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records per species, indexed by species.
    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.num_species];
        for r in &self.records {
            c[r.species_index] += 1;
        }
        c
    }
}

/// Keeps at most `cap` records per species, chosen uniformly without
/// replacement. Surviving records keep their original relative order.
pub fn cap_observations(set: &ObservationSet, cap: usize, seed: u64) -> Result<ObservationSet> {
    if cap == 0 {
        return Err(Error::domain("observation cap must be at least 1"));
    }
    let mut by_species: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, r) in set.records.iter().enumerate() {
        by_species.entry(r.species_index).or_default().push(i);
    }

    let mut rng = SeededRng::seed_from_u64(seed);
    rng.set_stream(CAP_STREAM);
    let mut keep = vec![false; set.records.len()];
    for positions in by_species.values() {
        if positions.len() <= cap {
            positions.iter().for_each(|&p| keep[p] = true);
        } else {
            for k in index::sample(&mut rng, positions.len(), cap) {
                keep[positions[k]] = true;
            }
        }
    }

    let records = set
        .records
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(r, _)| *r)
        .collect();
    Ok(ObservationSet {
        records,
        num_species: set.num_species,
    })
}

/// `n` locations uniform on the sphere.
pub fn sample_random_locations(n: usize, rng: &mut SeededRng) -> Vec<GeoCoordinate> {
    (0..n)
        .map(|_| {
            let lon = -180.0 + 360.0 * rng.random::<f64>();
            let u: f64 = rng.random();
            let lat = (2.0 * u - 1.0).asin().to_degrees();
            GeoCoordinate {
                lon_deg: lon,
                lat_deg: lat.clamp(-90.0, 90.0),
            }
        })
        .collect()
}
