//! Seeded synthetic worlds with known species ranges.
//!
//! Each species has a Gaussian presence surface over great-circle distance
//! from its centre. Its expert raster marks the cells where presence reaches
//! half the peak. A synthetic classifier confuses chosen pairs of species
//! whose rasters are disjoint, so location can resolve the confusion.
//!
//! Every random choice comes from a ChaCha stream derived from the seed and
//! a (purpose, index) pair, so results do not depend on call order across
//! species.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::eval::GeoPriorEvalSet;
use crate::raster::{Bitset, ExpertRangeSet, GridSpec};
use crate::train::{Observation, ObservationSet};
use crate::{Error, GeoCoordinate, Matrix, Result, SeededRng, TaxonomyMap};

/// Presence relative to peak at which a cell counts as inside the range.
pub const RANGE_THRESHOLD: f64 = 0.5;
/// Centres are kept away from the poles.
const MAX_CENTER_LAT: f64 = 60.0;
/// Per-item spread of the confusion weight around its nominal value.
const CONFUSION_JITTER: f64 = 0.2;
const MAX_REJECTION_ATTEMPTS: usize = 2_000_000;
const MAX_SPECIES_REDRAWS: usize = 1000;

const STREAM_SPECIES: u64 = 1;
const STREAM_TAXONOMY: u64 = 2;
const STREAM_OBSERVATIONS: u64 = 3;
const STREAM_EVAL: u64 = 4;
const STREAM_VISION: u64 = 5;
const STREAM_PLAN: u64 = 6;

fn derived_rng(seed: u64, purpose: u64, index: u64) -> SeededRng {
    let mut rng = SeededRng::seed_from_u64(seed);
    rng.set_stream((purpose << 32) | index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpecies {
    pub center: GeoCoordinate,
    pub sigma_deg: f64,
    pub peak: f64,
}

impl SyntheticSpecies {
    /// `peak * exp(-d^2 / (2 sigma^2))` with `d` the arc distance in degrees.
    pub fn presence(&self, at: &GeoCoordinate) -> f64 {
        let d = self.center.distance_deg(at);
        self.peak * (-d * d / (2.0 * self.sigma_deg * self.sigma_deg)).exp()
    }

    pub fn in_range(&self, at: &GeoCoordinate) -> bool {
        self.presence(at) >= RANGE_THRESHOLD * self.peak
    }

    /// Draws a location with density proportional to the presence surface,
    /// by rejection from the uniform distribution on the sphere.
    pub fn sample_location(&self, rng: &mut SeededRng) -> Result<GeoCoordinate> {
        for _ in 0..MAX_REJECTION_ATTEMPTS {
            let lon = -180.0 + 360.0 * rng.random::<f64>();
            let lat = (2.0 * rng.random::<f64>() - 1.0).asin().to_degrees();
            let c = GeoCoordinate {
                lon_deg: lon,
                lat_deg: lat,
            };
            if rng.random::<f64>() < self.presence(&c) {
                return Ok(c);
            }
        }
        Err(Error::domain(format!(
            "rejection sampling failed for species centred at ({}, {}) with sigma {}",
            self.center.lon_deg, self.center.lat_deg, self.sigma_deg
        )))
    }

    fn raster(&self, grid: &GridSpec) -> Bitset {
        let bits: Vec<bool> = (0..grid.num_cells())
            .map(|c| self.in_range(&grid.center_of(c)))
            .collect();
        Bitset::from_bools(&bits)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorld {
    pub species: Vec<SyntheticSpecies>,
    pub grid: GridSpec,
    /// One raster per species, with species ids equal to vision indices.
    pub truth_rasters: ExpertRangeSet,
}

impl SyntheticWorld {
    pub fn num_species(&self) -> usize {
        self.species.len()
    }

    /// Rasters of the mapped species, keyed by geo index and ordered by it.
    pub fn geo_ranges(&self, taxonomy: &TaxonomyMap) -> Result<ExpertRangeSet> {
        if taxonomy.num_vision() != self.num_species() {
            return Err(Error::structure(format!(
                "taxonomy covers {} vision species, world has {}",
                taxonomy.num_vision(),
                self.num_species()
            )));
        }
        let mut pairs: Vec<(usize, Bitset)> = taxonomy
            .entries()
            .iter()
            .enumerate()
            .filter_map(|(v, g)| g.map(|g| (g, self.truth_rasters.ranges()[v].clone())))
            .collect();
        pairs.sort_by_key(|(g, _)| *g);
        let (ids, rasters) = pairs.into_iter().unzip();
        ExpertRangeSet::new(self.grid.clone(), ids, rasters)
    }
}

/// Random species on `grid`, and a taxonomy leaving `unmapped_fraction` of
/// them (rounded, at least one mapped) without a geo counterpart.
pub fn generate_world(
    seed: u64,
    n_species: usize,
    grid: GridSpec,
    sigma_range: (f64, f64),
    unmapped_fraction: f64,
) -> Result<(SyntheticWorld, TaxonomyMap)> {
    grid.validate()?;
    if n_species < 2 {
        return Err(Error::domain("a synthetic world needs at least two species"));
    }
    let (lo, hi) = sigma_range;
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(Error::domain(format!("invalid sigma range ({lo}, {hi})")));
    }
    if !(0.0..1.0).contains(&unmapped_fraction) {
        return Err(Error::domain(format!(
            "unmapped_fraction {unmapped_fraction} outside [0, 1)"
        )));
    }

    let max_sin = MAX_CENTER_LAT.to_radians().sin();
    let mut species = Vec::with_capacity(n_species);
    let mut rasters = Vec::with_capacity(n_species);
    for k in 0..n_species {
        let mut rng = derived_rng(seed, STREAM_SPECIES, k as u64);
        let mut drawn = None;
        for _ in 0..MAX_SPECIES_REDRAWS {
            let sp = SyntheticSpecies {
                center: GeoCoordinate {
                    lon_deg: rng.random_range(-180.0..180.0),
                    lat_deg: rng.random_range(-max_sin..max_sin).asin().to_degrees(),
                },
                sigma_deg: if hi > lo { rng.random_range(lo..hi) } else { lo },
                peak: rng.random_range(0.5..=1.0),
            };
            let raster = sp.raster(&grid);
            if raster.count_ones() > 0 {
                drawn = Some((sp, raster));
                break;
            }
        }
        let (sp, raster) = drawn.ok_or_else(|| {
            Error::domain(format!(
                "species {k} never covered a grid cell; sigma too small for the grid"
            ))
        })?;
        species.push(sp);
        rasters.push(raster);
    }

    let n_unmapped = ((unmapped_fraction * n_species as f64).round() as usize).min(n_species - 1);
    let mut rng = derived_rng(seed, STREAM_TAXONOMY, 0);
    let mut unmapped = vec![false; n_species];
    for i in index::sample(&mut rng, n_species, n_unmapped) {
        unmapped[i] = true;
    }
    let mut next_geo = 0;
    let vision_to_geo = unmapped
        .iter()
        .map(|&u| {
            if u {
                None
            } else {
                next_geo += 1;
                Some(next_geo - 1)
            }
        })
        .collect();
    let taxonomy = TaxonomyMap::new(vision_to_geo, next_geo)?;

    let truth_rasters = ExpertRangeSet::new(grid.clone(), (0..n_species).collect(), rasters)?;
    Ok((
        SyntheticWorld {
            species,
            grid,
            truth_rasters,
        },
        taxonomy,
    ))
}

/// `per_species` presence-only records for every mapped species, labelled
/// with geo indices and grouped by geo index.
pub fn sample_observations(
    world: &SyntheticWorld,
    taxonomy: &TaxonomyMap,
    per_species: usize,
    seed: u64,
) -> Result<ObservationSet> {
    if per_species == 0 {
        return Err(Error::domain("per_species must be at least 1"));
    }
    if taxonomy.num_vision() != world.num_species() {
        return Err(Error::structure("taxonomy does not match world"));
    }
    let mut mapped: Vec<(usize, usize)> = taxonomy
        .entries()
        .iter()
        .enumerate()
        .filter_map(|(v, g)| g.map(|g| (g, v)))
        .collect();
    mapped.sort();

    let mut records = Vec::with_capacity(mapped.len() * per_species);
    for (g, v) in mapped {
        let mut rng = derived_rng(seed, STREAM_OBSERVATIONS, v as u64);
        let sp = &world.species[v];
        for _ in 0..per_species {
            records.push(Observation {
                species_index: g,
                coord: sp.sample_location(&mut rng)?,
            });
        }
    }
    ObservationSet::new(records, taxonomy.num_geo())
}

/// `n` labelled locations: the label is uniform over all vision species and
/// the location is drawn from that species' presence surface.
pub fn sample_eval_items(world: &SyntheticWorld, n: usize, seed: u64) -> Result<Vec<(GeoCoordinate, usize)>> {
    let mut rng = derived_rng(seed, STREAM_EVAL, 0);
    (0..n)
        .map(|_| {
            let t = rng.random_range(0..world.num_species());
            Ok((world.species[t].sample_location(&mut rng)?, t))
        })
        .collect()
}

/// Pairs of species the synthetic classifier mixes up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionPlan {
    pairs: Vec<(usize, usize, f64)>,
}

impl ConfusionPlan {
    pub fn empty() -> Self {
        Self { pairs: vec![] }
    }

    /// Checks that each species appears in at most one pair, weights lie in
    /// [0, 1), and paired rasters are disjoint.
    pub fn new(pairs: Vec<(usize, usize, f64)>, world: &SyntheticWorld) -> Result<Self> {
        let n = world.num_species();
        let mut used = vec![false; n];
        for &(a, b, w) in &pairs {
            if a >= n || b >= n || a == b {
                return Err(Error::domain(format!("invalid confusion pair ({a}, {b})")));
            }
            if !(0.0..1.0).contains(&w) {
                return Err(Error::domain(format!("confusion weight {w} outside [0, 1)")));
            }
            for s in [a, b] {
                if std::mem::replace(&mut used[s], true) {
                    return Err(Error::domain(format!("species {s} is in more than one pair")));
                }
            }
            let r = world.truth_rasters.ranges();
            if r[a].intersects(&r[b]) {
                return Err(Error::domain(format!(
                    "species {a} and {b} have overlapping ranges"
                )));
            }
        }
        Ok(Self { pairs })
    }

    /// Random disjoint pairs. Even-numbered pairs prefer one mapped and one
    /// unmapped species, odd-numbered pairs prefer two mapped species.
    pub fn sample(
        world: &SyntheticWorld,
        taxonomy: &TaxonomyMap,
        n_pairs: usize,
        weight: f64,
        seed: u64,
    ) -> Result<Self> {
        let n = world.num_species();
        let r = world.truth_rasters.ranges();
        let mut rng = derived_rng(seed, STREAM_PLAN, 0);
        let mut used = vec![false; n];
        let mut pairs = Vec::with_capacity(n_pairs);
        for i in 0..n_pairs {
            let candidates: Vec<(usize, usize)> = (0..n)
                .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
                .filter(|&(a, b)| !used[a] && !used[b] && !r[a].intersects(&r[b]))
                .collect();
            let mapped = |s: usize| taxonomy.geo_index(s).is_some();
            let preferred: Vec<(usize, usize)> = candidates
                .iter()
                .copied()
                .filter(|&(a, b)| {
                    if i % 2 == 0 {
                        mapped(a) != mapped(b)
                    } else {
                        mapped(a) && mapped(b)
                    }
                })
                .collect();
            let pool = if preferred.is_empty() {
                &candidates
            } else {
                &preferred
            };
            if pool.is_empty() {
                return Err(Error::domain(format!(
                    "only {i} disjoint confusion pairs available, {n_pairs} requested"
                )));
            }
            let (a, b) = pool[rng.random_range(0..pool.len())];
            used[a] = true;
            used[b] = true;
            pairs.push((a, b, weight));
        }
        Self::new(pairs, world)
    }

    pub fn pairs(&self) -> &[(usize, usize, f64)] {
        &self.pairs
    }

    pub fn partner(&self, species: usize) -> Option<(usize, f64)> {
        self.pairs.iter().find_map(|&(a, b, w)| {
            if a == species {
                Some((b, w))
            } else if b == species {
                Some((a, w))
            } else {
                None
            }
        })
    }
}

/// Synthetic classifier output for labelled locations.
///
/// An item of species `t` gets `base_accuracy` on `t`. If `t` is paired with
/// `q`, that mass is split `(1 - w')` to `t` and `w'` to `q`, with `w'` the
/// pair weight jittered per item, so the classifier prefers `q` whenever
/// `w' > 0.5`. Items lying inside `q`'s range are left unconfused so a good
/// prior can always fix the error. The rest of the mass is spread evenly.
pub fn synth_vision_predictions(
    world: &SyntheticWorld,
    items: &[(GeoCoordinate, usize)],
    plan: &ConfusionPlan,
    base_accuracy: f64,
    seed: u64,
) -> Result<GeoPriorEvalSet> {
    if !(base_accuracy > 0.0 && base_accuracy <= 1.0) {
        return Err(Error::domain(format!(
            "base_accuracy {base_accuracy} outside (0, 1]"
        )));
    }
    let v = world.num_species();
    let mut rng = derived_rng(seed, STREAM_VISION, 0);
    let mut data = Vec::with_capacity(items.len() * v);
    for &(coord, t) in items {
        if t >= v {
            return Err(Error::domain(format!("label {t} outside {v} species")));
        }
        let mut row = vec![0.0; v];
        let jitter = rng.random_range(-CONFUSION_JITTER..=CONFUSION_JITTER);
        let partner = plan
            .partner(t)
            .filter(|&(q, _)| !world.species[q].in_range(&coord));
        let involved = match partner {
            Some((q, w)) => {
                let w = (w + jitter).clamp(0.0, 1.0);
                row[t] = (1.0 - w) * base_accuracy;
                row[q] = w * base_accuracy;
                vec![t, q]
            }
            None => {
                row[t] = base_accuracy;
                vec![t]
            }
        };
        let rest = 1.0 - base_accuracy;
        let others = v - involved.len();
        if others > 0 {
            let share = rest / others as f64;
            for (i, p) in row.iter_mut().enumerate() {
                if !involved.contains(&i) {
                    *p = share;
                }
            }
        } else {
            for &i in &involved {
                row[i] += rest / involved.len() as f64;
            }
        }
        data.extend(row);
    }
    let vision = Matrix::from_vec(items.len(), v, data)?;
    GeoPriorEvalSet::new(
        vision,
        items.iter().map(|(c, _)| *c).collect(),
        items.iter().map(|(_, t)| *t).collect(),
    )
}

/// Name of vision species `i` in generated data.
pub fn species_name(i: usize) -> String {
    format!("sp{i:03}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_species: usize,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub sigma_min_deg: f64,
    pub sigma_max_deg: f64,
    pub unmapped_fraction: f64,
    pub obs_per_species: usize,
    pub n_eval_items: usize,
    pub confusion_pairs: usize,
    pub confusion_weight: f64,
    pub base_accuracy: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_species: 20,
            grid_rows: 180,
            grid_cols: 360,
            sigma_min_deg: 5.0,
            sigma_max_deg: 20.0,
            unmapped_fraction: 0.0,
            obs_per_species: 500,
            n_eval_items: 2000,
            confusion_pairs: 4,
            confusion_weight: 0.6,
            base_accuracy: 0.7,
        }
    }
}

/// Everything generated from one seed and config.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub world: SyntheticWorld,
    pub taxonomy: TaxonomyMap,
    pub observations: ObservationSet,
    pub plan: ConfusionPlan,
    pub evalset: GeoPriorEvalSet,
    /// Rasters of mapped species keyed by geo index.
    pub geo_ranges: ExpertRangeSet,
}

impl SyntheticDataset {
    pub fn vision_names(&self) -> Vec<String> {
        (0..self.world.num_species()).map(species_name).collect()
    }

    /// Geo species carry the name of the vision species they map from.
    pub fn geo_names(&self) -> Vec<String> {
        let mut names = vec![String::new(); self.taxonomy.num_geo()];
        for (v, g) in self.taxonomy.entries().iter().enumerate() {
            if let Some(g) = g {
                names[*g] = species_name(v);
            }
        }
        names
    }
}

pub fn build_dataset(config: &SynthConfig, seed: u64) -> Result<SyntheticDataset> {
    let grid = GridSpec::new(config.grid_rows, config.grid_cols)?;
    let (world, taxonomy) = generate_world(
        seed,
        config.n_species,
        grid,
        (config.sigma_min_deg, config.sigma_max_deg),
        config.unmapped_fraction,
    )?;
    let observations = sample_observations(&world, &taxonomy, config.obs_per_species, seed)?;
    let plan = ConfusionPlan::sample(
        &world,
        &taxonomy,
        config.confusion_pairs,
        config.confusion_weight,
        seed,
    )?;
    let items = sample_eval_items(&world, config.n_eval_items, seed)?;
    let evalset = synth_vision_predictions(&world, &items, &plan, config.base_accuracy, seed)?;
    let geo_ranges = world.geo_ranges(&taxonomy)?;
    Ok(SyntheticDataset {
        world,
        taxonomy,
        observations,
        plan,
        evalset,
        geo_ranges,
    })
}
