use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ap::average_precision;
use crate::raster::ExpertRangeSet;
use crate::{Error, Result, SpeciesScorer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesAp {
    pub species_id: usize,
    /// `None` when the species has no presence cells inside the mask.
    pub ap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeEvaluation {
    pub map: f64,
    pub evaluated: usize,
    pub skipped: usize,
    pub per_species: Vec<SpeciesAp>,
}

/// Scores every evaluable cell centre with `model` and averages the
/// per-species average precision against the presence rasters.
pub fn mean_average_precision<M: SpeciesScorer + ?Sized>(
    model: &M,
    ranges: &ExpertRangeSet,
) -> Result<RangeEvaluation> {
    if ranges.is_empty() {
        return Err(Error::domain("no species in range set"));
    }
    let s = model.num_species();
    if let Some(&bad) = ranges.species_ids().iter().find(|&&id| id >= s) {
        return Err(Error::structure(format!(
            "range set refers to species {bad}, model has {s}"
        )));
    }
    let grid = ranges.grid();
    let cells = grid.evaluable_cells();
    let centers: Vec<_> = cells.iter().map(|&c| grid.center_of(c)).collect();
    let scores = model.predict_batch(&centers)?;

    let per_species: Vec<SpeciesAp> = ranges
        .species_ids()
        .par_iter()
        .zip(ranges.ranges().par_iter())
        .map(|(&id, raster)| {
            let col = scores.column(id);
            let labels: Vec<bool> = cells.iter().map(|&c| raster.get(c)).collect();
            let ap = match average_precision(&col, &labels) {
                Ok(ap) => Some(ap),
                Err(Error::Unevaluable) => None,
                Err(e) => return Err(e),
            };
            Ok(SpeciesAp { species_id: id, ap })
        })
        .collect::<Result<_>>()?;

    let aps: Vec<f64> = per_species.iter().filter_map(|s| s.ap).collect();
    if aps.is_empty() {
        return Err(Error::domain("no species has presence cells to evaluate"));
    }
    let map = aps.iter().sum::<f64>() / aps.len() as f64;
    Ok(RangeEvaluation {
        map,
        evaluated: aps.len(),
        skipped: per_species.len() - aps.len(),
        per_species,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{Bitset, GridSpec};
    use crate::{GeoCoordinate, Matrix, ModelShape, SinrModel};

    /// Scores each cell by whether it lies in the northern hemisphere.
    struct North;

    impl SpeciesScorer for North {
        fn num_species(&self) -> usize {
            2
        }

        fn predict_batch(&self, coords: &[GeoCoordinate]) -> Result<Matrix<f64>> {
            let rows = coords
                .iter()
                .map(|c| {
                    let n = if c.lat_deg > 0.0 { 1.0 } else { 0.0 };
                    vec![n, 1.0 - n]
                })
                .collect();
            Matrix::from_rows(2, rows)
        }
    }

    #[test]
    fn perfect_scorer_reaches_one() {
        let g = GridSpec::new(4, 3).unwrap();
        let north: Vec<bool> = (0..12).map(|c| c < 6).collect();
        let south: Vec<bool> = north.iter().map(|b| !b).collect();
        let set = ExpertRangeSet::new(
            g,
            vec![0, 1],
            vec![Bitset::from_bools(&north), Bitset::from_bools(&south)],
        )
        .unwrap();
        let r = mean_average_precision(&North, &set).unwrap();
        assert_eq!(r.map, 1.0);
        assert_eq!(r.evaluated, 2);
    }

    #[test]
    fn skips_empty_species_and_averages_the_rest() {
        let g = GridSpec::new(2, 2).unwrap();
        let m = SinrModel::zeros(ModelShape::new(4, 1, 3).unwrap());
        let set = ExpertRangeSet::new(
            g,
            vec![0, 1, 2],
            vec![
                Bitset::from_bools(&[false, false, false, true]),
                Bitset::zeros(4),
                Bitset::from_bools(&[true, false, false, false]),
            ],
        )
        .unwrap();
        let r = mean_average_precision(&m, &set).unwrap();
        // constant scores: ranking is cell order
        assert_eq!(r.per_species[0].ap, Some(0.25));
        assert_eq!(r.per_species[1].ap, None);
        assert_eq!(r.per_species[2].ap, Some(1.0));
        assert_eq!(r.skipped, 1);
        assert!((r.map - 0.625).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        let g = GridSpec::new(2, 2).unwrap();
        let m = SinrModel::zeros(ModelShape::new(4, 1, 1).unwrap());
        let none = ExpertRangeSet::new(g.clone(), vec![0], vec![Bitset::zeros(4)]).unwrap();
        assert!(matches!(mean_average_precision(&m, &none), Err(Error::Domain(_))));
        let wrong = ExpertRangeSet::new(g, vec![1], vec![Bitset::zeros(4)]).unwrap();
        assert!(matches!(
            mean_average_precision(&m, &wrong),
            Err(Error::Structure(_))
        ));
    }
}
