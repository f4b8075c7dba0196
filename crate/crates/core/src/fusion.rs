//! Geographic prior construction and late fusion with a vision classifier.
//!
//! The fused score of vision species `v` at a location is
//! `prior[v] * vision[v]`, where the prior is the geo model's probability for
//! the matching geo species (plus an optional floor `delta`, capped at 1), or
//! the constant `k_default` if the vision species has no geo counterpart.

use serde::{Deserialize, Serialize};

use crate::{Error, GeoCoordinate, Result, SpeciesScorer};

/// Maps vision-classifier indices onto geo-model indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaxonomyMap {
    vision_to_geo: Vec<Option<usize>>,
    num_geo: usize,
}

impl TaxonomyMap {
    pub fn new(vision_to_geo: Vec<Option<usize>>, num_geo: usize) -> Result<Self> {
        let mut used = vec![false; num_geo];
        for (v, g) in vision_to_geo.iter().enumerate() {
            if let Some(g) = *g {
                if g >= num_geo {
                    return Err(Error::structure(format!(
                        "vision species {v} maps to geo index {g} >= {num_geo}"
                    )));
                }
                if std::mem::replace(&mut used[g], true) {
                    return Err(Error::structure(format!(
                        "geo index {g} is mapped from more than one vision species"
                    )));
                }
            }
        }
        Ok(Self {
            vision_to_geo,
            num_geo,
        })
    }

    /// Vision species `i` is geo species `i`.
    pub fn identity(n: usize) -> Self {
        Self {
            vision_to_geo: (0..n).map(Some).collect(),
            num_geo: n,
        }
    }

    pub fn all_unmapped(num_vision: usize, num_geo: usize) -> Self {
        Self {
            vision_to_geo: vec![None; num_vision],
            num_geo,
        }
    }

    pub fn num_vision(&self) -> usize {
        self.vision_to_geo.len()
    }

    pub fn num_geo(&self) -> usize {
        self.num_geo
    }

    pub fn geo_index(&self, vision: usize) -> Option<usize> {
        self.vision_to_geo[vision]
    }

    pub fn entries(&self) -> &[Option<usize>] {
        &self.vision_to_geo
    }

    pub fn mapped_count(&self) -> usize {
        self.vision_to_geo.iter().filter(|g| g.is_some()).count()
    }

    pub fn unmapped_count(&self) -> usize {
        self.num_vision() - self.mapped_count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    /// Added to every geo-model probability.
    pub delta: f64,
    /// Prior for vision species the geo model does not know.
    pub k_default: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            delta: 0.0,
            k_default: 1.0,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::domain(format!("delta {} outside [0, 1)", self.delta)));
        }
        if !(self.k_default > 0.0 && self.k_default <= 1.0) {
            return Err(Error::domain(format!(
                "k_default {} outside (0, 1]",
                self.k_default
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedPrediction {
    pub scores: Vec<f64>,
    pub top1: usize,
}

/// Index of the largest entry, lowest index on ties. Entries must not be NaN.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// Builds the vision-space prior from one row of geo-model output.
pub fn prior_from_geo(geo_probs: &[f64], taxonomy: &TaxonomyMap, config: &FusionConfig) -> Result<Vec<f64>> {
    config.validate()?;
    if geo_probs.len() != taxonomy.num_geo() {
        return Err(Error::structure(format!(
            "geo model has {} species, taxonomy expects {}",
            geo_probs.len(),
            taxonomy.num_geo()
        )));
    }
    Ok(taxonomy
        .entries()
        .iter()
        .map(|g| match g {
            Some(g) => (geo_probs[*g] + config.delta).min(1.0),
            None => config.k_default,
        })
        .collect())
}

pub fn build_prior<M: SpeciesScorer + ?Sized>(
    model: &M,
    coord: &GeoCoordinate,
    taxonomy: &TaxonomyMap,
    config: &FusionConfig,
) -> Result<Vec<f64>> {
    if model.num_species() != taxonomy.num_geo() {
        return Err(Error::structure(format!(
            "model has {} species, taxonomy expects {}",
            model.num_species(),
            taxonomy.num_geo()
        )));
    }
    let geo = model.predict_batch(std::slice::from_ref(coord))?;
    prior_from_geo(geo.row(0), taxonomy, config)
}

fn check_nonneg(name: &str, v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
        Some(i) => Err(Error::domain(format!(
            "{name}[{i}] = {} is not a finite non-negative value",
            v[i]
        ))),
        None => Ok(()),
    }
}

/// Elementwise product of prior and vision probabilities.
pub fn fuse(prior: &[f64], vision: &[f64]) -> Result<FusedPrediction> {
    if prior.len() != vision.len() {
        return Err(Error::structure(format!(
            "prior has {} entries, vision has {}",
            prior.len(),
            vision.len()
        )));
    }
    check_nonneg("prior", prior)?;
    check_nonneg("vision", vision)?;
    let scores: Vec<f64> = prior.iter().zip(vision).map(|(p, v)| p * v).collect();
    let top1 = argmax(&scores).ok_or_else(|| Error::domain("empty prediction"))?;
    Ok(FusedPrediction { scores, top1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{ModelShape, SinrModel};

    #[test]
    fn fuse_hand_example() {
        let f = fuse(&[0.1, 0.9, 0.02], &[0.4, 0.35, 0.25]).unwrap();
        let want = [0.04, 0.315, 0.005];
        for (a, b) in f.scores.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(f.top1, 1);
    }

    #[test]
    fn unit_prior_keeps_vision_argmax() {
        let v = [0.2, 0.5, 0.3];
        let f = fuse(&[1.0; 3], &v).unwrap();
        assert_eq!(f.scores, v);
        assert_eq!(f.top1, argmax(&v).unwrap());
    }

    #[test]
    fn k_of_one_outranks_mapped_species() {
        // species 0 mapped with prior 0.9, species 1 unmapped
        let tax = TaxonomyMap::new(vec![Some(0), None], 1).unwrap();
        let prior = prior_from_geo(
            &[0.9],
            &tax,
            &FusionConfig {
                delta: 0.0,
                k_default: 1.0,
            },
        )
        .unwrap();
        let f = fuse(&prior, &[0.5, 0.5]).unwrap();
        assert_eq!(f.scores, vec![0.45, 0.5]);
        assert_eq!(f.top1, 1);
    }

    #[test]
    fn delta_and_k_rules() {
        let tax = TaxonomyMap::new(vec![Some(1), None, Some(0)], 2).unwrap();
        let cfg = FusionConfig {
            delta: 0.001,
            k_default: 0.02,
        };
        let prior = prior_from_geo(&[0.9999, 0.5], &tax, &cfg).unwrap();
        assert!((prior[0] - 0.501).abs() < 1e-15);
        assert_eq!(prior[1], 0.02);
        assert_eq!(prior[2], 1.0);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        assert_eq!(argmax(&[0.3, 0.7, 0.7]), Some(1));
        assert_eq!(argmax(&[0.0, 0.0]), Some(0));
        assert_eq!(argmax(&[]), None);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(fuse(&[1.0], &[0.5, 0.5]), Err(Error::Structure(_))));
        assert!(matches!(fuse(&[1.0, -0.1], &[0.5, 0.5]), Err(Error::Domain(_))));
        assert!(matches!(
            fuse(&[1.0, 1.0], &[0.5, f64::NAN]),
            Err(Error::Domain(_))
        ));
        assert!(TaxonomyMap::new(vec![Some(0), Some(0)], 2).is_err());
        assert!(TaxonomyMap::new(vec![Some(2)], 2).is_err());
        let bad = FusionConfig {
            delta: 0.0,
            k_default: 0.0,
        };
        assert!(bad.validate().is_err());
        assert!(FusionConfig {
            delta: 1.0,
            k_default: 1.0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn build_prior_checks_species_count() {
        let m = SinrModel::zeros(ModelShape::new(4, 1, 3).unwrap());
        let c = GeoCoordinate::new(0.0, 0.0).unwrap();
        let tax = TaxonomyMap::identity(2);
        assert!(matches!(
            build_prior(&m, &c, &tax, &FusionConfig::default()),
            Err(Error::Structure(_))
        ));
        let tax = TaxonomyMap::new(vec![Some(2), None, Some(0)], 3).unwrap();
        let p = build_prior(&m, &c, &tax, &FusionConfig::default()).unwrap();
        assert_eq!(p, vec![0.5, 1.0, 0.5]);
    }

    #[test]
    fn taxonomy_counts() {
        let tax = TaxonomyMap::new(vec![Some(0), None, None, Some(1)], 2).unwrap();
        assert_eq!(tax.mapped_count(), 2);
        assert_eq!(tax.unmapped_count(), 2);
    }

    proptest::proptest! {
        #[test]
        fn positive_scaling_preserves_top1(
            pairs in proptest::collection::vec((0.001f64..1.0, 0.0f64..1.0), 1..30),
            c in 0.01f64..100.0,
        ) {
            let (prior, vision): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let scaled: Vec<f64> = prior.iter().map(|p| p * c).collect();
            let a = fuse(&prior, &vision).unwrap();
            let b = fuse(&scaled, &vision).unwrap();
            // exact ties after rounding may legitimately move the argmax
            let best = a.scores[a.top1];
            let near_tie = a.scores.iter().enumerate().any(|(i, s)| i != a.top1 && (best - s).abs() <= best * 1e-12);
            if !near_tie {
                proptest::prop_assert_eq!(a.top1, b.top1);
            }
        }

        #[test]
        fn uniform_prior_matches_vision_argmax(
            vision in proptest::collection::vec(0.0f64..1.0, 1..30),
            c in 0.01f64..=1.0,
        ) {
            let a = fuse(&vec![c; vision.len()], &vision).unwrap();
            let best = vision[argmax(&vision).unwrap()];
            let near_tie = vision.iter().filter(|&&v| (best - v).abs() <= best * 1e-12).count() > 1;
            if !near_tie {
                proptest::prop_assert_eq!(a.top1, argmax(&vision).unwrap());
            }
        }

        #[test]
        fn fuse_is_monotone_in_vision(
            vision in proptest::collection::vec(0.0f64..1.0, 1..20),
            prior in proptest::collection::vec(0.0f64..1.0, 20),
            bump in 0.0f64..1.0,
            idx in 0usize..20,
        ) {
            let prior = &prior[..vision.len()];
            let i = idx % vision.len();
            let mut up = vision.clone();
            up[i] += bump;
            let a = fuse(prior, &vision).unwrap();
            let b = fuse(prior, &up).unwrap();
            proptest::prop_assert!(b.scores[i] >= a.scores[i]);
        }

        #[test]
        fn delta_floors_mapped_species(
            geo in proptest::collection::vec(0.0f64..1.0, 1..20),
            delta in 0.0f64..0.5,
        ) {
            let tax = TaxonomyMap::identity(geo.len());
            let cfg = FusionConfig { delta, k_default: 0.5 };
            let prior = prior_from_geo(&geo, &tax, &cfg).unwrap();
            for p in prior {
                proptest::prop_assert!(p >= delta && p <= 1.0);
            }
        }
    }
}
