use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fusion::{argmax, fuse, prior_from_geo};
use crate::train::TrainConfig;
use crate::{Error, FusionConfig, GeoCoordinate, Matrix, ModelConfig, Result, SpeciesScorer, TaxonomyMap};

/// Images reduced to what the benchmark needs: classifier probabilities,
/// the photo location and the true vision label.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoPriorEvalSet {
    vision: Matrix<f64>,
    coords: Vec<GeoCoordinate>,
    truths: Vec<usize>,
}

impl GeoPriorEvalSet {
    /// `vision` has one row per item and one column per vision species.
    pub fn new(vision: Matrix<f64>, coords: Vec<GeoCoordinate>, truths: Vec<usize>) -> Result<Self> {
        let n = vision.rows();
        if coords.len() != n || truths.len() != n {
            return Err(Error::structure(format!(
                "{n} vision rows, {} coordinates, {} labels",
                coords.len(),
                truths.len()
            )));
        }
        for (i, c) in coords.iter().enumerate() {
            c.validate()
                .map_err(|e| Error::domain(format!("item {i}: {e}")))?;
        }
        if let Some(i) = truths.iter().position(|&t| t >= vision.cols()) {
            return Err(Error::domain(format!(
                "item {i}: label {} outside {} vision species",
                truths[i],
                vision.cols()
            )));
        }
        if let Some(i) = vision
            .as_slice()
            .iter()
            .position(|p| !(p.is_finite() && *p >= 0.0))
        {
            return Err(Error::domain(format!(
                "item {}: vision probability {} is not finite and non-negative",
                i / vision.cols().max(1),
                vision.as_slice()[i]
            )));
        }
        Ok(Self {
            vision,
            coords,
            truths,
        })
    }

    pub fn len(&self) -> usize {
        self.truths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truths.is_empty()
    }

    pub fn num_vision(&self) -> usize {
        self.vision.cols()
    }

    pub fn vision(&self) -> &Matrix<f64> {
        &self.vision
    }

    pub fn coords(&self) -> &[GeoCoordinate] {
        &self.coords
    }

    pub fn truths(&self) -> &[usize] {
        &self.truths
    }
}

/// Settings a report was produced with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ConfigEcho {
    pub fusion: FusionConfig,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub model: Option<ModelConfig>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub train: Option<TrainConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub num_items: usize,
    /// Fraction of items whose classifier argmax is the true label.
    pub vision_only_top1: f64,
    /// Fraction of items whose fused argmax is the true label.
    pub fused_top1: f64,
    /// `fused_top1 - vision_only_top1`, as a fraction.
    pub gain: f64,
    /// The same gain in percentage points.
    pub gain_pp: f64,
    /// Mean average precision per named range set.
    #[serde(default)]
    pub map_scores: BTreeMap<String, f64>,
    pub config_echo: ConfigEcho,
}

/// Evaluation set with the geo model already run at every item location, so
/// fusion settings can be varied without recomputing the network.
pub struct PreparedGeoPrior<'a> {
    evalset: &'a GeoPriorEvalSet,
    taxonomy: &'a TaxonomyMap,
    geo: Matrix<f64>,
}

impl<'a> PreparedGeoPrior<'a> {
    pub fn new<M: SpeciesScorer + ?Sized>(
        model: &M,
        evalset: &'a GeoPriorEvalSet,
        taxonomy: &'a TaxonomyMap,
    ) -> Result<Self> {
        if evalset.is_empty() {
            return Err(Error::domain("empty evaluation set"));
        }
        if evalset.num_vision() != taxonomy.num_vision() {
            return Err(Error::structure(format!(
                "evaluation set has {} vision species, taxonomy has {}",
                evalset.num_vision(),
                taxonomy.num_vision()
            )));
        }
        if model.num_species() != taxonomy.num_geo() {
            return Err(Error::structure(format!(
                "model has {} species, taxonomy expects {}",
                model.num_species(),
                taxonomy.num_geo()
            )));
        }
        let geo = model.predict_batch(evalset.coords())?;
        Ok(Self {
            evalset,
            taxonomy,
            geo,
        })
    }

    /// Fused label for every item.
    pub fn fused_labels(&self, config: &FusionConfig) -> Result<Vec<usize>> {
        config.validate()?;
        (0..self.evalset.len())
            .into_par_iter()
            .map(|i| {
                let prior = prior_from_geo(self.geo.row(i), self.taxonomy, config)?;
                Ok(fuse(&prior, self.evalset.vision.row(i))?.top1)
            })
            .collect()
    }

    pub fn evaluate(&self, config: &FusionConfig) -> Result<EvalReport> {
        let fused = self.fused_labels(config)?;
        let truths = self.evalset.truths();
        let n = truths.len();
        let vision_hits = self
            .evalset
            .vision
            .iter_rows()
            .zip(truths)
            .filter(|(row, &t)| argmax(row) == Some(t))
            .count();
        let fused_hits = fused.iter().zip(truths).filter(|(f, t)| f == t).count();

        let vision_only_top1 = vision_hits as f64 / n as f64;
        let fused_top1 = fused_hits as f64 / n as f64;
        let gain = fused_top1 - vision_only_top1;
        Ok(EvalReport {
            num_items: n,
            vision_only_top1,
            fused_top1,
            gain,
            gain_pp: 100.0 * gain,
            map_scores: BTreeMap::new(),
            config_echo: ConfigEcho {
                fusion: *config,
                ..ConfigEcho::default()
            },
        })
    }
}

/// Top-1 accuracy of the classifier alone and fused with the geo prior.
pub fn eval_geo_prior<M: SpeciesScorer + ?Sized>(
    model: &M,
    evalset: &GeoPriorEvalSet,
    taxonomy: &TaxonomyMap,
    config: &FusionConfig,
) -> Result<EvalReport> {
    PreparedGeoPrior::new(model, evalset, taxonomy)?.evaluate(config)
}
