//! One-parameter sweeps over fusion settings or training settings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::geoprior::{EvalReport, GeoPriorEvalSet, PreparedGeoPrior};
use super::range::mean_average_precision;
use crate::raster::ExpertRangeSet;
use crate::train::{train, ObservationSet, TrainConfig};
use crate::{Error, FusionConfig, ModelConfig, Result, SinrModel, TaxonomyMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Prior for unmapped vision species.
    K,
    Delta,
    Epochs,
    HiddenDim,
}

impl SweepParam {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::K => "k",
            SweepParam::Delta => "delta",
            SweepParam::Epochs => "epochs",
            SweepParam::HiddenDim => "hidden_dim",
        }
    }

    fn needs_training(&self) -> bool {
        matches!(self, SweepParam::Epochs | SweepParam::HiddenDim)
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "k" | "k_default" => Ok(SweepParam::K),
            "delta" => Ok(SweepParam::Delta),
            "epochs" => Ok(SweepParam::Epochs),
            "hidden_dim" | "hidden-dim" => Ok(SweepParam::HiddenDim),
            other => Err(Error::domain(format!(
                "unknown sweep parameter '{other}' (expected k, delta, epochs or hidden-dim)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainingInputs<'a> {
    pub observations: &'a ObservationSet,
    pub model_config: ModelConfig,
    pub train_config: TrainConfig,
}

/// Everything a sweep row holds fixed.
#[derive(Debug, Clone)]
pub struct SweepInputs<'a> {
    /// Model for fusion sweeps. When absent, one is trained from `training`.
    pub base_model: Option<&'a SinrModel>,
    pub training: Option<TrainingInputs<'a>>,
    pub evalset: &'a GeoPriorEvalSet,
    pub taxonomy: &'a TaxonomyMap,
    pub fusion: FusionConfig,
    /// Named range sets scored on every row.
    pub ranges: Vec<(String, &'a ExpertRangeSet)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: SweepParam,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub report: Option<EvalReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

impl SweepRow {
    fn from_result(param: SweepParam, value: f64, r: Result<EvalReport>) -> Self {
        match r {
            Ok(report) => Self {
                param,
                value,
                report: Some(report),
                error: None,
            },
            Err(e) => Self {
                param,
                value,
                report: None,
                error: Some(e.to_string()),
            },
        }
    }
}

fn positive_integer(v: f64, what: &str) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(Error::domain(format!(
            "{what} must be a positive integer, got {v}"
        )))
    }
}

fn score_ranges(
    model: &SinrModel,
    ranges: &[(String, &ExpertRangeSet)],
    report: &mut EvalReport,
) -> Result<()> {
    for (name, set) in ranges {
        let r = mean_average_precision(model, set)?;
        report.map_scores.insert(name.clone(), r.map);
    }
    Ok(())
}

fn evaluate_model(
    model: &SinrModel,
    inputs: &SweepInputs<'_>,
    fusion: &FusionConfig,
    model_config: Option<ModelConfig>,
    train_config: Option<TrainConfig>,
) -> Result<EvalReport> {
    let prepared = PreparedGeoPrior::new(model, inputs.evalset, inputs.taxonomy)?;
    let mut report = prepared.evaluate(fusion)?;
    score_ranges(model, &inputs.ranges, &mut report)?;
    report.config_echo.model = model_config;
    report.config_echo.train = train_config;
    Ok(report)
}

/// Runs one evaluation per value of `param`, in input order. Failures are
/// recorded on their row and do not stop the remaining rows.
pub fn sweep(inputs: &SweepInputs<'_>, param: SweepParam, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::domain("sweep needs at least one value"));
    }
    if param.needs_training() && inputs.training.is_none() {
        return Err(Error::domain(format!(
            "sweeping {} requires training inputs",
            param.name()
        )));
    }
    match param {
        SweepParam::K | SweepParam::Delta => sweep_fusion(inputs, param, values),
        SweepParam::Epochs => sweep_epochs(inputs, values),
        SweepParam::HiddenDim => sweep_hidden(inputs, values),
    }
}

fn sweep_fusion(inputs: &SweepInputs<'_>, param: SweepParam, values: &[f64]) -> Result<Vec<SweepRow>> {
    let trained;
    let (model, echo_model, echo_train) = match (inputs.base_model, &inputs.training) {
        (Some(m), _) => (m, None, None),
        (None, Some(t)) => {
            trained = train(t.observations, &t.model_config, &t.train_config, None)?.model;
            (&trained, Some(t.model_config), Some(t.train_config.clone()))
        }
        (None, None) => {
            return Err(Error::domain(
                "fusion sweeps need a base model or training inputs",
            ))
        }
    };

    // network outputs do not depend on the swept value
    let prepared = PreparedGeoPrior::new(model, inputs.evalset, inputs.taxonomy)?;
    let mut maps = BTreeMap::new();
    for (name, set) in &inputs.ranges {
        maps.insert(name.clone(), mean_average_precision(model, set)?.map);
    }

    Ok(values
        .iter()
        .map(|&v| {
            let mut fusion = inputs.fusion;
            match param {
                SweepParam::K => fusion.k_default = v,
                _ => fusion.delta = v,
            }
            let r = prepared.evaluate(&fusion).map(|mut r| {
                r.map_scores = maps.clone();
                r.config_echo.model = echo_model;
                r.config_echo.train = echo_train.clone();
                r
            });
            SweepRow::from_result(param, v, r)
        })
        .collect())
}

fn sweep_epochs(inputs: &SweepInputs<'_>, values: &[f64]) -> Result<Vec<SweepRow>> {
    let t = inputs.training.as_ref().expect("checked by caller");
    let wanted: Vec<Result<usize>> = values.iter().map(|&v| positive_integer(v, "epochs")).collect();
    let max_epochs = wanted.iter().filter_map(|w| w.as_ref().ok()).copied().max();

    // one run to the longest duration; shorter ones are its checkpoints
    let mut snapshots: BTreeMap<usize, SinrModel> = BTreeMap::new();
    let mut run_error = None;
    if let Some(max_epochs) = max_epochs {
        let cfg = TrainConfig {
            epochs: max_epochs,
            checkpoint_every: 1,
            ..t.train_config.clone()
        };
        let keep: Vec<usize> = wanted.iter().filter_map(|w| w.as_ref().ok()).copied().collect();
        let mut sink = |epoch: usize, m: &SinrModel| {
            if keep.contains(&epoch) {
                snapshots.insert(epoch, m.clone());
            }
            Ok(())
        };
        if let Err(e) = train(t.observations, &t.model_config, &cfg, Some(&mut sink)) {
            run_error = Some(e.to_string());
        }
    }

    Ok(values
        .iter()
        .zip(wanted)
        .map(|(&v, w)| {
            let r = w.and_then(|epochs| {
                if let Some(e) = &run_error {
                    return Err(Error::domain(format!("training failed: {e}")));
                }
                let model = &snapshots[&epochs];
                let tc = TrainConfig {
                    epochs,
                    ..t.train_config.clone()
                };
                evaluate_model(model, inputs, &inputs.fusion, Some(t.model_config), Some(tc))
            });
            SweepRow::from_result(SweepParam::Epochs, v, r)
        })
        .collect())
}

fn sweep_hidden(inputs: &SweepInputs<'_>, values: &[f64]) -> Result<Vec<SweepRow>> {
    let t = inputs.training.as_ref().expect("checked by caller");
    Ok(values
        .iter()
        .map(|&v| {
            let r = positive_integer(v, "hidden_dim").and_then(|hidden_dim| {
                let mc = ModelConfig {
                    hidden_dim,
                    ..t.model_config
                };
                let model = train(t.observations, &mc, &t.train_config, None)?.model;
                evaluate_model(
                    &model,
                    inputs,
                    &inputs.fusion,
                    Some(mc),
                    Some(t.train_config.clone()),
                )
            });
            SweepRow::from_result(SweepParam::HiddenDim, v, r)
        })
        .collect())
}

/// Aligned plain-text table of a sweep, one line per row.
pub fn format_table(rows: &[SweepRow]) -> String {
    let map_names: Vec<String> = rows
        .iter()
        .filter_map(|r| r.report.as_ref())
        .flat_map(|r| r.map_scores.keys().cloned())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut header = vec![
        rows.first().map_or("value", |r| r.param.name()).to_string(),
        "vision_top1".to_string(),
        "fused_top1".to_string(),
        "gain_pp".to_string(),
    ];
    header.extend(map_names.iter().map(|n| format!("map_{n}")));

    let mut table: Vec<Vec<String>> = vec![header];
    for r in rows {
        let mut line = vec![format!("{}", r.value)];
        match (&r.report, &r.error) {
            (Some(rep), _) => {
                line.push(format!("{:.3}", 100.0 * rep.vision_only_top1));
                line.push(format!("{:.3}", 100.0 * rep.fused_top1));
                line.push(format!("{:+.3}", rep.gain_pp));
                for n in &map_names {
                    line.push(
                        rep.map_scores
                            .get(n)
                            .map_or("-".to_string(), |m| format!("{:.2}", 100.0 * m)),
                    );
                }
            }
            (None, e) => line.push(format!("FAILED: {}", e.as_deref().unwrap_or("unknown error"))),
        }
        table.push(line);
    }

    let ncols = table.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..ncols)
        .map(|c| {
            table
                .iter()
                .filter_map(|l| l.get(c))
                .map(String::len)
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for line in &table {
        let cells: Vec<String> = line
            .iter()
            .enumerate()
            .map(|(c, s)| format!("{s:>w$}", w = widths[c]))
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
    }
    out
}
