//! Benchmark tasks: Top-1 gain of the fused classifier, mean average
//! precision of range predictions, and parameter sweeps over both.

mod ap;
mod geoprior;
mod range;
mod sweep;

pub use ap::{average_precision, ranking};
pub use geoprior::{eval_geo_prior, ConfigEcho, EvalReport, GeoPriorEvalSet, PreparedGeoPrior};
pub use range::{mean_average_precision, RangeEvaluation, SpeciesAp};
pub use sweep::{format_table, sweep, SweepInputs, SweepParam, SweepRow, TrainingInputs};
