//! Presence-only training of the coordinate network.

mod adam;
mod loss;
mod sampling;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

pub use adam::Adam;
pub use loss::{an_full_loss, loss_and_gradients, loss_gradients, LossBreakdown, PROB_EPS};
pub use sampling::{cap_observations, sample_random_locations, Observation, ObservationSet};

use crate::model::Dropout;
use crate::{Error, ModelConfig, Result, SeededRng, SinrModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Weight of the positive term; `None` uses the number of species.
    pub pos_weight_lambda: Option<f64>,
    pub obs_cap: usize,
    pub seed: u64,
    /// Emit a checkpoint every this many epochs; 0 disables checkpoints.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 2048,
            learning_rate: 5e-4,
            pos_weight_lambda: None,
            obs_cap: 100,
            seed: 0,
            checkpoint_every: 5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::domain("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::domain("batch_size must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::domain("learning_rate must be positive"));
        }
        if self.obs_cap == 0 {
            return Err(Error::domain("obs_cap must be at least 1"));
        }
        if let Some(l) = self.pos_weight_lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::domain("pos_weight_lambda must be positive"));
            }
        }
        Ok(())
    }
}

/// Receives intermediate models during training.
pub trait CheckpointSink {
    fn save(&mut self, epoch: usize, model: &SinrModel) -> Result<()>;
}

impl<F> CheckpointSink for F
where
    F: FnMut(usize, &SinrModel) -> Result<()>,
{
    fn save(&mut self, epoch: usize, model: &SinrModel) -> Result<()> {
        self(epoch, model)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: SinrModel,
    /// Mean loss over the steps of each epoch.
    pub history: Vec<LossBreakdown>,
}

/// Trains a fresh model. Runs are bit-reproducible for a fixed seed.
pub fn train(
    set: &ObservationSet,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    mut checkpoints: Option<&mut dyn CheckpointSink>,
) -> Result<TrainOutcome> {
    train_config.validate()?;
    model_config.validate()?;
    if set.is_empty() {
        return Err(Error::domain("no observations to train on"));
    }
    if model_config.num_species != set.num_species() {
        return Err(Error::domain(format!(
            "model has {} species but observations have {}",
            model_config.num_species,
            set.num_species()
        )));
    }

    let data = cap_observations(set, train_config.obs_cap, train_config.seed)?;
    let mut rng = SeededRng::seed_from_u64(train_config.seed);
    let mut model = SinrModel::init(model_config, &mut rng)?;
    let mut adam = Adam::new(model.params().len(), train_config.learning_rate);
    let lambda = train_config.pos_weight_lambda.unwrap_or(set.num_species() as f64);

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(train_config.epochs);
    for epoch in 1..=train_config.epochs {
        order.shuffle(&mut rng);
        let mut steps = Vec::new();
        for chunk in order.chunks(train_config.batch_size) {
            let batch: Vec<Observation> = chunk.iter().map(|&i| data.records()[i]).collect();
            let randoms = sample_random_locations(batch.len(), &mut rng);
            let mut dropout = Dropout {
                rate: model_config.dropout_rate,
                rng: &mut rng,
            };
            let (loss, grad) = loss_and_gradients(&model, &batch, &randoms, lambda, Some(&mut dropout))?;
            adam.update(model.params_mut(), grad.params());
            steps.push(loss);
        }
        let mean = LossBreakdown::mean(&steps);
        log_epoch(epoch, &mean);
        history.push(mean);

        if train_config.checkpoint_every > 0 && epoch % train_config.checkpoint_every == 0 {
            if let Some(sink) = checkpoints.as_deref_mut() {
                sink.save(epoch, &model)?;
            }
        }
    }
    Ok(TrainOutcome { model, history })
}

fn log_epoch(epoch: usize, loss: &LossBreakdown) {
    if std::env::var_os("GEOPRIOR_VERBOSE").is_some() {
        eprintln!(
            "epoch {epoch:>3}  loss {:.6}  (pos {:.6}, neg {:.6}, rand {:.6})",
            loss.total, loss.positive_term, loss.negative_term, loss.random_negative_term
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::GeoCoordinate;

    fn tiny_set() -> ObservationSet {
        let mut records = Vec::new();
        for i in 0..40 {
            let t = i as f64;
            records.push(Observation {
                species_index: 0,
                coord: GeoCoordinate::new(-100.0 + t * 0.5, 40.0 + (t % 5.0)).unwrap(),
            });
            records.push(Observation {
                species_index: 1,
                coord: GeoCoordinate::new(100.0 - t * 0.5, -20.0 - (t % 5.0)).unwrap(),
            });
        }
        ObservationSet::new(records, 2).unwrap()
    }

    fn small_config() -> (ModelConfig, TrainConfig) {
        (
            ModelConfig {
                hidden_dim: 16,
                num_residual_blocks: 2,
                num_species: 2,
                dropout_rate: 0.1,
            },
            TrainConfig {
                epochs: 4,
                batch_size: 16,
                learning_rate: 1e-2,
                checkpoint_every: 2,
                seed: 5,
                ..TrainConfig::default()
            },
        )
    }

    #[test]
    fn checkpoints_follow_the_interval() {
        let (mc, tc) = small_config();
        let mut seen = Vec::new();
        let mut sink = |epoch: usize, _: &SinrModel| {
            seen.push(epoch);
            Ok(())
        };
        let out = train(&tiny_set(), &mc, &tc, Some(&mut sink)).unwrap();
        assert_eq!(seen, vec![2, 4]);
        assert_eq!(out.history.len(), 4);
    }

    #[test]
    fn same_seed_same_model() {
        let (mc, tc) = small_config();
        let a = train(&tiny_set(), &mc, &tc, None).unwrap();
        let b = train(&tiny_set(), &mc, &tc, None).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.history, b.history);
        let c = train(&tiny_set(), &mc, &TrainConfig { seed: 6, ..tc }, None).unwrap();
        assert_ne!(a.model, c.model);
    }

    #[test]
    fn early_checkpoint_equals_shorter_run() {
        let (mc, tc) = small_config();
        let mut at2 = None;
        let mut sink = |epoch: usize, m: &SinrModel| {
            if epoch == 2 {
                at2 = Some(m.clone());
            }
            Ok(())
        };
        train(&tiny_set(), &mc, &tc, Some(&mut sink)).unwrap();
        let short = train(&tiny_set(), &mc, &TrainConfig { epochs: 2, ..tc }, None).unwrap();
        assert_eq!(at2.unwrap(), short.model);
    }

    #[test]
    fn rejects_inconsistent_inputs() {
        let (mc, tc) = small_config();
        let empty = ObservationSet::new(vec![], 2).unwrap();
        assert!(train(&empty, &mc, &tc, None).is_err());
        let wrong = ModelConfig { num_species: 3, ..mc };
        assert!(train(&tiny_set(), &wrong, &tc, None).is_err());
        assert!(train(&tiny_set(), &mc, &TrainConfig { epochs: 0, ..tc }, None).is_err());
    }

    #[test]
    fn loss_decreases_on_separable_data() {
        let (mc, tc) = small_config();
        let out = train(&tiny_set(), &mc, &TrainConfig { epochs: 10, ..tc }, None).unwrap();
        assert!(out.history[9].total < out.history[0].total);
    }
}
