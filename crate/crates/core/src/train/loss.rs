//! The full assume-negative loss for presence-only data.
//!
//! For an observation of species `z` at `x`, paired with a random location
//! `r`, and `S` species:
//!
//! ```text
//! L = (1/S) * [ λ·(−log p_z(x)) + Σ_{j≠z} −log(1 − p_j(x)) + Σ_j −log(1 − p_j(r)) ]
//! ```
//!
//! Probabilities are clamped to `[PROB_EPS, 1 − PROB_EPS]` before the logs;
//! the derivative of a clamped term is zero.

use serde::{Deserialize, Serialize};

use super::Observation;
use crate::geo::encode_unchecked;
use crate::model::{Dropout, Trace, Weight};
use crate::{Error, GeoCoordinate, Network, Result};

pub const PROB_EPS: f64 = 1e-7;

/// Batch-mean loss split into its three terms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub positive_term: f64,
    pub negative_term: f64,
    pub random_negative_term: f64,
}

impl LossBreakdown {
    fn from_terms(positive: f64, negative: f64, random: f64) -> Self {
        Self {
            total: positive + negative + random,
            positive_term: positive,
            negative_term: negative,
            random_negative_term: random,
        }
    }

    /// Elementwise mean of several breakdowns.
    pub fn mean(items: &[LossBreakdown]) -> LossBreakdown {
        if items.is_empty() {
            return LossBreakdown::default();
        }
        let n = items.len() as f64;
        let sum = |f: fn(&LossBreakdown) -> f64| items.iter().map(f).sum::<f64>() / n;
        Self::from_terms(
            sum(|l| l.positive_term),
            sum(|l| l.negative_term),
            sum(|l| l.random_negative_term),
        )
    }
}

fn validate<T: Weight>(
    model: &Network<T>,
    batch: &[Observation],
    random_locs: &[GeoCoordinate],
    lambda: f64,
) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::domain("empty batch"));
    }
    if batch.len() != random_locs.len() {
        return Err(Error::structure(format!(
            "{} observations but {} random locations",
            batch.len(),
            random_locs.len()
        )));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain(format!("positive weight {lambda} must be > 0")));
    }
    let s = model.num_species();
    for o in batch {
        if o.species_index >= s {
            return Err(Error::structure(format!(
                "species index {} but model has {s} species",
                o.species_index
            )));
        }
        o.coord.validate()?;
    }
    for r in random_locs {
        r.validate()?;
    }
    Ok(())
}

/// `−log(clamp(p))` and its derivative with respect to the logit.
fn neg_log(p: f64) -> (f64, f64) {
    if p < PROB_EPS {
        (-PROB_EPS.ln(), 0.0)
    } else if p > 1.0 - PROB_EPS {
        (-(1.0 - PROB_EPS).ln(), 0.0)
    } else {
        (-p.ln(), p - 1.0)
    }
}

/// `−log(1 − clamp(p))` and its derivative with respect to the logit.
fn neg_log_complement(p: f64) -> (f64, f64) {
    if p < PROB_EPS {
        (-(1.0 - PROB_EPS).ln(), 0.0)
    } else if p > 1.0 - PROB_EPS {
        (-PROB_EPS.ln(), 0.0)
    } else {
        (-(1.0 - p).ln(), p)
    }
}

fn run<T: Weight>(
    model: &Network<T>,
    batch: &[Observation],
    random_locs: &[GeoCoordinate],
    lambda: f64,
    mut dropout: Option<&mut Dropout<'_>>,
    mut grad: Option<&mut [f64]>,
) -> Result<LossBreakdown> {
    validate(model, batch, random_locs, lambda)?;
    let s = model.num_species();
    let b = batch.len() as f64;
    // every per-example term carries 1/S and the batch mean adds 1/B
    let scale = 1.0 / (s as f64 * b);

    let mut trace = Trace::default();
    let mut dlogits = vec![0.0; s];
    let (mut pos, mut neg, mut rnd) = (0.0, 0.0, 0.0);

    for (obs, r) in batch.iter().zip(random_locs) {
        let z = obs.species_index;

        model.forward_traced(&encode_unchecked(&obs.coord), dropout.as_deref_mut(), &mut trace);
        let mut ex_neg = 0.0;
        for (j, &p) in trace.probs.iter().enumerate() {
            if j == z {
                let (l, d) = neg_log(p);
                pos += lambda * l;
                dlogits[j] = lambda * d * scale;
            } else {
                let (l, d) = neg_log_complement(p);
                ex_neg += l;
                dlogits[j] = d * scale;
            }
        }
        neg += ex_neg;
        if let Some(g) = grad.as_deref_mut() {
            model.backward(&trace, &dlogits, g);
        }

        model.forward_traced(&encode_unchecked(r), dropout.as_deref_mut(), &mut trace);
        let mut ex_rnd = 0.0;
        for (j, &p) in trace.probs.iter().enumerate() {
            let (l, d) = neg_log_complement(p);
            ex_rnd += l;
            dlogits[j] = d * scale;
        }
        rnd += ex_rnd;
        if let Some(g) = grad.as_deref_mut() {
            model.backward(&trace, &dlogits, g);
        }
    }

    Ok(LossBreakdown::from_terms(pos * scale, neg * scale, rnd * scale))
}

/// Batch-mean loss. Passing `dropout` evaluates the network in training mode.
pub fn an_full_loss<T: Weight>(
    model: &Network<T>,
    batch: &[Observation],
    random_locs: &[GeoCoordinate],
    lambda: f64,
    dropout: Option<&mut Dropout<'_>>,
) -> Result<LossBreakdown> {
    run(model, batch, random_locs, lambda, dropout, None)
}

/// Loss together with its exact gradient, shaped like the model parameters.
pub fn loss_and_gradients<T: Weight>(
    model: &Network<T>,
    batch: &[Observation],
    random_locs: &[GeoCoordinate],
    lambda: f64,
    dropout: Option<&mut Dropout<'_>>,
) -> Result<(LossBreakdown, Network<f64>)> {
    let mut grad = Network::<f64>::zeros(model.shape());
    let loss = run(
        model,
        batch,
        random_locs,
        lambda,
        dropout,
        Some(grad.params_mut()),
    )?;
    Ok((loss, grad))
}

pub fn loss_gradients<T: Weight>(
    model: &Network<T>,
    batch: &[Observation],
    random_locs: &[GeoCoordinate],
    lambda: f64,
    dropout: Option<&mut Dropout<'_>>,
) -> Result<Network<f64>> {
    loss_and_gradients(model, batch, random_locs, lambda, dropout).map(|(_, g)| g)
}
