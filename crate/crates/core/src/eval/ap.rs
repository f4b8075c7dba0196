use crate::{Error, Result};

/// Indices ordered by descending score, ascending index on ties.
pub fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("scores checked for NaN")
            .then(a.cmp(&b))
    });
    idx
}

/// Average precision of `scores` against binary `labels`: the mean, over
/// positives, of the precision at the positive's rank.
///
/// Returns [`Error::Unevaluable`] when there are no positives.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::structure(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::domain("average precision of an empty list"));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::domain(format!("score {i} is NaN")));
    }
    if !labels.iter().any(|&l| l) {
        return Err(Error::Unevaluable);
    }

    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank0, &i) in ranking(scores).iter().enumerate() {
        if labels[i] {
            hits += 1;
            sum += hits as f64 / (rank0 + 1) as f64;
        }
    }
    Ok(sum / hits as f64)
}
