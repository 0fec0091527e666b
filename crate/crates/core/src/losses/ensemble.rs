//! Per-point moving-average predictions and the pseudo-labels drawn from them.

use ndarray::{Array2, ArrayView1};

use super::terms::row_entropy;
use super::{PredictionMatrix, PseudoLabelSet};
use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.9;

/// Exponential moving average of every training point's class probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStore {
    probs: Array2<f64>,
    visited: Vec<bool>,
    alpha: f64,
}

impl EnsembleStore {
    pub fn new(points: usize, class_count: usize, alpha: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::contract(format!("EMA coefficient must be in [0, 1), got {alpha}")));
        }
        Ok(Self {
            probs: Array2::zeros((points, class_count)),
            visited: vec![false; points],
            alpha,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.visited.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visited.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.probs.ncols()
    }

    pub fn is_visited(&self, point: usize) -> bool {
        self.visited[point]
    }

    /// Ensemble row of a visited point.
    pub fn get(&self, point: usize) -> Option<ArrayView1<'_, f64>> {
        self.visited[point].then(|| self.probs.row(point))
    }

    pub fn visited_fraction(&self) -> f64 {
        if self.visited.is_empty() {
            return 0.0;
        }
        self.visited.iter().filter(|&&v| v).count() as f64 / self.visited.len() as f64
    }

    /// `p~ <- alpha p~ + (1 - alpha) p`; a first visit copies `p`.
    pub fn update(&mut self, preds: &PredictionMatrix) -> Result<()> {
        if preds.probs.ncols() != self.class_count() {
            return Err(Error::contract("prediction width differs from the ensemble store"));
        }
        if let Some(&id) = preds.point_ids.iter().find(|&&id| id >= self.len()) {
            return Err(Error::contract(format!("point {id} outside an ensemble of {}", self.len())));
        }
        let alpha = self.alpha;
        for (row, &id) in preds.probs.rows().into_iter().zip(&preds.point_ids) {
            let mut target = self.probs.row_mut(id);
            if self.visited[id] {
                target.zip_mut_with(&row, |e, &p| *e = alpha * *e + (1.0 - alpha) * p);
            } else {
                target.assign(&row);
                self.visited[id] = true;
            }
        }
        Ok(())
    }
}

/// Per-point entropy (nats) and the confidence weight `1 - H / ln K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceField {
    pub entropy: Vec<f64>,
    pub weight: Vec<f64>,
}

pub fn confidence_weight(row: ArrayView1<f64>) -> f64 {
    let k = row.len() as f64;
    (1.0 - row_entropy(row.iter().copied()) / k.ln()).clamp(0.0, 1.0)
}

pub fn confidence_weights(rows: &Array2<f64>) -> ConfidenceField {
    let ln_k = (rows.ncols() as f64).ln();
    let entropy: Vec<f64> = rows
        .rows()
        .into_iter()
        .map(|r| row_entropy(r.iter().copied()))
        .collect();
    let weight = entropy.iter().map(|h| (1.0 - h / ln_k).clamp(0.0, 1.0)).collect();
    ConfidenceField { entropy, weight }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(row: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (c, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = c;
        }
    }
    best
}

/// Where the pseudo-label confidence weight comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConfidenceSource {
    /// Entropy of the ensemble row, the same row the label is taken from.
    #[default]
    Ensemble,
    /// Entropy of the current prediction.
    Instant,
}

/// Pseudo-labels for the unlabeled batch rows that have an ensemble.
///
/// `unlabeled[r]` flags batch row `r`; the label is the ensemble argmax and
/// the weight follows `source`.
pub fn pseudo_labels(
    store: &EnsembleStore,
    preds: &PredictionMatrix,
    unlabeled: &[bool],
    source: ConfidenceSource,
) -> Result<PseudoLabelSet> {
    if unlabeled.len() != preds.len() {
        return Err(Error::contract("unlabeled flags must match the batch rows"));
    }
    let mut set = PseudoLabelSet::default();
    for (r, &id) in preds.point_ids.iter().enumerate() {
        if !unlabeled[r] {
            continue;
        }
        let Some(ensemble) = store.get(id) else { continue };
        let weight = match source {
            ConfidenceSource::Ensemble => confidence_weight(ensemble),
            ConfidenceSource::Instant => confidence_weight(preds.probs.row(r)),
        };
        set.rows.push(r);
        set.point_ids.push(id);
        set.labels.push(argmax(ensemble));
        set.weights.push(weight);
    }
    Ok(set)
}
