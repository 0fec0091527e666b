//! Training objectives for sparse supervision.
//!
//! The total objective is
//! `l_seg + lambda_ent * l_ent + lambda_epc * l_epc + lambda_pl * l_pl`:
//! cross-entropy on weakly labeled points, entropy of unlabeled
//! predictions, squared distance to each point's moving-average ensemble,
//! and confidence-weighted cross-entropy against pseudo-labels taken from
//! that ensemble. Every term returns its gradient with respect to the batch
//! probabilities; [`crate::model::softmax_backward`] carries it to logits.

mod ensemble;
mod terms;

pub use ensemble::{
    argmax, confidence_weight, confidence_weights, pseudo_labels, ConfidenceField,
    ConfidenceSource, EnsembleStore, DEFAULT_ALPHA,
};
pub use terms::{entropy, entropy_loss, epc_loss, pl_loss, rampup_weight, row_entropy, seg_loss};

use ndarray::Array2;

use crate::error::{Error, Result};

/// Probabilities are clamped to this before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-12;

/// Batch class probabilities together with the cloud index of each row.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    pub probs: Array2<f64>,
    pub point_ids: Vec<usize>,
}

impl PredictionMatrix {
    pub fn new(probs: Array2<f64>, point_ids: Vec<usize>) -> Result<Self> {
        if probs.nrows() != point_ids.len() {
            return Err(Error::contract(format!(
                "{} probability rows for {} point ids",
                probs.nrows(),
                point_ids.len()
            )));
        }
        for (r, row) in probs.rows().into_iter().enumerate() {
            let sum = row.sum();
            if (sum - 1.0).abs() > 1e-6 || row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::contract(format!("row {r} is not a probability distribution")));
            }
        }
        Ok(Self { probs, point_ids })
    }

    pub fn len(&self) -> usize {
        self.point_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.point_ids.is_empty()
    }
}

/// Hard pseudo-labels for a subset of batch rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PseudoLabelSet {
    /// Batch row of each pseudo-label.
    pub rows: Vec<usize>,
    pub point_ids: Vec<usize>,
    pub labels: Vec<usize>,
    pub weights: Vec<f64>,
}

impl PseudoLabelSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Ramp-up: entropy and consistency weights grow, no pseudo-labels.
    RampUp,
    /// Every enabled term at full weight, pseudo-labels every step.
    Full,
}

impl Stage {
    pub fn number(self) -> u8 {
        match self {
            Stage::RampUp => 1,
            Stage::Full => 2,
        }
    }

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Stage::RampUp),
            2 => Ok(Stage::Full),
            _ => Err(Error::contract(format!("training stage must be 1 or 2, got {n}"))),
        }
    }
}

/// Which auxiliary objectives participate. Disabled terms get weight 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LossToggles {
    pub entropy: bool,
    pub consistency: bool,
    pub pseudo_labels: bool,
    pub confidence_source: ConfidenceSource,
}

impl LossToggles {
    pub const ALL: Self = Self {
        entropy: true,
        consistency: true,
        pseudo_labels: true,
        confidence_source: ConfidenceSource::Ensemble,
    };

    pub const NONE: Self = Self {
        entropy: false,
        consistency: false,
        pseudo_labels: false,
        confidence_source: ConfidenceSource::Ensemble,
    };
}

impl Default for LossToggles {
    fn default() -> Self {
        Self::ALL
    }
}

/// Component values, their weights, and the gradient of the weighted total
/// with respect to the batch probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub l_seg: f64,
    pub l_ent: f64,
    pub l_epc: f64,
    pub l_pl: f64,
    pub lambda_ent: f64,
    pub lambda_epc: f64,
    pub lambda_pl: f64,
    pub total: f64,
    pub pseudo_label_count: usize,
    pub grad_probs: Array2<f64>,
}

/// Loss weights for a stage; `step` counts from the start of training and
/// the ramp reaches 1 at `rampup_length`.
pub fn loss_weights(stage: Stage, step: usize, rampup_length: usize, toggles: LossToggles) -> (f64, f64, f64) {
    let ramp = match stage {
        Stage::RampUp => rampup_weight(step, rampup_length),
        Stage::Full => 1.0,
    };
    let on = |flag: bool, w: f64| if flag { w } else { 0.0 };
    (
        on(toggles.entropy, ramp),
        on(toggles.consistency, ramp),
        on(toggles.pseudo_labels && stage == Stage::Full, 1.0),
    )
}

/// Evaluates every term for one batch.
///
/// `targets[r]` is the weak label of row `r`, if any. The store is read
/// as it was before this step's update. Terms with zero weight are still
/// evaluated for logging but contribute nothing to the gradient.
pub fn combined_loss(
    stage: Stage,
    step: usize,
    rampup_length: usize,
    preds: &PredictionMatrix,
    targets: &[Option<usize>],
    store: &EnsembleStore,
    toggles: LossToggles,
) -> Result<LossBreakdown> {
    let (lambda_ent, lambda_epc, lambda_pl) = loss_weights(stage, step, rampup_length, toggles);
    let unlabeled: Vec<bool> = targets.iter().map(Option::is_none).collect();

    let (l_seg, mut grad) = seg_loss(preds, targets)?;
    let (l_ent, g_ent) = entropy_loss(preds, &unlabeled)?;
    if let Some(&id) = preds.point_ids.iter().find(|&&id| id >= store.len()) {
        return Err(Error::contract(format!("point {id} outside the ensemble store")));
    }
    let ensemble: Vec<_> = preds.point_ids.iter().map(|&id| store.get(id)).collect();
    let (l_epc, g_epc) = epc_loss(preds, &ensemble)?;
    let pl = if stage == Stage::Full {
        pseudo_labels(store, preds, &unlabeled, toggles.confidence_source)?
    } else {
        PseudoLabelSet::default()
    };
    let (l_pl, g_pl) = pl_loss(preds, &pl)?;

    for (lambda, g) in [(lambda_ent, &g_ent), (lambda_epc, &g_epc), (lambda_pl, &g_pl)] {
        if lambda != 0.0 {
            grad.scaled_add(lambda, g);
        }
    }
    Ok(LossBreakdown {
        l_seg,
        l_ent,
        l_epc,
        l_pl,
        lambda_ent,
        lambda_epc,
        lambda_pl,
        total: l_seg + lambda_ent * l_ent + lambda_epc * l_epc + lambda_pl * l_pl,
        pseudo_label_count: pl.len(),
        grad_probs: grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_preds(rows: usize, k: usize, rng: &mut ChaCha8Rng) -> PredictionMatrix {
        let z = Array2::from_shape_fn((rows, k), |_| rng.random_range(-2.0..2.0));
        PredictionMatrix::new(crate::model::softmax(z.view()), (0..rows).collect()).unwrap()
    }

    #[test]
    fn prediction_matrix_validation() {
        assert!(PredictionMatrix::new(array![[0.5, 0.6]], vec![0]).is_err());
        assert!(PredictionMatrix::new(array![[0.5, 0.5]], vec![]).is_err());
    }

    #[test]
    fn stage_one_first_step_without_unlabeled_rows_is_seg_only() {
        let preds = PredictionMatrix::new(array![[0.3, 0.7], [0.6, 0.4]], vec![0, 1]).unwrap();
        let store = EnsembleStore::new(2, 2, 0.9).unwrap();
        let out = combined_loss(Stage::RampUp, 0, 100, &preds, &[Some(1), Some(0)], &store, LossToggles::ALL).unwrap();
        let (seg, g) = seg_loss(&preds, &[Some(1), Some(0)]).unwrap();
        assert_eq!(out.total, seg);
        assert_eq!(out.grad_probs, g);
        assert_eq!(out.lambda_pl, 0.0);
    }

    #[test]
    fn stage_two_total_is_component_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let preds = random_preds(20, 4, &mut rng);
        let mut store = EnsembleStore::new(20, 4, 0.9).unwrap();
        let earlier = random_preds(20, 4, &mut rng);
        store.update(&PredictionMatrix::new(earlier.probs.slice(ndarray::s![..15, ..]).to_owned(), (0..15).collect()).unwrap()).unwrap();
        let targets: Vec<Option<usize>> = (0..20).map(|i| (i % 5 == 0).then_some(i % 4)).collect();
        let out = combined_loss(Stage::Full, 500, 100, &preds, &targets, &store, LossToggles::ALL).unwrap();
        assert_eq!((out.lambda_ent, out.lambda_epc, out.lambda_pl), (1.0, 1.0, 1.0));
        let unl: Vec<bool> = targets.iter().map(Option::is_none).collect();
        let seg = seg_loss(&preds, &targets).unwrap();
        let ent = entropy_loss(&preds, &unl).unwrap();
        let ens: Vec<_> = (0..20).map(|i| store.get(i)).collect();
        let epc = epc_loss(&preds, &ens).unwrap();
        let pl = pseudo_labels(&store, &preds, &unl, ConfidenceSource::Ensemble).unwrap();
        assert_eq!(pl.len(), 12);
        let plv = pl_loss(&preds, &pl).unwrap();
        let sum = seg.0 + ent.0 + epc.0 + plv.0;
        assert!((out.total - sum).abs() < 1e-12);
        let grad = &seg.1 + &ent.1 + &epc.1 + &plv.1;
        assert!(out.grad_probs.iter().zip(grad.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn final_ramp_step_weights() {
        let (e, c, p) = loss_weights(Stage::RampUp, 99, 99, LossToggles::ALL);
        assert_eq!((e, c, p), (1.0, 1.0, 0.0));
        let (e, c, p) = loss_weights(Stage::Full, 100, 99, LossToggles::ALL);
        assert_eq!((e, c, p), (1.0, 1.0, 1.0));
        assert_eq!(loss_weights(Stage::Full, 0, 99, LossToggles::NONE), (0.0, 0.0, 0.0));
    }

    #[test]
    fn invalid_stage_number() {
        assert!(Stage::from_number(3).is_err());
        assert_eq!(Stage::from_number(2).unwrap(), Stage::Full);
    }

    #[test]
    fn all_values_non_negative_and_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let preds = random_preds(12, 3, &mut rng);
            let mut store = EnsembleStore::new(12, 3, 0.9).unwrap();
            store.update(&random_preds(12, 3, &mut rng)).unwrap();
            let targets: Vec<Option<usize>> = (0..12).map(|i| (i < 3).then_some(i)).collect();
            let out = combined_loss(Stage::Full, 0, 1, &preds, &targets, &store, LossToggles::ALL).unwrap();
            for v in [out.l_seg, out.l_ent, out.l_epc, out.l_pl, out.total] {
                assert!(v.is_finite() && v >= 0.0);
            }
        }
    }

    #[test]
    fn entropy_descent_is_monotone_on_a_frozen_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut logits = Array2::from_shape_fn((10, 4), |_| rng.random_range(-0.5..0.5));
        let mask = vec![true; 10];
        let mut last = f64::INFINITY;
        for _ in 0..100 {
            let p = crate::model::softmax(logits.view());
            let preds = PredictionMatrix::new(p.clone(), (0..10).collect()).unwrap();
            let (v, g) = entropy_loss(&preds, &mask).unwrap();
            assert!(v < last, "entropy rose from {last} to {v}");
            last = v;
            let gz = crate::model::softmax_backward(p.view(), g.view());
            logits.scaled_add(-0.5, &gz);
        }
    }
}
