//! Individual objectives. Each returns its value and its gradient with
//! respect to the batch probability matrix.

use ndarray::Array2;

use super::{PredictionMatrix, PseudoLabelSet, LOG_FLOOR};
use crate::error::{Error, Result};

#[inline]
fn safe_ln(p: f64) -> f64 {
    p.max(LOG_FLOOR).ln()
}

/// Mean cross-entropy over the rows that carry a class in `targets`.
pub fn seg_loss(preds: &PredictionMatrix, targets: &[Option<usize>]) -> Result<(f64, Array2<f64>)> {
    let (rows, k) = preds.probs.dim();
    if targets.len() != rows {
        return Err(Error::contract(format!("{} targets for {rows} rows", targets.len())));
    }
    let mut grad = Array2::zeros((rows, k));
    let labeled: Vec<(usize, usize)> = targets
        .iter()
        .enumerate()
        .filter_map(|(r, t)| t.map(|c| (r, c)))
        .collect();
    if let Some(&(r, c)) = labeled.iter().find(|&&(_, c)| c >= k) {
        return Err(Error::contract(format!("row {r} has label {c} but there are {k} classes")));
    }
    if labeled.is_empty() {
        return Ok((0.0, grad));
    }
    let n = labeled.len() as f64;
    let mut value = 0.0;
    for &(r, c) in &labeled {
        let p = preds.probs[[r, c]];
        value -= safe_ln(p);
        grad[[r, c]] = -1.0 / (p.max(LOG_FLOOR) * n);
    }
    Ok((value / n, grad))
}

/// Shannon entropy of every row in nats, with `0 ln 0 = 0`.
pub fn entropy(probs: &Array2<f64>) -> Vec<f64> {
    probs
        .rows()
        .into_iter()
        .map(|row| row_entropy(row.iter().copied()))
        .collect()
}

pub fn row_entropy(row: impl IntoIterator<Item = f64>) -> f64 {
    row.into_iter()
        .map(|p| if p > 0.0 { -p * safe_ln(p) } else { 0.0 })
        .sum()
}

/// Mean entropy over the rows flagged in `unlabeled`.
pub fn entropy_loss(preds: &PredictionMatrix, unlabeled: &[bool]) -> Result<(f64, Array2<f64>)> {
    let (rows, k) = preds.probs.dim();
    if unlabeled.len() != rows {
        return Err(Error::contract(format!("{} flags for {rows} rows", unlabeled.len())));
    }
    let mut grad = Array2::zeros((rows, k));
    let n = unlabeled.iter().filter(|&&u| u).count();
    if n == 0 {
        return Ok((0.0, grad));
    }
    let n = n as f64;
    let mut value = 0.0;
    for (r, _) in unlabeled.iter().enumerate().filter(|(_, &u)| u) {
        let row = preds.probs.row(r);
        value += row_entropy(row.iter().copied());
        for c in 0..k {
            grad[[r, c]] = -(safe_ln(row[c]) + 1.0) / n;
        }
    }
    Ok((value / n, grad))
}

/// Mean squared distance between each row and its ensemble target.
///
/// `targets[r]` is `None` for rows without an ensemble yet; they are
/// excluded from both the value and the normalizer. Targets are constants.
pub fn epc_loss(
    preds: &PredictionMatrix,
    targets: &[Option<ndarray::ArrayView1<f64>>],
) -> Result<(f64, Array2<f64>)> {
    let (rows, k) = preds.probs.dim();
    if targets.len() != rows {
        return Err(Error::contract(format!("{} ensemble rows for {rows} rows", targets.len())));
    }
    let mut grad = Array2::zeros((rows, k));
    let n = targets.iter().filter(|t| t.is_some()).count();
    if n == 0 {
        return Ok((0.0, grad));
    }
    let n = n as f64;
    let mut value = 0.0;
    for (r, target) in targets.iter().enumerate() {
        let Some(target) = target else { continue };
        for c in 0..k {
            let diff = preds.probs[[r, c]] - target[c];
            value += diff * diff;
            grad[[r, c]] = 2.0 * diff / n;
        }
    }
    Ok((value / n, grad))
}

/// Confidence-weighted cross-entropy against pseudo-labels, normalized by
/// the number of pseudo-labeled rows.
pub fn pl_loss(preds: &PredictionMatrix, pl: &PseudoLabelSet) -> Result<(f64, Array2<f64>)> {
    let (rows, k) = preds.probs.dim();
    let mut grad = Array2::zeros((rows, k));
    if pl.is_empty() {
        return Ok((0.0, grad));
    }
    let n = pl.len() as f64;
    let mut value = 0.0;
    for ((&r, &c), &w) in pl.rows.iter().zip(&pl.labels).zip(&pl.weights) {
        if r >= rows || c >= k {
            return Err(Error::contract(format!("pseudo-label ({r}, {c}) outside a {rows}x{k} batch")));
        }
        let p = preds.probs[[r, c]];
        value -= w * safe_ln(p);
        grad[[r, c]] = -w / (p.max(LOG_FLOOR) * n);
    }
    Ok((value / n, grad))
}

/// Gaussian ramp `exp(-5 (1 - T)^2)` with `T = min(step / length, 1)`.
pub fn rampup_weight(step: usize, rampup_length: usize) -> f64 {
    let t = (step as f64 / rampup_length.max(1) as f64).min(1.0);
    (-5.0 * (1.0 - t).powi(2)).exp()
}
