//! Evaluation and plumbing: metrics, entropy maps, synthetic scenes,
//! file formats and the ablation runner.

pub mod ablation;
pub mod io;
pub mod metrics;
pub mod synth;

use ndarray::Array2;

use crate::losses::row_entropy;

/// Per-point entropy divided by `ln K`, so every value lies in `[0, 1]`.
pub fn entropy_map(probs: &Array2<f64>) -> Vec<f64> {
    let k = probs.ncols();
    if k < 2 {
        return vec![0.0; probs.nrows()];
    }
    let norm = (k as f64).ln();
    probs
        .rows()
        .into_iter()
        .map(|row| (row_entropy(row.iter().copied()) / norm).clamp(0.0, 1.0))
        .collect()
}
