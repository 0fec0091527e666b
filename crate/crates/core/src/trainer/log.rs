use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::losses::{LossBreakdown, Stage};

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub stage: u8,
    pub batch_points: usize,
    pub pseudo_labels: usize,
    pub l_seg: f64,
    pub l_ent: f64,
    pub l_epc: f64,
    pub l_pl: f64,
    pub lambda_ent: f64,
    pub lambda_epc: f64,
    pub lambda_pl: f64,
    pub total: f64,
}

impl StepRecord {
    pub fn new(step: usize, stage: Stage, loss: &LossBreakdown, batch_points: usize) -> Self {
        Self {
            step,
            stage: stage.number(),
            batch_points,
            pseudo_labels: loss.pseudo_label_count,
            l_seg: loss.l_seg,
            l_ent: loss.l_ent,
            l_epc: loss.l_epc,
            l_pl: loss.l_pl,
            lambda_ent: loss.lambda_ent,
            lambda_epc: loss.lambda_epc,
            lambda_pl: loss.lambda_pl,
            total: loss.total,
        }
    }
}

/// Epoch means of the component losses; weights are those of the epoch's last step.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based, counted across both stages.
    pub epoch: usize,
    pub stage: u8,
    pub l_seg: f64,
    pub l_ent: f64,
    pub l_epc: f64,
    pub l_pl: f64,
    pub lambda_ent: f64,
    pub lambda_epc: f64,
    pub lambda_pl: f64,
    pub wall_seconds: f64,
    /// Overall accuracy and average F1 on the validation cloud, if any.
    pub validation: Option<(f64, f64)>,
}

impl EpochRecord {
    pub fn summarize(
        epoch: usize,
        steps: &[StepRecord],
        wall_seconds: f64,
        validation: Option<(f64, f64)>,
    ) -> Self {
        let n = steps.len().max(1) as f64;
        let mean = |f: fn(&StepRecord) -> f64| steps.iter().map(f).sum::<f64>() / n;
        let last = steps.last().expect("an epoch has at least one step");
        Self {
            epoch,
            stage: last.stage,
            l_seg: mean(|s| s.l_seg),
            l_ent: mean(|s| s.l_ent),
            l_epc: mean(|s| s.l_epc),
            l_pl: mean(|s| s.l_pl),
            lambda_ent: last.lambda_ent,
            lambda_epc: last.lambda_epc,
            lambda_pl: last.lambda_pl,
            wall_seconds,
            validation,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
}

pub const CSV_HEADER: &str =
    "epoch,stage,l_seg,l_ent,l_epc,l_pl,lambda_ent,lambda_epc,lambda_pl,wall_clock_s";

impl TrainLog {
    /// One row per epoch. Validation columns are appended when present.
    pub fn to_csv(&self) -> String {
        let with_validation = self.epochs.iter().any(|e| e.validation.is_some());
        let mut out = String::from(CSV_HEADER);
        if with_validation {
            out.push_str(",val_oa,val_avg_f1");
        }
        out.push('\n');
        for e in &self.epochs {
            let _ = write!(
                out,
                "{},{},{},{},{},{},{},{},{},{:.3}",
                e.epoch,
                e.stage,
                e.l_seg,
                e.l_ent,
                e.l_epc,
                e.l_pl,
                e.lambda_ent,
                e.lambda_epc,
                e.lambda_pl,
                e.wall_seconds
            );
            if with_validation {
                match e.validation {
                    Some((oa, f1)) => {
                        let _ = write!(out, ",{oa},{f1}");
                    }
                    None => out.push_str(",,"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Mean of `l_seg` over a range of epochs.
    pub fn mean_seg_loss(&self, epochs: std::ops::Range<usize>) -> f64 {
        let slice = &self.epochs[epochs];
        slice.iter().map(|e| e.l_seg).sum::<f64>() / slice.len() as f64
    }
}

/// Drops the trailing wall-clock column, the only nondeterministic field.
pub fn strip_wall_clock(csv: &str) -> String {
    csv.lines()
        .map(|line| {
            let cols: Vec<&str> = line.split(',').collect();
            cols.iter()
                .enumerate()
                .filter(|(i, _)| *i != 9)
                .map(|(_, c)| *c)
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}
