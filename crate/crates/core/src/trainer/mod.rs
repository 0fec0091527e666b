//! Two-stage training over potential-driven batches, and full-cloud inference.
//!
//! Every step draws a batch, augments and encodes it, runs the backbone,
//! evaluates the combined objective against the ensemble as it stood before
//! the step, applies one SGD update and finally folds the step's
//! predictions into the ensemble. Stage one ramps the entropy and
//! consistency weights up; stage two adds pseudo-labels with every weight
//! at one.

mod log;
mod schedule;

pub use log::{strip_wall_clock, EpochRecord, StepRecord, TrainLog, CSV_HEADER};
pub use schedule::TrainSchedule;

use std::time::Instant;

use ndarray::{Array2, Axis};

use crate::cloud::{AugmentParams, LabelArray, PointCloud};
use crate::error::{Error, Result};
use crate::eval::metrics::{confusion, metrics};
use crate::losses::{argmax, combined_loss, EnsembleStore, PredictionMatrix, Stage};
use crate::model::{
    backward, encode_features, forward, softmax, softmax_backward, ModelConfig, ModelParameters,
    SgdMomentum,
};
use crate::rng::{self, Rng, Stream};
use crate::sampler::{test_batches, BatchSpec, MiniBatch, PotentialField, TrainSampler};
use crate::model::FeatureConfig;
use crate::weak_labels::WeakLabelSet;

/// Mutable state of a run between steps.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub stage: Stage,
    /// Completed epochs across both stages.
    pub epoch: usize,
    pub global_step: usize,
    pub params: ModelParameters,
    pub optimizer: SgdMomentum,
    pub potentials: PotentialField,
    pub ensemble: EnsembleStore,
}

/// Result of a finished run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParameters,
    pub log: TrainLog,
    pub ensemble: EnsembleStore,
}

pub struct Trainer<'a> {
    cloud: &'a PointCloud,
    schedule: TrainSchedule,
    sampler: TrainSampler,
    targets: Vec<Option<usize>>,
    labeled_mask: Vec<bool>,
    augment_rng: Rng,
    state: TrainState,
    log: TrainLog,
    validation: Option<(&'a PointCloud, &'a LabelArray)>,
}

impl<'a> Trainer<'a> {
    pub fn new(
        cloud: &'a PointCloud,
        weak: &WeakLabelSet,
        class_count: usize,
        schedule: TrainSchedule,
    ) -> Result<Self> {
        schedule.validate()?;
        if cloud.is_empty() {
            return Err(Error::Data("cannot train on an empty cloud".into()));
        }
        if class_count < 2 {
            return Err(Error::contract("need at least two classes"));
        }
        let weak_labels = weak.to_label_array_checked(cloud.len(), class_count)?;
        let targets: Vec<Option<usize>> = (0..cloud.len()).map(|i| weak_labels.get(i)).collect();
        let labeled_mask = targets.iter().map(Option::is_some).collect();

        let config = ModelConfig {
            input_width: schedule.features.width(cloud.feature_width()),
            hidden_width: schedule.hidden_width,
            hidden_layers: schedule.hidden_layers,
            class_count,
        };
        let params = ModelParameters::init(&config, &mut rng::stream(schedule.seed, Stream::Init));
        let mut optimizer = SgdMomentum::new(&params, schedule.learning_rate, schedule.momentum);
        optimizer.decay = schedule.lr_decay;
        let potentials =
            PotentialField::init(cloud.len(), &mut rng::stream(schedule.seed, Stream::Potentials))?;
        let ensemble = EnsembleStore::new(cloud.len(), class_count, schedule.alpha)?;
        let sampler = TrainSampler::new(cloud, schedule.batch.clone())?;
        Ok(Self {
            cloud,
            augment_rng: rng::stream(schedule.seed, Stream::Augmentation),
            sampler,
            targets,
            labeled_mask,
            state: TrainState {
                stage: Stage::RampUp,
                epoch: 0,
                global_step: 0,
                params,
                optimizer,
                potentials,
                ensemble,
            },
            log: TrainLog::default(),
            validation: None,
            schedule,
        })
    }

    /// Evaluates OA and average F1 on `cloud` after every epoch.
    pub fn with_validation(mut self, cloud: &'a PointCloud, truth: &'a LabelArray) -> Self {
        self.validation = Some((cloud, truth));
        self
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn log(&self) -> &TrainLog {
        &self.log
    }

    pub fn schedule(&self) -> &TrainSchedule {
        &self.schedule
    }

    pub fn is_finished(&self) -> bool {
        self.state.global_step >= self.schedule.total_steps()
    }

    /// Runs one training step and returns its record.
    pub fn step(&mut self) -> Result<StepRecord> {
        let step = self.state.global_step;
        let stage = if step < self.schedule.stage_one_steps() {
            Stage::RampUp
        } else {
            Stage::Full
        };
        self.state.stage = stage;

        let batch =
            self.sampler
                .next_batch(&mut self.state.potentials, self.cloud, &self.labeled_mask)?;
        let centered = centered_coords(self.cloud, &batch);
        let augmentation =
            AugmentParams::sample(&self.schedule.augment, batch.len(), &mut self.augment_rng);
        let coords = augmentation.apply(&centered);
        let feats = encode_features(self.cloud, &batch.indices, &coords, &self.schedule.features)?;
        let output = forward(&self.state.params, &feats)?;
        let probs = softmax(output.logits.view());
        let preds = PredictionMatrix {
            probs,
            point_ids: batch.indices.clone(),
        };
        let targets: Vec<Option<usize>> = batch.indices.iter().map(|&i| self.targets[i]).collect();

        let loss = combined_loss(
            stage,
            step,
            self.schedule.rampup_length(),
            &preds,
            &targets,
            &self.state.ensemble,
            self.schedule.toggles,
        )?;
        if !loss.total.is_finite() {
            return Err(Error::Divergence {
                step,
                reason: format!("loss is {}", loss.total),
            });
        }
        let grad_logits = softmax_backward(preds.probs.view(), loss.grad_probs.view());
        let grads = backward(&self.state.params, &output, grad_logits.view())?;
        self.state
            .optimizer
            .step(&mut self.state.params, &grads)
            .map_err(|e| match e {
                Error::Divergence { reason, .. } => Error::Divergence { step, reason },
                other => other,
            })?;
        self.state.ensemble.update(&preds)?;
        self.state.global_step += 1;

        let record = StepRecord::new(step, stage, &loss, batch.len());
        self.log.steps.push(record.clone());
        Ok(record)
    }

    /// Runs one epoch; `None` once the schedule is exhausted.
    pub fn run_epoch(&mut self) -> Result<Option<EpochRecord>> {
        if self.is_finished() {
            return Ok(None);
        }
        let started = Instant::now();
        let first = self.log.steps.len();
        for _ in 0..self.schedule.steps_per_epoch {
            self.step()?;
        }
        self.state.epoch += 1;
        let validation = match self.validation {
            Some((cloud, truth)) => {
                let prediction = predict_full(
                    &self.state.params,
                    cloud,
                    &self.schedule.batch,
                    &self.schedule.features,
                )?;
                let report = metrics(&confusion(
                    &prediction.labels,
                    truth,
                    self.state.params.class_count(),
                )?);
                Some((report.overall_accuracy, report.average_f1))
            }
            None => None,
        };
        let record = EpochRecord::summarize(
            self.state.epoch,
            &self.log.steps[first..],
            started.elapsed().as_secs_f64(),
            validation,
        );
        self.log.epochs.push(record.clone());
        Ok(Some(record))
    }

    pub fn run(mut self) -> Result<TrainOutcome> {
        while self.run_epoch()?.is_some() {}
        Ok(self.finish())
    }

    pub fn finish(self) -> TrainOutcome {
        TrainOutcome {
            params: self.state.params,
            log: self.log,
            ensemble: self.state.ensemble,
        }
    }
}

/// Trains from scratch with `schedule`.
pub fn train(
    cloud: &PointCloud,
    weak: &WeakLabelSet,
    class_count: usize,
    schedule: &TrainSchedule,
) -> Result<TrainOutcome> {
    Trainer::new(cloud, weak, class_count, schedule.clone())?.run()
}

fn centered_coords(cloud: &PointCloud, batch: &MiniBatch) -> Vec<crate::cloud::Point> {
    let c = batch.center;
    batch
        .indices
        .iter()
        .map(|&i| {
            let p = cloud.coords()[i];
            [p[0] - c[0], p[1] - c[1], p[2] - c[2]]
        })
        .collect()
}

/// Per-point class probabilities averaged over every covering test batch.
#[derive(Debug, Clone, PartialEq)]
pub struct FullPrediction {
    pub probs: Array2<f64>,
    pub labels: LabelArray,
    /// Number of test batches that covered each point.
    pub coverage: Vec<usize>,
}

/// Tiles the cloud with overlapping test batches and averages predictions.
pub fn predict_full(
    params: &ModelParameters,
    cloud: &PointCloud,
    batch_spec: &BatchSpec,
    features: &FeatureConfig,
) -> Result<FullPrediction> {
    let k = params.class_count();
    let mut sums = Array2::<f64>::zeros((cloud.len(), k));
    let mut coverage = vec![0usize; cloud.len()];
    for batch in test_batches(cloud, batch_spec)? {
        let coords = centered_coords(cloud, &batch);
        let feats = encode_features(cloud, &batch.indices, &coords, features)?;
        let probs = softmax(forward(params, &feats)?.logits.view());
        for (row, &i) in probs.rows().into_iter().zip(&batch.indices) {
            sums.row_mut(i).scaled_add(1.0, &row);
            coverage[i] += 1;
        }
    }
    for (mut row, &n) in sums.axis_iter_mut(Axis(0)).zip(&coverage) {
        row /= n as f64;
    }
    let labels = LabelArray::new(
        sums.rows()
            .into_iter()
            .map(|r| argmax(r) as u32)
            .collect(),
    );
    Ok(FullPrediction {
        probs: sums,
        labels,
        coverage,
    })
}
