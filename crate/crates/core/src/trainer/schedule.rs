use std::path::Path;

use crate::cloud::AugmentConfig;
use crate::error::{Error, Result};
use crate::losses::{ConfidenceSource, LossToggles, DEFAULT_ALPHA};
use crate::model::FeatureConfig;
use crate::sampler::BatchSpec;

/// Everything that shapes a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSchedule {
    pub epochs_per_stage: usize,
    pub steps_per_epoch: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Per-step multiplicative learning-rate decay; 1.0 disables it.
    pub lr_decay: f64,
    pub alpha: f64,
    pub seed: u64,
    pub batch: BatchSpec,
    pub features: FeatureConfig,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub toggles: LossToggles,
    pub augment: AugmentConfig,
    /// Write a checkpoint every this many epochs; 0 disables.
    pub checkpoint_every: usize,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            epochs_per_stage: 100,
            steps_per_epoch: 80,
            learning_rate: 1e-2,
            momentum: 0.98,
            lr_decay: 1.0,
            alpha: DEFAULT_ALPHA,
            seed: 0,
            batch: BatchSpec::default(),
            features: FeatureConfig::default(),
            hidden_width: 64,
            hidden_layers: 2,
            toggles: LossToggles::ALL,
            augment: AugmentConfig::default(),
            checkpoint_every: 0,
        }
    }
}

impl TrainSchedule {
    pub fn total_steps(&self) -> usize {
        2 * self.epochs_per_stage * self.steps_per_epoch
    }

    pub fn stage_one_steps(&self) -> usize {
        self.epochs_per_stage * self.steps_per_epoch
    }

    /// Ramp length in steps, chosen so the last stage-one step has weight 1.
    pub fn rampup_length(&self) -> usize {
        self.stage_one_steps().saturating_sub(1).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epochs_per_stage", self.epochs_per_stage),
            ("steps_per_epoch", self.steps_per_epoch),
            ("hidden_width", self.hidden_width),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::contract(format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::contract("learning rate must be positive and momentum in [0, 1)"));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::contract("lr_decay must be in (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::contract("alpha must be in [0, 1)"));
        }
        if self.augment.scale_min <= 0.0 || self.augment.scale_max < self.augment.scale_min {
            return Err(Error::contract("augmentation scale range is invalid"));
        }
        if self.augment.jitter_sigma < 0.0 {
            return Err(Error::contract("augmentation jitter must be non-negative"));
        }
        self.batch.validate()?;
        self.features.validate()
    }

    /// Flat `key=value` text, one entry per line, every field present.
    pub fn to_config_text(&self) -> String {
        let b = |v: bool| if v { "true" } else { "false" };
        let source = match self.toggles.confidence_source {
            ConfidenceSource::Ensemble => "ensemble",
            ConfidenceSource::Instant => "instant",
        };
        [
            format!("epochs_per_stage={}", self.epochs_per_stage),
            format!("steps_per_epoch={}", self.steps_per_epoch),
            format!("learning_rate={}", self.learning_rate),
            format!("momentum={}", self.momentum),
            format!("lr_decay={}", self.lr_decay),
            format!("alpha={}", self.alpha),
            format!("seed={}", self.seed),
            format!("batch_radius={}", self.batch.radius),
            format!("batch_point_cap={}", self.batch.point_cap),
            format!("potential_falloff={}", self.batch.falloff_exponent),
            format!("k_neighbors={}", self.features.k_neighbors),
            format!("height_scale={}", self.features.height_scale),
            format!("hidden_width={}", self.hidden_width),
            format!("hidden_layers={}", self.hidden_layers),
            format!("entropy={}", b(self.toggles.entropy)),
            format!("consistency={}", b(self.toggles.consistency)),
            format!("pseudo_labels={}", b(self.toggles.pseudo_labels)),
            format!("confidence_source={source}"),
            format!("augment_rotate={}", b(self.augment.rotate)),
            format!("augment_scale_min={}", self.augment.scale_min),
            format!("augment_scale_max={}", self.augment.scale_max),
            format!("augment_jitter={}", self.augment.jitter_sigma),
            format!("checkpoint_every={}", self.checkpoint_every),
        ]
        .join("\n")
            + "\n"
    }

    /// Parses config text over the defaults. Blank lines and `#` comments
    /// are skipped; unknown keys and duplicate keys are errors.
    pub fn from_config_text(text: &str, origin: &Path) -> Result<Self> {
        let mut s = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: origin.to_path_buf(),
                line: n + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(format!("expected key=value, got {line:?}")))?;
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key {key:?}")));
            }
            fn num<T: std::str::FromStr>(v: &str) -> Option<T> {
                v.parse().ok()
            }
            fn flag(v: &str) -> Option<bool> {
                match v {
                    "true" | "1" | "yes" => Some(true),
                    "false" | "0" | "no" => Some(false),
                    _ => None,
                }
            }
            let ok = match key {
                "epochs_per_stage" => num(value).map(|v| s.epochs_per_stage = v),
                "steps_per_epoch" => num(value).map(|v| s.steps_per_epoch = v),
                "learning_rate" => num(value).map(|v| s.learning_rate = v),
                "momentum" => num(value).map(|v| s.momentum = v),
                "lr_decay" => num(value).map(|v| s.lr_decay = v),
                "alpha" => num(value).map(|v| s.alpha = v),
                "seed" => num(value).map(|v| s.seed = v),
                "batch_radius" => num(value).map(|v| s.batch.radius = v),
                "batch_point_cap" => num(value).map(|v| s.batch.point_cap = v),
                "potential_falloff" => num(value).map(|v| s.batch.falloff_exponent = v),
                "k_neighbors" => num(value).map(|v| s.features.k_neighbors = v),
                "height_scale" => num(value).map(|v| s.features.height_scale = v),
                "hidden_width" => num(value).map(|v| s.hidden_width = v),
                "hidden_layers" => num(value).map(|v| s.hidden_layers = v),
                "entropy" => flag(value).map(|v| s.toggles.entropy = v),
                "consistency" => flag(value).map(|v| s.toggles.consistency = v),
                "pseudo_labels" => flag(value).map(|v| s.toggles.pseudo_labels = v),
                "confidence_source" => match value {
                    "ensemble" => Some(s.toggles.confidence_source = ConfidenceSource::Ensemble),
                    "instant" => Some(s.toggles.confidence_source = ConfidenceSource::Instant),
                    _ => None,
                },
                "augment_rotate" => flag(value).map(|v| s.augment.rotate = v),
                "augment_scale_min" => num(value).map(|v| s.augment.scale_min = v),
                "augment_scale_max" => num(value).map(|v| s.augment.scale_max = v),
                "augment_jitter" => num(value).map(|v| s.augment.jitter_sigma = v),
                "checkpoint_every" => num(value).map(|v| s.checkpoint_every = v),
                _ => return Err(err(format!("unknown key {key:?}"))),
            };
            if ok.is_none() {
                return Err(err(format!("invalid value {value:?} for {key}")));
            }
        }
        s.validate()?;
        Ok(s)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_config_text(&text, path)
    }
}
