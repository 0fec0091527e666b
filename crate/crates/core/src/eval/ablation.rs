//! Module ablation: train each loss configuration on the same scene,
//! weak labels and seeds, and compare accuracy on a held-out scene.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::cloud::{LabelArray, PointCloud};
use crate::error::{Error, Result};
use crate::eval::entropy_map;
use crate::eval::metrics::{confusion, metrics};
use crate::eval::synth::{synth_scene, SceneSpec};
use crate::losses::LossToggles;
use crate::rng::{self, Stream};
use crate::trainer::{predict_full, train, TrainSchedule};
use crate::weak_labels::{cap_for_ratio, sample_weak_labels, WeakLabelSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    Baseline,
    Er,
    Epc,
    Ospl,
    ErOspl,
    Full,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::Baseline,
        Preset::Er,
        Preset::Epc,
        Preset::Ospl,
        Preset::ErOspl,
        Preset::Full,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Baseline => "baseline",
            Preset::Er => "er",
            Preset::Epc => "epc",
            Preset::Ospl => "ospl",
            Preset::ErOspl => "er+ospl",
            Preset::Full => "full",
        }
    }

    pub fn toggles(self) -> LossToggles {
        let (entropy, consistency, pseudo_labels) = match self {
            Preset::Baseline => (false, false, false),
            Preset::Er => (true, false, false),
            Preset::Epc => (false, true, false),
            Preset::Ospl => (false, false, true),
            Preset::ErOspl => (true, false, true),
            Preset::Full => (true, true, true),
        };
        LossToggles {
            entropy,
            consistency,
            pseudo_labels,
            ..LossToggles::ALL
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::contract(format!("unknown preset `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationConfig {
    pub train_scene: SceneSpec,
    pub test_scene: SceneSpec,
    /// Target fraction of weakly labeled training points.
    pub label_ratio: f64,
    pub seeds: Vec<u64>,
    pub schedule: TrainSchedule,
    pub presets: Vec<Preset>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        let train_scene = SceneSpec::default();
        let test_scene = SceneSpec {
            seed: train_scene.seed + 1000,
            ..train_scene.clone()
        };
        Self {
            train_scene,
            test_scene,
            label_ratio: 0.001,
            seeds: vec![0, 1, 2],
            // The reference backbone has no normalization layers and oscillates
            // at the library default of 1e-2 with momentum 0.98.
            schedule: TrainSchedule {
                epochs_per_stage: 20,
                steps_per_epoch: 50,
                learning_rate: 1e-3,
                ..TrainSchedule::default()
            },
            presets: Preset::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub preset: Preset,
    pub seed: u64,
    pub overall_accuracy: f64,
    pub average_f1: f64,
    /// Mean normalized entropy over unlabeled training points.
    pub unlabeled_entropy: f64,
    pub weak_labels: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PresetSummary {
    pub preset: Preset,
    pub mean_oa: f64,
    pub mean_f1: f64,
    pub mean_entropy: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AblationReport {
    pub runs: Vec<RunResult>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

impl AblationReport {
    pub fn summary(&self, preset: Preset) -> Option<PresetSummary> {
        let runs: Vec<&RunResult> = self.runs.iter().filter(|r| r.preset == preset).collect();
        if runs.is_empty() {
            return None;
        }
        Some(PresetSummary {
            preset,
            mean_oa: mean(runs.iter().map(|r| r.overall_accuracy)),
            mean_f1: mean(runs.iter().map(|r| r.average_f1)),
            mean_entropy: mean(runs.iter().map(|r| r.unlabeled_entropy)),
        })
    }

    pub fn summaries(&self) -> Vec<PresetSummary> {
        Preset::ALL.into_iter().filter_map(|p| self.summary(p)).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<10}  {:>8}  {:>8}  {:>8}\n",
            "preset", "oa %", "avg f1 %", "entropy"
        );
        for s in self.summaries() {
            let _ = writeln!(
                out,
                "{:<10}  {:>8.2}  {:>8.2}  {:>8.4}",
                s.preset.name(),
                100.0 * s.mean_oa,
                100.0 * s.mean_f1,
                s.mean_entropy
            );
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("preset,seed,oa,avg_f1,unlabeled_entropy,weak_labels\n");
        for r in &self.runs {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.preset.name(),
                r.seed,
                r.overall_accuracy,
                r.average_f1,
                r.unlabeled_entropy,
                r.weak_labels
            );
        }
        out
    }
}

/// Generated scenes and the weak labels drawn for one seed.
pub struct AblationData {
    pub train_cloud: PointCloud,
    pub train_truth: LabelArray,
    pub test_cloud: PointCloud,
    pub test_truth: LabelArray,
    pub class_count: usize,
}

impl AblationData {
    pub fn generate(config: &AblationConfig) -> Result<Self> {
        let train = synth_scene(&config.train_scene)?;
        let test = synth_scene(&config.test_scene)?;
        Ok(Self {
            class_count: train.catalog.class_count(),
            train_cloud: train.cloud,
            train_truth: train.labels,
            test_cloud: test.cloud,
            test_truth: test.labels,
        })
    }

    pub fn weak_labels(&self, ratio: f64, seed: u64) -> Result<WeakLabelSet> {
        let cap = cap_for_ratio(&self.train_truth, self.class_count, ratio);
        let catalog = crate::cloud::ClassCatalog::anonymous(self.class_count)?;
        let mut r = rng::stream(seed, Stream::LabelSampling);
        sample_weak_labels(&self.train_truth, &catalog, cap, &mut r, seed, None)
    }
}

/// Trains and scores one preset for one seed.
pub fn run_one(
    data: &AblationData,
    weak: &WeakLabelSet,
    schedule: &TrainSchedule,
    preset: Preset,
    seed: u64,
) -> Result<RunResult> {
    let schedule = TrainSchedule {
        seed,
        toggles: preset.toggles(),
        ..schedule.clone()
    };
    let outcome = train(&data.train_cloud, weak, data.class_count, &schedule)?;
    let test = predict_full(&outcome.params, &data.test_cloud, &schedule.batch, &schedule.features)?;
    let report = metrics(&confusion(&test.labels, &data.test_truth, data.class_count)?);
    let seen = predict_full(&outcome.params, &data.train_cloud, &schedule.batch, &schedule.features)?;
    let mask = weak.mask(data.train_cloud.len());
    let unlabeled_entropy = mean(
        entropy_map(&seen.probs)
            .into_iter()
            .zip(mask)
            .filter(|(_, labeled)| !labeled)
            .map(|(h, _)| h),
    );
    Ok(RunResult {
        preset,
        seed,
        overall_accuracy: report.overall_accuracy,
        average_f1: report.average_f1,
        unlabeled_entropy,
        weak_labels: weak.len(),
    })
}

/// Runs every configured preset for every seed. `progress` sees each result as it lands.
pub fn run_ablation(config: &AblationConfig, mut progress: impl FnMut(&RunResult)) -> Result<AblationReport> {
    if config.seeds.is_empty() || config.presets.is_empty() {
        return Err(Error::contract("ablation needs at least one seed and one preset"));
    }
    let data = AblationData::generate(config)?;
    let mut report = AblationReport::default();
    for &seed in &config.seeds {
        let weak = data.weak_labels(config.label_ratio, seed)?;
        for &preset in &config.presets {
            let result = run_one(&data, &weak, &config.schedule, preset, seed)?;
            progress(&result);
            report.runs.push(result);
        }
    }
    Ok(report)
}
