//! `wsseg`: synthesize scenes, draw weak labels, train, predict, evaluate
//! and run loss ablations from the shell.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 divergence.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use wsseg_core::eval::ablation::{run_ablation, AblationConfig, Preset};
use wsseg_core::eval::entropy_map;
use wsseg_core::eval::io::{read_catalog, read_cloud, write_catalog, write_cloud, write_entropy_map, write_probs};
use wsseg_core::eval::metrics::{confusion, metrics};
use wsseg_core::eval::synth::{synth_scene, SceneSpec};
use wsseg_core::model::Checkpoint;
use wsseg_core::rng::{self, Stream};
use wsseg_core::trainer::{predict_full, Trainer};
use wsseg_core::weak_labels::sample_weak_labels;
use wsseg_core::{ClassCatalog, Error, LabelArray, TrainSchedule, WeakLabelSet};

#[derive(Parser)]
#[command(name = "wsseg", version, about = "Weakly supervised point-cloud segmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic scene.
    Synth {
        /// key=value scene description; defaults apply to missing keys.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the class catalog here.
        #[arg(long)]
        classes: Option<PathBuf>,
    },
    /// Draw a class-balanced weak-label set from a labeled cloud.
    SampleLabels {
        #[arg(long)]
        cloud: PathBuf,
        /// Largest number of labels per class.
        #[arg(long)]
        cap: usize,
        /// Extend this sparser set instead of drawing from scratch.
        #[arg(long)]
        parent: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        classes: Option<PathBuf>,
    },
    /// Train a model from a cloud and its weak labels.
    Train {
        #[arg(long)]
        cloud: PathBuf,
        #[arg(long)]
        weak: PathBuf,
        /// key=value training schedule; defaults apply to missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch loss log, CSV.
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        classes: Option<PathBuf>,
    },
    /// Label every point of a cloud with a trained model.
    Predict {
        #[arg(long)]
        cloud: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        probs: Option<PathBuf>,
        #[arg(long)]
        entropy_map: Option<PathBuf>,
    },
    /// Compare predicted and true labels.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        classes: PathBuf,
        /// Defaults to the prediction path with a `.metrics.csv` suffix.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Train loss configurations side by side on one synthetic scene.
    Ablate(AblateArgs),
}

#[derive(Args)]
struct AblateArgs {
    /// Presets to run: baseline, er, epc, ospl, er+ospl, full.
    #[arg(long, value_delimiter = ',', default_value = "baseline,er,epc,ospl,er+ospl,full", value_parser = parse_preset)]
    preset: Vec<Preset>,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    seeds: Vec<u64>,
    /// Training scene; the test scene uses the same layout with seed + 1000.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Fraction of training points that receive weak labels.
    #[arg(long, default_value_t = 0.001)]
    ratio: f64,
    /// Per-run results, CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn parse_preset(s: &str) -> std::result::Result<Preset, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let divergence = e
                .chain()
                .any(|c| matches!(c.downcast_ref::<Error>(), Some(Error::Divergence { .. })));
            ExitCode::from(if divergence { 3 } else { 2 })
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth { spec, out, classes } => synth(spec.as_deref(), &out, classes.as_deref()),
        Command::SampleLabels {
            cloud,
            cap,
            parent,
            seed,
            out,
            classes,
        } => sample_labels(&cloud, cap, parent.as_deref(), seed, &out, classes.as_deref()),
        Command::Train {
            cloud,
            weak,
            config,
            out,
            log,
            classes,
        } => train(&cloud, &weak, config.as_deref(), &out, &log, classes.as_deref()),
        Command::Predict {
            cloud,
            model,
            out,
            probs,
            entropy_map,
        } => predict(&cloud, &model, &out, probs.as_deref(), entropy_map.as_deref()),
        Command::Evaluate {
            pred,
            truth,
            classes,
            csv,
        } => evaluate(&pred, &truth, &classes, csv.as_deref()),
        Command::Ablate(args) => ablate(args),
    }
}

fn synth(spec: Option<&Path>, out: &Path, classes: Option<&Path>) -> Result<()> {
    let spec = match spec {
        Some(p) => SceneSpec::read(p)?,
        None => SceneSpec::default(),
    };
    let scene = synth_scene(&spec)?;
    for w in &scene.warnings {
        eprintln!("warning: {w}");
    }
    write_cloud(out, &scene.cloud, Some(&scene.labels))?;
    if let Some(path) = classes {
        write_catalog(path, &scene.catalog)?;
    }
    let counts = scene.labels.class_counts(scene.catalog.class_count());
    println!("wrote {} points to {}", scene.cloud.len(), out.display());
    for (name, n) in scene.catalog.names().iter().zip(counts) {
        println!("  {name:<10} {n}");
    }
    Ok(())
}

fn labeled_cloud(path: &Path) -> Result<(wsseg_core::PointCloud, LabelArray)> {
    let (cloud, labels) = read_cloud(path)?;
    let labels = labels.ok_or_else(|| Error::Data(format!("{} has no label column", path.display())))?;
    Ok((cloud, labels))
}

/// The catalog file if given, otherwise anonymous classes up to the largest label seen.
fn catalog_for(classes: Option<&Path>, labels: &[u32]) -> Result<ClassCatalog> {
    if let Some(path) = classes {
        return Ok(read_catalog(path)?);
    }
    let max = labels
        .iter()
        .copied()
        .filter(|&l| l != LabelArray::IGNORE)
        .max()
        .ok_or_else(|| Error::Data("no labeled points to infer the class count from".into()))?;
    Ok(ClassCatalog::anonymous((max as usize + 1).max(2))?)
}

fn sample_labels(
    cloud: &Path,
    cap: usize,
    parent: Option<&Path>,
    seed: u64,
    out: &Path,
    classes: Option<&Path>,
) -> Result<()> {
    let (cloud, truth) = labeled_cloud(cloud)?;
    let catalog = catalog_for(classes, truth.as_slice())?;
    let parent = parent.map(|p| WeakLabelSet::read(p, cloud.len())).transpose()?;
    let mut rng = rng::stream(seed, Stream::LabelSampling);
    let weak = sample_weak_labels(&truth, &catalog, cap, &mut rng, seed, parent.as_ref())?;
    for w in &weak.warnings {
        eprintln!("warning: {w}");
    }
    weak.write(out)?;
    println!(
        "{} weak labels ({:.3} per mille) over {} points",
        weak.len(),
        1000.0 * weak.ratio,
        cloud.len()
    );
    Ok(())
}

fn meta_text(schedule: &TrainSchedule, catalog: &ClassCatalog) -> String {
    format!("classes={}\n{}", catalog.names().join(","), schedule.to_config_text())
}

fn split_meta(meta: &str) -> Result<(ClassCatalog, String)> {
    let (first, rest) = meta.split_once('\n').unwrap_or((meta, ""));
    let names = first
        .strip_prefix("classes=")
        .ok_or_else(|| anyhow!("checkpoint metadata lacks a class list"))?;
    let catalog = ClassCatalog::new(names.split(',').map(String::from).collect())?;
    Ok((catalog, rest.to_string()))
}

fn train(
    cloud: &Path,
    weak: &Path,
    config: Option<&Path>,
    out: &Path,
    log: &Path,
    classes: Option<&Path>,
) -> Result<()> {
    let (cloud, labels) = read_cloud(cloud)?;
    let weak = WeakLabelSet::read(weak, cloud.len())?;
    let schedule = match config {
        Some(p) => TrainSchedule::read(p)?,
        None => TrainSchedule::default(),
    };
    let seen: Vec<u32> = labels
        .as_ref()
        .map(|l| l.as_slice().to_vec())
        .unwrap_or_default()
        .into_iter()
        .chain(weak.labels.iter().copied())
        .collect();
    let catalog = catalog_for(classes, &seen)?;
    let meta = meta_text(&schedule, &catalog);
    let mut trainer = Trainer::new(&cloud, &weak, catalog.class_count(), schedule.clone())?;
    while let Some(epoch) = trainer.run_epoch()? {
        println!(
            "epoch {:>4}  stage {}  l_seg {:.4}  l_ent {:.4}  l_epc {:.5}  l_pl {:.4}",
            epoch.epoch, epoch.stage, epoch.l_seg, epoch.l_ent, epoch.l_epc, epoch.l_pl
        );
        if schedule.checkpoint_every > 0 && epoch.epoch % schedule.checkpoint_every == 0 {
            let path = PathBuf::from(format!("{}.epoch{}", out.display(), epoch.epoch));
            Checkpoint {
                params: trainer.state().params.clone(),
                meta: meta.clone(),
            }
            .write(&path)?;
        }
    }
    let outcome = trainer.finish();
    outcome.log.write_csv(log)?;
    Checkpoint {
        params: outcome.params,
        meta,
    }
    .write(out)?;
    println!("saved model to {}", out.display());
    Ok(())
}

fn predict(
    cloud: &Path,
    model: &Path,
    out: &Path,
    probs: Option<&Path>,
    entropy: Option<&Path>,
) -> Result<()> {
    let (cloud, _) = read_cloud(cloud)?;
    let checkpoint = Checkpoint::read(model)?;
    let (catalog, schedule_text) = split_meta(&checkpoint.meta)?;
    let schedule = TrainSchedule::from_config_text(&schedule_text, model)?;
    if checkpoint.params.class_count() != catalog.class_count() {
        bail!("checkpoint class list does not match its output layer");
    }
    let expected = schedule.features.width(cloud.feature_width());
    if checkpoint.params.input_width() != expected {
        bail!(Error::Data(format!(
            "model expects {} input features but this cloud yields {expected}",
            checkpoint.params.input_width()
        )));
    }
    let prediction = predict_full(&checkpoint.params, &cloud, &schedule.batch, &schedule.features)?;
    write_cloud(out, &cloud, Some(&prediction.labels))?;
    if let Some(path) = probs {
        write_probs(path, &prediction.probs)?;
    }
    if let Some(path) = entropy {
        write_entropy_map(path, &cloud, &entropy_map(&prediction.probs))?;
    }
    println!("labeled {} points into {}", cloud.len(), out.display());
    Ok(())
}

fn evaluate(pred: &Path, truth: &Path, classes: &Path, csv: Option<&Path>) -> Result<()> {
    let (pred_cloud, pred_labels) = labeled_cloud(pred)?;
    let (truth_cloud, truth_labels) = labeled_cloud(truth)?;
    if pred_cloud.len() != truth_cloud.len() {
        bail!(Error::Data(format!(
            "{} predicted points but {} ground-truth points",
            pred_cloud.len(),
            truth_cloud.len()
        )));
    }
    let catalog = read_catalog(classes)?;
    let report = metrics(&confusion(&pred_labels, &truth_labels, catalog.class_count())?);
    print!("{}", report.to_text(catalog.names()));
    let csv_path = csv
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(format!("{}.metrics.csv", pred.display())));
    std::fs::write(&csv_path, report.to_csv(catalog.names()))
        .with_context(|| format!("writing {}", csv_path.display()))?;
    Ok(())
}

fn ablate(args: AblateArgs) -> Result<()> {
    let mut config = AblationConfig {
        presets: args.preset,
        seeds: args.seeds,
        label_ratio: args.ratio,
        ..AblationConfig::default()
    };
    if let Some(path) = &args.scene {
        config.train_scene = SceneSpec::read(path)?;
        config.test_scene = SceneSpec {
            seed: config.train_scene.seed + 1000,
            ..config.train_scene.clone()
        };
    }
    if let Some(path) = &args.config {
        config.schedule = TrainSchedule::read(path)?;
    }
    let report = run_ablation(&config, |r| {
        println!(
            "{:<9} seed {:<3} oa {:6.2}%  avg f1 {:6.2}%  ({} weak labels)",
            r.preset.name(),
            r.seed,
            100.0 * r.overall_accuracy,
            100.0 * r.average_f1,
            r.weak_labels
        );
    })?;
    println!();
    print!("{}", report.to_text());
    if let Some(path) = &args.csv {
        std::fs::write(path, report.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
