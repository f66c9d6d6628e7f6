//! Command-line interface: synthesize scenes, match detections, evaluate,
//! summarize datasets, estimate light directions, and render SVGs.
//!
//! All file outputs are JSON (written atomically via a sibling temp file)
//! except `render`, which writes one SVG per image. Failures print a single
//! JSON object `{"error": {"kind", "message"}}` to stderr and exit nonzero.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};
use serde::Serialize;

use crate::association::{
    load_paired, pair_and_match_all, save_diagnostics, save_paired, unmatched_totals, MatchConfig,
    PairedAssociation, ScoreMode,
};
use crate::light::{estimate_image_direction, light_loss};
use crate::model::{
    compute_stats, read_json, write_json_atomic, Dataset, Predictions, FORMAT_VERSION,
};
use crate::render::render_scene;
use crate::soap::{evaluate, matched_pairs, render_table, SoapConfig, Variant};
use crate::synth::{generate_to_dir, SceneSpec};
use crate::{Error, Result};

#[derive(Parser)]
#[command(
    name = "umbra",
    version,
    about = "Shadow-object instance pairing, evaluation, and synthetic scenes"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with perfect and noisy predictions.
    Synth(SynthArgs),
    /// Pair shadow/object instances and match them to associations.
    Match(MatchArgs),
    /// Match raw predictions, then score them against ground truth.
    Eval(EvalArgs),
    /// Summarize a ground-truth dataset.
    Stats(StatsArgs),
    /// Estimate one light direction per image from matched pairs.
    Light(LightArgs),
    /// Render ground truth and matched predictions as SVG images.
    Render(RenderArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Directory for ground_truth.json, predictions_perfect.json,
    /// predictions_noisy.json, and manifest.json.
    #[arg(long)]
    out: PathBuf,
    /// Scene spec JSON to start from; omitted fields use defaults.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Root seed; every image derives its own stream from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of images to generate.
    #[arg(long)]
    images: Option<u32>,
    /// Image width in pixels.
    #[arg(long)]
    width: Option<u32>,
    /// Image height in pixels.
    #[arg(long)]
    height: Option<u32>,
    /// Fewest pairs per image.
    #[arg(long)]
    pairs_min: Option<u32>,
    /// Most pairs per image.
    #[arg(long)]
    pairs_max: Option<u32>,
    /// Fixed light angle in radians for every image (default: per image).
    #[arg(long, allow_negative_numbers = true)]
    light_angle: Option<f64>,
    /// Smallest object footprint in pixels.
    #[arg(long)]
    size_min: Option<f64>,
    /// Largest object footprint in pixels.
    #[arg(long)]
    size_max: Option<f64>,
    /// Shortest shadow length as a multiple of object size.
    #[arg(long)]
    length_scale_min: Option<f64>,
    /// Longest shadow length as a multiple of object size.
    #[arg(long)]
    length_scale_max: Option<f64>,
    /// Gaussian sigma added to prediction box coordinates.
    #[arg(long)]
    noise_box_sigma: Option<f64>,
    /// Mask distortion: positive dilates, negative erodes.
    #[arg(long, allow_negative_numbers = true)]
    noise_morphology: Option<i32>,
    /// Expected spurious detection triples per image.
    #[arg(long)]
    noise_fp_rate: Option<f64>,
    /// Probability of dropping each true pair.
    #[arg(long)]
    noise_fn_rate: Option<f64>,
    /// Gaussian sigma added to association light angles.
    #[arg(long)]
    noise_angle_sigma: Option<f64>,
}

#[derive(Args)]
struct MatchArgs {
    /// Raw prediction JSON (instances + associations).
    #[arg(long)]
    pred: PathBuf,
    /// Output file for matched pairs; diagnostics go to
    /// <stem>.diagnostics.json next to it.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    matching: MatchFlags,
}

#[derive(Args)]
struct MatchFlags {
    /// Multiplier on the shadow box height in the candidate distance test.
    #[arg(long, default_value_t = 1.0)]
    threshold_scale: f64,
    /// Candidate/association IoU must exceed this (strictly).
    #[arg(long, default_value_t = 0.0)]
    iou_floor: f64,
    /// How the combined score folds the three detection scores.
    #[arg(long, value_enum, default_value_t = ScoreMode::GeometricMean)]
    score_mode: ScoreMode,
}

impl MatchFlags {
    fn config(&self) -> MatchConfig {
        MatchConfig {
            threshold_scale: self.threshold_scale,
            iou_floor: self.iou_floor,
            score_mode: self.score_mode,
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    /// Ground-truth JSON.
    #[arg(long)]
    gt: PathBuf,
    /// Raw prediction JSON; matching runs internally before scoring.
    #[arg(long)]
    pred: PathBuf,
    /// Write the full evaluation report here as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overlap measure: bounding boxes or pixel masks.
    #[arg(long, value_enum, default_value_t = Variant::Box)]
    variant: Variant,
    /// IoU thresholds: "start:step:stop" or a comma-separated list.
    #[arg(long, default_value = "0.5:0.05:0.95")]
    taus: String,
    /// Fold angle differences into (-pi, pi] before the light loss.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    wrap_angles: bool,
    /// Method name shown in the results table.
    #[arg(long, default_value = "umbra")]
    method: String,
    #[command(flatten)]
    matching: MatchFlags,
}

#[derive(Args)]
struct StatsArgs {
    /// Ground-truth JSON.
    #[arg(long)]
    gt: PathBuf,
    /// Write statistics here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LightArgs {
    /// Matched pairs JSON, as written by `match`.
    #[arg(long)]
    pred: PathBuf,
    /// Write per-image estimates here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(group = ArgGroup::new("source").required(true).multiple(true).args(["gt", "pred"]))]
struct RenderArgs {
    /// Ground-truth JSON to draw as filled masks.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Matched pairs JSON to draw as boxes and light arrows.
    #[arg(long)]
    pred: Option<PathBuf>,
    /// Directory for image_<id>.svg files.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Match(args) => cmd_match(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Light(args) => cmd_light(args),
        Command::Render(args) => cmd_render(args),
    }
}

/// Expands a threshold expression: either `start:step:stop` (inclusive, with
/// a small tolerance at the top end) or a comma-separated list.
fn parse_taus(text: &str) -> Result<Vec<f64>> {
    let invalid = |msg: &str| Error::Validation(format!("thresholds {text:?}: {msg}"));
    let number = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|e| invalid(&format!("{e} in {s:?}")))
    };
    let taus = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(invalid("expected start:step:stop"));
        }
        let (start, step, stop) = (number(parts[0])?, number(parts[1])?, number(parts[2])?);
        if !(step.is_finite() && step > 0.0) {
            return Err(invalid("step must be positive"));
        }
        let mut taus = Vec::new();
        for i in 0.. {
            let v = start + step * i as f64;
            if v > stop + 1e-9 {
                break;
            }
            taus.push(v);
            if taus.len() > 1000 {
                return Err(invalid("more than 1000 thresholds"));
            }
        }
        taus
    } else {
        text.split(',').map(number).collect::<Result<Vec<f64>>>()?
    };
    if taus.is_empty() {
        return Err(invalid("expands to no thresholds"));
    }
    Ok(taus)
}

fn diagnostics_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("matched");
    out.with_file_name(format!("{stem}.diagnostics.json"))
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let mut spec: SceneSpec = match &args.spec {
        Some(path) => read_json(path)?,
        None => SceneSpec::default(),
    };
    macro_rules! apply {
        ($($field:ident => $target:expr),* $(,)?) => {
            $(if let Some(v) = args.$field { $target = v; })*
        };
    }
    apply!(
        seed => spec.seed,
        images => spec.images,
        width => spec.width,
        height => spec.height,
        pairs_min => spec.pairs_min,
        pairs_max => spec.pairs_max,
        size_min => spec.size_min,
        size_max => spec.size_max,
        length_scale_min => spec.length_scale_min,
        length_scale_max => spec.length_scale_max,
        noise_box_sigma => spec.noise.box_jitter_sigma,
        noise_morphology => spec.noise.mask_morphology,
        noise_fp_rate => spec.noise.false_positive_rate,
        noise_fn_rate => spec.noise.false_negative_rate,
        noise_angle_sigma => spec.noise.angle_sigma,
    );
    if args.light_angle.is_some() {
        spec.light_angle = args.light_angle;
    }
    let scene = generate_to_dir(&spec, &args.out)?;
    println!(
        "generated {} images with {} pairs -> {}",
        scene.manifest.images.len(),
        scene.manifest.total_pairs,
        args.out.display()
    );
    Ok(())
}

fn cmd_match(args: MatchArgs) -> Result<()> {
    let preds = Predictions::load(&args.pred)?;
    let config = args.matching.config();
    let (paired, diagnostics) = pair_and_match_all(&preds, &config)?;
    save_paired(&args.out, &paired)?;
    save_diagnostics(&diagnostics_path(&args.out), &diagnostics, &config)?;
    println!(
        "matched {} pairs across {} images -> {}",
        paired.len(),
        diagnostics.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let dataset = Dataset::load(&args.gt)?;
    let preds = Predictions::load(&args.pred)?;
    let (paired, diagnostics) = pair_and_match_all(&preds, &args.matching.config())?;
    let soap_config = SoapConfig {
        taus: parse_taus(&args.taus)?,
        variant: args.variant,
    };
    let report = evaluate(&paired, &dataset, &soap_config)?;

    // Light-angle regression over the true positives at the lowest threshold.
    let lowest_tau = report.taus[0];
    let matches = matched_pairs(&paired, &dataset, lowest_tau, args.variant)?;
    let losses: Vec<f64> = matches
        .iter()
        .filter_map(|(pred, gt)| {
            gt.light_angle.map(|gt_angle| {
                light_loss(
                    pred.light_angle.radians(),
                    gt_angle.radians(),
                    args.wrap_angles,
                )
            })
        })
        .collect();
    let light_loss_mean =
        (!losses.is_empty()).then(|| losses.iter().sum::<f64>() / losses.len() as f64);

    print!("{}", render_table(&args.method, &report));
    if let Some(loss) = light_loss_mean {
        println!("light_loss_mean  {loss:.4}");
    }

    if let Some(out) = &args.out {
        let mut value = serde_json::to_value(&report).expect("report serializes");
        let obj = value.as_object_mut().expect("report is a JSON object");
        obj.insert("format_version".into(), FORMAT_VERSION.into());
        obj.insert("method".into(), args.method.clone().into());
        obj.insert(
            "light_loss_mean".into(),
            serde_json::to_value(light_loss_mean).expect("number serializes"),
        );
        obj.insert(
            "matched_at_lowest_tau".into(),
            (matches.len() as u64).into(),
        );
        let (shadows, objects, associations) = unmatched_totals(&diagnostics);
        obj.insert(
            "unmatched".into(),
            serde_json::json!({
                "shadows": shadows,
                "objects": objects,
                "associations": associations,
            }),
        );
        write_json_atomic(out, &value)?;
    }
    Ok(())
}

fn cmd_stats(args: StatsArgs) -> Result<()> {
    let dataset = Dataset::load(&args.gt)?;
    let stats = compute_stats(&dataset)?;
    let mut value = serde_json::to_value(&stats).expect("stats serialize");
    value
        .as_object_mut()
        .expect("stats are a JSON object")
        .insert("format_version".into(), FORMAT_VERSION.into());
    match &args.out {
        Some(path) => write_json_atomic(path, &value),
        None => {
            println!("{value}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct LightEstimate {
    image_id: u64,
    angle_radians: f64,
    angle_degrees: f64,
    pairs: u64,
}

#[derive(Serialize)]
struct LightFile {
    format_version: u32,
    images: Vec<LightEstimate>,
}

fn cmd_light(args: LightArgs) -> Result<()> {
    let paired = load_paired(&args.pred)?;
    let mut by_image: BTreeMap<u64, Vec<PairedAssociation>> = BTreeMap::new();
    for pair in paired {
        by_image.entry(pair.image_id).or_default().push(pair);
    }
    let mut images = Vec::new();
    for (image_id, pairs) in &by_image {
        // Images whose pairs carry no usable direction are left out.
        if let Ok(angle) = estimate_image_direction(pairs) {
            images.push(LightEstimate {
                image_id: *image_id,
                angle_radians: angle.radians(),
                angle_degrees: angle.degrees(),
                pairs: pairs.len() as u64,
            });
        }
    }
    let file = LightFile {
        format_version: FORMAT_VERSION,
        images,
    };
    match &args.out {
        Some(path) => write_json_atomic(path, &file),
        None => {
            println!(
                "{}",
                serde_json::to_string(&file).expect("estimates serialize")
            );
            Ok(())
        }
    }
}

fn cmd_render(args: RenderArgs) -> Result<()> {
    let dataset = match &args.gt {
        Some(path) => Some(Dataset::load(path)?),
        None => None,
    };
    let paired = match &args.pred {
        Some(path) => load_paired(path)?,
        None => Vec::new(),
    };
    let mut by_image: BTreeMap<u64, Vec<PairedAssociation>> = BTreeMap::new();
    for pair in paired {
        by_image.entry(pair.image_id).or_default().push(pair);
    }
    let mut image_ids: BTreeSet<u64> = by_image.keys().copied().collect();
    if let Some(ds) = &dataset {
        image_ids.extend(ds.images().map(|i| i.id));
    }

    std::fs::create_dir_all(&args.out).map_err(|source| Error::Io {
        path: args.out.clone(),
        source,
    })?;
    let empty: Vec<PairedAssociation> = Vec::new();
    for &id in &image_ids {
        let pairs = by_image.get(&id).unwrap_or(&empty);
        let (width, height, gt_pairs) = match dataset.as_ref().and_then(|ds| ds.image(id)) {
            Some(info) => (
                info.width,
                info.height,
                dataset.as_ref().expect("checked above").pairs_for(id),
            ),
            None => {
                // No ground truth for this image: size the canvas to fit the
                // predictions.
                let mut extent = (64.0f64, 64.0f64);
                for p in pairs {
                    for b in [&p.shadow.bbox, &p.object.bbox, &p.association.bbox] {
                        extent.0 = extent.0.max(b.x_max());
                        extent.1 = extent.1.max(b.y_max());
                    }
                }
                (
                    extent.0.ceil() as u32 + 8,
                    extent.1.ceil() as u32 + 8,
                    &[][..],
                )
            }
        };
        let svg = render_scene(width, height, gt_pairs, pairs);
        let path = args.out.join(format!("image_{id}.svg"));
        std::fs::write(&path, svg).map_err(|source| Error::Io { path, source })?;
    }
    println!(
        "rendered {} images -> {}",
        image_ids.len(),
        args.out.display()
    );
    Ok(())
}
