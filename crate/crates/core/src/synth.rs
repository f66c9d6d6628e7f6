//! Seeded synthetic scene generation.
//!
//! Each image gets a light direction and a handful of objects standing on a
//! ground plane. An object's footprint edge (perpendicular to the light
//! direction) is shared between the body, which extrudes *toward* the light
//! angle, and its cast shadow, which extrudes the opposite way. Because the
//! two shapes grow from the same edge in opposite directions, the direction
//! from the shadow's centroid to the body's centroid recovers the image's
//! light angle almost exactly (up to pixel quantization).
//!
//! The generator emits four artifacts per run:
//!
//! * a ground-truth dataset (shadow + association masks per pair),
//! * *perfect* predictions that restate the ground truth with score 1.0,
//! * *noisy* predictions produced by pushing the perfect ones through a
//!   configurable corruption model (the zero-noise model reproduces the
//!   perfect predictions exactly),
//! * a manifest mapping every ground-truth pair to its prediction indices.
//!
//! Everything is deterministic in the seed: each image derives its own RNG
//! stream by hashing `(seed, image_id)`, so images are independent and a
//! whole run never depends on iteration order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

use crate::geometry::BBox;
use crate::light::{ground_truth_angle, LightAngle};
use crate::mask::{rasterize_convex_polygon, Mask, MaskError};
use crate::model::{
    check_format_version, default_format_version, write_json_atomic, AssociationDetection, Dataset,
    ImageInfo, InstanceDetection, InstanceKind, Predictions, FORMAT_VERSION,
};
use crate::{Error, Result};

/// Footprint shapes the generator can place.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    /// Thin and tall, like a pole: narrow base, long body.
    Post,
    /// Square-ish slab.
    Box,
    /// Elliptical blob.
    Ellipse,
}

/// Corruption model applied to the perfect predictions. The default is the
/// identity: every knob at zero (and true-positive scores pinned to 1.0)
/// reproduces the perfect predictions byte for byte.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    /// Standard deviation of Gaussian jitter added to every box coordinate.
    pub box_jitter_sigma: f64,
    /// Morphological distortion of instance masks: positive dilates by that
    /// many pixels, negative erodes.
    pub mask_morphology: i32,
    /// Scores of surviving detections are drawn uniformly from this range.
    pub tp_score_min: f64,
    pub tp_score_max: f64,
    /// Scores of injected false positives.
    pub fp_score_min: f64,
    pub fp_score_max: f64,
    /// Expected number of spurious detection triples per image.
    pub false_positive_rate: f64,
    /// Probability that a ground-truth pair is dropped entirely.
    pub false_negative_rate: f64,
    /// Standard deviation of Gaussian noise on association light angles.
    pub angle_sigma: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            box_jitter_sigma: 0.0,
            mask_morphology: 0,
            tp_score_min: 1.0,
            tp_score_max: 1.0,
            fp_score_min: 0.05,
            fp_score_max: 0.95,
            false_positive_rate: 0.0,
            false_negative_rate: 0.0,
            angle_sigma: 0.0,
        }
    }
}

impl NoiseModel {
    /// A moderate corruption level handy for exercising the full pipeline.
    pub fn standard() -> Self {
        NoiseModel {
            box_jitter_sigma: 1.5,
            mask_morphology: 1,
            tp_score_min: 0.55,
            tp_score_max: 0.99,
            fp_score_min: 0.05,
            fp_score_max: 0.5,
            false_positive_rate: 1.0,
            false_negative_rate: 0.05,
            angle_sigma: 0.05,
        }
    }

    fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64, name: &str| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::Validation(format!(
                    "noise {name} {v} must be finite and non-negative"
                )))
            }
        };
        finite_nonneg(self.box_jitter_sigma, "box_jitter_sigma")?;
        finite_nonneg(self.angle_sigma, "angle_sigma")?;
        finite_nonneg(self.false_positive_rate, "false_positive_rate")?;
        let score_range = |lo: f64, hi: f64, name: &str| {
            if lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi && hi <= 1.0 {
                Ok(())
            } else {
                Err(Error::Validation(format!(
                    "noise {name} range [{lo}, {hi}] must satisfy 0 <= min <= max <= 1"
                )))
            }
        };
        score_range(self.tp_score_min, self.tp_score_max, "tp_score")?;
        score_range(self.fp_score_min, self.fp_score_max, "fp_score")?;
        if !(self.false_negative_rate.is_finite() && (0.0..1.0).contains(&self.false_negative_rate))
        {
            return Err(Error::Validation(format!(
                "noise false_negative_rate {} must lie in [0, 1)",
                self.false_negative_rate
            )));
        }
        if self.mask_morphology.unsigned_abs() > 16 {
            return Err(Error::Validation(format!(
                "noise mask_morphology {} must lie in [-16, 16]",
                self.mask_morphology
            )));
        }
        Ok(())
    }
}

/// Everything that determines a generated dataset. Deserialization fills
/// omitted fields from the defaults, so partial spec files are fine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub seed: u64,
    pub width: u32,
    pub height: u32,
    pub images: u32,
    pub pairs_min: u32,
    pub pairs_max: u32,
    /// Fixed light angle for every image; `None` draws one per image.
    pub light_angle: Option<f64>,
    pub shapes: Vec<ShapeKind>,
    /// Base object size range, in pixels.
    pub size_min: f64,
    pub size_max: f64,
    /// Shadow length as a multiple of the body length.
    pub length_scale_min: f64,
    pub length_scale_max: f64,
    pub noise: NoiseModel,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            seed: 7,
            width: 512,
            height: 512,
            images: 50,
            pairs_min: 1,
            pairs_max: 9,
            light_angle: None,
            shapes: vec![ShapeKind::Post, ShapeKind::Box, ShapeKind::Ellipse],
            size_min: 16.0,
            size_max: 48.0,
            length_scale_min: 0.8,
            length_scale_max: 2.0,
            noise: NoiseModel::default(),
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width < 16 || self.height < 16 {
            return Err(Error::Validation(format!(
                "image dimensions {}x{} must be at least 16x16",
                self.width, self.height
            )));
        }
        if self.images == 0 {
            return Err(Error::Validation("image count must be positive".into()));
        }
        if self.pairs_min == 0 || self.pairs_min > self.pairs_max {
            return Err(Error::Validation(format!(
                "pair count range [{}, {}] must satisfy 1 <= min <= max",
                self.pairs_min, self.pairs_max
            )));
        }
        if self.shapes.is_empty() {
            return Err(Error::Validation("shape list is empty".into()));
        }
        let ordered_positive = |lo: f64, hi: f64, name: &str| {
            if lo.is_finite() && hi.is_finite() && 0.0 < lo && lo <= hi {
                Ok(())
            } else {
                Err(Error::Validation(format!(
                    "{name} range [{lo}, {hi}] must satisfy 0 < min <= max"
                )))
            }
        };
        ordered_positive(self.size_min, self.size_max, "size")?;
        ordered_positive(self.length_scale_min, self.length_scale_max, "length_scale")?;
        if let Some(theta) = self.light_angle {
            LightAngle::new(theta)?;
        }
        self.noise.validate()
    }
}

/// Where each ground-truth pair landed in the *perfect* prediction file.
/// Indices count detections of the same image and role, in file order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestPair {
    pub pair_id: u64,
    pub shadow_instance_index: usize,
    pub object_instance_index: usize,
    pub association_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestImage {
    pub image_id: u64,
    pub width: u32,
    pub height: u32,
    /// The light angle the scene was generated with.
    pub light_angle: f64,
    pub pair_count: u32,
    pub pairs: Vec<ManifestPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default = "default_format_version")]
    pub format_version: u32,
    pub seed: u64,
    pub spec: SceneSpec,
    pub images: Vec<ManifestImage>,
    pub total_pairs: u64,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        check_format_version(manifest.format_version, "manifest")?;
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json_atomic(path, self)
    }
}

/// One generated run: ground truth plus both prediction flavors.
#[derive(Debug, Clone)]
pub struct GeneratedScene {
    pub dataset: Dataset,
    pub perfect: Predictions,
    pub noisy: Predictions,
    pub manifest: Manifest,
}

/// Decorrelates per-image RNG streams from the run seed (splitmix-style).
fn mix_seed(seed: u64, image_id: u64) -> u64 {
    let mut z = seed ^ image_id.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn gauss(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma)
        .expect("sigma is validated")
        .sample(rng)
}

fn sample_range(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo >= hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

fn bernoulli(rng: &mut ChaCha8Rng, p: f64) -> bool {
    p > 0.0 && rng.random_bool(p.min(1.0))
}

/// Body length and base width for a shape of nominal size `s`.
fn shape_extent(shape: ShapeKind, s: f64) -> (f64, f64) {
    match shape {
        ShapeKind::Post => (1.6 * s, 0.3 * s),
        ShapeKind::Box => (0.9 * s, s),
        ShapeKind::Ellipse => (1.2 * s, 0.8 * s),
    }
}

/// Rasterizes an ellipse with semi-axis `a` along `(ux, uy)` and `b` across
/// it, by testing pixel centers inside the bounding square.
fn rasterize_ellipse(
    center: (f64, f64),
    a: f64,
    b: f64,
    axis: (f64, f64),
    width: u32,
    height: u32,
) -> std::result::Result<Mask, MaskError> {
    let (ux, uy) = axis;
    let (ex, ey) = (-uy, ux);
    let r = a.max(b);
    let col_lo = (center.0 - r - 1.0).floor().max(0.0) as u32;
    let col_hi = ((center.0 + r + 1.0).ceil().max(0.0) as u64).min(width as u64 - 1) as u32;
    let row_lo = (center.1 - r - 1.0).floor().max(0.0) as u32;
    let row_hi = ((center.1 + r + 1.0).ceil().max(0.0) as u64).min(height as u64 - 1) as u32;
    let mut spans = Vec::new();
    for col in col_lo..=col_hi {
        let x = col as f64 + 0.5;
        let mut run_start: Option<u32> = None;
        for row in row_lo..=row_hi {
            let y = row as f64 + 0.5;
            let (vx, vy) = (x - center.0, y - center.1);
            let p = (vx * ux + vy * uy) / a;
            let q = (vx * ex + vy * ey) / b;
            let inside = p * p + q * q <= 1.0;
            match (inside, run_start) {
                (true, None) => run_start = Some(row),
                (false, Some(start)) => {
                    spans.push((col, start, row));
                    run_start = None;
                }
                _ => {}
            }
        }
        if let Some(start) = run_start {
            spans.push((col, start, row_hi + 1));
        }
    }
    Mask::from_column_spans(width, height, &spans)
}

struct PlacedPair {
    pair_id: u64,
    shadow_mask: Mask,
    body_mask: Mask,
    shadow_box: BBox,
    object_box: BBox,
    association_box: BBox,
    angle: LightAngle,
}

const PLACEMENT_ATTEMPTS: u32 = 200;

/// Places one body + shadow that avoids everything placed so far, or gives
/// up after [`PLACEMENT_ATTEMPTS`] tries.
#[allow(clippy::too_many_arguments)]
fn place_pair(
    rng: &mut ChaCha8Rng,
    spec: &SceneSpec,
    image_id: u64,
    pair_id: u64,
    theta: f64,
    fixed_angle: LightAngle,
    bodies: &mut Mask,
    shadows: &mut Mask,
) -> Result<PlacedPair> {
    let (w, h) = (spec.width, spec.height);
    let (wf, hf) = (w as f64, h as f64);
    let (ux, uy) = (theta.cos(), theta.sin());
    let (ex, ey) = (-uy, ux);

    for _ in 0..PLACEMENT_ATTEMPTS {
        let shape = spec.shapes[rng.random_range(0..spec.shapes.len())];
        let s = sample_range(rng, spec.size_min, spec.size_max);
        let length_scale = sample_range(rng, spec.length_scale_min, spec.length_scale_max);
        let (body_len, base_width) = shape_extent(shape, s);
        let shadow_len = body_len * length_scale;

        // Keep the whole silhouette inside the image whenever it can fit.
        let reach = body_len.max(shadow_len) + base_width / 2.0;
        let sample_coord = |rng: &mut ChaCha8Rng, extent: f64| {
            let (lo, hi) = (1.0 + reach, extent - 1.0 - reach);
            if lo < hi {
                sample_range(rng, lo, hi)
            } else {
                sample_range(rng, 1.0, extent - 1.0)
            }
        };
        let mx = sample_coord(rng, wf);
        let my = sample_coord(rng, hf);

        // Base edge through the anchor, perpendicular to the light direction.
        let p1 = (mx - ex * base_width / 2.0, my - ey * base_width / 2.0);
        let p2 = (mx + ex * base_width / 2.0, my + ey * base_width / 2.0);
        let along = |p: (f64, f64), t: f64| (p.0 + ux * t, p.1 + uy * t);
        let corners = [
            p1,
            p2,
            along(p1, body_len),
            along(p2, body_len),
            along(p1, -shadow_len),
            along(p2, -shadow_len),
        ];
        if !corners
            .iter()
            .all(|&(x, y)| x >= 1.0 && x <= wf - 1.0 && y >= 1.0 && y <= hf - 1.0)
        {
            continue;
        }

        let body_mask = match shape {
            ShapeKind::Post | ShapeKind::Box => {
                rasterize_convex_polygon(&[p1, p2, along(p2, body_len), along(p1, body_len)], w, h)?
            }
            ShapeKind::Ellipse => rasterize_ellipse(
                (mx + ux * body_len / 2.0, my + uy * body_len / 2.0),
                body_len / 2.0,
                base_width / 2.0,
                (ux, uy),
                w,
                h,
            )?,
        };
        let shadow_raster = rasterize_convex_polygon(
            &[p1, p2, along(p2, -shadow_len), along(p1, -shadow_len)],
            w,
            h,
        )?;
        let shadow_mask = shadow_raster.subtract(&body_mask)?;
        if body_mask.is_empty() || shadow_mask.is_empty() {
            continue;
        }

        // Bodies never overlap anything; shadows may only overlap shadows.
        let clash = body_mask.intersection_area(bodies)? > 0
            || body_mask.intersection_area(shadows)? > 0
            || shadow_mask.intersection_area(bodies)? > 0;
        if clash {
            continue;
        }

        *bodies = bodies.union(&body_mask)?;
        *shadows = shadows.union(&shadow_mask)?;
        let shadow_box = shadow_mask.bbox()?;
        let object_box = body_mask.bbox()?;
        let angle = ground_truth_angle(shadow_mask.centroid()?, body_mask.centroid()?)
            .unwrap_or(fixed_angle);
        return Ok(PlacedPair {
            pair_id,
            association_box: shadow_box.merge(&object_box),
            shadow_mask,
            body_mask,
            shadow_box,
            object_box,
            angle,
        });
    }
    Err(Error::Placement {
        image_id,
        attempts: PLACEMENT_ATTEMPTS,
    })
}

fn jitter_box(rng: &mut ChaCha8Rng, b: &BBox, sigma: f64, wf: f64, hf: f64) -> BBox {
    let x0 = b.x_min() + gauss(rng, sigma);
    let x1 = b.x_max() + gauss(rng, sigma);
    let y0 = b.y_min() + gauss(rng, sigma);
    let y1 = b.y_max() + gauss(rng, sigma);
    let (x0, x1) = (x0.min(x1), x0.max(x1));
    let (y0, y1) = (y0.min(y1), y0.max(y1));
    BBox::new(
        x0.clamp(0.0, wf),
        y0.clamp(0.0, hf),
        x1.clamp(0.0, wf),
        y1.clamp(0.0, hf),
    )
    .expect("ordered, clamped coordinates form a valid box")
}

/// Applies the corruption pipeline to one instance: jittered box, then the
/// mask translated by the box's mean shift, morphed, and clipped to the new
/// box (`None` if nothing survives).
fn corrupt_instance(
    rng: &mut ChaCha8Rng,
    noise: &NoiseModel,
    original_box: &BBox,
    mask: &Mask,
    wf: f64,
    hf: f64,
) -> (BBox, Option<Mask>) {
    let jittered = jitter_box(rng, original_box, noise.box_jitter_sigma, wf, hf);
    let dx = ((jittered.x_min() - original_box.x_min())
        + (jittered.x_max() - original_box.x_max()))
        / 2.0;
    let dy = ((jittered.y_min() - original_box.y_min())
        + (jittered.y_max() - original_box.y_max()))
        / 2.0;
    let mut m = mask.translated(dx.round() as i64, dy.round() as i64);
    if noise.mask_morphology > 0 {
        m = m.dilate(noise.mask_morphology as u32);
    } else if noise.mask_morphology < 0 {
        m = m.erode(noise.mask_morphology.unsigned_abs());
    }
    let m = m.clip_to_box(&jittered);
    (jittered, if m.is_empty() { None } else { Some(m) })
}

/// Generates the full scene set for `spec`.
pub fn generate(spec: &SceneSpec) -> Result<GeneratedScene> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let (wf, hf) = (w as f64, h as f64);

    let mut images = Vec::new();
    let mut raw_pairs: Vec<(u64, u64, Mask, Mask)> = Vec::new();
    let mut perfect = Predictions::default();
    let mut noisy = Predictions::default();
    let mut manifest_images = Vec::new();

    for image_id in 1..=spec.images as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, image_id));
        let theta = match spec.light_angle {
            Some(theta) => theta,
            None => rng.random_range(-PI..PI),
        };
        let fixed_angle = LightAngle::normalized(theta)?;
        let pair_count = rng.random_range(spec.pairs_min..=spec.pairs_max);

        images.push(ImageInfo {
            id: image_id,
            width: w,
            height: h,
        });

        let mut bodies = Mask::empty(w, h)?;
        let mut shadows = Mask::empty(w, h)?;
        let mut placed = Vec::with_capacity(pair_count as usize);
        for pair_index in 0..pair_count {
            placed.push(place_pair(
                &mut rng,
                spec,
                image_id,
                pair_index as u64 + 1,
                theta,
                fixed_angle,
                &mut bodies,
                &mut shadows,
            )?);
        }

        let mut manifest_pairs = Vec::with_capacity(placed.len());
        for (pair_index, pair) in placed.iter().enumerate() {
            raw_pairs.push((
                image_id,
                pair.pair_id,
                pair.shadow_mask.clone(),
                pair.shadow_mask.union(&pair.body_mask)?,
            ));
            perfect.instances.push(InstanceDetection {
                image_id,
                kind: InstanceKind::Shadow,
                score: 1.0,
                bbox: pair.shadow_box,
                mask: Some(pair.shadow_mask.clone()),
            });
            perfect.instances.push(InstanceDetection {
                image_id,
                kind: InstanceKind::Object,
                score: 1.0,
                bbox: pair.object_box,
                mask: Some(pair.body_mask.clone()),
            });
            perfect.associations.push(AssociationDetection {
                image_id,
                score: 1.0,
                bbox: pair.association_box,
                light_angle: pair.angle,
            });
            manifest_pairs.push(ManifestPair {
                pair_id: pair.pair_id,
                shadow_instance_index: pair_index,
                object_instance_index: pair_index,
                association_index: pair_index,
            });
        }
        manifest_images.push(ManifestImage {
            image_id,
            width: w,
            height: h,
            light_angle: fixed_angle.radians(),
            pair_count,
            pairs: manifest_pairs,
        });

        // Corrupted copy of the same scene, drawn from the same stream.
        let noise = &spec.noise;
        for pair in &placed {
            if bernoulli(&mut rng, noise.false_negative_rate) {
                continue;
            }
            let (shadow_bbox, shadow_mask) =
                corrupt_instance(&mut rng, noise, &pair.shadow_box, &pair.shadow_mask, wf, hf);
            let (object_bbox, object_mask) =
                corrupt_instance(&mut rng, noise, &pair.object_box, &pair.body_mask, wf, hf);
            noisy.instances.push(InstanceDetection {
                image_id,
                kind: InstanceKind::Shadow,
                score: sample_range(&mut rng, noise.tp_score_min, noise.tp_score_max),
                bbox: shadow_bbox,
                mask: shadow_mask,
            });
            noisy.instances.push(InstanceDetection {
                image_id,
                kind: InstanceKind::Object,
                score: sample_range(&mut rng, noise.tp_score_min, noise.tp_score_max),
                bbox: object_bbox,
                mask: object_mask,
            });
            let angle =
                LightAngle::normalized(pair.angle.radians() + gauss(&mut rng, noise.angle_sigma))?;
            noisy.associations.push(AssociationDetection {
                image_id,
                score: sample_range(&mut rng, noise.tp_score_min, noise.tp_score_max),
                bbox: jitter_box(
                    &mut rng,
                    &pair.association_box,
                    noise.box_jitter_sigma,
                    wf,
                    hf,
                ),
                light_angle: angle,
            });
        }
        let fp_count = noise.false_positive_rate.floor() as u32
            + u32::from(bernoulli(&mut rng, noise.false_positive_rate.fract()));
        for _ in 0..fp_count {
            push_false_positive(&mut rng, spec, image_id, &mut noisy)?;
        }
    }

    let dataset = Dataset::build(images, raw_pairs)?;
    let total_pairs = dataset.total_pairs();
    Ok(GeneratedScene {
        dataset,
        perfect,
        noisy,
        manifest: Manifest {
            format_version: FORMAT_VERSION,
            seed: spec.seed,
            spec: spec.clone(),
            images: manifest_images,
            total_pairs,
        },
    })
}

/// Injects one spurious detection triple: two stacked squares (shadow above
/// object) with a snug association box, so it survives pairing and shows up
/// as a matched false positive downstream.
fn push_false_positive(
    rng: &mut ChaCha8Rng,
    spec: &SceneSpec,
    image_id: u64,
    noisy: &mut Predictions,
) -> Result<()> {
    let noise = &spec.noise;
    let side_max = (spec.size_min.max(8.0)).min(spec.width.min(spec.height) as f64 / 4.0);
    let side = sample_range(rng, (side_max / 2.0).max(2.0), side_max).floor();
    let sidep = side as u32;
    let x0 = sample_range(rng, 1.0, spec.width as f64 - 1.0 - side).floor() as u32;
    let y0 = sample_range(rng, 1.0, spec.height as f64 - 1.0 - 2.0 * side).floor() as u32;
    let shadow = Mask::solid_rect(spec.width, spec.height, x0, y0, x0 + sidep, y0 + sidep)?;
    let object = Mask::solid_rect(
        spec.width,
        spec.height,
        x0,
        y0 + sidep,
        x0 + sidep,
        y0 + 2 * sidep,
    )?;
    let shadow_box = shadow.bbox()?;
    let object_box = object.bbox()?;
    noisy.instances.push(InstanceDetection {
        image_id,
        kind: InstanceKind::Shadow,
        score: sample_range(rng, noise.fp_score_min, noise.fp_score_max),
        bbox: shadow_box,
        mask: Some(shadow),
    });
    noisy.instances.push(InstanceDetection {
        image_id,
        kind: InstanceKind::Object,
        score: sample_range(rng, noise.fp_score_min, noise.fp_score_max),
        bbox: object_box,
        mask: Some(object),
    });
    noisy.associations.push(AssociationDetection {
        image_id,
        score: sample_range(rng, noise.fp_score_min, noise.fp_score_max),
        bbox: shadow_box.merge(&object_box),
        light_angle: LightAngle::normalized(rng.random_range(-PI..PI))
            .expect("sampled angle is finite"),
    });
    Ok(())
}

/// Convenience wrapper: generates and writes the four standard files into
/// `out_dir` (`ground_truth.json`, `predictions_perfect.json`,
/// `predictions_noisy.json`, `manifest.json`).
pub fn generate_to_dir(spec: &SceneSpec, out_dir: &Path) -> Result<GeneratedScene> {
    let scene = generate(spec)?;
    std::fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    scene.dataset.save(&out_dir.join("ground_truth.json"))?;
    scene
        .perfect
        .save(&out_dir.join("predictions_perfect.json"))?;
    scene.noisy.save(&out_dir.join("predictions_noisy.json"))?;
    scene.manifest.save(&out_dir.join("manifest.json"))?;
    Ok(scene)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::light::wrap_delta;

    fn small_spec(seed: u64) -> SceneSpec {
        SceneSpec {
            seed,
            width: 256,
            height: 256,
            images: 4,
            pairs_max: 4,
            ..SceneSpec::default()
        }
    }

    #[test]
    fn generation_is_deterministic_in_the_seed() {
        let spec = small_spec(11);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.perfect, b.perfect);
        assert_eq!(a.noisy, b.noisy);
        assert_eq!(a.manifest, b.manifest);
        let c = generate(&small_spec(12)).unwrap();
        assert_ne!(a.perfect, c.perfect);
    }

    #[test]
    fn zero_noise_predictions_equal_the_perfect_ones() {
        let scene = generate(&small_spec(3)).unwrap();
        assert_eq!(scene.perfect, scene.noisy);
        assert_eq!(
            serde_json::to_string(&scene.perfect).unwrap(),
            serde_json::to_string(&scene.noisy).unwrap()
        );
    }

    #[test]
    fn ground_truth_object_equals_the_body_raster() {
        // The derived object mask (association minus shadow) must reproduce
        // the generated body exactly; the perfect object instance carries it.
        let scene = generate(&small_spec(5)).unwrap();
        let groups = scene.perfect.group_by_image();
        for image in scene.dataset.images() {
            let pairs = scene.dataset.pairs_for(image.id);
            let dets = &groups[&image.id];
            for (pair, det) in pairs.iter().zip(&dets.objects) {
                assert_eq!(Some(&pair.object_mask), det.mask.as_ref());
                assert_eq!(pair.object_box, det.bbox);
            }
        }
    }

    #[test]
    fn bodies_are_disjoint_and_shadows_avoid_bodies() {
        let scene = generate(&small_spec(9)).unwrap();
        for image in scene.dataset.images() {
            let pairs = scene.dataset.pairs_for(image.id);
            for (i, a) in pairs.iter().enumerate() {
                for b in &pairs[i + 1..] {
                    assert_eq!(a.object_mask.intersection_area(&b.object_mask).unwrap(), 0);
                    assert_eq!(a.object_mask.intersection_area(&b.shadow_mask).unwrap(), 0);
                    assert_eq!(a.shadow_mask.intersection_area(&b.object_mask).unwrap(), 0);
                }
            }
        }
    }

    #[test]
    fn pair_angles_track_the_scene_light_angle() {
        for theta in [0.0, 1.0, -2.5, 3.0] {
            let spec = SceneSpec {
                light_angle: Some(theta),
                ..small_spec(21)
            };
            let scene = generate(&spec).unwrap();
            let mut checked = 0;
            for pair in scene.dataset.all_pairs() {
                let angle = pair.light_angle.unwrap().radians();
                assert!(
                    wrap_delta(angle - theta).abs() < 0.05,
                    "theta {theta}: pair angle {angle}"
                );
                checked += 1;
            }
            assert!(checked > 0);
        }
    }

    #[test]
    fn pair_counts_respect_the_configured_range() {
        let spec = SceneSpec {
            pairs_min: 2,
            pairs_max: 5,
            images: 6,
            ..small_spec(13)
        };
        let scene = generate(&spec).unwrap();
        for image in scene.manifest.images.iter() {
            assert!((2..=5).contains(&image.pair_count));
            assert_eq!(image.pairs.len(), image.pair_count as usize);
        }
        assert_eq!(scene.manifest.total_pairs, scene.dataset.total_pairs());
    }

    #[test]
    fn noisy_output_validates_and_contains_false_positives() {
        let spec = SceneSpec {
            noise: NoiseModel {
                false_positive_rate: 2.0,
                ..NoiseModel::standard()
            },
            ..small_spec(17)
        };
        let scene = generate(&spec).unwrap();
        scene.noisy.validate().unwrap();
        // Two guaranteed false-positive triples per image.
        assert!(scene.noisy.associations.len() >= scene.manifest.images.len() * 2);
    }

    #[test]
    fn overcrowded_specs_fail_with_a_placement_error() {
        let spec = SceneSpec {
            width: 64,
            height: 64,
            images: 1,
            pairs_min: 9,
            pairs_max: 9,
            size_min: 40.0,
            size_max: 48.0,
            ..SceneSpec::default()
        };
        match generate(&spec) {
            Err(Error::Placement { image_id: 1, .. }) => {}
            other => panic!("expected a placement failure, got {other:?}"),
        }
    }

    #[test]
    fn manifest_round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let scene = generate_to_dir(&small_spec(2), dir.path()).unwrap();
        for name in [
            "ground_truth.json",
            "predictions_perfect.json",
            "predictions_noisy.json",
            "manifest.json",
        ] {
            assert!(dir.path().join(name).exists(), "{name}");
        }
        let manifest = Manifest::load(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(manifest, scene.manifest);
        let dataset = Dataset::load(&dir.path().join("ground_truth.json")).unwrap();
        assert_eq!(dataset, scene.dataset);
        let perfect = Predictions::load(&dir.path().join("predictions_perfect.json")).unwrap();
        assert_eq!(perfect, scene.perfect);
    }

    #[test]
    fn spec_validation_rejects_nonsense() {
        let bad = |f: fn(&mut SceneSpec)| {
            let mut spec = SceneSpec::default();
            f(&mut spec);
            spec.validate().is_err()
        };
        assert!(bad(|s| s.images = 0));
        assert!(bad(|s| s.pairs_min = 0));
        assert!(bad(|s| {
            s.pairs_min = 5;
            s.pairs_max = 4
        }));
        assert!(bad(|s| s.shapes.clear()));
        assert!(bad(|s| s.size_min = 0.0));
        assert!(bad(|s| s.size_min = 50.0));
        assert!(bad(|s| s.light_angle = Some(7.0)));
        assert!(bad(|s| s.noise.false_negative_rate = 1.0));
        assert!(bad(|s| s.noise.tp_score_max = 1.5));
        assert!(bad(|s| s.noise.box_jitter_sigma = -1.0));
        assert!(SceneSpec::default().validate().is_ok());
    }
}
