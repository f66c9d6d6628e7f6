//! Pairing predicted shadow and object instances with predicted associations.
//!
//! The matcher is purely geometric. For every image it:
//!
//! 1. enumerates *candidate* shadow-object pairs — an object is a candidate
//!    partner for a shadow when the shortest distance between their boxes is
//!    strictly less than the shadow box height times `threshold_scale`;
//! 2. scores every (candidate, association) combination by the IoU between
//!    the candidate's merged box and the association's box, keeping
//!    combinations strictly above `iou_floor`;
//! 3. greedily accepts combinations in descending-IoU order, never reusing a
//!    shadow, object, or association.
//!
//! Before any of that, each image's detections are put into a canonical
//! order (descending score, then box corners, then mask) so that the result
//! does not depend on the order detections appear in the input file; reported
//! indices still refer to the original per-image, per-role file positions.

use std::cmp::Ordering;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::BBox;
use crate::light::LightAngle;
use crate::mask::Mask;
use crate::model::{
    check_format_version, default_format_version, write_json_atomic, AssociationDetection,
    InstanceDetection, Predictions, FORMAT_VERSION,
};
use crate::{Error, Result};

/// How the combined confidence of a matched triple is computed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    /// Geometric mean of the shadow, object, and association scores.
    #[default]
    GeometricMean,
    /// Minimum of the three scores.
    Min,
    /// The association score alone.
    AssociationScore,
}

/// Tunable knobs for the matcher. `Default` gives the reference behavior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// Multiplier on the shadow box height in the candidate distance test.
    pub threshold_scale: f64,
    /// Candidate/association combinations must exceed this IoU (strictly).
    pub iou_floor: f64,
    pub score_mode: ScoreMode,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            threshold_scale: 1.0,
            iou_floor: 0.0,
            score_mode: ScoreMode::GeometricMean,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_scale.is_finite() && self.threshold_scale > 0.0) {
            return Err(Error::Validation(format!(
                "threshold_scale {} must be finite and positive",
                self.threshold_scale
            )));
        }
        if !(self.iou_floor.is_finite() && (0.0..1.0).contains(&self.iou_floor)) {
            return Err(Error::Validation(format!(
                "iou_floor {} must lie in [0, 1)",
                self.iou_floor
            )));
        }
        Ok(())
    }
}

/// A shadow-object pair that passed the distance gate.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePair {
    /// Index into the image's shadow detections, in input order.
    pub shadow_index: usize,
    /// Index into the image's object detections, in input order.
    pub object_index: usize,
    /// Merge of the two detection boxes.
    pub merged_box: BBox,
    /// Shortest distance between the two detection boxes.
    pub distance: f64,
}

/// A fully matched (shadow, object, association) triple.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedAssociation {
    pub image_id: u64,
    pub shadow: InstanceDetection,
    pub object: InstanceDetection,
    pub association: AssociationDetection,
    /// Positions within the image's per-role detection lists, in input order.
    pub shadow_index: usize,
    pub object_index: usize,
    pub association_index: usize,
    /// Union of the shadow and object masks, when both are present and share
    /// dimensions.
    pub combined_mask: Option<Mask>,
    pub combined_score: f64,
    /// The matched association's light angle.
    pub light_angle: LightAngle,
    /// IoU between the merged instance box and the association box.
    pub match_iou: f64,
}

impl PairedAssociation {
    /// The matched association's box.
    pub fn association_box(&self) -> &BBox {
        &self.association.bbox
    }
}

/// Per-image matcher accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageDiagnostics {
    pub image_id: u64,
    pub paired: u64,
    pub unmatched_shadows: u64,
    pub unmatched_objects: u64,
    pub unmatched_associations: u64,
}

/// Whether `object` is a candidate partner for `shadow`, and the box
/// distance that decided it. The gate is strict: a distance exactly equal to
/// the scaled shadow height is rejected.
fn candidate_distance(
    shadow: &InstanceDetection,
    object: &InstanceDetection,
    threshold_scale: f64,
) -> (bool, f64) {
    let distance = shadow.bbox.shortest_distance(&object.bbox);
    (distance < shadow.bbox.height() * threshold_scale, distance)
}

/// Enumerates candidate pairs in input order.
pub fn generate_candidates(
    shadows: &[InstanceDetection],
    objects: &[InstanceDetection],
    threshold_scale: f64,
) -> Vec<CandidatePair> {
    let mut candidates = Vec::new();
    for (shadow_index, shadow) in shadows.iter().enumerate() {
        for (object_index, object) in objects.iter().enumerate() {
            let (keep, distance) = candidate_distance(shadow, object, threshold_scale);
            if keep {
                candidates.push(CandidatePair {
                    shadow_index,
                    object_index,
                    merged_box: shadow.bbox.merge(&object.bbox),
                    distance,
                });
            }
        }
    }
    candidates
}

fn cmp_f64s(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

fn box_key(b: &BBox) -> [f64; 4] {
    [b.x_min(), b.y_min(), b.x_max(), b.y_max()]
}

fn cmp_masks(a: &Option<Mask>, b: &Option<Mask>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
        (Some(x), Some(y)) => (x.width(), x.height())
            .cmp(&(y.width(), y.height()))
            .then_with(|| x.counts().cmp(y.counts())),
    }
}

/// Indices of `items` in canonical order: descending score, then box
/// corners, then the extra per-item key. Detections that compare equal are
/// interchangeable, so any canonical position among them is equivalent.
fn canonical_order<T>(
    items: &[T],
    score: impl Fn(&T) -> f64,
    bbox: impl Fn(&T) -> BBox,
    tail: impl Fn(&T, &T) -> Ordering,
) -> Vec<usize> {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (&items[i], &items[j]);
        score(b)
            .total_cmp(&score(a))
            .then_with(|| cmp_f64s(&box_key(&bbox(a)), &box_key(&bbox(b))))
            .then_with(|| tail(a, b))
    });
    order
}

fn combined_score(shadow: f64, object: f64, association: f64, mode: ScoreMode) -> f64 {
    match mode {
        ScoreMode::GeometricMean => (shadow * object * association).cbrt(),
        ScoreMode::Min => shadow.min(object).min(association),
        ScoreMode::AssociationScore => association,
    }
}

/// Matches one image's detections. All slices must belong to `image_id`;
/// `config` is assumed valid (see [`MatchConfig::validate`]).
pub fn pair_and_match(
    image_id: u64,
    shadows: &[InstanceDetection],
    objects: &[InstanceDetection],
    associations: &[AssociationDetection],
    config: &MatchConfig,
) -> (Vec<PairedAssociation>, ImageDiagnostics) {
    debug_assert!(
        shadows
            .iter()
            .chain(objects)
            .all(|d| d.image_id == image_id)
            && associations.iter().all(|a| a.image_id == image_id)
    );

    let shadow_order = canonical_order(
        shadows,
        |d| d.score,
        |d| d.bbox,
        |a, b| cmp_masks(&a.mask, &b.mask),
    );
    let object_order = canonical_order(
        objects,
        |d| d.score,
        |d| d.bbox,
        |a, b| cmp_masks(&a.mask, &b.mask),
    );
    let association_order = canonical_order(
        associations,
        |d| d.score,
        |d| d.bbox,
        |a, b| a.light_angle.radians().total_cmp(&b.light_angle.radians()),
    );

    struct Scored {
        iou: f64,
        shadow_pos: usize,
        object_pos: usize,
        association_pos: usize,
    }

    let mut scored = Vec::new();
    for (shadow_pos, &s) in shadow_order.iter().enumerate() {
        for (object_pos, &o) in object_order.iter().enumerate() {
            let (keep, _) = candidate_distance(&shadows[s], &objects[o], config.threshold_scale);
            if !keep {
                continue;
            }
            let merged_box = shadows[s].bbox.merge(&objects[o].bbox);
            for (association_pos, &a) in association_order.iter().enumerate() {
                let iou = merged_box.iou(&associations[a].bbox);
                if iou > config.iou_floor {
                    scored.push(Scored {
                        iou,
                        shadow_pos,
                        object_pos,
                        association_pos,
                    });
                }
            }
        }
    }
    scored.sort_by(|x, y| {
        y.iou
            .total_cmp(&x.iou)
            .then_with(|| x.shadow_pos.cmp(&y.shadow_pos))
            .then_with(|| x.object_pos.cmp(&y.object_pos))
            .then_with(|| x.association_pos.cmp(&y.association_pos))
    });

    let mut shadow_used = vec![false; shadows.len()];
    let mut object_used = vec![false; objects.len()];
    let mut association_used = vec![false; associations.len()];
    let mut paired = Vec::new();
    for t in scored {
        if shadow_used[t.shadow_pos]
            || object_used[t.object_pos]
            || association_used[t.association_pos]
        {
            continue;
        }
        shadow_used[t.shadow_pos] = true;
        object_used[t.object_pos] = true;
        association_used[t.association_pos] = true;

        let shadow_index = shadow_order[t.shadow_pos];
        let object_index = object_order[t.object_pos];
        let association_index = association_order[t.association_pos];
        let shadow = shadows[shadow_index].clone();
        let object = objects[object_index].clone();
        let association = associations[association_index].clone();
        let combined_mask = match (&shadow.mask, &object.mask) {
            (Some(a), Some(b)) => a.union(b).ok(),
            _ => None,
        };
        paired.push(PairedAssociation {
            image_id,
            combined_score: combined_score(
                shadow.score,
                object.score,
                association.score,
                config.score_mode,
            ),
            light_angle: association.light_angle,
            match_iou: t.iou,
            shadow,
            object,
            association,
            shadow_index,
            object_index,
            association_index,
            combined_mask,
        });
    }

    let diagnostics = ImageDiagnostics {
        image_id,
        paired: paired.len() as u64,
        unmatched_shadows: (shadows.len() - paired.len()) as u64,
        unmatched_objects: (objects.len() - paired.len()) as u64,
        unmatched_associations: (associations.len() - paired.len()) as u64,
    };
    (paired, diagnostics)
}

/// Matches every image in `preds` (in parallel), returning pairs and
/// diagnostics ordered by image id.
pub fn pair_and_match_all(
    preds: &Predictions,
    config: &MatchConfig,
) -> Result<(Vec<PairedAssociation>, Vec<ImageDiagnostics>)> {
    config.validate()?;
    let groups: Vec<_> = preds.group_by_image().into_iter().collect();
    let per_image: Vec<_> = groups
        .par_iter()
        .map(|(image_id, dets)| {
            pair_and_match(
                *image_id,
                &dets.shadows,
                &dets.objects,
                &dets.associations,
                config,
            )
        })
        .collect();
    let mut paired = Vec::new();
    let mut diagnostics = Vec::with_capacity(per_image.len());
    for (pairs, diag) in per_image {
        paired.extend(pairs);
        diagnostics.push(diag);
    }
    Ok((paired, diagnostics))
}

#[derive(Serialize, Deserialize)]
struct PairedFile {
    #[serde(default = "default_format_version")]
    format_version: u32,
    paired: Vec<PairedRecord>,
}

#[derive(Serialize, Deserialize)]
struct PairedRecord {
    image_id: u64,
    shadow: InstanceDetection,
    object: InstanceDetection,
    association_box: BBox,
    shadow_index: usize,
    object_index: usize,
    association_index: usize,
    combined_score: f64,
    light_angle: LightAngle,
    match_iou: f64,
}

/// Writes matched pairs as JSON. The file keeps the full shadow and object
/// detections but flattens the association down to its box and light angle.
pub fn save_paired(path: &Path, paired: &[PairedAssociation]) -> Result<()> {
    let file = PairedFile {
        format_version: FORMAT_VERSION,
        paired: paired
            .iter()
            .map(|p| PairedRecord {
                image_id: p.image_id,
                shadow: p.shadow.clone(),
                object: p.object.clone(),
                association_box: p.association.bbox,
                shadow_index: p.shadow_index,
                object_index: p.object_index,
                association_index: p.association_index,
                combined_score: p.combined_score,
                light_angle: p.light_angle,
                match_iou: p.match_iou,
            })
            .collect(),
    };
    write_json_atomic(path, &file)
}

/// Reads a file written by [`save_paired`]. The original association score
/// is not stored, so the reconstructed association carries the combined
/// score; everything downstream weights by the combined score anyway.
pub fn load_paired(path: &Path) -> Result<Vec<PairedAssociation>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file: PairedFile = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    check_format_version(file.format_version, "paired output")?;
    Ok(file
        .paired
        .into_iter()
        .map(|r| {
            let combined_mask = match (&r.shadow.mask, &r.object.mask) {
                (Some(a), Some(b)) => a.union(b).ok(),
                _ => None,
            };
            PairedAssociation {
                image_id: r.image_id,
                association: AssociationDetection {
                    image_id: r.image_id,
                    score: r.combined_score,
                    bbox: r.association_box,
                    light_angle: r.light_angle,
                },
                shadow: r.shadow,
                object: r.object,
                shadow_index: r.shadow_index,
                object_index: r.object_index,
                association_index: r.association_index,
                combined_mask,
                combined_score: r.combined_score,
                light_angle: r.light_angle,
                match_iou: r.match_iou,
            }
        })
        .collect())
}

#[derive(Serialize, Deserialize)]
struct DiagnosticsTotals {
    paired: u64,
    unmatched_shadows: u64,
    unmatched_objects: u64,
    unmatched_associations: u64,
}

#[derive(Serialize, Deserialize)]
struct DiagnosticsFile {
    #[serde(default = "default_format_version")]
    format_version: u32,
    config: MatchConfig,
    images: Vec<ImageDiagnostics>,
    totals: DiagnosticsTotals,
}

/// Writes the matcher's per-image and total unmatched counts.
pub fn save_diagnostics(
    path: &Path,
    diagnostics: &[ImageDiagnostics],
    config: &MatchConfig,
) -> Result<()> {
    let totals = DiagnosticsTotals {
        paired: diagnostics.iter().map(|d| d.paired).sum(),
        unmatched_shadows: diagnostics.iter().map(|d| d.unmatched_shadows).sum(),
        unmatched_objects: diagnostics.iter().map(|d| d.unmatched_objects).sum(),
        unmatched_associations: diagnostics.iter().map(|d| d.unmatched_associations).sum(),
    };
    write_json_atomic(
        path,
        &DiagnosticsFile {
            format_version: FORMAT_VERSION,
            config: *config,
            images: diagnostics.to_vec(),
            totals,
        },
    )
}

/// Sum of the matcher's unmatched counts, used in evaluation summaries.
pub fn unmatched_totals(diagnostics: &[ImageDiagnostics]) -> (u64, u64, u64) {
    (
        diagnostics.iter().map(|d| d.unmatched_shadows).sum(),
        diagnostics.iter().map(|d| d.unmatched_objects).sum(),
        diagnostics.iter().map(|d| d.unmatched_associations).sum(),
    )
}
