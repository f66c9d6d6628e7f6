//! Data model and file formats.
//!
//! Ground truth follows the three-mask labeling scheme: each pair stores a
//! shadow mask and a shadow-object association mask, and the object mask is
//! *derived* as their difference — never stored, so it can never disagree.
//! Prediction files carry instance and association detections as produced by
//! an upstream detector.
//!
//! Ground-truth JSON:
//! `{"format_version": 1, "images": [{"id", "width", "height"}],
//!   "pairs": [{"image_id", "pair_id", "shadow_rle": [..], "association_rle": [..]}]}`
//! where RLE counts are bare arrays and dimensions come from the image record.
//!
//! Prediction JSON:
//! `{"format_version": 1,
//!   "instances": [{"image_id", "kind", "score", "box", "rle"?}],
//!   "associations": [{"image_id", "score", "box", "light_angle"}]}`
//! where `box` is `[x_min, y_min, x_max, y_max]` and the optional instance
//! `rle` is a self-contained `{"width", "height", "counts"}` object (the
//! prediction file has no image table to borrow dimensions from).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::BBox;
use crate::light::{ground_truth_angle, LightAngle, LightError};
use crate::mask::Mask;
use crate::{Error, Result};

/// Version stamp written into every JSON payload this crate produces.
pub const FORMAT_VERSION: u32 = 1;

pub(crate) fn default_format_version() -> u32 {
    FORMAT_VERSION
}

pub(crate) fn check_format_version(version: u32, what: &str) -> Result<()> {
    if version != FORMAT_VERSION {
        return Err(Error::Validation(format!(
            "{what}: unsupported format_version {version} (expected {FORMAT_VERSION})"
        )));
    }
    Ok(())
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Serializes `value` and writes it atomically: the bytes go to a sibling
/// temporary file which is then renamed over the target.
pub(crate) fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut text = serde_json::to_string(value).expect("serialization cannot fail");
    text.push('\n');
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, text).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageInfo {
    pub id: u64,
    pub width: u32,
    pub height: u32,
}

/// One labeled shadow-object pair with every derived quantity precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthPair {
    pub image_id: u64,
    pub pair_id: u64,
    pub shadow_mask: Mask,
    pub association_mask: Mask,
    /// `association_mask` minus `shadow_mask`; guaranteed nonempty.
    pub object_mask: Mask,
    pub shadow_box: BBox,
    pub object_box: BBox,
    /// Merge of the shadow and object boxes.
    pub association_box: BBox,
    /// Direction from the shadow centroid toward the object centroid; `None`
    /// in the degenerate case where the two centroids coincide.
    pub light_angle: Option<LightAngle>,
}

#[derive(Serialize, Deserialize)]
struct GroundTruthFile {
    #[serde(default = "default_format_version")]
    format_version: u32,
    images: Vec<ImageInfo>,
    pairs: Vec<RawPair>,
}

#[derive(Serialize, Deserialize)]
struct RawPair {
    image_id: u64,
    pair_id: u64,
    shadow_rle: Vec<u32>,
    association_rle: Vec<u32>,
}

/// A validated ground-truth dataset, pairs grouped by image.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    images: BTreeMap<u64, ImageInfo>,
    pairs: BTreeMap<u64, Vec<GroundTruthPair>>,
}

impl Dataset {
    /// Validates raw masks and derives every dependent field. `raw_pairs`
    /// entries are `(image_id, pair_id, shadow_mask, association_mask)`.
    pub fn build(images: Vec<ImageInfo>, raw_pairs: Vec<(u64, u64, Mask, Mask)>) -> Result<Self> {
        let mut image_map = BTreeMap::new();
        for image in images {
            if image.width == 0 || image.height == 0 {
                return Err(Error::Validation(format!(
                    "image {}: dimensions {}x{} must be positive",
                    image.id, image.width, image.height
                )));
            }
            if image_map.insert(image.id, image).is_some() {
                return Err(Error::Validation(format!(
                    "duplicate image id {}",
                    image.id
                )));
            }
        }

        let mut pairs: BTreeMap<u64, Vec<GroundTruthPair>> = BTreeMap::new();
        for (image_id, pair_id, shadow_mask, association_mask) in raw_pairs {
            let ctx = format!("image {image_id} pair {pair_id}");
            let image = image_map.get(&image_id).ok_or_else(|| {
                Error::Validation(format!("{ctx}: image_id not present in the image table"))
            })?;
            let wrong_dims = |m: &Mask| m.width() != image.width || m.height() != image.height;
            if wrong_dims(&shadow_mask) || wrong_dims(&association_mask) {
                return Err(Error::Validation(format!(
                    "{ctx}: mask dimensions do not match the {}x{} image",
                    image.width, image.height
                )));
            }
            if shadow_mask.is_empty() {
                return Err(Error::Validation(format!("{ctx}: shadow mask is empty")));
            }
            if !shadow_mask.is_subset_of(&association_mask)? {
                return Err(Error::Validation(format!(
                    "{ctx}: shadow mask is not contained in the association mask"
                )));
            }
            let object_mask = association_mask.subtract(&shadow_mask)?;
            if object_mask.is_empty() {
                return Err(Error::Validation(format!(
                    "{ctx}: derived object mask is empty (association adds nothing to the shadow)"
                )));
            }
            // With containment validated, shadow + object must reassemble the
            // association exactly.
            if shadow_mask.union(&object_mask)? != association_mask {
                return Err(Error::Validation(format!(
                    "{ctx}: shadow and object masks do not reassemble the association mask"
                )));
            }
            let shadow_box = shadow_mask.bbox()?;
            let object_box = object_mask.bbox()?;
            let association_box = shadow_box.merge(&object_box);
            let light_angle =
                match ground_truth_angle(shadow_mask.centroid()?, object_mask.centroid()?) {
                    Ok(angle) => Some(angle),
                    Err(LightError::CoincidentPoints) => None,
                    Err(e) => return Err(e.into()),
                };

            let per_image = pairs.entry(image_id).or_default();
            if per_image.iter().any(|p| p.pair_id == pair_id) {
                return Err(Error::Validation(format!("{ctx}: duplicate pair_id")));
            }
            per_image.push(GroundTruthPair {
                image_id,
                pair_id,
                shadow_mask,
                association_mask,
                object_mask,
                shadow_box,
                object_box,
                association_box,
                light_angle,
            });
        }
        Ok(Dataset {
            images: image_map,
            pairs,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: GroundTruthFile = serde_json::from_str(text).map_err(|source| Error::Json {
            path: "<inline>".into(),
            source,
        })?;
        Self::from_file_model(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: GroundTruthFile = read_json(path)?;
        Self::from_file_model(file)
    }

    fn from_file_model(file: GroundTruthFile) -> Result<Self> {
        check_format_version(file.format_version, "ground truth")?;
        let images = file.images;
        let by_id: BTreeMap<u64, (u32, u32)> =
            images.iter().map(|i| (i.id, (i.width, i.height))).collect();
        let mut raw = Vec::with_capacity(file.pairs.len());
        for pair in file.pairs {
            let (w, h) = by_id.get(&pair.image_id).copied().ok_or_else(|| {
                Error::Validation(format!(
                    "image {} pair {}: image_id not present in the image table",
                    pair.image_id, pair.pair_id
                ))
            })?;
            let parse = |counts: Vec<u32>, which: &str| {
                Mask::from_counts(w, h, counts).map_err(|e| {
                    Error::Validation(format!(
                        "image {} pair {}: {which}: {e}",
                        pair.image_id, pair.pair_id
                    ))
                })
            };
            let shadow = parse(pair.shadow_rle, "shadow_rle")?;
            let association = parse(pair.association_rle, "association_rle")?;
            raw.push((pair.image_id, pair.pair_id, shadow, association));
        }
        Self::build(images, raw)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = GroundTruthFile {
            format_version: FORMAT_VERSION,
            images: self.images.values().copied().collect(),
            pairs: self
                .all_pairs()
                .map(|p| RawPair {
                    image_id: p.image_id,
                    pair_id: p.pair_id,
                    shadow_rle: p.shadow_mask.counts().to_vec(),
                    association_rle: p.association_mask.counts().to_vec(),
                })
                .collect(),
        };
        write_json_atomic(path, &file)
    }

    pub fn images(&self) -> impl Iterator<Item = &ImageInfo> {
        self.images.values()
    }

    pub fn image(&self, id: u64) -> Option<&ImageInfo> {
        self.images.get(&id)
    }

    pub fn image_count(&self) -> u64 {
        self.images.len() as u64
    }

    /// Pairs for one image, in file order. Empty for unknown images.
    pub fn pairs_for(&self, image_id: u64) -> &[GroundTruthPair] {
        self.pairs.get(&image_id).map_or(&[], Vec::as_slice)
    }

    /// All pairs ordered by image id, then file order.
    pub fn all_pairs(&self) -> impl Iterator<Item = &GroundTruthPair> {
        self.pairs.values().flatten()
    }

    pub fn total_pairs(&self) -> u64 {
        self.pairs.values().map(|v| v.len() as u64).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceKind {
    Shadow,
    Object,
}

/// One predicted shadow or object instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDetection {
    pub image_id: u64,
    pub kind: InstanceKind,
    pub score: f64,
    #[serde(rename = "box")]
    pub bbox: BBox,
    #[serde(rename = "rle", default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<Mask>,
}

/// One predicted shadow-object association: its box, score, and light angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationDetection {
    pub image_id: u64,
    pub score: f64,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub light_angle: LightAngle,
}

/// A full prediction file: flat lists of instance and association detections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    #[serde(default = "default_format_version")]
    pub format_version: u32,
    #[serde(default)]
    pub instances: Vec<InstanceDetection>,
    #[serde(default)]
    pub associations: Vec<AssociationDetection>,
}

impl Default for Predictions {
    fn default() -> Self {
        Predictions {
            format_version: FORMAT_VERSION,
            instances: Vec::new(),
            associations: Vec::new(),
        }
    }
}

/// Detections of one image, split by role.
#[derive(Debug, Clone, Default)]
pub struct ImageDetections {
    pub shadows: Vec<InstanceDetection>,
    pub objects: Vec<InstanceDetection>,
    pub associations: Vec<AssociationDetection>,
}

impl Predictions {
    pub fn load(path: &Path) -> Result<Self> {
        let preds: Predictions = read_json(path)?;
        preds.validate()?;
        Ok(preds)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let preds: Predictions = serde_json::from_str(text).map_err(|source| Error::Json {
            path: "<inline>".into(),
            source,
        })?;
        preds.validate()?;
        Ok(preds)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json_atomic(path, self)
    }

    /// Checks every documented invariant: scores in `[0, 1]`, nonempty masks
    /// that stay within their detection box (1-pixel tolerance), and
    /// consistent mask dimensions per image. Angles are range-checked during
    /// deserialization.
    pub fn validate(&self) -> Result<()> {
        check_format_version(self.format_version, "predictions")?;
        let mut dims: BTreeMap<u64, (u32, u32)> = BTreeMap::new();
        for (idx, inst) in self.instances.iter().enumerate() {
            let ctx = format!("instance {idx} (image {})", inst.image_id);
            if !(0.0..=1.0).contains(&inst.score) {
                return Err(Error::Validation(format!(
                    "{ctx}: score {} outside [0, 1]",
                    inst.score
                )));
            }
            if let Some(mask) = &inst.mask {
                if mask.is_empty() {
                    return Err(Error::Validation(format!("{ctx}: mask is empty")));
                }
                let mb = mask.bbox()?;
                let bb = &inst.bbox;
                let inside = mb.x_min() >= bb.x_min() - 1.0
                    && mb.y_min() >= bb.y_min() - 1.0
                    && mb.x_max() <= bb.x_max() + 1.0
                    && mb.y_max() <= bb.y_max() + 1.0;
                if !inside {
                    return Err(Error::Validation(format!(
                        "{ctx}: mask bounding box exceeds the detection box by more than one pixel"
                    )));
                }
                let entry = dims
                    .entry(inst.image_id)
                    .or_insert((mask.width(), mask.height()));
                if *entry != (mask.width(), mask.height()) {
                    return Err(Error::Validation(format!(
                        "{ctx}: mask dimensions {}x{} disagree with {}x{} seen earlier in the same image",
                        mask.width(),
                        mask.height(),
                        entry.0,
                        entry.1
                    )));
                }
            }
        }
        for (idx, assoc) in self.associations.iter().enumerate() {
            if !(0.0..=1.0).contains(&assoc.score) {
                return Err(Error::Validation(format!(
                    "association {idx} (image {}): score {} outside [0, 1]",
                    assoc.image_id, assoc.score
                )));
            }
        }
        Ok(())
    }

    /// Groups detections by image id (every image mentioned anywhere gets an
    /// entry), preserving file order within each role.
    pub fn group_by_image(&self) -> BTreeMap<u64, ImageDetections> {
        let mut map: BTreeMap<u64, ImageDetections> = BTreeMap::new();
        for inst in &self.instances {
            let slot = map.entry(inst.image_id).or_default();
            match inst.kind {
                InstanceKind::Shadow => slot.shadows.push(inst.clone()),
                InstanceKind::Object => slot.objects.push(inst.clone()),
            }
        }
        for assoc in &self.associations {
            map.entry(assoc.image_id)
                .or_default()
                .associations
                .push(assoc.clone());
        }
        map
    }
}

/// Aggregate statistics over a ground-truth dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub images: u64,
    pub pairs: u64,
    pub mean_pairs_per_image: f64,
    /// Number of images having exactly N pairs.
    pub pairs_per_image: BTreeMap<u32, u64>,
    pub fraction_images_with_9_or_more_pairs: f64,
    /// Shadow area as a fraction of image area: ten equal bins over
    /// `[0, 0.5)` plus one overflow bucket for `>= 0.5`.
    pub shadow_area_fraction_histogram: Vec<u64>,
    /// Same binning for derived object masks.
    pub object_area_fraction_histogram: Vec<u64>,
}

fn area_fraction_bin(fraction: f64) -> usize {
    ((fraction * 20.0).floor() as usize).min(10)
}

pub fn compute_stats(dataset: &Dataset) -> Result<DatasetStats> {
    if dataset.image_count() == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut pairs_per_image: BTreeMap<u32, u64> = BTreeMap::new();
    let mut with_nine_plus = 0u64;
    let mut shadow_hist = vec![0u64; 11];
    let mut object_hist = vec![0u64; 11];
    for image in dataset.images() {
        let pairs = dataset.pairs_for(image.id);
        *pairs_per_image.entry(pairs.len() as u32).or_insert(0) += 1;
        if pairs.len() >= 9 {
            with_nine_plus += 1;
        }
        let image_area = image.width as f64 * image.height as f64;
        for pair in pairs {
            shadow_hist[area_fraction_bin(pair.shadow_mask.area() as f64 / image_area)] += 1;
            object_hist[area_fraction_bin(pair.object_mask.area() as f64 / image_area)] += 1;
        }
    }
    let images = dataset.image_count();
    let pairs = dataset.total_pairs();
    Ok(DatasetStats {
        images,
        pairs,
        mean_pairs_per_image: pairs as f64 / images as f64,
        pairs_per_image,
        fraction_images_with_9_or_more_pairs: with_nine_plus as f64 / images as f64,
        shadow_area_fraction_histogram: shadow_hist,
        object_area_fraction_histogram: object_hist,
    })
}
