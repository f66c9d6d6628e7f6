//! Average-precision evaluation over matched shadow-object pairs.
//!
//! A predicted pair counts as a true positive against a ground-truth pair
//! only when *three* IoUs clear the threshold at once: shadow vs shadow,
//! object vs object, and association vs association. Everything else about
//! the metric is standard average precision: predictions are consumed in
//! descending combined-score order, each ground-truth pair can be claimed
//! once, and the precision/recall curve is summarized by 101-point
//! interpolation. The headline score averages AP over an IoU threshold grid
//! (0.50 to 0.95 in steps of 0.05 by default).
//!
//! Two variants exist: `box` compares detection boxes (the association side
//! uses the predicted association box against the merged ground-truth box),
//! `mask` compares pixel masks (the association side uses the union of the
//! predicted instance masks against the stored association mask).

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::association::PairedAssociation;
use crate::model::{Dataset, GroundTruthPair};
use crate::{Error, Result};

/// Which geometry the three IoU tests compare.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    #[default]
    Box,
    Mask,
}

/// The default threshold grid: 0.50, 0.55, ..., 0.95.
pub fn default_tau_grid() -> Vec<f64> {
    (10..=19).map(|i| i as f64 / 20.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoapConfig {
    /// IoU thresholds; must be strictly increasing, each in (0, 1).
    pub taus: Vec<f64>,
    pub variant: Variant,
}

impl Default for SoapConfig {
    fn default() -> Self {
        SoapConfig {
            taus: default_tau_grid(),
            variant: Variant::Box,
        }
    }
}

impl SoapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.taus.is_empty() {
            return Err(Error::Validation("threshold list is empty".into()));
        }
        for tau in &self.taus {
            if !(tau.is_finite() && 0.0 < *tau && *tau < 1.0) {
                return Err(Error::Validation(format!(
                    "threshold {tau} must lie strictly inside (0, 1)"
                )));
            }
        }
        if self.taus.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation(
                "thresholds must be strictly increasing".into(),
            ));
        }
        Ok(())
    }
}

/// Evaluation results: one AP (and its match counts) per threshold, plus the
/// averaged headline number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoapReport {
    pub variant: Variant,
    pub taus: Vec<f64>,
    /// AP per threshold, aligned with `taus`.
    pub ap: Vec<f64>,
    pub true_positives: Vec<u64>,
    pub false_positives: Vec<u64>,
    pub false_negatives: Vec<u64>,
    /// Mean of `ap` over all thresholds.
    pub soap: f64,
    /// AP at threshold 0.5, when the grid contains it.
    pub soap_50: Option<f64>,
    /// AP at threshold 0.75, when the grid contains it.
    pub soap_75: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
struct IouTriple {
    shadow: f64,
    object: f64,
    association: f64,
}

impl IouTriple {
    fn min_iou(&self) -> f64 {
        self.shadow.min(self.object).min(self.association)
    }
}

struct Prepared<'a> {
    gt: Vec<&'a GroundTruthPair>,
    /// Prediction indices in descending combined-score order (stable).
    order: Vec<usize>,
    /// Per prediction (original index): overlapping same-image ground-truth
    /// pairs and the IoU triple against each.
    overlaps: Vec<Vec<(usize, IouTriple)>>,
}

fn prepare<'a>(
    preds: &[PairedAssociation],
    dataset: &'a Dataset,
    variant: Variant,
) -> Result<Prepared<'a>> {
    let gt: Vec<&GroundTruthPair> = dataset.all_pairs().collect();
    let mut gt_by_image: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (idx, pair) in gt.iter().enumerate() {
        gt_by_image.entry(pair.image_id).or_default().push(idx);
    }

    let empty = Vec::new();
    let mut overlaps = Vec::with_capacity(preds.len());
    for (idx, pred) in preds.iter().enumerate() {
        let image = dataset.image(pred.image_id).ok_or_else(|| {
            Error::Validation(format!(
                "prediction {idx}: image {} is not in the ground truth",
                pred.image_id
            ))
        })?;
        let candidates = gt_by_image.get(&pred.image_id).unwrap_or(&empty);
        let mut per = Vec::new();
        match variant {
            Variant::Box => {
                for &g in candidates {
                    let triple = IouTriple {
                        shadow: pred.shadow.bbox.iou(&gt[g].shadow_box),
                        object: pred.object.bbox.iou(&gt[g].object_box),
                        association: pred.association.bbox.iou(&gt[g].association_box),
                    };
                    if triple.min_iou() > 0.0 {
                        per.push((g, triple));
                    }
                }
            }
            Variant::Mask => {
                let ctx = format!("prediction {idx} (image {})", pred.image_id);
                let missing = |what: &str| {
                    Error::Validation(format!(
                        "{ctx}: {what} mask is required by the mask variant"
                    ))
                };
                let shadow = pred.shadow.mask.as_ref().ok_or_else(|| missing("shadow"))?;
                let object = pred.object.mask.as_ref().ok_or_else(|| missing("object"))?;
                let combined = pred
                    .combined_mask
                    .as_ref()
                    .ok_or_else(|| missing("combined"))?;
                for mask in [shadow, object, combined] {
                    if (mask.width(), mask.height()) != (image.width, image.height) {
                        return Err(Error::Validation(format!(
                            "{ctx}: mask dimensions {}x{} do not match the {}x{} image",
                            mask.width(),
                            mask.height(),
                            image.width,
                            image.height
                        )));
                    }
                }
                for &g in candidates {
                    let triple = IouTriple {
                        shadow: shadow.iou(&gt[g].shadow_mask)?,
                        object: object.iou(&gt[g].object_mask)?,
                        association: combined.iou(&gt[g].association_mask)?,
                    };
                    if triple.min_iou() > 0.0 {
                        per.push((g, triple));
                    }
                }
            }
        }
        overlaps.push(per);
    }

    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].combined_score.total_cmp(&preds[a].combined_score));
    Ok(Prepared {
        gt,
        order,
        overlaps,
    })
}

/// Greedy matching at one threshold. Returns true-positive flags in score
/// order, the claimed ground-truth index per prediction (original indexing),
/// and the true-positive count.
fn greedy_at_tau(prepared: &Prepared, tau: f64) -> (Vec<bool>, Vec<Option<usize>>, u64) {
    let mut used = vec![false; prepared.gt.len()];
    let mut chosen: Vec<Option<usize>> = vec![None; prepared.overlaps.len()];
    let mut flags = Vec::with_capacity(prepared.order.len());
    let mut tp_count = 0u64;
    for &pred_idx in &prepared.order {
        let mut best: Option<(usize, IouTriple)> = None;
        for &(g, triple) in &prepared.overlaps[pred_idx] {
            if used[g] || triple.min_iou() < tau {
                continue;
            }
            let better = match best {
                None => true,
                Some((best_g, best_triple)) => {
                    // Prefer the higher minimum IoU; break ties by the
                    // association IoU, then by the lower pair id.
                    match triple.min_iou().total_cmp(&best_triple.min_iou()) {
                        std::cmp::Ordering::Greater => true,
                        std::cmp::Ordering::Less => false,
                        std::cmp::Ordering::Equal => {
                            match triple.association.total_cmp(&best_triple.association) {
                                std::cmp::Ordering::Greater => true,
                                std::cmp::Ordering::Less => false,
                                std::cmp::Ordering::Equal => {
                                    prepared.gt[g].pair_id < prepared.gt[best_g].pair_id
                                }
                            }
                        }
                    }
                }
            };
            if better {
                best = Some((g, triple));
            }
        }
        if let Some((g, _)) = best {
            used[g] = true;
            chosen[pred_idx] = Some(g);
            tp_count += 1;
            flags.push(true);
        } else {
            flags.push(false);
        }
    }
    (flags, chosen, tp_count)
}

/// 101-point interpolated average precision. `tp_flags` must already be in
/// descending score order.
fn average_precision(tp_flags: &[bool], num_gt: usize) -> f64 {
    if num_gt == 0 {
        return 0.0;
    }
    let mut points = Vec::with_capacity(tp_flags.len());
    let (mut tp, mut fp) = (0u64, 0u64);
    for &is_tp in tp_flags {
        if is_tp {
            tp += 1;
        } else {
            fp += 1;
        }
        let recall = tp as f64 / num_gt as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        points.push((recall, precision));
    }
    let mut total = 0.0;
    for i in 0..=100 {
        let threshold = i as f64 / 100.0;
        let best = points
            .iter()
            .filter(|(recall, _)| *recall >= threshold - 1e-12)
            .map(|&(_, precision)| precision)
            .fold(0.0, f64::max);
        total += best;
    }
    total / 101.0
}

fn lookup_tau(taus: &[f64], ap: &[f64], target: f64) -> Option<f64> {
    taus.iter()
        .position(|t| (t - target).abs() < 1e-9)
        .map(|i| ap[i])
}

/// Evaluates matched predictions against a ground-truth dataset.
pub fn evaluate(
    preds: &[PairedAssociation],
    dataset: &Dataset,
    config: &SoapConfig,
) -> Result<SoapReport> {
    config.validate()?;
    let prepared = prepare(preds, dataset, config.variant)?;
    let num_gt = prepared.gt.len();
    if num_gt == 0 {
        return Err(Error::EmptyGroundTruth);
    }
    let mut ap = Vec::with_capacity(config.taus.len());
    let mut true_positives = Vec::with_capacity(config.taus.len());
    let mut false_positives = Vec::with_capacity(config.taus.len());
    let mut false_negatives = Vec::with_capacity(config.taus.len());
    for &tau in &config.taus {
        let (flags, _, tp) = greedy_at_tau(&prepared, tau);
        ap.push(average_precision(&flags, num_gt));
        true_positives.push(tp);
        false_positives.push(preds.len() as u64 - tp);
        false_negatives.push(num_gt as u64 - tp);
    }
    let soap = ap.iter().sum::<f64>() / ap.len() as f64;
    Ok(SoapReport {
        variant: config.variant,
        soap_50: lookup_tau(&config.taus, &ap, 0.5),
        soap_75: lookup_tau(&config.taus, &ap, 0.75),
        taus: config.taus.clone(),
        ap,
        true_positives,
        false_positives,
        false_negatives,
        soap,
    })
}

/// The true-positive matches at a single threshold, in descending score
/// order. Used to attribute light angles to ground truth.
pub fn matched_pairs<'a>(
    preds: &'a [PairedAssociation],
    dataset: &'a Dataset,
    tau: f64,
    variant: Variant,
) -> Result<Vec<(&'a PairedAssociation, &'a GroundTruthPair)>> {
    if !(tau.is_finite() && 0.0 < tau && tau < 1.0) {
        return Err(Error::Validation(format!(
            "threshold {tau} must lie strictly inside (0, 1)"
        )));
    }
    let prepared = prepare(preds, dataset, variant)?;
    if prepared.gt.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    let (_, chosen, _) = greedy_at_tau(&prepared, tau);
    Ok(prepared
        .order
        .iter()
        .filter_map(|&i| chosen[i].map(|g| (&preds[i], prepared.gt[g])))
        .collect())
}

/// Formats the headline numbers as an aligned two-row table (values are
/// percentages with one decimal; absent thresholds render as "-").
pub fn render_table(method: &str, report: &SoapReport) -> String {
    let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{:.1}", x * 100.0));
    let headers = ["method", "SOAP_50", "SOAP_75", "SOAP"];
    let row = [
        method.to_string(),
        cell(report.soap_50),
        cell(report.soap_75),
        cell(Some(report.soap)),
    ];
    let widths: Vec<usize> = headers
        .iter()
        .zip(&row)
        .map(|(h, c)| h.len().max(c.len()))
        .collect();
    let mut out = String::new();
    for line in [&headers.map(String::from), &row] {
        for (i, text) in line.iter().enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            if i == 0 {
                out.push_str(&format!("{:<width$}", text, width = widths[0]));
            } else {
                out.push_str(&format!("{:>width$}", text, width = widths[i]));
            }
        }
        out.push('\n');
    }
    out
}
