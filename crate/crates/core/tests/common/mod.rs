//! Brute-force reference implementations for detection metrics.
//!
//! These are written directly against the metric definitions, deliberately
//! independent of the library under test (no imports from it), so that the
//! library and the reference can disagree honestly. They are slow on purpose:
//! clarity over speed, tiny inputs only.
#![allow(dead_code)]

/// 101-point interpolated average precision from labeled detections.
///
/// `labeled` holds `(score, is_true_positive)` per detection; `num_gt` is the
/// total number of ground-truth items (matched or not). Detections are ranked
/// by descending score (ties keep input order), the running precision/recall
/// curve is built, and AP is the mean over recall points {0.00, 0.01, .., 1.00}
/// of the maximum precision at recall >= that point (0 where unreachable).
pub fn ap_101_from_labels(labeled: &[(f64, bool)], num_gt: usize) -> f64 {
    let mut order: Vec<usize> = (0..labeled.len()).collect();
    order.sort_by(|&a, &b| labeled[b].0.total_cmp(&labeled[a].0));

    let mut true_positives = 0usize;
    // (recall, precision) after each successive detection in rank order.
    let mut curve: Vec<(f64, f64)> = Vec::with_capacity(labeled.len());
    for (rank, &i) in order.iter().enumerate() {
        if labeled[i].1 {
            true_positives += 1;
        }
        let precision = true_positives as f64 / (rank + 1) as f64;
        let recall = if num_gt == 0 {
            0.0
        } else {
            true_positives as f64 / num_gt as f64
        };
        curve.push((recall, precision));
    }

    let mut total = 0.0;
    for step in 0..=100u32 {
        let r = step as f64 / 100.0;
        // Tiny slack so a recall that equals a grid point in exact arithmetic
        // is not excluded by floating-point representation of the grid.
        let best = curve
            .iter()
            .filter(|(recall, _)| *recall >= r - 1e-12)
            .map(|&(_, precision)| precision)
            .fold(0.0f64, f64::max);
        total += best;
    }
    total / 101.0
}

/// Best achievable 101-point AP over every one-to-one assignment of
/// predictions to ground-truth items.
///
/// `eligible[i][j]` says prediction `i` may be counted as a true positive when
/// assigned ground-truth item `j` (i.e. its overlap already clears the
/// threshold). Each ground-truth item can be used at most once; unassigned
/// predictions are false positives. Exhaustive search, so inputs are capped.
pub fn best_ap_over_assignments(scores: &[f64], eligible: &[Vec<bool>], num_gt: usize) -> f64 {
    assert!(scores.len() == eligible.len());
    assert!(
        scores.len() <= 8 && num_gt <= 8,
        "oracle is exhaustive; keep inputs tiny"
    );
    assert!(eligible.iter().all(|row| row.len() == num_gt));

    let mut labels = vec![false; scores.len()];
    let mut best = 0.0f64;
    explore(scores, eligible, num_gt, 0, 0u32, &mut labels, &mut best);
    best
}

fn explore(
    scores: &[f64],
    eligible: &[Vec<bool>],
    num_gt: usize,
    pred: usize,
    used_gt: u32,
    labels: &mut Vec<bool>,
    best: &mut f64,
) {
    if pred == scores.len() {
        let labeled: Vec<(f64, bool)> =
            scores.iter().copied().zip(labels.iter().copied()).collect();
        let ap = ap_101_from_labels(&labeled, num_gt);
        if ap > *best {
            *best = ap;
        }
        return;
    }
    // Leave this prediction unmatched (false positive).
    labels[pred] = false;
    explore(scores, eligible, num_gt, pred + 1, used_gt, labels, best);
    // Or claim any eligible, still-unused ground-truth item.
    for gt in 0..num_gt {
        if eligible[pred][gt] && used_gt & (1 << gt) == 0 {
            labels[pred] = true;
            explore(
                scores,
                eligible,
                num_gt,
                pred + 1,
                used_gt | (1 << gt),
                labels,
                best,
            );
            labels[pred] = false;
        }
    }
}
