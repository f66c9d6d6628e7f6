//! Self-tests freezing the reference-oracle values that the library
//! implementation is later held to.

mod common;

use common::{ap_101_from_labels, best_ap_over_assignments};

/// The canonical hand-worked case: two ground-truth pairs, three predictions
/// ranked 0.9 (true positive), 0.8 (false positive), 0.7 (true positive).
///
/// Rank walk: after #1 precision 1/1 recall 1/2; after #2 precision 1/2
/// recall 1/2; after #3 precision 2/3 recall 1.
/// Interpolated precision: 1.0 for recall points 0.00..=0.50 (51 points, the
/// max precision at recall >= r is the rank-1 value), 2/3 for 0.51..=1.00
/// (50 points). AP = (51 * 1 + 50 * 2/3) / 101 = 253/303 = 0.83498349...
#[test]
fn fixture_two_gt_three_predictions() {
    let labeled = [(0.9, true), (0.8, false), (0.7, true)];
    let ap = ap_101_from_labels(&labeled, 2);
    assert!(
        (ap - 253.0 / 303.0).abs() < 1e-12,
        "expected 253/303, got {ap}"
    );
    // Four-decimal display value used in reports.
    assert!((ap - 0.8350).abs() < 5e-5);
}

#[test]
fn perfect_detector_scores_exactly_one() {
    let labeled = [(1.0, true), (1.0, true), (1.0, true)];
    assert_eq!(ap_101_from_labels(&labeled, 3), 1.0);
}

#[test]
fn no_predictions_scores_zero() {
    assert_eq!(ap_101_from_labels(&[], 4), 0.0);
}

#[test]
fn all_false_positives_score_zero() {
    let labeled = [(0.9, false), (0.5, false)];
    assert_eq!(ap_101_from_labels(&labeled, 2), 0.0);
}

#[test]
fn tie_scores_keep_input_order() {
    // Equal scores: the first listed detection is ranked first. TP-then-FP
    // yields precision 1.0 at recall 1.0; FP-then-TP only 0.5 there.
    let tp_first = ap_101_from_labels(&[(0.5, true), (0.5, false)], 1);
    let fp_first = ap_101_from_labels(&[(0.5, false), (0.5, true)], 1);
    assert_eq!(tp_first, 1.0);
    assert!((fp_first - 0.5).abs() < 1e-12);
}

#[test]
fn exhaustive_assignment_reproduces_forced_fixture() {
    // Same fixture as above expressed as an eligibility matrix: prediction 0
    // can only match gt 0, prediction 1 matches nothing, prediction 2 only
    // gt 1. The assignment is forced, so best == labeled AP.
    let scores = [0.9, 0.8, 0.7];
    let eligible = vec![vec![true, false], vec![false, false], vec![true, true]];
    let best = best_ap_over_assignments(&scores, &eligible, 2);
    assert!((best - 253.0 / 303.0).abs() < 1e-12, "got {best}");
}

#[test]
fn exhaustive_assignment_prefers_earlier_ranked_true_positives() {
    // Both predictions are eligible for the single gt item; assigning it to
    // the higher-scored one is strictly better, and the oracle must find it.
    let scores = [0.9, 0.8];
    let eligible = vec![vec![true], vec![true]];
    let best = best_ap_over_assignments(&scores, &eligible, 1);
    assert_eq!(best, 1.0);
}

#[test]
fn exhaustive_assignment_routes_around_blocking() {
    // Prediction 0 could take either gt; prediction 1 only gt 1. The best
    // assignment sends prediction 0 to gt 0 so both are true positives.
    let scores = [0.9, 0.8];
    let eligible = vec![vec![true, true], vec![false, true]];
    let best = best_ap_over_assignments(&scores, &eligible, 2);
    assert_eq!(best, 1.0);
}
