//! Drives the C surface exactly as a foreign caller would: raw pointers,
//! NUL-terminated strings, status codes, and explicit frees.

use std::ffi::{CStr, CString};
use std::ptr;

use umbra_ffi::*;

fn cstring(text: &str) -> CString {
    CString::new(text).unwrap()
}

fn last_error() -> String {
    unsafe {
        CStr::from_ptr(umbra_last_error_message())
            .to_str()
            .unwrap()
            .to_owned()
    }
}

#[test]
fn version_is_a_static_semver_string() {
    let version = unsafe { CStr::from_ptr(umbra_version()) }.to_str().unwrap();
    let parts: Vec<&str> = version.split('.').collect();
    assert_eq!(parts.len(), 3, "not a semver string: {version}");
    assert!(parts.iter().all(|p| p.parse::<u32>().is_ok()));
}

#[test]
fn the_whole_pipeline_runs_through_the_c_surface() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = cstring(dir.path().to_str().unwrap());
    let spec = cstring(r#"{"seed": 21, "images": 4, "width": 160, "height": 160, "pairs_max": 3}"#);

    unsafe {
        assert_eq!(
            umbra_synth_generate(spec.as_ptr(), out_dir.as_ptr()),
            UmbraStatus::Ok,
            "{}",
            last_error()
        );

        let gt_path = cstring(dir.path().join("ground_truth.json").to_str().unwrap());
        let mut dataset: *mut UmbraDataset = ptr::null_mut();
        assert_eq!(
            umbra_dataset_load(gt_path.as_ptr(), &mut dataset),
            UmbraStatus::Ok,
            "{}",
            last_error()
        );
        assert_eq!(umbra_dataset_image_count(dataset), 4);
        let pair_count = umbra_dataset_pair_count(dataset);
        assert!(pair_count >= 4, "at least one pair per image");

        let pred_path = cstring(
            dir.path()
                .join("predictions_perfect.json")
                .to_str()
                .unwrap(),
        );
        let mut predictions: *mut UmbraPredictions = ptr::null_mut();
        assert_eq!(
            umbra_predictions_load(pred_path.as_ptr(), &mut predictions),
            UmbraStatus::Ok,
            "{}",
            last_error()
        );
        assert_eq!(
            umbra_predictions_instance_count(predictions),
            2 * pair_count
        );
        assert_eq!(umbra_predictions_association_count(predictions), pair_count);

        let config = umbra_match_config_default();
        assert_eq!(config.threshold_scale, 1.0);
        assert_eq!(config.iou_floor, 0.0);
        assert_eq!(config.score_mode, 0);

        let mut paired: *mut UmbraPaired = ptr::null_mut();
        assert_eq!(
            umbra_match(predictions, &config, &mut paired),
            UmbraStatus::Ok,
            "{}",
            last_error()
        );
        assert_eq!(umbra_paired_len(paired), pair_count);

        // Default grid, box variant: a perfect file scores a perfect report.
        let mut report: *mut UmbraSoapReport = ptr::null_mut();
        assert_eq!(
            umbra_soap_evaluate(paired, dataset, 0, ptr::null(), 0, &mut report),
            UmbraStatus::Ok,
            "{}",
            last_error()
        );
        assert_eq!(umbra_report_soap(report), 1.0);
        assert_eq!(umbra_report_soap_50(report), 1.0);
        assert_eq!(umbra_report_soap_75(report), 1.0);
        assert_eq!(umbra_report_tau_count(report), 10);
        let (mut tau, mut ap) = (0.0f64, 0.0f64);
        assert_eq!(
            umbra_report_tau_ap(report, 0, &mut tau, &mut ap),
            UmbraStatus::Ok
        );
        assert_eq!((tau, ap), (0.5, 1.0));
        assert_eq!(
            umbra_report_tau_ap(report, 10, &mut tau, &mut ap),
            UmbraStatus::InvalidArgument
        );

        let mut json: *mut libc::c_char = ptr::null_mut();
        assert_eq!(umbra_report_to_json(report, &mut json), UmbraStatus::Ok);
        let parsed: serde_json::Value =
            serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(parsed["soap"], 1.0);
        assert_eq!(parsed["variant"], "box");
        umbra_string_free(json);

        // A custom threshold list narrows the grid.
        let taus = [0.5f64, 0.75];
        let mut narrow: *mut UmbraSoapReport = ptr::null_mut();
        assert_eq!(
            umbra_soap_evaluate(paired, dataset, 1, taus.as_ptr(), taus.len(), &mut narrow),
            UmbraStatus::Ok,
            "{}",
            last_error()
        );
        assert_eq!(umbra_report_tau_count(narrow), 2);
        assert_eq!(umbra_report_soap(narrow), 1.0);

        umbra_report_free(narrow);
        umbra_report_free(report);
        umbra_paired_free(paired);
        umbra_predictions_free(predictions);
        umbra_dataset_free(dataset);
    }
}

#[test]
fn failures_return_a_status_and_leave_a_message() {
    unsafe {
        let missing = cstring("/nonexistent/ground_truth.json");
        let mut dataset: *mut UmbraDataset = ptr::null_mut();
        assert_eq!(
            umbra_dataset_load(missing.as_ptr(), &mut dataset),
            UmbraStatus::Io
        );
        assert!(dataset.is_null());
        assert!(
            last_error().contains("/nonexistent/ground_truth.json"),
            "message must name the path: {}",
            last_error()
        );

        assert_eq!(
            umbra_dataset_load(ptr::null(), &mut dataset),
            UmbraStatus::NullPointer
        );
        assert!(last_error().contains("NULL"));

        let mut paired: *mut UmbraPaired = ptr::null_mut();
        assert_eq!(
            umbra_match(ptr::null(), ptr::null(), &mut paired),
            UmbraStatus::NullPointer
        );

        // A config with an unknown score mode is rejected up front.
        let dir = tempfile::tempdir().unwrap();
        let out_dir = cstring(dir.path().to_str().unwrap());
        let spec = cstring(r#"{"seed": 22, "images": 2, "width": 128, "height": 128}"#);
        assert_eq!(
            umbra_synth_generate(spec.as_ptr(), out_dir.as_ptr()),
            UmbraStatus::Ok
        );
        let pred_path = cstring(
            dir.path()
                .join("predictions_perfect.json")
                .to_str()
                .unwrap(),
        );
        let mut predictions: *mut UmbraPredictions = ptr::null_mut();
        assert_eq!(
            umbra_predictions_load(pred_path.as_ptr(), &mut predictions),
            UmbraStatus::Ok
        );
        let bad_config = UmbraMatchConfig {
            threshold_scale: 1.0,
            iou_floor: 0.0,
            score_mode: 9,
        };
        assert_eq!(
            umbra_match(predictions, &bad_config, &mut paired),
            UmbraStatus::InvalidArgument
        );
        assert!(last_error().contains("score_mode"));

        // Variant values other than 0 and 1 are rejected.
        assert_eq!(
            umbra_match(predictions, ptr::null(), &mut paired),
            UmbraStatus::Ok
        );
        let gt_path = cstring(dir.path().join("ground_truth.json").to_str().unwrap());
        let mut dataset2: *mut UmbraDataset = ptr::null_mut();
        assert_eq!(
            umbra_dataset_load(gt_path.as_ptr(), &mut dataset2),
            UmbraStatus::Ok
        );
        let mut report: *mut UmbraSoapReport = ptr::null_mut();
        assert_eq!(
            umbra_soap_evaluate(paired, dataset2, 7, ptr::null(), 0, &mut report),
            UmbraStatus::InvalidArgument
        );
        assert!(last_error().contains("variant"));

        // Malformed spec JSON is a parse error, not a crash.
        assert_eq!(
            umbra_synth_generate(cstring("{not json").as_ptr(), out_dir.as_ptr()),
            UmbraStatus::Parse
        );

        umbra_paired_free(paired);
        umbra_predictions_free(predictions);
        umbra_dataset_free(dataset2);
    }
}

#[test]
fn count_and_summary_helpers_tolerate_null_handles() {
    unsafe {
        assert_eq!(umbra_dataset_image_count(ptr::null()), 0);
        assert_eq!(umbra_dataset_pair_count(ptr::null()), 0);
        assert_eq!(umbra_predictions_instance_count(ptr::null()), 0);
        assert_eq!(umbra_predictions_association_count(ptr::null()), 0);
        assert_eq!(umbra_paired_len(ptr::null()), 0);
        assert_eq!(umbra_report_tau_count(ptr::null()), 0);
        assert!(umbra_report_soap(ptr::null()).is_nan());
        assert!(umbra_report_soap_50(ptr::null()).is_nan());
        assert!(umbra_report_soap_75(ptr::null()).is_nan());

        // Frees accept NULL without touching anything.
        umbra_dataset_free(ptr::null_mut());
        umbra_predictions_free(ptr::null_mut());
        umbra_paired_free(ptr::null_mut());
        umbra_report_free(ptr::null_mut());
        umbra_string_free(ptr::null_mut());
    }
}

#[test]
fn angle_helpers_compute_exact_values() {
    unsafe {
        assert_eq!(umbra_light_loss(0.5, 0.0, false), 0.125);
        assert_eq!(umbra_light_loss(2.0, 0.0, false), 1.5);

        let mut angle = f64::NAN;
        assert_eq!(
            umbra_ground_truth_angle(0.0, 0.0, 1.0, 0.0, &mut angle),
            UmbraStatus::Ok
        );
        assert_eq!(angle, 0.0);
        assert_eq!(
            umbra_ground_truth_angle(0.0, 0.0, 0.0, 2.0, &mut angle),
            UmbraStatus::Ok
        );
        assert_eq!(angle, std::f64::consts::FRAC_PI_2);

        // Coincident centroids carry no direction.
        assert_eq!(
            umbra_ground_truth_angle(3.0, 4.0, 3.0, 4.0, &mut angle),
            UmbraStatus::InvalidArgument
        );
        assert_eq!(
            umbra_ground_truth_angle(0.0, 0.0, 1.0, 0.0, ptr::null_mut()),
            UmbraStatus::NullPointer
        );
    }
}
