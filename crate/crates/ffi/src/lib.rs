//! C ABI over the shadow-object association pipeline.
//!
//! Conventions, chosen so the surface is safe to drive from any language
//! with a C FFI:
//!
//! - Every fallible call returns an `UmbraStatus`; `UMBRA_STATUS_OK` is 0.
//! - Results come back through out-pointers as opaque handles; each handle
//!   type has a matching `umbra_*_free` that tolerates NULL.
//! - On failure, `umbra_last_error_message` returns a human-readable
//!   message for the calling thread, valid until that thread's next failure.
//! - Panics never cross the boundary; they are caught and reported as
//!   `UMBRA_STATUS_INTERNAL`.
//! - `const char *` arguments must be NUL-terminated UTF-8.
//!
//! The companion header `include/umbra.h` is regenerated on every build.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use libc::{c_char, c_double, size_t};

use umbra_core::association::{pair_and_match_all, MatchConfig, PairedAssociation, ScoreMode};
use umbra_core::model::{Dataset, Predictions};
use umbra_core::soap::{default_tau_grid, evaluate, SoapConfig, SoapReport, Variant};
use umbra_core::synth::{generate_to_dir, SceneSpec};
use umbra_core::Error;

/// Result code of every fallible `umbra_*` call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UmbraStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// An argument was malformed (bad UTF-8, unknown enum value, bad range).
    InvalidArgument = 2,
    /// A file could not be read or written.
    Io = 3,
    /// A file was read but is not valid JSON for its schema.
    Parse = 4,
    /// Inputs parsed but violate a documented invariant.
    Validation = 5,
    /// An unexpected internal failure (caught panic).
    Internal = 6,
}

/// A loaded ground-truth dataset (opaque).
pub struct UmbraDataset(Dataset);

/// A loaded prediction file (opaque).
pub struct UmbraPredictions(Predictions);

/// Matched shadow-object pairs produced by `umbra_match` (opaque).
pub struct UmbraPaired(Vec<PairedAssociation>);

/// An evaluation report produced by `umbra_soap_evaluate` (opaque).
pub struct UmbraSoapReport(SoapReport);

/// Matcher settings, mirroring the library defaults when obtained from
/// `umbra_match_config_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct UmbraMatchConfig {
    /// Candidate gate: pair when box distance < shadow height × this scale.
    pub threshold_scale: c_double,
    /// Reject matches whose merged-box/association IoU is <= this floor.
    pub iou_floor: c_double,
    /// 0 = geometric mean, 1 = minimum, 2 = association score.
    pub score_mode: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let owned = CString::new(message.replace('\0', " ")).expect("NULs stripped");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = owned);
}

fn fail(status: UmbraStatus, message: &str) -> UmbraStatus {
    set_error(message);
    status
}

fn fail_with(err: Error) -> UmbraStatus {
    let status = match err {
        Error::Io { .. } => UmbraStatus::Io,
        Error::Json { .. } => UmbraStatus::Parse,
        _ => UmbraStatus::Validation,
    };
    fail(status, &err.to_string())
}

/// Runs a body with a panic barrier, reporting panics as `Internal`.
fn guarded(body: impl FnOnce() -> UmbraStatus) -> UmbraStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(UmbraStatus::Internal, "internal panic"),
    }
}

/// # Safety
/// `ptr` must be NULL or a valid NUL-terminated string.
unsafe fn utf8_arg(ptr: *const c_char, what: &str) -> Result<String, UmbraStatus> {
    if ptr.is_null() {
        return Err(fail(UmbraStatus::NullPointer, &format!("{what} is NULL")));
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(text) => Ok(text.to_owned()),
        Err(_) => Err(fail(
            UmbraStatus::InvalidArgument,
            &format!("{what} is not valid UTF-8"),
        )),
    }
}

unsafe fn deref<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, UmbraStatus> {
    if ptr.is_null() {
        Err(fail(UmbraStatus::NullPointer, &format!("{what} is NULL")))
    } else {
        Ok(&*ptr)
    }
}

/// Stores a freshly boxed value through an out-pointer.
unsafe fn emit<T>(out: *mut *mut T, value: T, what: &str) -> UmbraStatus {
    if out.is_null() {
        return fail(UmbraStatus::NullPointer, &format!("{what} is NULL"));
    }
    *out = Box::into_raw(Box::new(value));
    UmbraStatus::Ok
}

/// Message describing the calling thread's most recent failed `umbra_*`
/// call. Empty until a failure happens. The pointer stays valid until the
/// next failed call on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn umbra_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string; do not free it.
#[no_mangle]
pub extern "C" fn umbra_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Loads a ground-truth dataset from a JSON file into `*out`.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn umbra_dataset_load(
    path: *const c_char,
    out: *mut *mut UmbraDataset,
) -> UmbraStatus {
    guarded(|| {
        let path = match utf8_arg(path, "path") {
            Ok(p) => PathBuf::from(p),
            Err(status) => return status,
        };
        match Dataset::load(&path) {
            Ok(dataset) => emit(out, UmbraDataset(dataset), "out"),
            Err(err) => fail_with(err),
        }
    })
}

/// Frees a dataset handle. NULL is a no-op.
///
/// # Safety
/// `dataset` must be NULL or a pointer obtained from `umbra_dataset_load`.
#[no_mangle]
pub unsafe extern "C" fn umbra_dataset_free(dataset: *mut UmbraDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Number of images in the dataset; 0 if `dataset` is NULL.
///
/// # Safety
/// `dataset` must be NULL or a valid dataset handle.
#[no_mangle]
pub unsafe extern "C" fn umbra_dataset_image_count(dataset: *const UmbraDataset) -> size_t {
    dataset.as_ref().map_or(0, |d| d.0.image_count() as size_t)
}

/// Number of ground-truth pairs in the dataset; 0 if `dataset` is NULL.
///
/// # Safety
/// `dataset` must be NULL or a valid dataset handle.
#[no_mangle]
pub unsafe extern "C" fn umbra_dataset_pair_count(dataset: *const UmbraDataset) -> size_t {
    dataset.as_ref().map_or(0, |d| d.0.total_pairs() as size_t)
}

/// Loads a prediction file (instances + associations) into `*out`.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn umbra_predictions_load(
    path: *const c_char,
    out: *mut *mut UmbraPredictions,
) -> UmbraStatus {
    guarded(|| {
        let path = match utf8_arg(path, "path") {
            Ok(p) => PathBuf::from(p),
            Err(status) => return status,
        };
        match Predictions::load(&path) {
            Ok(preds) => emit(out, UmbraPredictions(preds), "out"),
            Err(err) => fail_with(err),
        }
    })
}

/// Frees a predictions handle. NULL is a no-op.
///
/// # Safety
/// `predictions` must be NULL or a pointer from `umbra_predictions_load`.
#[no_mangle]
pub unsafe extern "C" fn umbra_predictions_free(predictions: *mut UmbraPredictions) {
    if !predictions.is_null() {
        drop(Box::from_raw(predictions));
    }
}

/// Number of instance detections; 0 if `predictions` is NULL.
///
/// # Safety
/// `predictions` must be NULL or a valid predictions handle.
#[no_mangle]
pub unsafe extern "C" fn umbra_predictions_instance_count(
    predictions: *const UmbraPredictions,
) -> size_t {
    predictions.as_ref().map_or(0, |p| p.0.instances.len())
}

/// Number of association detections; 0 if `predictions` is NULL.
///
/// # Safety
/// `predictions` must be NULL or a valid predictions handle.
#[no_mangle]
pub unsafe extern "C" fn umbra_predictions_association_count(
    predictions: *const UmbraPredictions,
) -> size_t {
    predictions.as_ref().map_or(0, |p| p.0.associations.len())
}

/// The library's default matcher settings.
#[no_mangle]
pub extern "C" fn umbra_match_config_default() -> UmbraMatchConfig {
    let config = MatchConfig::default();
    UmbraMatchConfig {
        threshold_scale: config.threshold_scale,
        iou_floor: config.iou_floor,
        score_mode: 0,
    }
}

fn match_config_from(c: &UmbraMatchConfig) -> Result<MatchConfig, UmbraStatus> {
    let score_mode = match c.score_mode {
        0 => ScoreMode::GeometricMean,
        1 => ScoreMode::Min,
        2 => ScoreMode::AssociationScore,
        other => {
            return Err(fail(
                UmbraStatus::InvalidArgument,
                &format!("score_mode {other} is not 0, 1, or 2"),
            ))
        }
    };
    Ok(MatchConfig {
        threshold_scale: c.threshold_scale,
        iou_floor: c.iou_floor,
        score_mode,
    })
}

/// Pairs shadow and object detections and matches them to associations,
/// storing the matched set in `*out`.
///
/// `config` may be NULL for library defaults.
///
/// # Safety
/// All pointers must be NULL or valid; `predictions` and `out` are required.
#[no_mangle]
pub unsafe extern "C" fn umbra_match(
    predictions: *const UmbraPredictions,
    config: *const UmbraMatchConfig,
    out: *mut *mut UmbraPaired,
) -> UmbraStatus {
    guarded(|| {
        let preds = match deref(predictions, "predictions") {
            Ok(p) => p,
            Err(status) => return status,
        };
        let match_config = if config.is_null() {
            MatchConfig::default()
        } else {
            match match_config_from(&*config) {
                Ok(c) => c,
                Err(status) => return status,
            }
        };
        match pair_and_match_all(&preds.0, &match_config) {
            Ok((paired, _diagnostics)) => emit(out, UmbraPaired(paired), "out"),
            Err(err) => fail_with(err),
        }
    })
}

/// Frees a matched-pairs handle. NULL is a no-op.
///
/// # Safety
/// `paired` must be NULL or a pointer obtained from `umbra_match`.
#[no_mangle]
pub unsafe extern "C" fn umbra_paired_free(paired: *mut UmbraPaired) {
    if !paired.is_null() {
        drop(Box::from_raw(paired));
    }
}

/// Number of matched pairs; 0 if `paired` is NULL.
///
/// # Safety
/// `paired` must be NULL or a valid matched-pairs handle.
#[no_mangle]
pub unsafe extern "C" fn umbra_paired_len(paired: *const UmbraPaired) -> size_t {
    paired.as_ref().map_or(0, |p| p.0.len())
}

/// Scores matched pairs against ground truth, storing a report in `*out`.
///
/// `variant` selects the overlap measure: 0 = boxes, 1 = masks. `taus` may
/// be NULL with `tau_count` 0 to use the standard 0.50..0.95 grid;
/// otherwise it must point to `tau_count` strictly increasing thresholds in
/// (0, 1).
///
/// # Safety
/// Handles must be valid; `taus` must be NULL or point to `tau_count`
/// doubles; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn umbra_soap_evaluate(
    paired: *const UmbraPaired,
    dataset: *const UmbraDataset,
    variant: u32,
    taus: *const c_double,
    tau_count: size_t,
    out: *mut *mut UmbraSoapReport,
) -> UmbraStatus {
    guarded(|| {
        let paired = match deref(paired, "paired") {
            Ok(p) => p,
            Err(status) => return status,
        };
        let dataset = match deref(dataset, "dataset") {
            Ok(d) => d,
            Err(status) => return status,
        };
        let variant = match variant {
            0 => Variant::Box,
            1 => Variant::Mask,
            other => {
                return fail(
                    UmbraStatus::InvalidArgument,
                    &format!("variant {other} is not 0 (box) or 1 (mask)"),
                )
            }
        };
        let taus = if taus.is_null() || tau_count == 0 {
            default_tau_grid()
        } else {
            std::slice::from_raw_parts(taus, tau_count).to_vec()
        };
        let config = SoapConfig { taus, variant };
        match evaluate(&paired.0, &dataset.0, &config) {
            Ok(report) => emit(out, UmbraSoapReport(report), "out"),
            Err(err) => fail_with(err),
        }
    })
}

/// Frees a report handle. NULL is a no-op.
///
/// # Safety
/// `report` must be NULL or a pointer obtained from `umbra_soap_evaluate`.
#[no_mangle]
pub unsafe extern "C" fn umbra_report_free(report: *mut UmbraSoapReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Mean AP over the report's threshold grid; NaN if `report` is NULL.
///
/// # Safety
/// `report` must be NULL or a valid report handle.
#[no_mangle]
pub unsafe extern "C" fn umbra_report_soap(report: *const UmbraSoapReport) -> c_double {
    report.as_ref().map_or(f64::NAN, |r| r.0.soap)
}

/// AP at threshold 0.50; NaN if absent from the grid or `report` is NULL.
///
/// # Safety
/// `report` must be NULL or a valid report handle.
#[no_mangle]
pub unsafe extern "C" fn umbra_report_soap_50(report: *const UmbraSoapReport) -> c_double {
    report
        .as_ref()
        .and_then(|r| r.0.soap_50)
        .unwrap_or(f64::NAN)
}

/// AP at threshold 0.75; NaN if absent from the grid or `report` is NULL.
///
/// # Safety
/// `report` must be NULL or a valid report handle.
#[no_mangle]
pub unsafe extern "C" fn umbra_report_soap_75(report: *const UmbraSoapReport) -> c_double {
    report
        .as_ref()
        .and_then(|r| r.0.soap_75)
        .unwrap_or(f64::NAN)
}

/// Number of thresholds in the report's grid; 0 if `report` is NULL.
///
/// # Safety
/// `report` must be NULL or a valid report handle.
#[no_mangle]
pub unsafe extern "C" fn umbra_report_tau_count(report: *const UmbraSoapReport) -> size_t {
    report.as_ref().map_or(0, |r| r.0.taus.len())
}

/// Copies the threshold and AP at `index` into the out-pointers.
///
/// # Safety
/// `report` must be a valid report handle; out-pointers may be NULL to skip
/// that value.
#[no_mangle]
pub unsafe extern "C" fn umbra_report_tau_ap(
    report: *const UmbraSoapReport,
    index: size_t,
    out_tau: *mut c_double,
    out_ap: *mut c_double,
) -> UmbraStatus {
    guarded(|| {
        let report = match deref(report, "report") {
            Ok(r) => r,
            Err(status) => return status,
        };
        if index >= report.0.taus.len() {
            return fail(
                UmbraStatus::InvalidArgument,
                &format!(
                    "index {index} out of range for {} thresholds",
                    report.0.taus.len()
                ),
            );
        }
        if !out_tau.is_null() {
            *out_tau = report.0.taus[index];
        }
        if !out_ap.is_null() {
            *out_ap = report.0.ap[index];
        }
        UmbraStatus::Ok
    })
}

/// Serializes the report as JSON into `*out` (free with
/// `umbra_string_free`).
///
/// # Safety
/// `report` must be a valid report handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn umbra_report_to_json(
    report: *const UmbraSoapReport,
    out: *mut *mut c_char,
) -> UmbraStatus {
    guarded(|| {
        let report = match deref(report, "report") {
            Ok(r) => r,
            Err(status) => return status,
        };
        if out.is_null() {
            return fail(UmbraStatus::NullPointer, "out is NULL");
        }
        let json = match serde_json::to_string(&report.0) {
            Ok(json) => json,
            Err(err) => return fail(UmbraStatus::Internal, &err.to_string()),
        };
        let owned = CString::new(json).expect("JSON has no NULs");
        *out = owned.into_raw();
        UmbraStatus::Ok
    })
}

/// Frees a string returned by this library. NULL is a no-op.
///
/// # Safety
/// `text` must be NULL or a pointer obtained from `umbra_report_to_json`.
#[no_mangle]
pub unsafe extern "C" fn umbra_string_free(text: *mut c_char) {
    if !text.is_null() {
        drop(CString::from_raw(text));
    }
}

/// Smooth-L1 penalty between two angles in radians. With `wrap` set, the
/// difference is folded into (-pi, pi] first.
#[no_mangle]
pub extern "C" fn umbra_light_loss(predicted: c_double, truth: c_double, wrap: bool) -> c_double {
    umbra_core::light::light_loss(predicted, truth, wrap)
}

/// Light direction implied by a shadow centroid and an object centroid
/// (radians in (-pi, pi], y pointing down), stored in `*out_angle`.
///
/// Fails with `UMBRA_STATUS_INVALID_ARGUMENT` when the centroids coincide.
///
/// # Safety
/// `out_angle` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn umbra_ground_truth_angle(
    shadow_x: c_double,
    shadow_y: c_double,
    object_x: c_double,
    object_y: c_double,
    out_angle: *mut c_double,
) -> UmbraStatus {
    guarded(|| {
        if out_angle.is_null() {
            return fail(UmbraStatus::NullPointer, "out_angle is NULL");
        }
        match umbra_core::light::ground_truth_angle((shadow_x, shadow_y), (object_x, object_y)) {
            Ok(angle) => {
                *out_angle = angle.radians();
                UmbraStatus::Ok
            }
            Err(err) => fail(UmbraStatus::InvalidArgument, &err.to_string()),
        }
    })
}

/// Generates a synthetic scene set into `out_dir` (ground truth, perfect and
/// noisy predictions, manifest).
///
/// `spec_json` may be NULL for the default specification, or a JSON object
/// with any subset of the specification's fields.
///
/// # Safety
/// Strings must be NULL or valid NUL-terminated UTF-8; `out_dir` is required.
#[no_mangle]
pub unsafe extern "C" fn umbra_synth_generate(
    spec_json: *const c_char,
    out_dir: *const c_char,
) -> UmbraStatus {
    guarded(|| {
        let out_dir = match utf8_arg(out_dir, "out_dir") {
            Ok(p) => PathBuf::from(p),
            Err(status) => return status,
        };
        let spec = if spec_json.is_null() {
            SceneSpec::default()
        } else {
            let text = match utf8_arg(spec_json, "spec_json") {
                Ok(t) => t,
                Err(status) => return status,
            };
            match serde_json::from_str::<SceneSpec>(&text) {
                Ok(spec) => spec,
                Err(err) => {
                    return fail(UmbraStatus::Parse, &format!("spec_json is invalid: {err}"))
                }
            }
        };
        match generate_to_dir(&spec, &out_dir) {
            Ok(_) => UmbraStatus::Ok,
            Err(err) => fail_with(err),
        }
    })
}
