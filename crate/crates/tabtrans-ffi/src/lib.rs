//! C ABI for the tabtrans pipeline. Opaque handles wrap the fitted
//! models; every fallible call returns a status code and stores a
//! message retrievable with [`tt_last_error`]. The matching header lives
//! in `include/tabtrans.h` (regenerate with cbindgen, see cbindgen.toml).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};

use tabtrans::classical::TrainedClassifier;
use tabtrans::error::Error;
use tabtrans::pipeline::{run_pipeline, PipelineConfig, PredictBundle};
use tabtrans::tabtransformer::TabTransformerModel;

/// Status codes mirroring the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TtStatus {
    Ok = 0,
    ConfigError = 2,
    DataError = 3,
    NumericError = 4,
    NullArgument = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> TtStatus {
    match err.exit_code() {
        2 => TtStatus::ConfigError,
        4 => TtStatus::NumericError,
        _ => TtStatus::DataError,
    }
}

/// Message of the most recent error on this thread. The pointer stays
/// valid until the next failing call on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn tt_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Crate version as a static string; do not free it.
#[no_mangle]
pub extern "C" fn tt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

unsafe fn path_arg(ptr: *const c_char) -> Result<PathBuf, TtStatus> {
    if ptr.is_null() {
        set_error("null path argument");
        return Err(TtStatus::NullArgument);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_error("path argument is not valid UTF-8");
            Err(TtStatus::DataError)
        }
    }
}

/// Opaque transformer handle.
pub struct TtTransformer {
    model: TabTransformerModel,
}

/// Opaque classifier handle.
pub struct TtClassifier {
    model: TrainedClassifier,
}

/// Opaque handle over a finished run directory: scaler, transformer,
/// selected features, and tuned classifier.
pub struct TtBundle {
    bundle: PredictBundle,
}

/// Loads a persisted transformer model file.
///
/// On success writes the handle to `out` and returns `Ok`; the handle
/// must be released with [`tt_transformer_free`].
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn tt_transformer_load(
    path: *const c_char,
    out: *mut *mut TtTransformer,
) -> TtStatus {
    if out.is_null() {
        set_error("null output handle");
        return TtStatus::NullArgument;
    }
    let path = match path_arg(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    match tabtrans::persist::load_model::<TabTransformerModel>(
        Path::new(&path),
        "transformer",
        None,
    ) {
        Ok(mut model) => {
            model.restore_after_load();
            *out = Box::into_raw(Box::new(TtTransformer { model }));
            TtStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            status_of(&e)
        }
    }
}

/// # Safety
/// `handle` must come from [`tt_transformer_load`] (or be null).
#[no_mangle]
pub unsafe extern "C" fn tt_transformer_free(handle: *mut TtTransformer) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Width of the extracted feature vector (d*m + c), or 0 on null.
///
/// # Safety
/// `handle` must be a live transformer handle.
#[no_mangle]
pub unsafe extern "C" fn tt_transformer_feature_width(handle: *const TtTransformer) -> usize {
    if handle.is_null() {
        return 0;
    }
    (*handle).model.feature_width()
}

/// Extracts the contextual feature vector for one row.
///
/// `cat_codes` holds `n_cat` categorical codes (schema order), `numeric`
/// holds `n_num` already-scaled continuous values, and `out` must have
/// room for [`tt_transformer_feature_width`] doubles.
///
/// # Safety
/// All pointers must be valid for their stated lengths.
#[no_mangle]
pub unsafe extern "C" fn tt_transformer_extract(
    handle: *const TtTransformer,
    cat_codes: *const u32,
    n_cat: usize,
    numeric: *const f64,
    n_num: usize,
    out: *mut f64,
    out_len: usize,
) -> TtStatus {
    if handle.is_null() || cat_codes.is_null() || out.is_null() || (numeric.is_null() && n_num > 0)
    {
        set_error("null argument");
        return TtStatus::NullArgument;
    }
    let model = &(*handle).model;
    if out_len < model.feature_width() {
        set_error("output buffer smaller than the feature width");
        return TtStatus::ConfigError;
    }
    let codes = std::slice::from_raw_parts(cat_codes, n_cat);
    let cont = if n_num == 0 {
        &[][..]
    } else {
        std::slice::from_raw_parts(numeric, n_num)
    };
    match model.extract_row(codes, cont) {
        Ok(features) => {
            std::ptr::copy_nonoverlapping(features.as_ptr(), out, features.len());
            TtStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            status_of(&e)
        }
    }
}

/// Loads a persisted classifier model file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid
/// pointer; release with [`tt_classifier_free`].
#[no_mangle]
pub unsafe extern "C" fn tt_classifier_load(
    path: *const c_char,
    out: *mut *mut TtClassifier,
) -> TtStatus {
    if out.is_null() {
        set_error("null output handle");
        return TtStatus::NullArgument;
    }
    let path = match path_arg(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    match tabtrans::persist::load_model::<TrainedClassifier>(Path::new(&path), "classifier", None)
    {
        Ok(model) => {
            *out = Box::into_raw(Box::new(TtClassifier { model }));
            TtStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            status_of(&e)
        }
    }
}

/// # Safety
/// `handle` must come from [`tt_classifier_load`] (or be null).
#[no_mangle]
pub unsafe extern "C" fn tt_classifier_free(handle: *mut TtClassifier) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Positive-class probability for one feature row.
///
/// # Safety
/// `features` must point to `n_features` doubles; `out_probability` must
/// be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tt_classifier_predict_proba(
    handle: *const TtClassifier,
    features: *const f64,
    n_features: usize,
    out_probability: *mut f64,
) -> TtStatus {
    if handle.is_null() || features.is_null() || out_probability.is_null() {
        set_error("null argument");
        return TtStatus::NullArgument;
    }
    let row = std::slice::from_raw_parts(features, n_features);
    let matrix = tabtrans::numerics::Matrix::from_vec(1, n_features, row.to_vec());
    let scores = (*handle).model.scores(&matrix);
    *out_probability = scores[0];
    TtStatus::Ok
}

/// Loads a finished run directory for end-to-end scoring.
///
/// # Safety
/// `run_dir` must be a valid NUL-terminated string and `out` a valid
/// pointer; release with [`tt_bundle_free`].
#[no_mangle]
pub unsafe extern "C" fn tt_bundle_load(
    run_dir: *const c_char,
    out: *mut *mut TtBundle,
) -> TtStatus {
    if out.is_null() {
        set_error("null output handle");
        return TtStatus::NullArgument;
    }
    let path = match path_arg(run_dir) {
        Ok(p) => p,
        Err(s) => return s,
    };
    match PredictBundle::load(&path) {
        Ok(bundle) => {
            *out = Box::into_raw(Box::new(TtBundle { bundle }));
            TtStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            status_of(&e)
        }
    }
}

/// # Safety
/// `handle` must come from [`tt_bundle_load`] (or be null).
#[no_mangle]
pub unsafe extern "C" fn tt_bundle_free(handle: *mut TtBundle) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Scores one raw row through the saved chain (scaler, transformer,
/// feature selection, tuned classifier). `numeric` holds the raw
/// unscaled values in schema numeric order.
///
/// # Safety
/// All pointers must be valid for their stated lengths.
#[no_mangle]
pub unsafe extern "C" fn tt_bundle_predict_row(
    handle: *const TtBundle,
    cat_codes: *const u32,
    n_cat: usize,
    numeric: *const f64,
    n_num: usize,
    out_probability: *mut f64,
) -> TtStatus {
    if handle.is_null() || cat_codes.is_null() || out_probability.is_null() {
        set_error("null argument");
        return TtStatus::NullArgument;
    }
    let bundle = &(*handle).bundle;
    let codes = std::slice::from_raw_parts(cat_codes, n_cat);
    let cont = if n_num == 0 {
        vec![]
    } else {
        std::slice::from_raw_parts(numeric, n_num).to_vec()
    };
    let scaled = bundle.scaler.apply_row(&cont);
    let features = match bundle.transformer.extract_row(codes, &scaled) {
        Ok(f) => f,
        Err(e) => {
            set_error(&e.to_string());
            return status_of(&e);
        }
    };
    let selected: Vec<f64> = bundle.selected.iter().map(|&i| features[i]).collect();
    let matrix = tabtrans::numerics::Matrix::from_vec(1, selected.len(), selected);
    *out_probability = bundle.classifier.scores(&matrix)[0];
    TtStatus::Ok
}

/// Runs the full pipeline from a JSON config file, writing artifacts to
/// the configured output directory (or `out_dir_override` when given).
///
/// # Safety
/// `config_path` must be a valid NUL-terminated string;
/// `out_dir_override` may be null.
#[no_mangle]
pub unsafe extern "C" fn tt_pipeline_run(
    config_path: *const c_char,
    out_dir_override: *const c_char,
) -> TtStatus {
    let config_path = match path_arg(config_path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    let mut config = match PipelineConfig::from_file(&config_path) {
        Ok(c) => c,
        Err(e) => {
            set_error(&e.to_string());
            return status_of(&e);
        }
    };
    if !out_dir_override.is_null() {
        match path_arg(out_dir_override) {
            Ok(dir) => config.output_dir = dir,
            Err(s) => return s,
        }
    }
    match run_pipeline(&config) {
        Ok(_) => TtStatus::Ok,
        Err(e) => {
            set_error(&e.to_string());
            status_of(&e)
        }
    }
}
