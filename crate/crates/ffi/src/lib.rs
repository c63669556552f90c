//! C ABI surface over the eegconn library: scalar connectivity measures,
//! connectivity matrices, dataset handles and a one-call leave-one-out
//! evaluation. The header is generated into `include/eegconn.h` at build
//! time.
//!
//! Conventions:
//! - every function returns an [`EegconnStatus`]; outputs go through
//!   pointers supplied by the caller;
//! - a non-`Ok` status leaves a message retrievable with
//!   [`eegconn_last_error_message`] (thread-local, valid until the next
//!   failing call on the same thread);
//! - datasets are opaque handles created by [`eegconn_dataset_open`] and
//!   released with [`eegconn_dataset_close`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use eegconn::classify::{loo_evaluate, EvalConfig};
use eegconn::data_model::{Band, BandName, DatasetManifest};
use eegconn::error::Error;
use eegconn::features::{
    coherence_band, connectivity_matrix, differential_entropy, pearson, plv, FeatureTable,
    Measure, PLV_EDGE_TRIM,
};
use eegconn::preprocess::preprocess_trial;

/// Result codes of every C-ABI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EegconnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DegenerateSignal = 3,
    IoError = 4,
    InternalError = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let sanitized: String = message.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).unwrap());
}

fn status_of(err: &Error) -> EegconnStatus {
    match err {
        Error::Io { .. } => EegconnStatus::IoError,
        Error::Manifest { .. } | Error::DataFormat { .. } | Error::InvalidArgument(_) => {
            EegconnStatus::InvalidArgument
        }
        Error::Degenerate(_) => EegconnStatus::DegenerateSignal,
        Error::Filter(_) | Error::Numeric(_) => EegconnStatus::InternalError,
    }
}

fn guard(body: impl FnOnce() -> EegconnStatus) -> EegconnStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            EegconnStatus::InternalError
        }
    }
}

/// Message of the last failing call on this thread. Never null; empty
/// when nothing failed. Do not free.
#[no_mangle]
pub extern "C" fn eegconn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version string. Static; do not free.
#[no_mangle]
pub extern "C" fn eegconn_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

unsafe fn slice_arg<'a>(ptr: *const f64, len: usize) -> Option<&'a [f64]> {
    if ptr.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(ptr, len))
    }
}

/// Pearson correlation of two equal-length series.
///
/// # Safety
/// `x` and `y` must point to `len` readable doubles, `out` to one
/// writable double.
#[no_mangle]
pub unsafe extern "C" fn eegconn_pearson(
    x: *const f64,
    y: *const f64,
    len: usize,
    out: *mut f64,
) -> EegconnStatus {
    guard(|| {
        let (Some(xs), Some(ys)) = (slice_arg(x, len), slice_arg(y, len)) else {
            set_error("null input pointer");
            return EegconnStatus::NullPointer;
        };
        if out.is_null() {
            set_error("null output pointer");
            return EegconnStatus::NullPointer;
        }
        match pearson(xs, ys) {
            Ok(v) => {
                *out = v;
                EegconnStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Phase-locking value of two band-limited series (5% edge trim).
///
/// # Safety
/// `x1` and `x2` must point to `len` readable doubles, `out` to one
/// writable double.
#[no_mangle]
pub unsafe extern "C" fn eegconn_plv(
    x1: *const f64,
    x2: *const f64,
    len: usize,
    out: *mut f64,
) -> EegconnStatus {
    guard(|| {
        let (Some(a), Some(b)) = (slice_arg(x1, len), slice_arg(x2, len)) else {
            set_error("null input pointer");
            return EegconnStatus::NullPointer;
        };
        if out.is_null() {
            set_error("null output pointer");
            return EegconnStatus::NullPointer;
        }
        match plv(a, b, PLV_EDGE_TRIM) {
            Ok(v) => {
                *out = v;
                EegconnStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Welch magnitude coherence averaged over [lo_hz, hi_hz].
///
/// # Safety
/// `x` and `y` must point to `len` readable doubles, `out` to one
/// writable double.
#[no_mangle]
pub unsafe extern "C" fn eegconn_coherence_band(
    x: *const f64,
    y: *const f64,
    len: usize,
    fs_hz: f64,
    lo_hz: f64,
    hi_hz: f64,
    out: *mut f64,
) -> EegconnStatus {
    guard(|| {
        let (Some(a), Some(b)) = (slice_arg(x, len), slice_arg(y, len)) else {
            set_error("null input pointer");
            return EegconnStatus::NullPointer;
        };
        if out.is_null() {
            set_error("null output pointer");
            return EegconnStatus::NullPointer;
        }
        let band = match Band::new(BandName::Gamma, lo_hz, hi_hz) {
            Ok(band) => band,
            Err(e) => {
                set_error(&e.to_string());
                return EegconnStatus::InvalidArgument;
            }
        };
        match coherence_band(a, b, fs_hz, &band) {
            Ok(v) => {
                *out = v;
                EegconnStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Differential entropy of one window (Gaussian closed form).
///
/// # Safety
/// `x` must point to `len` readable doubles, `out` to one writable
/// double.
#[no_mangle]
pub unsafe extern "C" fn eegconn_differential_entropy(
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> EegconnStatus {
    guard(|| {
        let Some(xs) = slice_arg(x, len) else {
            set_error("null input pointer");
            return EegconnStatus::NullPointer;
        };
        if out.is_null() {
            set_error("null output pointer");
            return EegconnStatus::NullPointer;
        }
        match differential_entropy(xs) {
            Ok(v) => {
                *out = v;
                EegconnStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Connectivity measures accepted by [`eegconn_connectivity_matrix`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EegconnMeasure {
    Pearson = 0,
    Coherence = 1,
    Plv = 2,
}

/// Full symmetric connectivity matrix of one window.
///
/// `data` holds `n_channels` rows of `window_len` samples each
/// (row-major); `out` receives `n_channels * n_channels` values.
///
/// # Safety
/// `data` must point to `n_channels * window_len` readable doubles and
/// `out` to `n_channels * n_channels` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn eegconn_connectivity_matrix(
    data: *const f64,
    n_channels: usize,
    window_len: usize,
    measure: EegconnMeasure,
    fs_hz: f64,
    lo_hz: f64,
    hi_hz: f64,
    out: *mut f64,
) -> EegconnStatus {
    guard(|| {
        let Some(flat) = slice_arg(data, n_channels * window_len) else {
            set_error("null input pointer");
            return EegconnStatus::NullPointer;
        };
        if out.is_null() {
            set_error("null output pointer");
            return EegconnStatus::NullPointer;
        }
        let window = match ndarray::ArrayView2::from_shape((n_channels, window_len), flat) {
            Ok(w) => w,
            Err(e) => {
                set_error(&e.to_string());
                return EegconnStatus::InvalidArgument;
            }
        };
        let band = match Band::new(BandName::Gamma, lo_hz, hi_hz) {
            Ok(band) => band,
            Err(e) => {
                set_error(&e.to_string());
                return EegconnStatus::InvalidArgument;
            }
        };
        let m = match measure {
            EegconnMeasure::Pearson => Measure::Pearson,
            EegconnMeasure::Coherence => Measure::Coherence,
            EegconnMeasure::Plv => Measure::Plv,
        };
        match connectivity_matrix(window, m, &band, fs_hz) {
            Ok(cm) => {
                let dst = std::slice::from_raw_parts_mut(out, n_channels * n_channels);
                for (d, s) in dst.iter_mut().zip(cm.values.iter()) {
                    *d = *s;
                }
                EegconnStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Opaque handle over a validated dataset directory.
pub struct EegconnDataset {
    manifest: DatasetManifest,
}

/// Open a dataset directory (one containing `manifest.json`).
///
/// # Safety
/// `dir` must be a NUL-terminated path; `out` must be writable. The
/// returned handle must be released with [`eegconn_dataset_close`].
#[no_mangle]
pub unsafe extern "C" fn eegconn_dataset_open(
    dir: *const c_char,
    out: *mut *mut EegconnDataset,
) -> EegconnStatus {
    guard(|| {
        if dir.is_null() || out.is_null() {
            set_error("null pointer");
            return EegconnStatus::NullPointer;
        }
        let path = match CStr::from_ptr(dir).to_str() {
            Ok(s) => Path::new(s),
            Err(_) => {
                set_error("path is not valid UTF-8");
                return EegconnStatus::InvalidArgument;
            }
        };
        match eegconn::data_model::load_manifest(&path.join("manifest.json")) {
            Ok(manifest) => {
                *out = Box::into_raw(Box::new(EegconnDataset { manifest }));
                EegconnStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}

/// Release a dataset handle. A null handle is a no-op.
///
/// # Safety
/// `ds` must be a handle from [`eegconn_dataset_open`], not yet closed.
#[no_mangle]
pub unsafe extern "C" fn eegconn_dataset_close(ds: *mut EegconnDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Number of trials in the dataset.
///
/// # Safety
/// `ds` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eegconn_dataset_n_trials(
    ds: *const EegconnDataset,
    out: *mut usize,
) -> EegconnStatus {
    if ds.is_null() || out.is_null() {
        set_error("null pointer");
        return EegconnStatus::NullPointer;
    }
    *out = (*ds).manifest.trials.len();
    EegconnStatus::Ok
}

/// Number of channels in the dataset.
///
/// # Safety
/// `ds` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eegconn_dataset_n_channels(
    ds: *const EegconnDataset,
    out: *mut usize,
) -> EegconnStatus {
    if ds.is_null() || out.is_null() {
        set_error("null pointer");
        return EegconnStatus::NullPointer;
    }
    *out = (*ds).manifest.channels.len();
    EegconnStatus::Ok
}

/// Leave-one-out mean accuracy for one (band, measure) over the dataset:
/// preprocess (0.3-50 Hz broadband, band filter, 2 s windows), extract
/// features, evaluate with the linear SVM. `k` of 0 keeps all features.
///
/// # Safety
/// `ds` must be a live handle; `band` a NUL-terminated band name
/// (delta/theta/alpha/beta/gamma); `measure` one of de, pearson,
/// coherence, plv; `out` a writable double.
#[no_mangle]
pub unsafe extern "C" fn eegconn_loo_accuracy(
    ds: *const EegconnDataset,
    band: *const c_char,
    measure: *const c_char,
    k: usize,
    seed: u64,
    out: *mut f64,
) -> EegconnStatus {
    guard(|| {
        if ds.is_null() || band.is_null() || measure.is_null() || out.is_null() {
            set_error("null pointer");
            return EegconnStatus::NullPointer;
        }
        let parse = |p: *const c_char| CStr::from_ptr(p).to_str().ok().map(str::to_string);
        let (Some(band_s), Some(measure_s)) = (parse(band), parse(measure)) else {
            set_error("band/measure not valid UTF-8");
            return EegconnStatus::InvalidArgument;
        };
        let Some(band_name) = BandName::parse(&band_s) else {
            set_error(&format!("unknown band {band_s:?}"));
            return EegconnStatus::InvalidArgument;
        };
        let Some(measure) = Measure::parse(&measure_s) else {
            set_error(&format!("unknown measure {measure_s:?}"));
            return EegconnStatus::InvalidArgument;
        };
        let manifest = &(*ds).manifest;
        let band_spec = Band::canonical(band_name, Default::default());
        let body = || -> eegconn::Result<f64> {
            let mut epochs = Vec::new();
            for entry in &manifest.trials {
                let rec = eegconn::data_model::load_recording(manifest, &entry.key())?;
                epochs.push(preprocess_trial(&rec, None, (0.3, 50.0), band_spec, 2.0)?);
            }
            let table =
                FeatureTable::from_epochs(band_spec, measure, &manifest.channels, &epochs)?;
            let cfg = EvalConfig {
                k: if k == 0 { None } else { Some(k.min(table.dim())) },
                seed,
                ..Default::default()
            };
            Ok(loo_evaluate(&table, &cfg)?.mean_accuracy)
        };
        match body() {
            Ok(acc) => {
                *out = acc;
                EegconnStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    })
}
