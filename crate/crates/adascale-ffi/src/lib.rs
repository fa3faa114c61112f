//! C ABI over the adascale engine: opaque handles, integer status codes,
//! and a thread-local last-error message.
//!
//! Ownership rules: every `*_new` / `*_load` returns an owned handle the
//! caller must release with the matching `*_free`; strings returned by
//! `adascale_last_error` are borrowed and valid until the next failing call
//! on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use adascale::io::{load_corpus, load_profile, read_text, EngineProfile};
use adascale::pipeline::{run_policy, PolicySpec};
use adascale::regressor::RegressorModel;
use adascale::scalecodec::{decode_scale, encode_scale_target, ScaleSet};
use adascale::simdet::{generate_corpus, GeneratorConfig, VideoSnippet};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdascaleStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    MalformedInput = 3,
    Utf8 = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: AdascaleStatus, msg: impl Into<String>) -> AdascaleStatus {
    set_error(msg.into());
    status
}

/// Message describing the most recent failure on this thread, or null when
/// no failure has been recorded. Borrowed; do not free.
#[no_mangle]
pub extern "C" fn adascale_last_error() -> *const c_char {
    LAST_ERROR.with(|e| {
        e.borrow()
            .as_ref()
            .map(|c| c.as_ptr())
            .unwrap_or(ptr::null())
    })
}

/// An owned video corpus.
pub struct AdascaleCorpus {
    snippets: Vec<VideoSnippet>,
}

/// An owned detector/generator profile.
pub struct AdascaleProfile {
    inner: EngineProfile,
}

/// An owned trained scale regressor.
pub struct AdascaleModel {
    inner: RegressorModel,
}

unsafe fn cstr<'a>(ptr: *const c_char) -> Result<&'a str, AdascaleStatus> {
    if ptr.is_null() {
        return Err(AdascaleStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| AdascaleStatus::Utf8)
}

unsafe fn scale_set(scales: *const u32, n: usize) -> Result<ScaleSet, String> {
    if scales.is_null() || n == 0 {
        return Err("null or empty scale list".into());
    }
    let slice = std::slice::from_raw_parts(scales, n);
    ScaleSet::new(slice.to_vec()).map_err(|e| e.to_string())
}

/// Loads a JSON-Lines corpus file. Returns null on failure (see
/// `adascale_last_error`).
///
/// # Safety
/// `path` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn adascale_corpus_load(path: *const c_char) -> *mut AdascaleCorpus {
    let path = match cstr(path) {
        Ok(p) => p,
        Err(_) => {
            set_error("null or non-UTF-8 path".into());
            return ptr::null_mut();
        }
    };
    match load_corpus(Path::new(path)) {
        Ok(snippets) => Box::into_raw(Box::new(AdascaleCorpus { snippets })),
        Err(e) => {
            set_error(e.to_string());
            ptr::null_mut()
        }
    }
}

/// Generates a synthetic corpus with default scene settings.
#[no_mangle]
pub extern "C" fn adascale_corpus_generate(
    snippets: usize,
    frames: usize,
    classes: usize,
    seed: u64,
) -> *mut AdascaleCorpus {
    let cfg = GeneratorConfig {
        snippets,
        frames_per_snippet: frames,
        classes,
        ..GeneratorConfig::default()
    };
    match generate_corpus(&cfg, seed) {
        Ok(snippets) => Box::into_raw(Box::new(AdascaleCorpus { snippets })),
        Err(e) => {
            set_error(e.to_string());
            ptr::null_mut()
        }
    }
}

/// Number of snippets in a corpus; 0 for a null handle.
///
/// # Safety
/// `corpus` must be a live handle from a corpus constructor, or null.
#[no_mangle]
pub unsafe extern "C" fn adascale_corpus_len(corpus: *const AdascaleCorpus) -> usize {
    if corpus.is_null() {
        return 0;
    }
    (*corpus).snippets.len()
}

/// # Safety
/// `corpus` must be a handle from a corpus constructor, or null (no-op).
/// The handle must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn adascale_corpus_free(corpus: *mut AdascaleCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Loads a profile JSON file (`{}` selects all defaults).
///
/// # Safety
/// `path` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn adascale_profile_load(path: *const c_char) -> *mut AdascaleProfile {
    let path = match cstr(path) {
        Ok(p) => p,
        Err(_) => {
            set_error("null or non-UTF-8 path".into());
            return ptr::null_mut();
        }
    };
    match load_profile(Path::new(path)) {
        Ok(inner) => Box::into_raw(Box::new(AdascaleProfile { inner })),
        Err(e) => {
            set_error(e.to_string());
            ptr::null_mut()
        }
    }
}

/// A profile with every setting at its default.
#[no_mangle]
pub extern "C" fn adascale_profile_default() -> *mut AdascaleProfile {
    Box::into_raw(Box::new(AdascaleProfile {
        inner: EngineProfile::default(),
    }))
}

/// # Safety
/// `profile` must be a handle from a profile constructor, or null (no-op).
/// The handle must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn adascale_profile_free(profile: *mut AdascaleProfile) {
    if !profile.is_null() {
        drop(Box::from_raw(profile));
    }
}

/// Loads a trained regressor from its JSON file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn adascale_model_load(path: *const c_char) -> *mut AdascaleModel {
    let path = match cstr(path) {
        Ok(p) => p,
        Err(_) => {
            set_error("null or non-UTF-8 path".into());
            return ptr::null_mut();
        }
    };
    let text = match read_text(Path::new(path)) {
        Ok(t) => t,
        Err(e) => {
            set_error(e.to_string());
            return ptr::null_mut();
        }
    };
    match RegressorModel::from_json(&text) {
        Ok(inner) => Box::into_raw(Box::new(AdascaleModel { inner })),
        Err(e) => {
            set_error(e.to_string());
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `model` must be a handle from `adascale_model_load`, or null (no-op).
/// The handle must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn adascale_model_free(model: *mut AdascaleModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Encodes the optimal scale `m_opt` relative to input scale `m_i` over the
/// given scale set, writing the normalized target to `out`.
///
/// # Safety
/// `scales` must point to `n_scales` readable u32 values; `out` must be a
/// valid f64 pointer.
#[no_mangle]
pub unsafe extern "C" fn adascale_encode_target(
    m_i: u32,
    m_opt: u32,
    scales: *const u32,
    n_scales: usize,
    out: *mut f64,
) -> AdascaleStatus {
    if out.is_null() {
        return fail(AdascaleStatus::NullArgument, "null output pointer");
    }
    let ss = match scale_set(scales, n_scales) {
        Ok(ss) => ss,
        Err(e) => return fail(AdascaleStatus::InvalidArgument, e),
    };
    match encode_scale_target(m_i, m_opt, &ss) {
        Ok(t) => {
            *out = t.value();
            AdascaleStatus::Ok
        }
        Err(e) => fail(AdascaleStatus::InvalidArgument, e.to_string()),
    }
}

/// Decodes a regressor output `t` against `base_size` (shortest side of the
/// current resized frame), writing the next scale to `out`.
///
/// # Safety
/// `scales` must point to `n_scales` readable u32 values; `out` must be a
/// valid u32 pointer.
#[no_mangle]
pub unsafe extern "C" fn adascale_decode_scale(
    t: f64,
    base_size: u32,
    scales: *const u32,
    n_scales: usize,
    out: *mut u32,
) -> AdascaleStatus {
    if out.is_null() {
        return fail(AdascaleStatus::NullArgument, "null output pointer");
    }
    let ss = match scale_set(scales, n_scales) {
        Ok(ss) => ss,
        Err(e) => return fail(AdascaleStatus::InvalidArgument, e),
    };
    match decode_scale(t, base_size, &ss) {
        Ok(m) => {
            *out = m;
            AdascaleStatus::Ok
        }
        Err(e) => fail(AdascaleStatus::InvalidArgument, e.to_string()),
    }
}

/// Summary of one policy run.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AdascaleRunSummary {
    pub map: f64,
    pub total_workload: f64,
    pub tp_total: usize,
    pub fp_total: usize,
}

/// Runs one scale policy (`"fixed:M"`, `"random"`, `"adascale"`, or
/// `"multiscale"`) over a corpus. `model` may be null except for adascale.
///
/// # Safety
/// `corpus` and `profile` must be live handles; `policy` must be a valid
/// NUL-terminated string; `scales` must point to `n_scales` readable u32
/// values; `out` must be a valid pointer; `model` must be a live handle or
/// null.
#[no_mangle]
pub unsafe extern "C" fn adascale_run_policy(
    corpus: *const AdascaleCorpus,
    profile: *const AdascaleProfile,
    policy: *const c_char,
    model: *const AdascaleModel,
    scales: *const u32,
    n_scales: usize,
    seed: u64,
    out: *mut AdascaleRunSummary,
) -> AdascaleStatus {
    if corpus.is_null() || profile.is_null() || out.is_null() {
        return fail(AdascaleStatus::NullArgument, "null handle or output pointer");
    }
    let policy = match cstr(policy) {
        Ok(p) => p,
        Err(s) => return fail(s, "null or non-UTF-8 policy"),
    };
    let ss = match scale_set(scales, n_scales) {
        Ok(ss) => ss,
        Err(e) => return fail(AdascaleStatus::InvalidArgument, e),
    };
    let spec = match PolicySpec::parse(policy, &ss) {
        Ok(s) => s,
        Err(e) => return fail(AdascaleStatus::InvalidArgument, e.to_string()),
    };
    let model_ref = if model.is_null() {
        None
    } else {
        Some(&(*model).inner)
    };
    match run_policy(
        &(*corpus).snippets,
        &(*profile).inner.detector,
        &spec,
        model_ref,
        seed,
    ) {
        Ok(r) => {
            *out = AdascaleRunSummary {
                map: r.report.map,
                total_workload: r.report.total_workload,
                tp_total: r.report.tp_total,
                fp_total: r.report.fp_total,
            };
            AdascaleStatus::Ok
        }
        Err(e) => fail(AdascaleStatus::InvalidArgument, e.to_string()),
    }
}
