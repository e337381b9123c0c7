//! C ABI over the frontier solver. Handles are opaque pointers created
//! and released by this library; every fallible call returns an
//! [`FfStatus`] and reports detail through [`ff_last_error_message`].
//! All entry points catch panics and translate them to
//! `FF_STATUS_PANIC`, so unwinding never crosses the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use fairfront::cutgen::CutSearchConfig;
use fairfront::dist::{DistError, JointModel, SchemaSpec};
use fairfront::frontier::{approximate_frontier, FrontierConfig, FrontierPoint, TerminationReason};
use fairfront::metrics::Thresholds;
use fairfront::oracle::{self, OracleResult};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FfStatus {
    Ok = 0,
    /// Null pointer, bad buffer length, or out-of-range parameter.
    InvalidArgument = 1,
    /// A string argument was not valid UTF-8.
    Utf8 = 2,
    /// File could not be read.
    Io = 3,
    /// Schema or data problem (parse failure, degenerate distribution).
    Data = 4,
    /// Optimization failed.
    Solver = 5,
    /// Problem size exceeds a configured cap.
    Cap = 6,
    /// A panic was caught at the boundary.
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized: Vec<u8> = message
        .bytes()
        .map(|b| if b == 0 { b' ' } else { b })
        .collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(status: FfStatus, message: &str) -> FfStatus {
    set_error(message);
    status
}

fn dist_status(err: &DistError) -> FfStatus {
    match err {
        DistError::Io { .. } => FfStatus::Io,
        _ => FfStatus::Data,
    }
}

/// Detail for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread; never freed by
/// the caller.
#[no_mangle]
pub extern "C" fn ff_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Release a string allocated by this library.
///
/// # Safety
/// `s` must have come from a `ff_*` call that allocates a string, and
/// must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ff_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Opaque joint-distribution model.
pub struct FfModel {
    inner: JointModel,
}

/// Opaque result of a frontier approximation.
pub struct FfFrontierResult {
    inner: FrontierPoint,
}

/// Opaque result of an exact-oracle solve.
pub struct FfOracleResult {
    inner: OracleResult,
    groups: usize,
    labels: usize,
}

unsafe fn read_str<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, FfStatus> {
    if ptr.is_null() {
        return Err(fail(FfStatus::InvalidArgument, &format!("{name} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(FfStatus::Utf8, &format!("{name} is not valid UTF-8")))
}

fn guarded<F: FnOnce() -> FfStatus>(body: F) -> FfStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(FfStatus::Panic, "panic caught at the FFI boundary"),
    }
}

/// Build a model from a CSV file and a schema JSON document. When
/// `impute` is true, missing cells are mode-imputed after quantization.
///
/// # Safety
/// `csv_path` and `schema_json` must be NUL-terminated strings; `out`
/// must be a valid pointer. On success `*out` owns the model and must be
/// released with [`ff_model_free`].
#[no_mangle]
pub unsafe extern "C" fn ff_model_from_csv(
    csv_path: *const c_char,
    schema_json: *const c_char,
    impute: bool,
    out: *mut *mut FfModel,
) -> FfStatus {
    guarded(|| {
        if out.is_null() {
            return fail(FfStatus::InvalidArgument, "out is null");
        }
        let path = match read_str(csv_path, "csv_path") {
            Ok(v) => v,
            Err(status) => return status,
        };
        let schema_text = match read_str(schema_json, "schema_json") {
            Ok(v) => v,
            Err(status) => return status,
        };
        let schema = match SchemaSpec::from_json(schema_text) {
            Ok(v) => v,
            Err(err) => return fail(FfStatus::Data, &err.to_string()),
        };
        match fairfront::dist::model_from_csv(Path::new(path), &schema, impute) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(FfModel { inner }));
                FfStatus::Ok
            }
            Err(err) => fail(dist_status(&err), &err.to_string()),
        }
    })
}

/// Deserialize a model from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ff_model_from_json(
    json: *const c_char,
    out: *mut *mut FfModel,
) -> FfStatus {
    guarded(|| {
        if out.is_null() {
            return fail(FfStatus::InvalidArgument, "out is null");
        }
        let text = match read_str(json, "json") {
            Ok(v) => v,
            Err(status) => return status,
        };
        match JointModel::from_json(text) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(FfModel { inner }));
                FfStatus::Ok
            }
            Err(err) => fail(FfStatus::Data, &err.to_string()),
        }
    })
}

/// Serialize the model to JSON. The returned string is released with
/// [`ff_string_free`].
///
/// # Safety
/// `model` must be a live handle and `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ff_model_to_json(
    model: *const FfModel,
    out_json: *mut *mut c_char,
) -> FfStatus {
    guarded(|| {
        if model.is_null() || out_json.is_null() {
            return fail(FfStatus::InvalidArgument, "model or out_json is null");
        }
        let json = (*model).inner.to_json();
        match CString::new(json) {
            Ok(s) => {
                *out_json = s.into_raw();
                FfStatus::Ok
            }
            Err(_) => fail(FfStatus::Panic, "JSON contained an interior NUL"),
        }
    })
}

/// # Safety
/// `model` must have come from a model constructor; no use afterwards.
#[no_mangle]
pub unsafe extern "C" fn ff_model_free(model: *mut FfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of protected groups (zero for a null handle).
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ff_model_groups(model: *const FfModel) -> usize {
    if model.is_null() {
        0
    } else {
        (*model).inner.num_groups
    }
}

/// Number of labels (zero for a null handle).
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ff_model_labels(model: *const FfModel) -> usize {
    if model.is_null() {
        0
    } else {
        (*model).inner.num_labels
    }
}

/// Feature support size (zero for a null handle).
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ff_model_support_size(model: *const FfModel) -> usize {
    if model.is_null() {
        0
    } else {
        (*model).inner.support_size
    }
}

/// Accuracy of the unconstrained Bayes-optimal classifier.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ff_bayes_accuracy(model: *const FfModel, out: *mut f64) -> FfStatus {
    guarded(|| {
        if model.is_null() || out.is_null() {
            return fail(FfStatus::InvalidArgument, "model or out is null");
        }
        *out = oracle::bayes_accuracy(&(*model).inner);
        FfStatus::Ok
    })
}

/// Frontier approximation settings. Thresholds at or above one
/// deactivate their metric.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct FfFrontierOptions {
    pub alpha_sp: f64,
    pub alpha_eo: f64,
    pub alpha_oae: f64,
    /// Linear pieces per cut.
    pub pieces: usize,
    /// Outer iteration cap.
    pub max_iterations: usize,
    /// Cut-search restarts.
    pub restarts: usize,
    pub seed: u64,
}

/// Defaults: all metrics deactivated, 6 pieces, 20
/// iterations, 16 restarts, seed 0.
#[no_mangle]
pub extern "C" fn ff_frontier_options_default() -> FfFrontierOptions {
    FfFrontierOptions {
        alpha_sp: 1.0,
        alpha_eo: 1.0,
        alpha_oae: 1.0,
        pieces: 6,
        max_iterations: 20,
        restarts: 16,
        seed: 0,
    }
}

fn build_config(options: &FfFrontierOptions) -> Result<(Thresholds, FrontierConfig), String> {
    let thresholds = Thresholds::new(options.alpha_sp, options.alpha_eo, options.alpha_oae)
        .map_err(|e| e.to_string())?;
    if options.pieces == 0 || options.max_iterations == 0 || options.restarts == 0 {
        return Err("pieces, max_iterations, and restarts must be positive".into());
    }
    let config = FrontierConfig {
        search: CutSearchConfig {
            pieces: options.pieces,
            restarts: options.restarts,
            seed: options.seed,
            ..Default::default()
        },
        max_iterations: options.max_iterations,
        record_trace: false,
        reuse_cuts: false,
    };
    Ok((thresholds, config))
}

/// Upper-bound the frontier. On success `*out` owns the result and must
/// be released with [`ff_frontier_result_free`].
///
/// # Safety
/// `model` must be a live handle; `options` and `out` must be valid
/// pointers.
#[no_mangle]
pub unsafe extern "C" fn ff_frontier_approximate(
    model: *const FfModel,
    options: *const FfFrontierOptions,
    out: *mut *mut FfFrontierResult,
) -> FfStatus {
    guarded(|| {
        if model.is_null() || options.is_null() || out.is_null() {
            return fail(FfStatus::InvalidArgument, "model, options, or out is null");
        }
        let (thresholds, config) = match build_config(&*options) {
            Ok(v) => v,
            Err(msg) => return fail(FfStatus::InvalidArgument, &msg),
        };
        match approximate_frontier(&(*model).inner, &thresholds, &config) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(FfFrontierResult { inner }));
                FfStatus::Ok
            }
            Err(err) => fail(FfStatus::Solver, &err.to_string()),
        }
    })
}

/// Frontier upper bound (NaN for a null handle).
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ff_frontier_value(result: *const FfFrontierResult) -> f64 {
    if result.is_null() {
        f64::NAN
    } else {
        (*result).inner.value
    }
}

/// Outer iterations used (zero for a null handle).
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ff_frontier_iterations(result: *const FfFrontierResult) -> usize {
    if result.is_null() {
        0
    } else {
        (*result).inner.iterations
    }
}

/// Cuts accumulated (zero for a null handle).
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ff_frontier_pool_size(result: *const FfFrontierResult) -> usize {
    if result.is_null() {
        0
    } else {
        (*result).inner.pool_size
    }
}

/// True when the loop stopped because no violated cut remained.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ff_frontier_converged(result: *const FfFrontierResult) -> bool {
    !result.is_null() && (*result).inner.terminated_by == TerminationReason::NoViolation
}

/// Largest equalized-odds gap of the returned channel (NaN for null).
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ff_frontier_max_eo(result: *const FfFrontierResult) -> f64 {
    if result.is_null() {
        f64::NAN
    } else {
        (*result).inner.max_eo
    }
}

/// Number of per-iteration trace entries.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ff_frontier_trace_len(result: *const FfFrontierResult) -> usize {
    if result.is_null() {
        0
    } else {
        (*result).inner.trace.len()
    }
}

/// Copy the per-iteration master values into `buffer`.
///
/// # Safety
/// `result` must be a live handle; `buffer` must point to at least `len`
/// doubles, with `len` matching [`ff_frontier_trace_len`].
#[no_mangle]
pub unsafe extern "C" fn ff_frontier_trace(
    result: *const FfFrontierResult,
    buffer: *mut f64,
    len: usize,
) -> FfStatus {
    guarded(|| {
        if result.is_null() || buffer.is_null() {
            return fail(FfStatus::InvalidArgument, "result or buffer is null");
        }
        let trace = &(*result).inner.trace;
        if len != trace.len() {
            return fail(
                FfStatus::InvalidArgument,
                &format!("buffer has {len} slots, trace has {}", trace.len()),
            );
        }
        ptr::copy_nonoverlapping(trace.as_ptr(), buffer, len);
        FfStatus::Ok
    })
}

/// Copy the returned channel row-major (`A*C` rows by `C` columns).
///
/// # Safety
/// `result` must be a live handle; `buffer` must point to at least `len`
/// doubles, with `len == A*C*C`.
#[no_mangle]
pub unsafe extern "C" fn ff_frontier_transition(
    result: *const FfFrontierResult,
    buffer: *mut f64,
    len: usize,
) -> FfStatus {
    guarded(|| {
        if result.is_null() || buffer.is_null() {
            return fail(FfStatus::InvalidArgument, "result or buffer is null");
        }
        let entries = &(*result).inner.p.entries;
        if len != entries.len() {
            return fail(
                FfStatus::InvalidArgument,
                &format!("buffer has {len} slots, channel has {}", entries.len()),
            );
        }
        ptr::copy_nonoverlapping(entries.as_ptr(), buffer, len);
        FfStatus::Ok
    })
}

/// # Safety
/// `result` must have come from [`ff_frontier_approximate`]; no use
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn ff_frontier_result_free(result: *mut FfFrontierResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Solve the exact frontier (finite supports). `var_cap` of zero uses
/// the default cap. On success `*out` owns the result and must be
/// released with [`ff_oracle_result_free`].
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ff_oracle_exact(
    model: *const FfModel,
    alpha_sp: f64,
    alpha_eo: f64,
    alpha_oae: f64,
    var_cap: usize,
    out: *mut *mut FfOracleResult,
) -> FfStatus {
    guarded(|| {
        if model.is_null() || out.is_null() {
            return fail(FfStatus::InvalidArgument, "model or out is null");
        }
        let thresholds = match Thresholds::new(alpha_sp, alpha_eo, alpha_oae) {
            Ok(v) => v,
            Err(err) => return fail(FfStatus::InvalidArgument, &err.to_string()),
        };
        let cap = if var_cap == 0 {
            oracle::DEFAULT_VAR_CAP
        } else {
            var_cap
        };
        let jm = &(*model).inner;
        match oracle::exact_frontier_capped(jm, &thresholds, cap) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(FfOracleResult {
                    inner,
                    groups: jm.num_groups,
                    labels: jm.num_labels,
                }));
                FfStatus::Ok
            }
            Err(err @ oracle::OracleError::CapExceeded { .. }) => {
                fail(FfStatus::Cap, &err.to_string())
            }
            Err(err) => fail(FfStatus::Solver, &err.to_string()),
        }
    })
}

/// Exact frontier value (NaN for a null handle).
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ff_oracle_value(result: *const FfOracleResult) -> f64 {
    if result.is_null() {
        f64::NAN
    } else {
        (*result).inner.value
    }
}

/// Copy the achieving classifier row-major (`D` rows by `C` columns).
///
/// # Safety
/// `result` must be a live handle; `buffer` must point to at least `len`
/// doubles, with `len == D*C`.
#[no_mangle]
pub unsafe extern "C" fn ff_oracle_classifier(
    result: *const FfOracleResult,
    buffer: *mut f64,
    len: usize,
) -> FfStatus {
    guarded(|| {
        if result.is_null() || buffer.is_null() {
            return fail(FfStatus::InvalidArgument, "result or buffer is null");
        }
        let rows = &(*result).inner.classifier;
        let labels = (*result).labels;
        if len != rows.len() * labels {
            return fail(
                FfStatus::InvalidArgument,
                &format!(
                    "buffer has {len} slots, classifier has {}",
                    rows.len() * labels
                ),
            );
        }
        for (x, row) in rows.iter().enumerate() {
            ptr::copy_nonoverlapping(row.as_ptr(), buffer.add(x * labels), labels);
        }
        FfStatus::Ok
    })
}

/// Copy the induced channel row-major (`A*C` rows by `C` columns).
///
/// # Safety
/// `result` must be a live handle; `buffer` must point to at least `len`
/// doubles, with `len == A*C*C`.
#[no_mangle]
pub unsafe extern "C" fn ff_oracle_transition(
    result: *const FfOracleResult,
    buffer: *mut f64,
    len: usize,
) -> FfStatus {
    guarded(|| {
        if result.is_null() || buffer.is_null() {
            return fail(FfStatus::InvalidArgument, "result or buffer is null");
        }
        let entries = &(*result).inner.p.entries;
        let expected = (*result).groups * (*result).labels * (*result).labels;
        if len != entries.len() || len != expected {
            return fail(
                FfStatus::InvalidArgument,
                &format!("buffer has {len} slots, channel has {}", entries.len()),
            );
        }
        ptr::copy_nonoverlapping(entries.as_ptr(), buffer, len);
        FfStatus::Ok
    })
}

/// # Safety
/// `result` must have come from [`ff_oracle_exact`]; no use afterwards.
#[no_mangle]
pub unsafe extern "C" fn ff_oracle_result_free(result: *mut FfOracleResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}
