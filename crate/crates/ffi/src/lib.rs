//! C ABI over `crack-core`.
//!
//! Datasets are assembled column by column through an opaque
//! [`CrackDataset`] handle, inferred with [`crack_infer`] into an opaque
//! [`CrackVerdict`], and released with the matching `*_free` function.
//! Every fallible call returns a [`CrackStatus`]; on failure the message is
//! available from [`crack_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use crack::{
    Attribute, CausalVerdict, CrackError, Dataset, Direction, Indicator, InferenceOptions,
    MarginalMode,
};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrackStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidData = 3,
    InvalidConfig = 4,
    Degenerate = 5,
    Internal = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrackSide {
    X = 0,
    Y = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrackIndicator {
    Delta = 0,
    Nci = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrackMarginal {
    Domain = 0,
    Res = 1,
    Tree = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrackDirection {
    XToY = 0,
    YToX = 1,
    Inconclusive = 2,
}

/// Inference settings. Obtain defaults from [`crack_options_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct CrackOptions {
    pub indicator: CrackIndicator,
    pub marginal: CrackMarginal,
    pub epsilon: f64,
    /// Precision of encoded regression parameters.
    pub precision: f64,
    /// Non-zero enables linear and quadratic regression nodes.
    pub regression: i32,
}

/// Attributes collected so far, each tagged with its side.
pub struct CrackDataset {
    attributes: Vec<Attribute>,
    sides: Vec<CrackSide>,
}

pub struct CrackVerdict(CausalVerdict);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    let c = CString::new(text).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &CrackError) -> CrackStatus {
    match err {
        CrackError::Config(_) => CrackStatus::InvalidConfig,
        CrackError::Degenerate(_) => CrackStatus::Degenerate,
        CrackError::Invariant(_) => CrackStatus::Internal,
        _ => CrackStatus::InvalidData,
    }
}

fn fail(status: CrackStatus, msg: impl Into<String>) -> CrackStatus {
    set_error(msg);
    status
}

/// Runs `f`, turning panics into [`CrackStatus::Internal`].
fn guarded(f: impl FnOnce() -> CrackStatus) -> CrackStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(CrackStatus::Internal, format!("internal error: {msg}"))
        }
    }
}

unsafe fn name_arg(name: *const c_char) -> Result<String, CrackStatus> {
    if name.is_null() {
        return Err(fail(CrackStatus::NullPointer, "name is null"));
    }
    CStr::from_ptr(name)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| fail(CrackStatus::InvalidArgument, "name is not valid UTF-8"))
}

unsafe fn slice_arg<'a, T>(data: *const T, len: usize) -> Result<&'a [T], CrackStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(fail(CrackStatus::NullPointer, "values pointer is null"));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn crack_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn crack_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn crack_options_default() -> CrackOptions {
    let d = InferenceOptions::default();
    CrackOptions {
        indicator: match d.indicator {
            Indicator::Delta => CrackIndicator::Delta,
            Indicator::Nci => CrackIndicator::Nci,
        },
        marginal: match d.marginal {
            MarginalMode::Domain => CrackMarginal::Domain,
            MarginalMode::Res => CrackMarginal::Res,
            MarginalMode::Tree => CrackMarginal::Tree,
        },
        epsilon: d.epsilon,
        precision: d.search.precision,
        regression: d.search.regression as i32,
    }
}

/// Creates an empty dataset. Never returns NULL.
#[no_mangle]
pub extern "C" fn crack_dataset_new() -> *mut CrackDataset {
    Box::into_raw(Box::new(CrackDataset {
        attributes: Vec::new(),
        sides: Vec::new(),
    }))
}

/// # Safety
/// `dataset` must be NULL or a pointer from [`crack_dataset_new`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn crack_dataset_free(dataset: *mut CrackDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Number of attributes added so far, or 0 for NULL.
///
/// # Safety
/// `dataset` must be NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn crack_dataset_attribute_count(dataset: *const CrackDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.attributes.len())
}

/// Appends a numeric attribute of `len` values; the recording resolution
/// is estimated from the values.
///
/// # Safety
/// `dataset` must be a live handle, `name` a NUL-terminated string and
/// `values` must point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn crack_dataset_add_numeric(
    dataset: *mut CrackDataset,
    name: *const c_char,
    values: *const f64,
    len: usize,
    side: CrackSide,
) -> CrackStatus {
    guarded(|| {
        let Some(ds) = dataset.as_mut() else {
            return fail(CrackStatus::NullPointer, "dataset is null");
        };
        let name = match name_arg(name) {
            Ok(n) => n,
            Err(s) => return s,
        };
        let values = match slice_arg(values, len) {
            Ok(v) => v.to_vec(),
            Err(s) => return s,
        };
        match Attribute::numeric(name, values) {
            Ok(a) => {
                ds.attributes.push(a);
                ds.sides.push(side);
                CrackStatus::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// Appends a nominal attribute whose `len` codes lie in
/// `0..category_count`.
///
/// # Safety
/// `dataset` must be a live handle, `name` a NUL-terminated string and
/// `codes` must point to `len` readable integers.
#[no_mangle]
pub unsafe extern "C" fn crack_dataset_add_nominal(
    dataset: *mut CrackDataset,
    name: *const c_char,
    codes: *const u32,
    len: usize,
    category_count: u32,
    side: CrackSide,
) -> CrackStatus {
    guarded(|| {
        let Some(ds) = dataset.as_mut() else {
            return fail(CrackStatus::NullPointer, "dataset is null");
        };
        let name = match name_arg(name) {
            Ok(n) => n,
            Err(s) => return s,
        };
        let codes = match slice_arg(codes, len) {
            Ok(v) => v.to_vec(),
            Err(s) => return s,
        };
        match Attribute::nominal(name, codes, category_count as usize, Vec::new()) {
            Ok(a) => {
                ds.attributes.push(a);
                ds.sides.push(side);
                CrackStatus::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

fn core_options(o: &CrackOptions) -> InferenceOptions {
    let mut opts = InferenceOptions {
        indicator: match o.indicator {
            CrackIndicator::Delta => Indicator::Delta,
            CrackIndicator::Nci => Indicator::Nci,
        },
        marginal: match o.marginal {
            CrackMarginal::Domain => MarginalMode::Domain,
            CrackMarginal::Res => MarginalMode::Res,
            CrackMarginal::Tree => MarginalMode::Tree,
        },
        epsilon: o.epsilon,
        ..InferenceOptions::default()
    };
    opts.search.precision = o.precision;
    opts.search.regression = o.regression != 0;
    opts
}

/// Infers the causal direction between the X and Y attributes. `options`
/// may be NULL for defaults. On success `*out` receives a verdict to be
/// released with [`crack_verdict_free`]; on failure it is set to NULL.
///
/// # Safety
/// `dataset` must be a live handle, `options` NULL or readable, and `out`
/// a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn crack_infer(
    dataset: *const CrackDataset,
    options: *const CrackOptions,
    out: *mut *mut CrackVerdict,
) -> CrackStatus {
    guarded(|| {
        if out.is_null() {
            return fail(CrackStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let Some(ds) = dataset.as_ref() else {
            return fail(CrackStatus::NullPointer, "dataset is null");
        };
        let opts = options
            .as_ref()
            .map_or_else(InferenceOptions::default, core_options);
        let pick = |side| {
            ds.sides
                .iter()
                .enumerate()
                .filter(|&(_, s)| *s == side)
                .map(|(i, _)| i)
                .collect::<Vec<_>>()
        };
        let result = Dataset::new(
            ds.attributes.clone(),
            pick(CrackSide::X),
            pick(CrackSide::Y),
        )
        .and_then(|data| crack::infer(&data, &opts));
        match result {
            Ok(v) => {
                *out = Box::into_raw(Box::new(CrackVerdict(v)));
                CrackStatus::Ok
            }
            Err(e) => fail(status_of(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `verdict` must be NULL or a pointer from [`crack_infer`] that has not
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn crack_verdict_free(verdict: *mut CrackVerdict) {
    if !verdict.is_null() {
        drop(Box::from_raw(verdict));
    }
}

/// Inferred direction; inconclusive for NULL.
///
/// # Safety
/// `verdict` must be NULL or a live verdict handle.
#[no_mangle]
pub unsafe extern "C" fn crack_verdict_direction(verdict: *const CrackVerdict) -> CrackDirection {
    match verdict.as_ref().map(|v| v.0.direction) {
        Some(Direction::XtoY) => CrackDirection::XToY,
        Some(Direction::YtoX) => CrackDirection::YToX,
        _ => CrackDirection::Inconclusive,
    }
}

/// Absolute score gap; NaN for NULL.
///
/// # Safety
/// `verdict` must be NULL or a live verdict handle.
#[no_mangle]
pub unsafe extern "C" fn crack_verdict_confidence(verdict: *const CrackVerdict) -> f64 {
    verdict.as_ref().map_or(f64::NAN, |v| v.0.confidence)
}

/// Score of the X->Y hypothesis; NaN for NULL.
///
/// # Safety
/// `verdict` must be NULL or a live verdict handle.
#[no_mangle]
pub unsafe extern "C" fn crack_verdict_score_xy(verdict: *const CrackVerdict) -> f64 {
    verdict.as_ref().map_or(f64::NAN, |v| v.0.score_xy)
}

/// Score of the Y->X hypothesis; NaN for NULL.
///
/// # Safety
/// `verdict` must be NULL or a live verdict handle.
#[no_mangle]
pub unsafe extern "C" fn crack_verdict_score_yx(verdict: *const CrackVerdict) -> f64 {
    verdict.as_ref().map_or(f64::NAN, |v| v.0.score_yx)
}

/// Wall-clock inference time in milliseconds; NaN for NULL.
///
/// # Safety
/// `verdict` must be NULL or a live verdict handle.
#[no_mangle]
pub unsafe extern "C" fn crack_verdict_runtime_ms(verdict: *const CrackVerdict) -> f64 {
    verdict.as_ref().map_or(f64::NAN, |v| v.0.runtime_ms)
}

/// NML regret in bits of a `k`-category multinomial over `n` rows.
#[no_mangle]
pub extern "C" fn crack_nml_regret(n: usize, k: usize) -> f64 {
    crack::codelength::nml_regret(n, k)
}

/// Universal code length in bits of the positive integer `z`; NaN for 0.
#[no_mangle]
pub extern "C" fn crack_universal_int(z: u64) -> f64 {
    if z == 0 {
        return f64::NAN;
    }
    crack::codelength::universal_int(z)
}
