//! C interface. Every object crosses the boundary as an opaque handle that
//! the caller frees with the matching `fm_*_free`. Functions return an
//! [`FmStatus`]; the message of the last failure on the calling thread is
//! available from [`fm_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use flagmirror::cache::SeriesCache;
use flagmirror::combinatorics::Perm;
use flagmirror::envelope::{normalized_matrices, stab_matrix, StabMatrix};
use flagmirror::mirror::kappa;
use flagmirror::numerics::{sample_params, ParamSet, ParamSpec, Real, Scalar};
use flagmirror::report::Report;
use flagmirror::series::TruncatedSeries;
use flagmirror::verify::{run_suite, Suite, SuiteOptions};
use flagmirror::vertex::{vertex_limit, vertex_series};
use flagmirror::Error;

/// Result codes. `FM_CHECK_FAILED` is not an error: the call completed and
/// some verified claim did not hold.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FmStatus {
    FmOk = 0,
    FmCheckFailed = 1,
    FmInvalidArgument = 2,
    FmNullPointer = 3,
    FmNonGeneric = 4,
    FmNumerical = 5,
    FmTailTooLarge = 6,
    FmParse = 7,
    FmPanic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FmNormalization {
    FmRaw = 0,
    FmStab = 1,
    FmS = 2,
    FmBold = 3,
    FmA = 4,
    FmOverline = 5,
}

/// Opaque parameter point (float backend).
pub struct FmParams {
    inner: ParamSet<Real>,
}

/// Opaque truncated power series in `z_1..z_{n-1}`.
pub struct FmSeries {
    inner: TruncatedSeries<Real>,
}

/// Opaque square matrix indexed by the fixed points in the total order.
pub struct FmMatrix {
    inner: StabMatrix<Real>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> FmStatus {
    match err {
        Error::NonGenericParameters { .. } | Error::GenericityExhausted { .. } => FmStatus::FmNonGeneric,
        Error::TailTooLarge { .. } => FmStatus::FmTailTooLarge,
        Error::Parse(_) => FmStatus::FmParse,
        Error::InvalidParameters(_) | Error::DegenerateModulus { .. } | Error::OutOfScope(_) => {
            FmStatus::FmInvalidArgument
        }
        _ => FmStatus::FmNumerical,
    }
}

/// Run `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<FmStatus, (FmStatus, String)>) -> FmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("panic inside flagmirror".into());
            FmStatus::FmPanic
        }
    }
}

fn lib<T>(r: flagmirror::Result<T>) -> Result<T, (FmStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null() -> (FmStatus, String) {
    (FmStatus::FmNullPointer, "null pointer argument".into())
}

unsafe fn perm_from(vals: *const u32, len: usize) -> Result<Perm, (FmStatus, String)> {
    if vals.is_null() {
        return Err(null());
    }
    let v: Vec<usize> = std::slice::from_raw_parts(vals, len).iter().map(|&x| x as usize).collect();
    Perm::new(v).map_err(|e| (FmStatus::FmInvalidArgument, e.to_string()))
}

unsafe fn out_ptr<T>(out: *mut *mut T, value: T) -> Result<FmStatus, (FmStatus, String)> {
    if out.is_null() {
        return Err(null());
    }
    *out = Box::into_raw(Box::new(value));
    Ok(FmStatus::FmOk)
}

/// Message of the last failing call on this thread, or NULL. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Deterministic generic parameters for rank `n` from `seed`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn fm_params_sample(
    n: usize,
    seed: u64,
    theta_terms: usize,
    max_degree: usize,
    precision_digits: u32,
    out: *mut *mut FmParams,
) -> FmStatus {
    guard(|| {
        let spec = lib(sample_params(n, seed, theta_terms, max_degree))?.with_precision(precision_digits);
        let inner = lib(ParamSet::from_spec(&spec))?;
        out_ptr(out, FmParams { inner })
    })
}

/// Parameters from a TOML document in the serialized `ParamSpec` format.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fm_params_from_toml(toml: *const c_char, out: *mut *mut FmParams) -> FmStatus {
    guard(|| {
        if toml.is_null() {
            return Err(null());
        }
        let text = CStr::from_ptr(toml)
            .to_str()
            .map_err(|e| (FmStatus::FmParse, e.to_string()))?;
        let spec = lib(ParamSpec::from_toml(text))?;
        lib(spec.check_generic())?;
        let inner = lib(ParamSet::from_spec(&spec))?;
        out_ptr(out, FmParams { inner })
    })
}

/// # Safety
/// `p` must come from an `fm_params_*` constructor, or be NULL.
#[no_mangle]
pub unsafe extern "C" fn fm_params_free(p: *mut FmParams) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `p` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fm_params_n(p: *const FmParams) -> usize {
    p.as_ref().map_or(0, |p| p.inner.n())
}

/// Relative tolerance used by the checks at these parameters.
///
/// # Safety
/// `p` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fm_params_tolerance(p: *const FmParams) -> f64 {
    p.as_ref().map_or(f64::NAN, |p| p.inner.tolerance())
}

/// Vertex function of the fixed point `perm[0..len]` (one-line notation,
/// entries 1..n). With `limit` nonzero, its closed form at `a = 0`.
///
/// # Safety
/// `p` must be a live handle, `perm` must point to `len` values and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn fm_vertex_series(
    p: *const FmParams,
    perm: *const u32,
    len: usize,
    limit: i32,
    out: *mut *mut FmSeries,
) -> FmStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(null)?;
        let i = perm_from(perm, len)?;
        if i.n() != p.inner.n() {
            return Err((FmStatus::FmInvalidArgument, format!("permutation {i} has the wrong length")));
        }
        let inner = if limit != 0 {
            lib(vertex_limit(&i, &p.inner))?
        } else {
            lib(vertex_series(&i, &p.inner))?
        };
        out_ptr(out, FmSeries { inner })
    })
}

/// # Safety
/// `s` must come from [`fm_vertex_series`], or be NULL.
#[no_mangle]
pub unsafe extern "C" fn fm_series_free(s: *mut FmSeries) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of stored coefficients, `(bound + 1)^nvars`.
///
/// # Safety
/// `s` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fm_series_len(s: *const FmSeries) -> usize {
    s.as_ref().map_or(0, |s| s.inner.len())
}

/// # Safety
/// `s` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fm_series_nvars(s: *const FmSeries) -> usize {
    s.as_ref().map_or(0, |s| s.inner.nvars())
}

/// # Safety
/// `s` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fm_series_bound(s: *const FmSeries) -> usize {
    s.as_ref().map_or(0, |s| s.inner.bound())
}

/// Coefficient of `z^degree`, `degree` holding `nvars` entries.
///
/// # Safety
/// `s` must be a live handle, `degree` must point to `nvars` values and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fm_series_coefficient(
    s: *const FmSeries,
    degree: *const u32,
    nvars: usize,
    out: *mut f64,
) -> FmStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(null)?;
        if degree.is_null() || out.is_null() {
            return Err(null());
        }
        let d = std::slice::from_raw_parts(degree, nvars);
        if nvars != s.inner.nvars() || d.iter().any(|&x| x as usize > s.inner.bound()) {
            return Err((FmStatus::FmInvalidArgument, "degree outside the stored box".into()));
        }
        *out = s.inner.get(d).to_f64();
        Ok(FmStatus::FmOk)
    })
}

/// Sum of the series at the parameters' own `z`.
///
/// # Safety
/// Both handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fm_series_eval(s: *const FmSeries, p: *const FmParams, out: *mut f64) -> FmStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(null)?;
        let p = p.as_ref().ok_or_else(null)?;
        if out.is_null() {
            return Err(null());
        }
        *out = lib(s.inner.eval(&p.inner.z))?.to_f64();
        Ok(FmStatus::FmOk)
    })
}

/// Restriction matrix of the elliptic stable envelope in the requested
/// normalization.
///
/// # Safety
/// `p` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fm_stab_matrix(
    p: *const FmParams,
    normalization: FmNormalization,
    out: *mut *mut FmMatrix,
) -> FmStatus {
    guard(|| {
        let p = &p.as_ref().ok_or_else(null)?.inner;
        let data = lib(stab_matrix(p))?;
        let inner = match normalization {
            FmNormalization::FmRaw => data.raw,
            FmNormalization::FmStab => data.stab,
            other => {
                let dual = lib(kappa(p))?;
                let m = lib(normalized_matrices(&data.stab, p, &dual))?;
                match other {
                    FmNormalization::FmS => m.s,
                    FmNormalization::FmBold => m.bold,
                    FmNormalization::FmA => m.a,
                    _ => m.overline,
                }
            }
        };
        out_ptr(out, FmMatrix { inner })
    })
}

/// # Safety
/// `m` must come from [`fm_stab_matrix`], or be NULL.
#[no_mangle]
pub unsafe extern "C" fn fm_matrix_free(m: *mut FmMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fm_matrix_size(m: *const FmMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.inner.size())
}

/// Entry `(row, col)`, both 0-based in the total order of fixed points.
///
/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fm_matrix_get(m: *const FmMatrix, row: usize, col: usize, out: *mut f64) -> FmStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(null)?;
        if out.is_null() {
            return Err(null());
        }
        let k = m.inner.size();
        if row >= k || col >= k {
            return Err((FmStatus::FmInvalidArgument, format!("index ({row}, {col}) outside {k}x{k}")));
        }
        *out = m.inner.entries[row][col].to_f64();
        Ok(FmStatus::FmOk)
    })
}

/// Fixed point labelling row `index`, written as `n` values to `perm`.
///
/// # Safety
/// `m` must be a live handle and `perm` must have room for `n` values.
#[no_mangle]
pub unsafe extern "C" fn fm_matrix_fixed_point(m: *const FmMatrix, index: usize, perm: *mut u32, n: usize) -> FmStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(null)?;
        if perm.is_null() {
            return Err(null());
        }
        let p = m
            .inner
            .order
            .get(index)
            .ok_or_else(|| (FmStatus::FmInvalidArgument, format!("index {index} out of range")))?;
        if p.n() != n {
            return Err((FmStatus::FmInvalidArgument, "buffer length differs from n".into()));
        }
        for (k, &v) in p.values().iter().enumerate() {
            *perm.add(k) = v as u32;
        }
        Ok(FmStatus::FmOk)
    })
}

/// Run the named verification suite (`"triangularity"`, ..., `"all"`) and
/// write the JSON report to `*report_json` (free with [`fm_string_free`]).
/// Returns `FM_OK` when every claim passes and `FM_CHECK_FAILED` otherwise.
///
/// # Safety
/// `suite` must be a NUL-terminated string and `report_json` writable.
#[no_mangle]
pub unsafe extern "C" fn fm_verify(suite: *const c_char, n: usize, seed: u64, report_json: *mut *mut c_char) -> FmStatus {
    guard(|| {
        if suite.is_null() || report_json.is_null() {
            return Err(null());
        }
        let name = CStr::from_ptr(suite)
            .to_str()
            .map_err(|e| (FmStatus::FmParse, e.to_string()))?;
        let suite: Suite = lib(name.parse())?;
        if n < 2 {
            return Err((FmStatus::FmInvalidArgument, format!("n = {n} < 2")));
        }
        let opts = SuiteOptions::new(n, vec![seed]);
        let report = Report {
            config: serde_json::to_value(&opts).unwrap_or_default(),
            claims: run_suite(suite, &opts, &SeriesCache::disabled()),
        };
        let text = CString::new(report.to_json()).map_err(|e| (FmStatus::FmNumerical, e.to_string()))?;
        *report_json = text.into_raw();
        Ok(if report.all_pass() {
            FmStatus::FmOk
        } else {
            FmStatus::FmCheckFailed
        })
    })
}

/// # Safety
/// `s` must come from this library, or be NULL.
#[no_mangle]
pub unsafe extern "C" fn fm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
