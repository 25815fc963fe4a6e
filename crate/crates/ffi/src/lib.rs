//! C ABI for `rvwalk`.
//!
//! Every fallible function returns an [`RvwStatus`] and writes its result through
//! an out pointer. On failure the message is available from
//! [`rvw_last_error`] until the next failing call on the same thread.
//! Handles are opaque and must be released with the matching `_free` function.
//! Strings returned through out pointers are released with [`rvw_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rvwalk::moments::{rademacher_fourth_moments, second_moments};
use rvwalk::scaling::{self, build_sequences};
use rvwalk::suites::{self, Scale, SuiteOptions};
use rvwalk::walk::{simulate_batch, WalkConfig};
use rvwalk::{DynamicWeightedIndex, Error, InnovationSpec, MemorySpec, MomentTable, SequenceTable, WalkTrajectory};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RvwStatus {
    Ok = 0,
    InvalidInput = 1,
    OutOfRange = 2,
    ResourceLimit = 3,
    Io = 4,
    NullPointer = 5,
    Panic = 6,
}

/// Columns of a sequence table.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RvwSequenceColumn {
    Mu = 0,
    Nu = 1,
    LogA = 2,
    VSq = 3,
    SigmaSq = 4,
    Eta = 5,
}

/// Columns of a moment table. The fourth-moment columns exist only for Rademacher tables.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RvwMomentColumn {
    ESSq = 0,
    EMSq = 1,
    ESY = 2,
    EYSq = 3,
    EY4 = 4,
    BN = 5,
    KurtosisM = 6,
}

pub struct RvwMemorySpec(MemorySpec);
pub struct RvwSequenceTable(SequenceTable);
pub struct RvwMomentTable(MomentTable);
pub struct RvwBatch(Vec<WalkTrajectory>);
pub struct RvwSampler(DynamicWeightedIndex);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &Error) -> RvwStatus {
    match e {
        Error::IndexOutOfRange { .. } => RvwStatus::OutOfRange,
        Error::Io(_) => RvwStatus::Io,
        e if e.is_resource_limit() => RvwStatus::ResourceLimit,
        _ => RvwStatus::InvalidInput,
    }
}

/// Run `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), RvwStatus>) -> RvwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RvwStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            RvwStatus::Panic
        }
    }
}

trait Check<T> {
    fn check(self) -> Result<T, RvwStatus>;
}

impl<T> Check<T> for rvwalk::Result<T> {
    fn check(self) -> Result<T, RvwStatus> {
        self.map_err(|e| {
            set_error(e.to_string());
            status_of(&e)
        })
    }
}

unsafe fn obj<'a, T>(p: *const T, what: &str) -> Result<&'a T, RvwStatus> {
    p.as_ref().ok_or_else(|| {
        set_error(format!("{what} is null"));
        RvwStatus::NullPointer
    })
}

unsafe fn obj_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, RvwStatus> {
    p.as_mut().ok_or_else(|| {
        set_error(format!("{what} is null"));
        RvwStatus::NullPointer
    })
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, RvwStatus> {
    obj(p, what)?;
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        RvwStatus::InvalidInput
    })
}

unsafe fn put<T>(out: *mut T, value: T) -> Result<(), RvwStatus> {
    if out.is_null() {
        set_error("out pointer is null");
        return Err(RvwStatus::NullPointer);
    }
    out.write(value);
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), RvwStatus> {
    let c = CString::new(s).map_err(|_| {
        set_error("output contains a NUL byte");
        RvwStatus::InvalidInput
    })?;
    put(out, c.into_raw())
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> Result<(), RvwStatus> {
    if len < src.len() {
        set_error(format!("buffer holds {len} values, {} needed", src.len()));
        return Err(RvwStatus::OutOfRange);
    }
    if src.is_empty() {
        return Ok(());
    }
    if buf.is_null() {
        set_error("buffer is null");
        return Err(RvwStatus::NullPointer);
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Message of the last failed call on this thread; empty if none. Owned by the library.
#[no_mangle]
pub extern "C" fn rvw_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rvw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rvw_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[no_mangle]
pub extern "C" fn rvw_critical_p(gamma: f64) -> f64 {
    scaling::critical_p(gamma)
}

#[no_mangle]
pub extern "C" fn rvw_hat_p(gamma: f64) -> f64 {
    scaling::hat_p(gamma)
}

/// Limiting covariance `K(s, t)` of `S_{floor(nt)} / sqrt(n)` in the diffusive regime.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn rvw_covariance_kernel(s: f64, t: f64, p: f64, gamma: f64, out: *mut f64) -> RvwStatus {
    guard(|| put(out, scaling::covariance_kernel(s, t, p, gamma).check()?))
}

/// Limit of `E S_n^2 / n` in the diffusive regime.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn rvw_subcritical_limit_variance(p: f64, gamma: f64, out: *mut f64) -> RvwStatus {
    guard(|| put(out, scaling::subcritical_limit_variance(p, gamma).check()?))
}

/// Parse a memory spec from JSON, e.g. `{"family":"power_law","gamma":1.0}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn rvw_memory_spec_from_json(json: *const c_char, out: *mut *mut RvwMemorySpec) -> RvwStatus {
    guard(|| {
        let spec = MemorySpec::from_json(text(json, "json")?).check()?;
        spec.validate().check()?;
        put(out, Box::into_raw(Box::new(RvwMemorySpec(spec))))
    })
}

/// # Safety
/// `spec` must be null or a handle from [`rvw_memory_spec_from_json`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rvw_memory_spec_free(spec: *mut RvwMemorySpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// `mu_n` for `n >= 1`.
///
/// # Safety
/// `spec` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn rvw_memory_spec_mu(spec: *const RvwMemorySpec, n: u64, out: *mut f64) -> RvwStatus {
    guard(|| put(out, obj(spec, "spec")?.0.mu(n).check()?))
}

/// Regime report as JSON.
///
/// # Safety
/// `spec` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn rvw_regime_json(spec: *const RvwMemorySpec, p: f64, out: *mut *mut c_char) -> RvwStatus {
    guard(|| {
        let report = scaling::classify_regime(&obj(spec, "spec")?.0, p).check()?;
        put_string(out, serde_json::to_string(&report).map_err(Error::from).check()?)
    })
}

/// Companion sequences for indices `1..=n_max`.
///
/// # Safety
/// `spec` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn rvw_sequences_build(
    spec: *const RvwMemorySpec,
    p: f64,
    n_max: usize,
    out: *mut *mut RvwSequenceTable,
) -> RvwStatus {
    guard(|| {
        let t = build_sequences(&obj(spec, "spec")?.0, p, n_max).check()?;
        put(out, Box::into_raw(Box::new(RvwSequenceTable(t))))
    })
}

/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rvw_sequences_free(table: *mut RvwSequenceTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Number of rows, or 0 for a null handle.
///
/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rvw_sequences_len(table: *const RvwSequenceTable) -> usize {
    table.as_ref().map_or(0, |t| t.0.len())
}

/// Copy a column into `buf`, which must hold at least [`rvw_sequences_len`] values.
///
/// # Safety
/// `table` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn rvw_sequences_column(
    table: *const RvwSequenceTable,
    column: RvwSequenceColumn,
    buf: *mut f64,
    len: usize,
) -> RvwStatus {
    guard(|| {
        let t = &obj(table, "table")?.0;
        let col = match column {
            RvwSequenceColumn::Mu => &t.mu,
            RvwSequenceColumn::Nu => &t.nu,
            RvwSequenceColumn::LogA => &t.log_a,
            RvwSequenceColumn::VSq => &t.v_sq,
            RvwSequenceColumn::SigmaSq => &t.sigma_sq,
            RvwSequenceColumn::Eta => &t.eta,
        };
        copy_out(col, buf, len)
    })
}

/// Exact moments for `1..=n_max`. `rademacher != 0` adds the fourth-moment
/// columns; otherwise the innovations have variance `innovation_variance`.
///
/// # Safety
/// `spec` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn rvw_moments_build(
    spec: *const RvwMemorySpec,
    p: f64,
    n_max: usize,
    rademacher: i32,
    innovation_variance: f64,
    out: *mut *mut RvwMomentTable,
) -> RvwStatus {
    guard(|| {
        let spec = &obj(spec, "spec")?.0;
        let t = if rademacher != 0 {
            rademacher_fourth_moments(spec, p, n_max)
        } else {
            second_moments(spec, p, n_max, innovation_variance)
        }
        .check()?;
        put(out, Box::into_raw(Box::new(RvwMomentTable(t))))
    })
}

/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rvw_moments_free(table: *mut RvwMomentTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rvw_moments_len(table: *const RvwMomentTable) -> usize {
    table.as_ref().map_or(0, |t| t.0.n_max)
}

/// Copy a column into `buf`. Fourth-moment columns of a non-Rademacher table
/// give `RVW_STATUS_INVALID_INPUT`.
///
/// # Safety
/// `table` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn rvw_moments_column(
    table: *const RvwMomentTable,
    column: RvwMomentColumn,
    buf: *mut f64,
    len: usize,
) -> RvwStatus {
    guard(|| {
        let t = &obj(table, "table")?.0;
        let fourth = || {
            t.fourth.as_ref().ok_or_else(|| {
                set_error("fourth-moment columns need Rademacher innovations");
                RvwStatus::InvalidInput
            })
        };
        let col = match column {
            RvwMomentColumn::ESSq => &t.e_s_sq,
            RvwMomentColumn::EMSq => &t.e_m_sq,
            RvwMomentColumn::ESY => &t.e_sy,
            RvwMomentColumn::EYSq => &t.e_y_sq,
            RvwMomentColumn::EY4 => &fourth()?.e_y_4,
            RvwMomentColumn::BN => &fourth()?.b_n,
            RvwMomentColumn::KurtosisM => &fourth()?.kurtosis_m,
        };
        copy_out(col, buf, len)
    })
}

/// Simulate `replicas` walks of `n_steps` steps, recording `S` at the given
/// checkpoints (strictly increasing; pass `n_checkpoints = 0` for the last step only).
/// `innovation_json` may be null for Rademacher steps.
///
/// # Safety
/// Pointers must be live handles or valid arrays of the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn rvw_simulate(
    spec: *const RvwMemorySpec,
    p: f64,
    innovation_json: *const c_char,
    n_steps: u64,
    checkpoints: *const u64,
    n_checkpoints: usize,
    replicas: usize,
    master_seed: u64,
    threads: usize,
    out: *mut *mut RvwBatch,
) -> RvwStatus {
    guard(|| {
        let spec = obj(spec, "spec")?.0.clone();
        let innovation = if innovation_json.is_null() {
            InnovationSpec::Rademacher
        } else {
            serde_json::from_str(text(innovation_json, "innovation_json")?).map_err(Error::from).check()?
        };
        let mut cfg = WalkConfig::new(spec, p, innovation, n_steps, master_seed);
        if n_checkpoints > 0 {
            obj(checkpoints, "checkpoints")?;
            cfg = cfg.with_checkpoints(std::slice::from_raw_parts(checkpoints, n_checkpoints).to_vec());
        }
        cfg.validate().check()?;
        let batch = simulate_batch(&cfg, replicas, master_seed, threads).check()?;
        put(out, Box::into_raw(Box::new(RvwBatch(batch))))
    })
}

/// # Safety
/// `batch` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rvw_batch_free(batch: *mut RvwBatch) {
    if !batch.is_null() {
        drop(Box::from_raw(batch));
    }
}

/// # Safety
/// `batch` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rvw_batch_replicas(batch: *const RvwBatch) -> usize {
    batch.as_ref().map_or(0, |b| b.0.len())
}

/// Checkpoints per replica.
///
/// # Safety
/// `batch` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rvw_batch_checkpoints(batch: *const RvwBatch) -> usize {
    batch.as_ref().and_then(|b| b.0.first()).map_or(0, |t| t.checkpoints.len())
}

/// Copy `S` at every checkpoint of one replica into `buf`.
///
/// # Safety
/// `batch` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn rvw_batch_s(batch: *const RvwBatch, replica: usize, buf: *mut f64, len: usize) -> RvwStatus {
    guard(|| {
        let b = &obj(batch, "batch")?.0;
        let t = b.get(replica).ok_or_else(|| {
            set_error(format!("replica {replica} of {}", b.len()));
            RvwStatus::OutOfRange
        })?;
        copy_out(&t.s, buf, len)
    })
}

/// Empty weighted sampler with room for `capacity` weights.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn rvw_sampler_new(capacity: usize, out: *mut *mut RvwSampler) -> RvwStatus {
    guard(|| put(out, Box::into_raw(Box::new(RvwSampler(DynamicWeightedIndex::new(capacity))))))
}

/// # Safety
/// `sampler` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rvw_sampler_free(sampler: *mut RvwSampler) {
    if !sampler.is_null() {
        drop(Box::from_raw(sampler));
    }
}

/// Append a positive weight.
///
/// # Safety
/// `sampler` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rvw_sampler_push(sampler: *mut RvwSampler, weight: f64) -> RvwStatus {
    guard(|| obj_mut(sampler, "sampler")?.0.push(weight).check().map(drop))
}

/// Sum of the weights pushed so far.
///
/// # Safety
/// `sampler` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rvw_sampler_total(sampler: *const RvwSampler) -> f64 {
    sampler.as_ref().map_or(0.0, |s| s.0.total())
}

/// The 1-based index `k` with `prefix(k-1) <= u * total < prefix(k)`, for `u` in `[0, 1)`.
///
/// # Safety
/// `sampler` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn rvw_sampler_sample(sampler: *const RvwSampler, u: f64, out: *mut usize) -> RvwStatus {
    guard(|| {
        if !(0.0..1.0).contains(&u) {
            set_error(format!("u must lie in [0, 1), got {u}"));
            return Err(RvwStatus::InvalidInput);
        }
        put(out, obj(sampler, "sampler")?.0.sample(u).check()?)
    })
}

/// Run a named verification suite and return its report as JSON.
/// `quick != 0` selects the reduced problem sizes.
///
/// # Safety
/// `suite` must be a NUL-terminated string and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn rvw_verify_json(
    suite: *const c_char,
    quick: i32,
    seed: u64,
    threads: usize,
    out: *mut *mut c_char,
) -> RvwStatus {
    guard(|| {
        let opts = SuiteOptions {
            scale: if quick != 0 { Scale::Quick } else { Scale::Full },
            seed,
            threads,
            ..SuiteOptions::default()
        };
        let report = suites::run_suite(text(suite, "suite")?, &opts).check()?;
        put_string(out, report.to_json())
    })
}
