//! C interface to `maxkappa`.
//!
//! Objects are opaque handles created by `mk_*_new`-style constructors and
//! released with the matching `*_free`. Every fallible call returns an
//! [`MkStatus`]; on failure, [`mk_last_error_message`] describes the error
//! for the calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use maxkappa::anneal::{AnnealConfig, Annealer, DEFAULT_DECAY, DEFAULT_MAX_STEPS, DEFAULT_TAU0};
use maxkappa::fiber::{fiber_size, level_set_count, FiberOptions};
use maxkappa::{
    weighted_kappa, AnnealResult, DisagreementScheme, Error, MarkovBasis, SchemeKind, Table,
};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MkStatus {
    Ok = 0,
    NullPointer,
    DimensionMismatch,
    InvalidArgument,
    InvalidScheme,
    EmptyTable,
    KappaUndefined,
    MoveRejected,
    FiberTooLarge,
    Parse,
    Io,
    Panic,
}

impl From<&Error> for MkStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::DimensionMismatch(_) | Error::RaterOutOfRange { .. } => {
                MkStatus::DimensionMismatch
            }
            Error::InvalidArgument(_) => MkStatus::InvalidArgument,
            Error::InvalidScheme(_) => MkStatus::InvalidScheme,
            Error::EmptyTable => MkStatus::EmptyTable,
            Error::KappaUndefined => MkStatus::KappaUndefined,
            Error::MoveRejected => MkStatus::MoveRejected,
            Error::FiberTooLarge { .. } => MkStatus::FiberTooLarge,
            Error::Parse(_) => MkStatus::Parse,
            Error::Io(_) => MkStatus::Io,
        }
    }
}

/// Contingency table handle.
pub struct MkTable(Table);

/// Disagreement scheme handle.
pub struct MkScheme(DisagreementScheme);

/// Annealing result handle.
pub struct MkAnnealResult(AnnealResult);

/// Annealing parameters; obtain defaults from [`mk_anneal_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MkAnnealConfig {
    pub tau0: f64,
    pub decay: f64,
    /// Stagnation window; 0 selects the default for the basis.
    pub stop_c: u64,
    pub max_steps: u64,
    pub seed: u64,
}

impl From<MkAnnealConfig> for AnnealConfig {
    fn from(c: MkAnnealConfig) -> Self {
        AnnealConfig {
            tau0: c.tau0,
            decay: c.decay,
            stop_c: (c.stop_c > 0).then_some(c.stop_c),
            max_steps: c.max_steps,
            seed: c.seed,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> MkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            MkStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(&format!("null pointer: {what}"));
            MkStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(&e.to_string());
            MkStatus::from(&e)
        }
        Err(_) => {
            set_error("internal panic");
            MkStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn mk_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn mk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a table from `len = levels^raters` counts, first rater slowest.
///
/// # Safety
/// `counts` must point to `len` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_table_new(
    raters: usize,
    levels: usize,
    counts: *const u64,
    len: usize,
    out_table: *mut *mut MkTable,
) -> MkStatus {
    guard(|| {
        let o = out(out_table, "out_table")?;
        let c = slice(counts, len, "counts")?;
        let t = Table::new(raters, levels, c.to_vec())?;
        *o = Box::into_raw(Box::new(MkTable(t)));
        Ok(())
    })
}

/// Releases a table; null is ignored.
///
/// # Safety
/// `table` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mk_table_free(table: *mut MkTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Sample size of a table, or 0 for null.
///
/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mk_table_total(table: *const MkTable) -> u64 {
    table.as_ref().map_or(0, |t| t.0.total())
}

/// Number of cells, `levels^raters`, or 0 for null.
///
/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mk_table_num_cells(table: *const MkTable) -> usize {
    table.as_ref().map_or(0, |t| t.0.num_cells())
}

/// Copies the counts into `buf`, which must hold exactly the number of cells.
///
/// # Safety
/// `buf` must point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn mk_table_counts(
    table: *const MkTable,
    buf: *mut u64,
    len: usize,
) -> MkStatus {
    guard(|| {
        let t = &deref(table, "table")?.0;
        if len != t.num_cells() {
            return Err(Error::DimensionMismatch(format!(
                "buffer holds {len} values, table has {} cells",
                t.num_cells()
            ))
            .into());
        }
        if buf.is_null() {
            return Err(Failure::Null("buf"));
        }
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(t.counts());
        Ok(())
    })
}

/// Builtin scheme by name: `quadratic`, `linear`, `sqrt` or `identity`.
///
/// # Safety
/// `name` must be a nul-terminated string; `out_scheme` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_scheme_builtin(
    name: *const c_char,
    levels: usize,
    out_scheme: *mut *mut MkScheme,
) -> MkStatus {
    guard(|| {
        let o = out(out_scheme, "out_scheme")?;
        if name.is_null() {
            return Err(Failure::Null("name"));
        }
        let name = CStr::from_ptr(name)
            .to_str()
            .map_err(|_| Error::InvalidScheme("name is not UTF-8".into()))?;
        let kind: SchemeKind = name.parse()?;
        *o = Box::into_raw(Box::new(MkScheme(DisagreementScheme::builtin(
            kind, levels,
        )?)));
        Ok(())
    })
}

/// Custom scheme from a row-major `levels x levels` disagreement matrix.
///
/// # Safety
/// `u` must point to `levels * levels` readable values.
#[no_mangle]
pub unsafe extern "C" fn mk_scheme_custom(
    u: *const f64,
    levels: usize,
    out_scheme: *mut *mut MkScheme,
) -> MkStatus {
    guard(|| {
        let o = out(out_scheme, "out_scheme")?;
        let n = levels
            .checked_mul(levels)
            .ok_or_else(|| Error::InvalidArgument("levels too large".into()))?;
        let m = slice(u, n, "u")?;
        let rows: Vec<Vec<f64>> = m.chunks(levels.max(1)).map(<[f64]>::to_vec).collect();
        *o = Box::into_raw(Box::new(MkScheme(DisagreementScheme::custom(&rows)?)));
        Ok(())
    })
}

/// Releases a scheme; null is ignored.
///
/// # Safety
/// `scheme` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mk_scheme_free(scheme: *mut MkScheme) {
    if !scheme.is_null() {
        drop(Box::from_raw(scheme));
    }
}

/// Weighted kappa (Conger's form for more than two raters).
///
/// # Safety
/// Handles must be live; `out_kappa` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_weighted_kappa(
    table: *const MkTable,
    scheme: *const MkScheme,
    out_kappa: *mut f64,
) -> MkStatus {
    guard(|| {
        let t = &deref(table, "table")?.0;
        let s = &deref(scheme, "scheme")?.0;
        let o = out(out_kappa, "out_kappa")?;
        *o = weighted_kappa(t, s)?.value;
        Ok(())
    })
}

/// Default annealing parameters with the given seed.
#[no_mangle]
pub extern "C" fn mk_anneal_config_default(seed: u64) -> MkAnnealConfig {
    MkAnnealConfig {
        tau0: DEFAULT_TAU0,
        decay: DEFAULT_DECAY,
        stop_c: 0,
        max_steps: DEFAULT_MAX_STEPS,
        seed,
    }
}

/// Searches the fiber of `table` for maximum kappa. `config` may be null
/// for defaults with seed 0; `restarts` of 0 is treated as 1.
///
/// # Safety
/// Handles must be live; `config` null or readable; `out_result` writable.
#[no_mangle]
pub unsafe extern "C" fn mk_anneal(
    table: *const MkTable,
    scheme: *const MkScheme,
    config: *const MkAnnealConfig,
    restarts: usize,
    out_result: *mut *mut MkAnnealResult,
) -> MkStatus {
    guard(|| {
        let t = &deref(table, "table")?.0;
        let s = &deref(scheme, "scheme")?.0;
        let o = out(out_result, "out_result")?;
        let cfg: AnnealConfig = config
            .as_ref()
            .copied()
            .unwrap_or_else(|| mk_anneal_config_default(0))
            .into();
        if s.levels() != t.levels() {
            return Err(Error::DimensionMismatch(format!(
                "scheme has {} levels, table has {}",
                s.levels(),
                t.levels()
            ))
            .into());
        }
        let res = Annealer::new(s, t.raters())?.run_restarts(t, &cfg, restarts)?;
        *o = Box::into_raw(Box::new(MkAnnealResult(res)));
        Ok(())
    })
}

/// Releases an annealing result; null is ignored.
///
/// # Safety
/// `result` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mk_anneal_result_free(result: *mut MkAnnealResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Best kappa found, or NaN for null.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mk_anneal_result_kappa(result: *const MkAnnealResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.0.best_kappa.value)
}

/// Kappa of the input table, or NaN for null.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mk_anneal_result_input_kappa(result: *const MkAnnealResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.0.input_kappa.value)
}

/// Steps executed by the winning walk, or 0 for null.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mk_anneal_result_steps(result: *const MkAnnealResult) -> u64 {
    result.as_ref().map_or(0, |r| r.0.steps_total)
}

/// Copies the best table into a new handle owned by the caller.
///
/// # Safety
/// `result` must be live; `out_table` writable.
#[no_mangle]
pub unsafe extern "C" fn mk_anneal_result_table(
    result: *const MkAnnealResult,
    out_table: *mut *mut MkTable,
) -> MkStatus {
    guard(|| {
        let r = &deref(result, "result")?.0;
        let o = out(out_table, "out_table")?;
        *o = Box::into_raw(Box::new(MkTable(r.best_table.clone())));
        Ok(())
    })
}

/// Number of tables sharing `table`'s margins; `budget` of 0 uses the default.
///
/// # Safety
/// `table` must be live; `out_size` writable.
#[no_mangle]
pub unsafe extern "C" fn mk_fiber_size(
    table: *const MkTable,
    budget: u64,
    out_size: *mut u64,
) -> MkStatus {
    guard(|| {
        let t = &deref(table, "table")?.0;
        let o = out(out_size, "out_size")?;
        *o = fiber_size(&t.fiber_statistic(), options(budget))?;
        Ok(())
    })
}

/// Number of fiber tables with the same kappa as `table`, and the fiber size.
///
/// # Safety
/// Handles must be live; outputs writable (`out_fiber_size` may be null).
#[no_mangle]
pub unsafe extern "C" fn mk_level_set_count(
    table: *const MkTable,
    scheme: *const MkScheme,
    budget: u64,
    out_count: *mut u64,
    out_fiber_size: *mut u64,
) -> MkStatus {
    guard(|| {
        let t = &deref(table, "table")?.0;
        let s = &deref(scheme, "scheme")?.0;
        let o = out(out_count, "out_count")?;
        let ls = level_set_count(t, s, options(budget))?;
        *o = ls.count;
        if let Some(f) = out_fiber_size.as_mut() {
            *f = ls.fiber_size;
        }
        Ok(())
    })
}

fn options(budget: u64) -> FiberOptions {
    let mut o = FiberOptions::default();
    if budget > 0 {
        o.budget = budget;
    }
    o
}

/// Cardinality of the basis of basic moves for the given dimensions.
///
/// # Safety
/// `out_size` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mk_basis_size(
    raters: usize,
    levels: usize,
    out_size: *mut usize,
) -> MkStatus {
    guard(|| {
        let o = out(out_size, "out_size")?;
        *o = MarkovBasis::for_dims(raters, levels)?.len();
        Ok(())
    })
}
