//! C interface to `marginbn`.
//!
//! Handles are opaque pointers owned by the caller and released with the
//! matching `*_free` function. Every fallible call returns an [`MbnStatus`];
//! on failure a message is available from [`mbn_last_error`] on the same
//! thread. States are 0-based and the class is always variable 0.
//!
//! The generated header lives in `include/marginbn.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use marginbn::data::{load_csv, LoadOptions};
use marginbn::pipeline::{learn, LearnConfig};
use marginbn::solver::{SolveConfig, SolveStatus};
use marginbn::{BnClassifier, Dataset, Error, ScoreKind};

/// Opaque training or test data.
pub struct MbnDataset(Dataset);

/// Opaque learned classifier: a structure plus smoothed parameters.
pub struct MbnClassifier(BnClassifier);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MbnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Validation = 5,
    Solver = 6,
    /// The time limit expired before any structure was found.
    NoIncumbent = 7,
    Panic = 8,
}

pub const MBN_SCORE_SM: u32 = 0;
pub const MBN_SCORE_SBM: u32 = 1;
pub const MBN_SCORE_MDL: u32 = 2;

pub const MBN_SOLVE_OPTIMAL: u32 = 0;
pub const MBN_SOLVE_FEASIBLE_TIMEOUT: u32 = 1;
pub const MBN_SOLVE_INFEASIBLE: u32 = 2;
pub const MBN_SOLVE_NO_INCUMBENT: u32 = 3;

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MbnLearnOptions {
    /// One of the `MBN_SCORE_*` constants.
    pub score: u32,
    /// Desired log-margin; ignored for MDL.
    pub gamma: f64,
    pub max_parents: usize,
    /// Range of the order variables.
    pub delta: f64,
    /// Seconds.
    pub time_limit: f64,
    /// Relative gap (percent) at which the search stops.
    pub gap_tol: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MbnSolveInfo {
    /// One of the `MBN_SOLVE_*` constants.
    pub status: u32,
    /// Score of the returned structure; NaN without one.
    pub objective: f64,
    pub upper_bound: f64,
    /// Infinite without an incumbent.
    pub gap_percent: f64,
    pub nodes: u64,
    pub wall_time: f64,
}

struct Failure(MbnStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => MbnStatus::Io,
            Error::Parse { .. } | Error::MissingValue { .. } | Error::Json(_) => MbnStatus::Parse,
            Error::Validation(_) | Error::InvalidSelection(_) | Error::CyclicStructure => MbnStatus::Validation,
            Error::InvalidArgument(_) => MbnStatus::InvalidArgument,
            Error::Lp(_) => MbnStatus::Solver,
        };
        Failure(status, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MbnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MbnStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal panic: {message}"));
            MbnStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(MbnStatus::NullPointer, format!("{what} is null"))
}

fn invalid(message: String) -> Failure {
    Failure(MbnStatus::InvalidArgument, message)
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<String, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| invalid("path is not valid UTF-8".into()))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mbn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mbn_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Fills `out` with the defaults: SM, `gamma = ln 9`, two parents,
/// `delta = 1`, a two-hour limit.
///
/// # Safety
/// `out` must be NULL or point to writable memory for one options struct.
#[no_mangle]
pub unsafe extern "C" fn mbn_learn_options_default(out: *mut MbnLearnOptions) -> MbnStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let d = LearnConfig::default();
        *out = MbnLearnOptions {
            score: MBN_SCORE_SM,
            gamma: d.gamma,
            max_parents: d.max_parents,
            delta: d.delta,
            time_limit: d.solve.time_limit,
            gap_tol: d.solve.gap_tol,
        };
        Ok(())
    })
}

/// Loads a CSV file. `class_column` is the 0-based file column of the
/// class; `bins` is the quantile bin count for continuous columns, 0 to
/// reject them. The header row is detected automatically.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn mbn_dataset_load_csv(
    path: *const c_char,
    class_column: usize,
    bins: usize,
    out: *mut *mut MbnDataset,
) -> MbnStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        let path = path_arg(path)?;
        let options = LoadOptions {
            class_column,
            bins: (bins > 0).then_some(bins),
            ..LoadOptions::default()
        };
        let (ds, _) = load_csv(&path, &options)?;
        *out = Box::into_raw(Box::new(MbnDataset(ds)));
        Ok(())
    })
}

/// Builds a dataset from `num_samples` rows of `num_vars` 0-based states,
/// stored row-major with the class first.
///
/// # Safety
/// `cardinalities` must hold `num_vars` entries, `values` must hold
/// `num_vars * num_samples` entries and `out` must be a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn mbn_dataset_from_values(
    cardinalities: *const usize,
    num_vars: usize,
    values: *const u32,
    num_samples: usize,
    out: *mut *mut MbnDataset,
) -> MbnStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        if num_vars == 0 || num_samples == 0 {
            return Err(invalid("dataset needs at least one variable and one sample".into()));
        }
        let total = num_vars
            .checked_mul(num_samples)
            .ok_or_else(|| invalid("dataset size overflows".into()))?;
        let cards = slice_arg(cardinalities, num_vars, "cardinalities")?.to_vec();
        let values = slice_arg(values, total, "values")?;
        let rows = values.chunks_exact(num_vars).map(<[u32]>::to_vec).collect();
        let ds = Dataset::new(cards, rows)?;
        *out = Box::into_raw(Box::new(MbnDataset(ds)));
        Ok(())
    })
}

/// Number of variables including the class; 0 for NULL.
///
/// # Safety
/// `ds` must be NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn mbn_dataset_num_vars(ds: *const MbnDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.num_vars())
}

/// Number of samples; 0 for NULL.
///
/// # Safety
/// `ds` must be NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn mbn_dataset_num_samples(ds: *const MbnDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.num_samples())
}

/// # Safety
/// `ds` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mbn_dataset_free(ds: *mut MbnDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

fn score_kind(code: u32) -> Result<ScoreKind, Failure> {
    match code {
        MBN_SCORE_SM => Ok(ScoreKind::Sm),
        MBN_SCORE_SBM => Ok(ScoreKind::Sbm),
        MBN_SCORE_MDL => Ok(ScoreKind::Mdl),
        other => Err(invalid(format!("unknown score code {other}"))),
    }
}

fn status_code(status: SolveStatus) -> u32 {
    match status {
        SolveStatus::Optimal => MBN_SOLVE_OPTIMAL,
        SolveStatus::FeasibleTimeout => MBN_SOLVE_FEASIBLE_TIMEOUT,
        SolveStatus::Infeasible => MBN_SOLVE_INFEASIBLE,
        SolveStatus::NoIncumbent => MBN_SOLVE_NO_INCUMBENT,
    }
}

/// Learns a structure and fits a Laplace-smoothed classifier on it.
/// `options` may be NULL for the defaults and `info` may be NULL. When the
/// time limit expires with a structure in hand the call succeeds and
/// `info->status` says so; without one it returns
/// `MBN_STATUS_NO_INCUMBENT` and leaves `*out` NULL.
///
/// # Safety
/// `ds` must be a live dataset handle, `options` and `info` NULL or valid,
/// and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn mbn_learn(
    ds: *const MbnDataset,
    options: *const MbnLearnOptions,
    out: *mut *mut MbnClassifier,
    info: *mut MbnSolveInfo,
) -> MbnStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        let ds = &deref(ds, "dataset")?.0;
        let mut config = LearnConfig::default();
        if let Some(o) = options.as_ref() {
            config.score = score_kind(o.score)?;
            config.gamma = o.gamma;
            config.max_parents = o.max_parents;
            config.delta = o.delta;
            config.solve = SolveConfig {
                time_limit: o.time_limit,
                gap_tol: o.gap_tol,
                ..SolveConfig::default()
            };
        }
        let learned = learn(ds, &config)?;
        let r = &learned.result;
        if let Some(info) = info.as_mut() {
            *info = MbnSolveInfo {
                status: status_code(r.status),
                objective: r.objective.unwrap_or(f64::NAN),
                upper_bound: r.upper_bound,
                gap_percent: r.gap_percent,
                nodes: r.nodes_explored as u64,
                wall_time: r.wall_time,
            };
        }
        match learned.classifier {
            Some(clf) => {
                *out = Box::into_raw(Box::new(MbnClassifier(clf)));
                Ok(())
            }
            None => Err(Failure(
                MbnStatus::NoIncumbent,
                format!("solver stopped with status {} and no structure", r.status),
            )),
        }
    })
}

/// Most probable class for the `len` feature states (class excluded).
///
/// # Safety
/// `clf` must be a live classifier, `features` must hold `len` entries and
/// `out_class` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mbn_classifier_predict(
    clf: *const MbnClassifier,
    features: *const u32,
    len: usize,
    out_class: *mut usize,
) -> MbnStatus {
    guard(|| {
        let out = out_class.as_mut().ok_or_else(|| null("out_class"))?;
        let clf = &deref(clf, "classifier")?.0;
        let z = slice_arg(features, len, "features")?;
        *out = clf.predict(z)?;
        Ok(())
    })
}

/// Log-margin of a full sample (class first): the log joint of its class
/// minus the best competing one.
///
/// # Safety
/// `clf` must be a live classifier, `sample` must hold `len` entries and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mbn_classifier_margin(
    clf: *const MbnClassifier,
    sample: *const u32,
    len: usize,
    out: *mut f64,
) -> MbnStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let clf = &deref(clf, "classifier")?.0;
        let x = slice_arg(sample, len, "sample")?;
        *out = clf.margin(x)?;
        Ok(())
    })
}

/// Number of variables including the class; 0 for NULL.
///
/// # Safety
/// `clf` must be NULL or a live classifier.
#[no_mangle]
pub unsafe extern "C" fn mbn_classifier_num_vars(clf: *const MbnClassifier) -> usize {
    clf.as_ref().map_or(0, |c| c.0.num_vars())
}

/// Writes up to `cap` parents of `var` into `buf` and their total number to
/// `*out_len`. Call with `cap = 0` to query the size.
///
/// # Safety
/// `clf` must be a live classifier, `buf` must hold `cap` entries and
/// `out_len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mbn_classifier_parents(
    clf: *const MbnClassifier,
    var: usize,
    buf: *mut usize,
    cap: usize,
    out_len: *mut usize,
) -> MbnStatus {
    guard(|| {
        let out_len = out_len.as_mut().ok_or_else(|| null("out_len"))?;
        let clf = &deref(clf, "classifier")?.0;
        let parents = clf
            .structure()
            .parents
            .get(var)
            .ok_or_else(|| invalid(format!("variable {var} out of range")))?;
        *out_len = parents.len();
        let n = parents.len().min(cap);
        if n > 0 {
            if buf.is_null() {
                return Err(null("buf"));
            }
            std::slice::from_raw_parts_mut(buf, n).copy_from_slice(&parents[..n]);
        }
        Ok(())
    })
}

/// Saves the classifier as JSON.
///
/// # Safety
/// `clf` must be a live classifier and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mbn_classifier_save(clf: *const MbnClassifier, path: *const c_char) -> MbnStatus {
    guard(|| {
        let clf = &deref(clf, "classifier")?.0;
        clf.save(path_arg(path)?)?;
        Ok(())
    })
}

/// Loads a classifier saved by [`mbn_classifier_save`] or the CLI.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn mbn_classifier_load(path: *const c_char, out: *mut *mut MbnClassifier) -> MbnStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        let clf = BnClassifier::load(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(MbnClassifier(clf)));
        Ok(())
    })
}

/// # Safety
/// `clf` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mbn_classifier_free(clf: *mut MbnClassifier) {
    if !clf.is_null() {
        drop(Box::from_raw(clf));
    }
}
