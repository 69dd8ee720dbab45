// SPDX-License-Identifier: MIT OR Apache-2.0

//! C ABI over `sepp-cpd`.
//!
//! Series and reports are opaque handles owned by the caller and released
//! with the matching `*_free` function. Every fallible call returns a
//! [`SeppStatus`]; the message of the most recent failure on the calling
//! thread is available from [`sepp_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use sepp_cpd::detect::{default_tuning, DetectOptions, DetectionReport, Detector};
use sepp_cpd::glm::SolverOptions;
use sepp_cpd::metrics;
use sepp_cpd::sim::{setting_a, setting_b, setting_c};
use sepp_cpd::{Error, EventSeries, ModelConfig, Source};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeppStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Parse = 3,
    Numerical = 4,
    Io = 5,
    Panic = 6,
}

/// Opaque count series.
pub struct SeppSeries(EventSeries);

/// Opaque detection result.
pub struct SeppReport(DetectionReport);

/// Intercept `v` and clipping threshold of the model.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SeppModel {
    pub intercept: f64,
    pub clip: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SeppDetectParams {
    pub lambda: f64,
    pub gamma: f64,
    pub min_segment: usize,
    pub grid: usize,
    pub warm_start: bool,
    pub tol: f64,
    pub max_iter: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> SeppStatus {
    match err {
        Error::Parse { .. } | Error::Json(_) => SeppStatus::Parse,
        Error::Numerical(_) => SeppStatus::Numerical,
        Error::Io(_) => SeppStatus::Io,
        _ => SeppStatus::InvalidInput,
    }
}

fn guard(f: impl FnOnce() -> Result<(), SeppStatus>) -> SeppStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SeppStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic".into());
            SeppStatus::Panic
        }
    }
}

fn fail(err: Error) -> SeppStatus {
    let status = status_of(&err);
    set_error(err.to_string());
    status
}

fn null(what: &str) -> SeppStatus {
    set_error(format!("{what} is null"));
    SeppStatus::NullPointer
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sepp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sepp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a series from `dim * len` time-major counts.
///
/// # Safety
/// `counts` must point to `dim * len` readable values and `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn sepp_series_new(
    counts: *const u32,
    dim: usize,
    len: usize,
    out: *mut *mut SeppSeries,
) -> SeppStatus {
    guard(|| {
        if counts.is_null() {
            return Err(null("counts"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let n = dim
            .checked_mul(len)
            .ok_or_else(|| fail(Error::invalid("dim * len overflows")))?;
        let data = std::slice::from_raw_parts(counts, n).to_vec();
        let series = EventSeries::from_time_major(dim, len, data, Source::ingested(None)).map_err(fail)?;
        *out = Box::into_raw(Box::new(SeppSeries(series)));
        Ok(())
    })
}

/// Reads a counts CSV with header `t,x1,...,xM`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sepp_series_read_csv(path: *const c_char, out: *mut *mut SeppSeries) -> SeppStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| fail(Error::invalid("path is not UTF-8")))?;
        let series = sepp_cpd::io::read_counts_file(Path::new(path)).map_err(fail)?;
        *out = Box::into_raw(Box::new(SeppSeries(series)));
        Ok(())
    })
}

/// # Safety
/// `series` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sepp_series_dim(series: *const SeppSeries) -> usize {
    series.as_ref().map_or(0, |s| s.0.dim())
}

/// # Safety
/// `series` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sepp_series_len(series: *const SeppSeries) -> usize {
    series.as_ref().map_or(0, |s| s.0.len())
}

/// Copies `X_m(t)` (1-based `m` and `t`) into `out`.
///
/// # Safety
/// `series` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sepp_series_count(
    series: *const SeppSeries,
    m: usize,
    t: usize,
    out: *mut u32,
) -> SeppStatus {
    guard(|| {
        let s = series.as_ref().ok_or_else(|| null("series"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if m == 0 || m > s.0.dim() || t == 0 || t > s.0.len() {
            return Err(fail(Error::invalid(format!("index ({m}, {t}) out of range"))));
        }
        *out = s.0.count(m, t);
        Ok(())
    })
}

/// # Safety
/// `series` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sepp_series_free(series: *mut SeppSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// Simulates benchmark setting `'a'` (parameter rho), `'b'` (T) or `'c'`
/// (M). Writes the model constants and up to `truth_cap` true change
/// points; `truth_len` receives their total number.
///
/// # Safety
/// `out_series`, `out_model` and `truth_len` must be writable; `truth` must
/// hold `truth_cap` values or be null with `truth_cap == 0`.
#[no_mangle]
pub unsafe extern "C" fn sepp_simulate_setting(
    setting: c_char,
    parameter: f64,
    seed: u64,
    out_series: *mut *mut SeppSeries,
    out_model: *mut SeppModel,
    truth: *mut usize,
    truth_cap: usize,
    truth_len: *mut usize,
) -> SeppStatus {
    guard(|| {
        if out_series.is_null() || out_model.is_null() || truth_len.is_null() {
            return Err(null("output pointer"));
        }
        if truth.is_null() && truth_cap > 0 {
            return Err(null("truth"));
        }
        let count = || {
            if parameter.fract() == 0.0 && parameter >= 1.0 {
                Ok(parameter as usize)
            } else {
                Err(Error::invalid(format!("{parameter} is not a positive integer")))
            }
        };
        let scenario = match setting as u8 {
            b'a' => setting_a(parameter),
            b'b' => count().and_then(setting_b),
            b'c' => count().and_then(setting_c),
            other => Err(Error::invalid(format!("unknown setting `{}`", other as char))),
        }
        .map_err(fail)?;
        let series = scenario.simulate(seed).map_err(fail)?;
        let points = scenario.seq.change_points();
        for (i, &p) in points.iter().take(truth_cap).enumerate() {
            *truth.add(i) = p;
        }
        *truth_len = points.len();
        *out_model = SeppModel {
            intercept: scenario.config.intercept,
            clip: scenario.config.clip,
        };
        *out_series = Box::into_raw(Box::new(SeppSeries(series)));
        Ok(())
    })
}

/// Default parameters for a `len x dim` series: `lambda = 90 ln(T M)` and
/// `gamma = ln(M)^2 / 2`.
#[no_mangle]
pub extern "C" fn sepp_detect_params_default(len: usize, dim: usize) -> SeppDetectParams {
    let (lambda, gamma) = default_tuning(len, dim);
    let base = DetectOptions::new(lambda, gamma);
    SeppDetectParams {
        lambda,
        gamma,
        min_segment: base.min_segment,
        grid: base.grid,
        warm_start: base.warm_start,
        tol: base.solver.tol,
        max_iter: base.solver.max_iter,
    }
}

/// Runs the dynamic program. `params` may be null for the defaults.
///
/// # Safety
/// `series` must be a live handle, `params` null or readable, `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn sepp_detect(
    series: *const SeppSeries,
    model: SeppModel,
    params: *const SeppDetectParams,
    out: *mut *mut SeppReport,
) -> SeppStatus {
    guard(|| {
        let s = series.as_ref().ok_or_else(|| null("series"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let p = params
            .as_ref()
            .copied()
            .unwrap_or_else(|| sepp_detect_params_default(s.0.len(), s.0.dim()));
        let config = ModelConfig::new(model.intercept, model.clip).map_err(fail)?;
        let mut opts = DetectOptions::new(p.lambda, p.gamma);
        opts.min_segment = p.min_segment;
        opts.grid = p.grid;
        opts.warm_start = p.warm_start;
        opts.solver = SolverOptions {
            tol: p.tol,
            max_iter: p.max_iter,
            ..SolverOptions::default()
        };
        let report = Detector::new(&s.0, &config, opts)
            .and_then(|d| d.detect())
            .map_err(fail)?;
        *out = Box::into_raw(Box::new(SeppReport(report)));
        Ok(())
    })
}

/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sepp_report_num_change_points(report: *const SeppReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.change_points.len())
}

/// Copies up to `cap` change points into `buf` and returns their total
/// number.
///
/// # Safety
/// `report` must be null or a live handle; `buf` must hold `cap` values.
#[no_mangle]
pub unsafe extern "C" fn sepp_report_change_points(report: *const SeppReport, buf: *mut usize, cap: usize) -> usize {
    let Some(r) = report.as_ref() else { return 0 };
    let points = r.0.change_points.points();
    if !buf.is_null() {
        for (i, &p) in points.iter().take(cap).enumerate() {
            *buf.add(i) = p;
        }
    }
    points.len()
}

/// Objective of the reported partition, or NaN for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sepp_report_objective(report: *const SeppReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.0.total_objective)
}

/// The report as JSON; release with [`sepp_string_free`]. Null on failure.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sepp_report_to_json(report: *const SeppReport) -> *mut c_char {
    let Some(r) = report.as_ref() else {
        null("report");
        return ptr::null_mut();
    };
    match serde_json::to_string(&r.0) {
        Ok(s) => CString::new(s).map_or(ptr::null_mut(), CString::into_raw),
        Err(e) => {
            fail(Error::from(e));
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sepp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sepp_report_free(report: *mut SeppReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Hausdorff distance between two change-point sets on `[1, len]`. One
/// empty set gives `len` with `flag` set; two empty sets give 0.
///
/// # Safety
/// `a` and `b` must hold `na` and `nb` values (either may be null when its
/// length is 0); `value` and `flag` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sepp_hausdorff(
    a: *const usize,
    na: usize,
    b: *const usize,
    nb: usize,
    len: usize,
    value: *mut u64,
    flag: *mut bool,
) -> SeppStatus {
    guard(|| {
        if value.is_null() || flag.is_null() {
            return Err(null("output pointer"));
        }
        let slice = |p: *const usize, n: usize| {
            if n == 0 {
                Ok(&[][..])
            } else if p.is_null() {
                Err(null("set"))
            } else {
                Ok(std::slice::from_raw_parts(p, n))
            }
        };
        let h = metrics::hausdorff(slice(a, na)?, slice(b, nb)?, len);
        *value = h.value;
        *flag = h.empty_flag;
        Ok(())
    })
}
