//! C ABI over `qpmap-core`: scan configuration and grid handles, single-point
//! diagnostics, and the first reducibility bound.
//!
//! Every fallible function returns a [`QpmapStatus`] and writes results
//! through out-pointers. Handles are opaque and owned by the caller once
//! returned; release them with the matching `_free` function. On failure the
//! message of the last error on the calling thread is available from
//! [`qpmap_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use qpmap_core::diagnostics::{diagnose, lyapunov_limit, ClassLabel};
use qpmap_core::scan::{run_scan, ScanConfig, ScanGrid};
use qpmap_core::{critical, Error, FlmParams, OrbitState};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QpmapStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Diverged = 4,
    NoConvergence = 5,
    Domain = 6,
    Io = 7,
    Panic = 8,
    Other = 9,
}

/// Class of a grid cell. `Error` marks a cell whose evaluation failed.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QpmapClass {
    Error = -1,
    Diverged = 0,
    Chaotic = 1,
    NonReducibleCurve = 2,
    ReducibleCurve = 3,
    ZeroLyapunov = 4,
}

impl From<Option<ClassLabel>> for QpmapClass {
    fn from(c: Option<ClassLabel>) -> Self {
        match c {
            None => QpmapClass::Error,
            Some(ClassLabel::Diverged) => QpmapClass::Diverged,
            Some(ClassLabel::Chaotic) => QpmapClass::Chaotic,
            Some(ClassLabel::NonReducibleCurve) => QpmapClass::NonReducibleCurve,
            Some(ClassLabel::ReducibleCurve) => QpmapClass::ReducibleCurve,
            Some(ClassLabel::ZeroLyapunov) => QpmapClass::ZeroLyapunov,
        }
    }
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QpmapCell {
    pub x: f64,
    pub y: f64,
    pub label: QpmapClass,
    pub lyapunov: f64,
    /// Power of two, 0 when undetected.
    pub period: u32,
    pub min_abs_dxf: f64,
}

/// Opaque scan configuration.
pub struct QpmapConfig(ScanConfig);

/// Opaque result of a scan.
pub struct QpmapGrid(ScanGrid);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> QpmapStatus {
    match e {
        Error::Config(_) => QpmapStatus::Config,
        Error::DivergedOrbit { .. } => QpmapStatus::Diverged,
        Error::NoConvergence { .. } | Error::QuadratureNonConvergent { .. } | Error::SingularJacobian => {
            QpmapStatus::NoConvergence
        }
        Error::Domain(_) | Error::NotReducible | Error::NoTangencyInRange { .. } => QpmapStatus::Domain,
        Error::Io(_) | Error::MissingArtifact(_) => QpmapStatus::Io,
        _ => QpmapStatus::Other,
    }
}

/// Run `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), (QpmapStatus, String)>) -> QpmapStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QpmapStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&msg);
            QpmapStatus::Panic
        }
    }
}

fn core(e: Error) -> (QpmapStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (QpmapStatus, String) {
    (QpmapStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (QpmapStatus, String) {
    (QpmapStatus::InvalidArgument, msg.into())
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (QpmapStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not utf-8")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (QpmapStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Library version, a static nul-terminated string.
#[no_mangle]
pub extern "C" fn qpmap_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread; empty if none. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qpmap_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Default configuration, or a named window when `preset` is non-null.
///
/// # Safety
/// `preset` is null or a nul-terminated string; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qpmap_config_new(preset: *const c_char, out: *mut *mut QpmapConfig) -> QpmapStatus {
    guard(|| {
        let slot = out_ptr(out)?;
        let cfg = if preset.is_null() {
            ScanConfig::default()
        } else {
            ScanConfig::preset(c_str(preset, "preset")?).map_err(core)?
        };
        *slot = Box::into_raw(Box::new(QpmapConfig(cfg)));
        Ok(())
    })
}

unsafe fn out_ptr<'a, T>(p: *mut *mut T) -> Result<&'a mut *mut T, (QpmapStatus, String)> {
    let slot = out(p, "out")?;
    *slot = ptr::null_mut();
    Ok(slot)
}

/// Configuration parsed from sectioned `key = value` text.
///
/// # Safety
/// `text` is a nul-terminated string; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qpmap_config_parse(text: *const c_char, out: *mut *mut QpmapConfig) -> QpmapStatus {
    guard(|| {
        let slot = out_ptr(out)?;
        let cfg = ScanConfig::parse(c_str(text, "text")?).map_err(core)?;
        *slot = Box::into_raw(Box::new(QpmapConfig(cfg)));
        Ok(())
    })
}

/// Set one field by key, e.g. `x_steps` or `orders`.
///
/// # Safety
/// `cfg` is a live handle; `key` and `value` are nul-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn qpmap_config_set(
    cfg: *mut QpmapConfig,
    key: *const c_char,
    value: *const c_char,
) -> QpmapStatus {
    guard(|| {
        let cfg = out(cfg, "cfg")?;
        cfg.0
            .set(c_str(key, "key")?, c_str(value, "value")?)
            .map_err(core)
    })
}

/// Rendered configuration text. Free with [`qpmap_string_free`].
///
/// # Safety
/// `cfg` is a live handle; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qpmap_config_render(cfg: *const QpmapConfig, out: *mut *mut c_char) -> QpmapStatus {
    guard(|| {
        let slot = out_ptr(out)?;
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        *slot = CString::new(cfg.0.render())
            .map_err(|_| invalid("config contains a nul byte"))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `cfg` is null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qpmap_config_free(cfg: *mut QpmapConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// # Safety
/// `s` is null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qpmap_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Classify every cell of the configured grid. Per-cell failures are
/// recorded in the cells and do not fail the call.
///
/// # Safety
/// `cfg` is a live handle; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qpmap_scan_run(cfg: *const QpmapConfig, out: *mut *mut QpmapGrid) -> QpmapStatus {
    guard(|| {
        let slot = out_ptr(out)?;
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        let grid = run_scan(&cfg.0).map_err(core)?;
        *slot = Box::into_raw(Box::new(QpmapGrid(grid)));
        Ok(())
    })
}

/// Grid dimensions and number of errored cells.
///
/// # Safety
/// `grid` is a live handle; the out-pointers are valid.
#[no_mangle]
pub unsafe extern "C" fn qpmap_grid_shape(
    grid: *const QpmapGrid,
    x_steps: *mut usize,
    y_steps: *mut usize,
    errored: *mut usize,
) -> QpmapStatus {
    guard(|| {
        let g = &grid.as_ref().ok_or_else(|| null("grid"))?.0;
        *out(x_steps, "x_steps")? = g.config.x_steps;
        *out(y_steps, "y_steps")? = g.config.y_steps;
        *out(errored, "errored")? = g.errored();
        Ok(())
    })
}

/// # Safety
/// `grid` is a live handle; `cell` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qpmap_grid_cell(
    grid: *const QpmapGrid,
    ix: usize,
    iy: usize,
    cell: *mut QpmapCell,
) -> QpmapStatus {
    guard(|| {
        let g = &grid.as_ref().ok_or_else(|| null("grid"))?.0;
        let dst = out(cell, "cell")?;
        if ix >= g.config.x_steps || iy >= g.config.y_steps {
            return Err(invalid(format!(
                "cell ({ix}, {iy}) outside {}x{}",
                g.config.x_steps, g.config.y_steps
            )));
        }
        let c = g.cell(ix, iy);
        *dst = QpmapCell {
            x: c.x,
            y: c.y,
            label: c.class.into(),
            lyapunov: c.lyapunov,
            period: c.period as u32,
            min_abs_dxf: c.min_abs_dxf,
        };
        Ok(())
    })
}

/// Write the grid CSV to `path`.
///
/// # Safety
/// `grid` is a live handle; `path` is a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn qpmap_grid_write_csv(grid: *const QpmapGrid, path: *const c_char) -> QpmapStatus {
    guard(|| {
        let g = &grid.as_ref().ok_or_else(|| null("grid"))?.0;
        let path = Path::new(c_str(path, "path")?);
        qpmap_core::scan::write_file(path, |w| g.write_csv(w))
            .map(|_| ())
            .map_err(core)
    })
}

/// # Safety
/// `grid` is null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qpmap_grid_free(grid: *mut QpmapGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Classify the forced logistic map attractor at one parameter point with
/// default diagnostics, seeded at `(0, 1/2)`.
///
/// # Safety
/// `cell` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qpmap_flm_classify(alpha: f64, epsilon: f64, cell: *mut QpmapCell) -> QpmapStatus {
    guard(|| {
        let dst = out(cell, "cell")?;
        if !(alpha.is_finite() && epsilon.is_finite()) {
            return Err(invalid("parameters must be finite"));
        }
        let cfg = ScanConfig::default();
        let dcfg = cfg.diagnostics();
        let d = diagnose(&FlmParams::new(alpha, epsilon), &dcfg);
        *dst = QpmapCell {
            x: alpha,
            y: epsilon,
            label: Some(qpmap_core::diagnostics::classify(&d, dcfg.zero_tol)).into(),
            lyapunov: d.lyapunov.value,
            period: d.period as u32,
            min_abs_dxf: d.min_abs_fiber_derivative,
        };
        Ok(())
    })
}

/// Lyapunov exponent of the forced logistic map along the orbit of
/// `(theta, x)` after `transient` iterates.
///
/// # Safety
/// `out_value` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qpmap_flm_lyapunov(
    alpha: f64,
    epsilon: f64,
    theta: f64,
    x: f64,
    transient: u64,
    out_value: *mut f64,
) -> QpmapStatus {
    guard(|| {
        let dst = out(out_value, "out_value")?;
        if !(alpha.is_finite() && epsilon.is_finite() && theta.is_finite() && x.is_finite()) {
            return Err(invalid("arguments must be finite"));
        }
        let d = ScanConfig::default().diagnostics();
        let est = lyapunov_limit(
            &FlmParams::new(alpha, epsilon),
            OrbitState::new(theta, x),
            transient,
            d.lyapunov_tol,
            d.lyapunov_max,
        )
        .map_err(core)?;
        *dst = est.value;
        Ok(())
    })
}

/// `1 − 2/α`, defined for `α > 2`.
///
/// # Safety
/// `out_value` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qpmap_first_bound(alpha: f64, out_value: *mut f64) -> QpmapStatus {
    guard(|| {
        let dst = out(out_value, "out_value")?;
        *dst = critical::first_bound(alpha).map_err(core)?;
        Ok(())
    })
}
