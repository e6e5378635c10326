//! C ABI for the `interreflect` estimator.
//!
//! Every fallible function returns an [`IrStatus`]. On failure a message is
//! stored per thread and can be read with [`ir_last_error_message`] until the
//! next failing call on that thread. Handles returned through out-pointers are
//! owned by the caller and must be released with the matching `_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use interreflect::image::{estimate_scene, load_image, SceneAnnotation, SceneReport};
use interreflect::simulation::summarize_errors;
use interreflect::{
    angular_error, estimate_from_observations, estimate_pure, Error, EstimateReport,
    InterreflectionObservation, Method, RgbColor, SolverOptions, Tolerances,
};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DarkChannel = 3,
    DegenerateLine = 4,
    ParallelLines = 5,
    Unphysical = 6,
    InsufficientData = 7,
    Io = 8,
    InvalidImage = 9,
    InvalidAnnotation = 10,
    PatchUnusable = 11,
    NotAvailable = 12,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IrMethod {
    Pure = 0,
    Gm = 1,
    Ls = 2,
}

impl From<IrMethod> for Method {
    fn from(m: IrMethod) -> Self {
        match m {
            IrMethod::Pure => Method::Pure,
            IrMethod::Gm => Method::Gm,
            IrMethod::Ls => Method::Ls,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IrRgb {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl From<IrRgb> for RgbColor {
    fn from(c: IrRgb) -> Self {
        RgbColor::new(c.r, c.g, c.b)
    }
}

impl From<RgbColor> for IrRgb {
    fn from(c: RgbColor) -> Self {
        IrRgb {
            r: c.r,
            g: c.g,
            b: c.b,
        }
    }
}

/// Two direct measurements and the mixed measurement of one interreflection.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IrObservation {
    pub direct_r1: IrRgb,
    pub direct_r2: IrRgb,
    pub mixed: IrRgb,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IrTolerances {
    pub channel: f64,
    pub points: f64,
    pub parallel: f64,
    pub condition_warn: f64,
    pub condition_error: f64,
}

/// Summary statistics of angular errors in degrees.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IrStats {
    pub mean: f64,
    pub median: f64,
    pub trimean: f64,
    pub best25: f64,
    pub worst25: f64,
    pub p95: f64,
    pub max: f64,
    pub min: f64,
}

/// Estimation settings: method, tolerances and solver options.
pub struct IrEstimator {
    method: Method,
    tol: Tolerances,
    opts: SolverOptions,
}

enum ReportInner {
    Lines(EstimateReport),
    Scene(SceneReport),
}

/// Result of a color-line or scene estimate.
pub struct IrReport {
    inner: ReportInner,
}

impl IrReport {
    fn estimate(&self) -> &EstimateReport {
        match &self.inner {
            ReportInner::Lines(e) => e,
            ReportInner::Scene(s) => &s.estimate,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> IrStatus {
    match e {
        Error::DarkChannel { .. } | Error::ZeroVector => IrStatus::DarkChannel,
        Error::DegenerateLine => IrStatus::DegenerateLine,
        Error::ParallelLines => IrStatus::ParallelLines,
        Error::UnphysicalChromaticity { .. } => IrStatus::Unphysical,
        Error::InsufficientObservations(_)
        | Error::InsufficientInterreflections { .. }
        | Error::EmptySamples => IrStatus::InsufficientData,
        Error::Io { .. } => IrStatus::Io,
        Error::UnsupportedFormat(_)
        | Error::TruncatedImage(_)
        | Error::UnsupportedMaxval(_)
        | Error::InvalidImage(_) => IrStatus::InvalidImage,
        Error::MissingPatch(_) | Error::InvalidAnnotation(_) | Error::Json(_) => {
            IrStatus::InvalidAnnotation
        }
        Error::PatchOutOfBounds(_) | Error::PatchSaturated { .. } => IrStatus::PatchUnusable,
        _ => IrStatus::InvalidArgument,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (IrStatus, String)>) -> IrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IrStatus::Ok,
        Ok(Err((status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            IrStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (IrStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (IrStatus, String) {
    (IrStatus::NullPointer, format!("null pointer: {what}"))
}

fn settings(est: *const IrEstimator) -> IrEstimator {
    // SAFETY: callers pass either null or a pointer from `ir_estimator_new`.
    match unsafe { est.as_ref() } {
        Some(e) => IrEstimator { ..*e },
        None => IrEstimator {
            method: Method::Gm,
            tol: Tolerances::default(),
            opts: SolverOptions::default(),
        },
    }
}

fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, (IrStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: non-null and documented as a NUL-terminated string.
    let s = unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| (IrStatus::InvalidArgument, format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

/// Message of the last failing call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ir_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Creates an estimator with default tolerances and solver options.
#[no_mangle]
pub extern "C" fn ir_estimator_new(method: IrMethod) -> *mut IrEstimator {
    Box::into_raw(Box::new(IrEstimator {
        method: method.into(),
        tol: Tolerances::default(),
        opts: SolverOptions::default(),
    }))
}

/// # Safety
/// `est` must be null or come from [`ir_estimator_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ir_estimator_free(est: *mut IrEstimator) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}

/// Default tolerances.
#[no_mangle]
pub extern "C" fn ir_tolerances_default() -> IrTolerances {
    let t = Tolerances::default();
    IrTolerances {
        channel: t.channel,
        points: t.points,
        parallel: t.parallel,
        condition_warn: t.condition_warn,
        condition_error: t.condition_error,
    }
}

/// # Safety
/// `est` must be a live estimator handle.
#[no_mangle]
pub unsafe extern "C" fn ir_estimator_set_tolerances(
    est: *mut IrEstimator,
    tol: IrTolerances,
) -> IrStatus {
    guard(|| {
        let est = est.as_mut().ok_or_else(|| null("estimator"))?;
        let v = [
            tol.channel,
            tol.points,
            tol.parallel,
            tol.condition_warn,
            tol.condition_error,
        ];
        if v.iter().any(|x| *x <= 0.0 || !x.is_finite()) {
            return Err((
                IrStatus::InvalidArgument,
                "tolerances must be positive and finite".into(),
            ));
        }
        est.tol = Tolerances {
            channel: tol.channel,
            points: tol.points,
            parallel: tol.parallel,
            condition_warn: tol.condition_warn,
            condition_error: tol.condition_error,
        };
        Ok(())
    })
}

/// # Safety
/// `est` must be a live estimator handle.
#[no_mangle]
pub unsafe extern "C" fn ir_estimator_set_solver(
    est: *mut IrEstimator,
    epsilon_irls: f64,
    step_tolerance: f64,
    max_iterations: usize,
) -> IrStatus {
    guard(|| {
        let est = est.as_mut().ok_or_else(|| null("estimator"))?;
        let opts = SolverOptions {
            epsilon_irls,
            step_tolerance,
            max_iterations,
        };
        opts.validate().map_err(lib_err)?;
        est.opts = opts;
        Ok(())
    })
}

/// Unit illuminant from a pure interreflection `c12` between surfaces seen
/// directly as `c1` and `c2`. `est` may be null for default tolerances.
///
/// # Safety
/// `est` must be null or live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ir_estimate_pure(
    est: *const IrEstimator,
    c1: IrRgb,
    c2: IrRgb,
    c12: IrRgb,
    out: *mut IrRgb,
) -> IrStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let s = settings(est);
        let l = estimate_pure(c1.into(), c2.into(), c12.into(), &s.tol).map_err(lib_err)?;
        *out = l.into();
        Ok(())
    })
}

/// Intersects the color lines of `count` observations with the estimator's
/// method (gm or ls). `est` may be null for geometric median with defaults.
///
/// # Safety
/// `observations` must point to `count` readable elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ir_estimate_observations(
    est: *const IrEstimator,
    observations: *const IrObservation,
    count: usize,
    out: *mut *mut IrReport,
) -> IrStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if observations.is_null() && count > 0 {
            return Err(null("observations"));
        }
        let obs: Vec<InterreflectionObservation> = if count == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(observations, count)
                .iter()
                .map(|o| {
                    InterreflectionObservation::new(
                        o.direct_r1.into(),
                        o.direct_r2.into(),
                        o.mixed.into(),
                    )
                })
                .collect()
        };
        let s = settings(est);
        let report =
            estimate_from_observations(&obs, s.method, &s.opts, &s.tol).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(IrReport {
            inner: ReportInner::Lines(report),
        }));
        Ok(())
    })
}

/// Estimates the illuminant of an annotated image. `image_path` may be null to
/// use the image named in the annotation.
///
/// # Safety
/// Paths must be null or NUL-terminated UTF-8; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ir_estimate_scene_files(
    est: *const IrEstimator,
    annotation_path: *const c_char,
    image_path: *const c_char,
    out: *mut *mut IrReport,
) -> IrStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let ann_path = path_arg(annotation_path, "annotation_path")?;
        let annotation = SceneAnnotation::load(&ann_path).map_err(lib_err)?;
        let img_path = if image_path.is_null() {
            annotation.image.clone()
        } else {
            path_arg(image_path, "image_path")?
        };
        let image = load_image(&img_path).map_err(lib_err)?;
        let s = settings(est);
        let report =
            estimate_scene(&image, &annotation, s.method, &s.opts, &s.tol).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(IrReport {
            inner: ReportInner::Scene(report),
        }));
        Ok(())
    })
}

/// # Safety
/// `report` must be null or come from an estimate call and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ir_report_free(report: *mut IrReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `report` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ir_report_illuminant(
    report: *const IrReport,
    out: *mut IrRgb,
) -> IrStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = r.estimate().illuminant.into();
        Ok(())
    })
}

/// Intersection point `(r, g)` in the chromaticity chart.
///
/// # Safety
/// `report` must be live; `r` and `g` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ir_report_intersection(
    report: *const IrReport,
    r: *mut f64,
    g: *mut f64,
) -> IrStatus {
    guard(|| {
        let rep = report.as_ref().ok_or_else(|| null("report"))?;
        let p = rep.estimate().intersection.ok_or((
            IrStatus::NotAvailable,
            "report has no intersection".to_string(),
        ))?;
        *r.as_mut().ok_or_else(|| null("r"))? = p.r;
        *g.as_mut().ok_or_else(|| null("g"))? = p.g;
        Ok(())
    })
}

/// Number of color lines, which is also the residual count. Zero for null.
///
/// # Safety
/// `report` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn ir_report_line_count(report: *const IrReport) -> usize {
    report
        .as_ref()
        .map_or(0, |r| r.estimate().per_line_residuals.len())
}

/// Copies up to `len` per-line residuals into `buf`.
///
/// # Safety
/// `report` must be live; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ir_report_residuals(
    report: *const IrReport,
    buf: *mut f64,
    len: usize,
) -> IrStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        let res = &r.estimate().per_line_residuals;
        let n = res.len().min(len);
        if n > 0 {
            if buf.is_null() {
                return Err(null("buf"));
            }
            std::slice::from_raw_parts_mut(buf, n).copy_from_slice(&res[..n]);
        }
        Ok(())
    })
}

/// Solver iterations; zero for null.
///
/// # Safety
/// `report` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn ir_report_iterations(report: *const IrReport) -> usize {
    report.as_ref().map_or(0, |r| r.estimate().iterations)
}

/// Number of warnings attached to the estimate.
///
/// # Safety
/// `report` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn ir_report_warning_count(report: *const IrReport) -> usize {
    report.as_ref().map_or(0, |r| r.estimate().warnings.len())
}

/// Angular error against the gray card, for scene reports that have one.
///
/// # Safety
/// `report` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ir_report_angular_error(
    report: *const IrReport,
    out: *mut f64,
) -> IrStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        let e = match &r.inner {
            ReportInner::Scene(s) => s.angular_error_deg,
            ReportInner::Lines(_) => None,
        };
        *out.as_mut().ok_or_else(|| null("out"))? = e.ok_or((
            IrStatus::NotAvailable,
            "report has no gray-card ground truth".to_string(),
        ))?;
        Ok(())
    })
}

/// The report as JSON. Release the string with [`ir_string_free`]. Null on failure.
///
/// # Safety
/// `report` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn ir_report_to_json(report: *const IrReport) -> *mut c_char {
    let mut text = None;
    let status = guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        let json = match &r.inner {
            ReportInner::Lines(e) => serde_json::to_string_pretty(e),
            ReportInner::Scene(s) => serde_json::to_string_pretty(s),
        }
        .map_err(|e| (IrStatus::InvalidArgument, e.to_string()))?;
        text = CString::new(json).ok();
        Ok(())
    });
    match (status, text) {
        (IrStatus::Ok, Some(s)) => s.into_raw(),
        _ => ptr::null_mut(),
    }
}

/// # Safety
/// `s` must be null or come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ir_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Angle in degrees between two RGB directions.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ir_angular_error(a: IrRgb, b: IrRgb, out: *mut f64) -> IrStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = angular_error(a.into(), b.into())
            .map_err(lib_err)?
            .degrees();
        Ok(())
    })
}

/// Summary statistics of `count` angular errors.
///
/// # Safety
/// `errors` must point to `count` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ir_summarize_errors(
    errors: *const f64,
    count: usize,
    out: *mut IrStats,
) -> IrStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if errors.is_null() && count > 0 {
            return Err(null("errors"));
        }
        let v = if count == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(errors, count)
        };
        let s = summarize_errors(v).map_err(lib_err)?;
        *out = IrStats {
            mean: s.mean,
            median: s.median,
            trimean: s.trimean,
            best25: s.best25,
            worst25: s.worst25,
            p95: s.p95,
            max: s.max,
            min: s.min,
        };
        Ok(())
    })
}
