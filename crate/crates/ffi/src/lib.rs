//! C ABI over the `pipeleak` core.
//!
//! Every fallible function returns a [`PlStatus`]; on failure the message is
//! available from [`pl_last_error`] on the same thread. Handles are opaque and
//! must be released with their matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use pipeleak::dataio::FeatureMatrix;
use pipeleak::detect::{self, DetectorConfig, DetectorState, Sample};
use pipeleak::gasprops::{self, GasState, PseudoReduced};
use pipeleak::models::RegressorModel;
use pipeleak::simulate;
use pipeleak::Error;

/// Number of raw feature columns expected by [`pl_model_predict`]: inlet
/// pressure, outlet pressure, inlet temperature, outlet temperature.
pub const PL_FEATURES: usize = 4;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    InsufficientData = 4,
    Io = 5,
    Format = 6,
    Panic = 7,
}

/// Trained flow observer.
pub struct PlModel {
    inner: RegressorModel,
}

/// Streaming detector with its configuration.
pub struct PlDetector {
    cfg: DetectorConfig,
    state: DetectorState,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlDetectorConfig {
    pub threshold: f64,
    pub window: usize,
    pub index_trip: f64,
    pub persistence: usize,
    pub onset_index: usize,
    pub cadence_minutes: f64,
    pub accounting_offset: usize,
}

impl From<DetectorConfig> for PlDetectorConfig {
    fn from(c: DetectorConfig) -> Self {
        Self {
            threshold: c.threshold,
            window: c.window,
            index_trip: c.index_trip,
            persistence: c.persistence,
            onset_index: c.onset_index,
            cadence_minutes: c.cadence_minutes,
            accounting_offset: c.accounting_offset,
        }
    }
}

impl From<PlDetectorConfig> for DetectorConfig {
    fn from(c: PlDetectorConfig) -> Self {
        Self {
            threshold: c.threshold,
            window: c.window,
            index_trip: c.index_trip,
            persistence: c.persistence,
            onset_index: c.onset_index,
            cadence_minutes: c.cadence_minutes,
            accounting_offset: c.accounting_offset,
        }
    }
}

/// Result of one detector step.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlStep {
    /// 0 when the sample was skipped as non-finite; the other fields are then zero.
    pub processed: c_int,
    pub residual: f64,
    pub flag: c_int,
    pub index: f64,
    pub counter: usize,
    /// 1 on the step that raises the alarm.
    pub alarm: c_int,
}

/// Alarm details. `location` is NaN when no inlet channel was supplied.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlAlarm {
    pub ordinal: usize,
    pub alarm_ordinal: usize,
    pub minutes_to_detect: f64,
    pub leak_index: f64,
    pub leak_percent: f64,
    pub inlet_pressure: f64,
    pub outlet_pressure: f64,
    pub location: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PlStatus {
    match e {
        Error::Domain(_) | Error::Undefined(_) | Error::Infeasible { .. } => PlStatus::Domain,
        Error::InvalidParameter(_) | Error::WidthMismatch { .. } => PlStatus::InvalidArgument,
        Error::InsufficientData(_) | Error::MissingColumn(_) => PlStatus::InsufficientData,
        Error::Io(_) => PlStatus::Io,
        Error::Format(_) | Error::Json(_) | Error::Csv(_) => PlStatus::Format,
    }
}

/// Runs `f`, mapping errors and panics to a status and recording the message.
fn guard(f: impl FnOnce() -> Result<(), (PlStatus, String)>) -> PlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PlStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            PlStatus::Panic
        }
    }
}

trait IntoFfi<T> {
    fn ffi(self) -> Result<T, (PlStatus, String)>;
}

impl<T> IntoFfi<T> for pipeleak::Result<T> {
    fn ffi(self) -> Result<T, (PlStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn null(what: &str) -> (PlStatus, String) {
    (PlStatus::NullPointer, format!("{what} is null"))
}

unsafe fn write_out<T>(out: *mut T, v: T, what: &str) -> Result<(), (PlStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

unsafe fn c_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, (PlStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|_| (PlStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Standing pseudo-critical temperature (°R) and pressure (psia).
///
/// # Safety
/// `t_pc` and `p_pc` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pl_pseudo_critical(sg: f64, t_pc: *mut f64, p_pc: *mut f64) -> PlStatus {
    guard(|| {
        let pc = gasprops::pseudo_critical(sg).ffi()?;
        write_out(t_pc, pc.t_pc, "t_pc")?;
        write_out(p_pc, pc.p_pc, "p_pc")
    })
}

/// Compressibility factor at `pressure` (psia), `temperature_f` (°F) and gas
/// specific gravity `sg`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pl_z_factor(pressure: f64, temperature_f: f64, sg: f64, out: *mut f64) -> PlStatus {
    guard(|| {
        let pc = gasprops::pseudo_critical(sg).ffi()?;
        let pr = PseudoReduced::from_conditions(pressure, gasprops::fahrenheit_to_rankine(temperature_f), pc);
        let z = gasprops::z_factor(pr).ffi()?;
        write_out(out, z, "out")
    })
}

/// Gas viscosity (cp) at the given field conditions.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pl_gas_viscosity(pressure: f64, temperature_f: f64, sg: f64, out: *mut f64) -> PlStatus {
    guard(|| {
        let state = GasState::from_field_units(pressure, temperature_f, sg).ffi()?;
        write_out(out, gasprops::gas_viscosity(&state).ffi()?, "out")
    })
}

/// Rounded leak flow factor for leak size `q_ld` (fraction of flow) at
/// relative position `l_ld` from the inlet.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pl_leak_factor(q_ld: f64, l_ld: f64, out: *mut f64) -> PlStatus {
    guard(|| write_out(out, simulate::leak_factor(q_ld, l_ld).ffi()?, "out"))
}

/// Leak index for `a` (window exceedances plus one).
#[no_mangle]
pub extern "C" fn pl_leak_index(a: f64) -> f64 {
    detect::leak_index(a)
}

fn finish_model(m: RegressorModel, out: *mut *mut PlModel) -> Result<(), (PlStatus, String)> {
    let h = Box::into_raw(Box::new(PlModel { inner: m }));
    unsafe { write_out(out, h, "out") }.inspect_err(|_| drop(unsafe { Box::from_raw(h) }))
}

/// Loads a model file written by `pipeleak train`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pl_model_load(path: *const c_char, out: *mut *mut PlModel) -> PlStatus {
    guard(|| {
        let p = c_str(path, "path")?;
        finish_model(RegressorModel::load(Path::new(p)).ffi()?, out)
    })
}

/// Parses a model from its JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pl_model_from_json(json: *const c_char, out: *mut *mut PlModel) -> PlStatus {
    guard(|| {
        let s = c_str(json, "json")?;
        finish_model(RegressorModel::from_json(s).ffi()?, out)
    })
}

/// Releases a model. NULL is ignored.
///
/// # Safety
/// `model` must come from a `pl_model_*` constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pl_model_free(model: *mut PlModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Test-set mean absolute error recorded at training time.
///
/// # Safety
/// `model` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pl_model_mae(model: *const PlModel, out: *mut f64) -> PlStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        write_out(out, m.inner.mae(), "out")
    })
}

/// Predicts flow for `n_rows` row-major rows of [`PL_FEATURES`] values each.
///
/// # Safety
/// `rows` must hold `n_rows * PL_FEATURES` doubles and `out` room for `n_rows`.
#[no_mangle]
pub unsafe extern "C" fn pl_model_predict(
    model: *const PlModel,
    rows: *const f64,
    n_rows: usize,
    out: *mut f64,
) -> PlStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if n_rows == 0 {
            return Ok(());
        }
        if rows.is_null() {
            return Err(null("rows"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let len = n_rows
            .checked_mul(PL_FEATURES)
            .ok_or_else(|| (PlStatus::InvalidArgument, "row count overflows".to_string()))?;
        let data = std::slice::from_raw_parts(rows, len).to_vec();
        let names = pipeleak::dataio::FEATURE_COLUMNS.iter().map(|s| s.to_string()).collect();
        let fm = FeatureMatrix::new(names, data).ffi()?;
        let pred = m.inner.predict(&fm).ffi()?;
        std::slice::from_raw_parts_mut(out, n_rows).copy_from_slice(&pred);
        Ok(())
    })
}

/// Default detector configuration for an observer with the given MAE.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pl_detector_config_default(mae: f64, out: *mut PlDetectorConfig) -> PlStatus {
    guard(|| write_out(out, DetectorConfig::for_mae(mae).into(), "out"))
}

/// Creates a detector from a configuration.
///
/// # Safety
/// `cfg` must point to a valid configuration; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pl_detector_new(cfg: *const PlDetectorConfig, out: *mut *mut PlDetector) -> PlStatus {
    guard(|| {
        let cfg: DetectorConfig = (*cfg.as_ref().ok_or_else(|| null("cfg"))?).into();
        cfg.validate().ffi()?;
        let h = Box::into_raw(Box::new(PlDetector { cfg, state: DetectorState::new() }));
        write_out(out, h, "out").inspect_err(|_| drop(Box::from_raw(h)))
    })
}

/// Releases a detector. NULL is ignored.
///
/// # Safety
/// `det` must come from [`pl_detector_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pl_detector_free(det: *mut PlDetector) {
    if !det.is_null() {
        drop(Box::from_raw(det));
    }
}

/// Feeds one sample. Pass NaN for both inlet values when the inlet channel is
/// not monitored.
///
/// # Safety
/// `det` must be a live handle; `step` must be valid for writes.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn pl_detector_step(
    det: *mut PlDetector,
    ordinal: usize,
    observed: f64,
    predicted: f64,
    inlet_pressure: f64,
    outlet_pressure: f64,
    inlet_observed: f64,
    inlet_predicted: f64,
    step: *mut PlStep,
) -> PlStatus {
    guard(|| {
        let d = det.as_mut().ok_or_else(|| null("det"))?;
        if step.is_null() {
            return Err(null("step"));
        }
        let inlet = (inlet_observed.is_finite() && inlet_predicted.is_finite()).then_some((inlet_observed, inlet_predicted));
        let sample = Sample { ordinal, observed, predicted, inlet_pressure, outlet_pressure, inlet };
        let s = match d.state.step(&sample, &d.cfg) {
            Some((rec, fired)) => PlStep {
                processed: 1,
                residual: rec.residual,
                flag: c_int::from(rec.flag),
                index: rec.index,
                counter: rec.counter,
                alarm: c_int::from(fired.is_some()),
            },
            None => PlStep { processed: 0, residual: 0.0, flag: 0, index: 0.0, counter: 0, alarm: 0 },
        };
        write_out(step, s, "step")
    })
}

/// Copies the latched alarm into `out` and sets `*raised` to 1, or sets
/// `*raised` to 0 when no alarm has fired.
///
/// # Safety
/// `det` must be a live handle; `raised` and `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pl_detector_alarm(det: *const PlDetector, raised: *mut c_int, out: *mut PlAlarm) -> PlStatus {
    guard(|| {
        let d = det.as_ref().ok_or_else(|| null("det"))?;
        match d.state.alarm() {
            Some(a) => {
                let v = PlAlarm {
                    ordinal: a.ordinal,
                    alarm_ordinal: a.alarm_ordinal,
                    minutes_to_detect: a.minutes_to_detect,
                    leak_index: a.leak_index,
                    leak_percent: a.leak_percent,
                    inlet_pressure: a.inlet_pressure,
                    outlet_pressure: a.outlet_pressure,
                    location: a.location.unwrap_or(f64::NAN),
                };
                write_out(out, v, "out")?;
                write_out(raised, 1, "raised")
            }
            None => write_out(raised, 0, "raised"),
        }
    })
}

/// Clears the detector state, keeping its configuration.
///
/// # Safety
/// `det` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pl_detector_reset(det: *mut PlDetector) -> PlStatus {
    guard(|| {
        det.as_mut().ok_or_else(|| null("det"))?.state.reset();
        Ok(())
    })
}
