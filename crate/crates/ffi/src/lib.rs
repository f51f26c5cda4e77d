//! C ABI for the `ftqkd` simulator.
//!
//! Every function returns an [`FtqkdStatus`] and writes results through out
//! pointers. On failure [`ftqkd_last_error`] describes the most recent error on
//! the calling thread. Handles are opaque and owned by the caller, who
//! releases them with the matching `_free` function. Strings returned by the
//! library are released with [`ftqkd_string_free`]. Panics never cross the
//! boundary; they surface as `FTQKD_STATUS_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use ftqkd::config::{Mode, SessionConfig};
use ftqkd::distillation::{gp_decode, gp_encode};
use ftqkd::security::{
    keyrate_gain, parity_error_exact, qber_bound, qber_curve, security_threshold, variance_chain,
    CurveRow,
};
use ftqkd::session::{run_session, SessionReport};
use ftqkd::units::PhysParams;
use ftqkd::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FtqkdStatus {
    Ok = 0,
    NullPointer = 1,
    /// Argument outside the domain of the function.
    Domain = 2,
    /// Configuration failed to parse or validate.
    Config = 3,
    /// Unparseable quantity string.
    Quantity = 4,
    Misaligned = 5,
    /// Nothing to report, e.g. a session without sifted bits.
    Empty = 6,
    InvalidUtf8 = 7,
    /// Index past the end of a table.
    OutOfRange = 8,
    Panic = 9,
}

/// Detector-limited spreads and the resulting Δ².
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FtqkdVarianceBudget {
    /// RMS timing spread (s).
    pub delta_t: f64,
    /// Position spread (m).
    pub delta_x: f64,
    /// Wavevector spread (rad/m).
    pub delta_k: f64,
    pub delta_sq: f64,
}

/// One row of a QBER curve.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FtqkdCurveRow {
    /// Detector jitter FWHM (s).
    pub jitter_fwhm: f64,
    pub delta_sq: f64,
    /// Upper bound on the QBER.
    pub qber: f64,
    /// Exact parity-error probability.
    pub qber_exact: f64,
    pub keyrate: f64,
}

/// Opaque QBER-versus-jitter table.
pub struct FtqkdCurve(Vec<CurveRow>);

/// Opaque session configuration.
pub struct FtqkdConfig(SessionConfig);

/// Opaque session report.
pub struct FtqkdReport(SessionReport);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(FtqkdStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Domain { .. } => FtqkdStatus::Domain,
            Error::Config { .. } => FtqkdStatus::Config,
            Error::Quantity { .. } => FtqkdStatus::Quantity,
            Error::Misaligned { .. } => FtqkdStatus::Misaligned,
            Error::Empty(_) => FtqkdStatus::Empty,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FtqkdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FtqkdStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_last_error(&format!("panic: {msg}"));
            FtqkdStatus::Panic
        }
    }
}

fn null(name: &str) -> Failure {
    Failure(FtqkdStatus::NullPointer, format!("{name} is null"))
}

unsafe fn write<T>(out: *mut T, name: &str, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

unsafe fn borrow<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn string_arg<'a>(s: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Failure(FtqkdStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).expect("JSON has no interior nul").into_raw()
}

fn phys(wavelength: f64, refractive_index: f64) -> Result<PhysParams, Failure> {
    Ok(PhysParams::new(refractive_index, wavelength)?)
}

/// Message for the most recent failure on this thread, or an empty string.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ftqkd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Release a string returned by this library. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ftqkd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Binary entropy in bits.
#[no_mangle]
pub unsafe extern "C" fn ftqkd_h2(x: f64, out: *mut f64) -> FtqkdStatus {
    guard(|| write(out, "out", ftqkd::security::h2(x)?))
}

/// Key rate per pulse `gain * (1 - f h2(e) - h2(e))`; may be negative.
#[no_mangle]
pub unsafe extern "C" fn ftqkd_keyrate(qber: f64, gain: f64, f: f64, out: *mut f64) -> FtqkdStatus {
    guard(|| write(out, "out", keyrate_gain(gain, qber, f)?))
}

/// Upper bound on the QBER of mod-√π distillation at a given Δ².
#[no_mangle]
pub unsafe extern "C" fn ftqkd_qber_bound(delta_sq: f64, out: *mut f64) -> FtqkdStatus {
    guard(|| write(out, "out", qber_bound(delta_sq)?))
}

/// Exact parity-error probability at a given Δ².
#[no_mangle]
pub unsafe extern "C" fn ftqkd_parity_error_exact(delta_sq: f64, out: *mut f64) -> FtqkdStatus {
    guard(|| write(out, "out", parity_error_exact(delta_sq)?))
}

/// QBER at which the key rate with reconciliation efficiency `f` reaches zero.
#[no_mangle]
pub unsafe extern "C" fn ftqkd_security_threshold(f: f64, out: *mut f64) -> FtqkdStatus {
    guard(|| write(out, "out", security_threshold(f)?))
}

/// Δ² and its factors for a detector jitter (FWHM, s) behind dispersion
/// `d_lambda` (s/m) at `wavelength` (m) in a medium of index `refractive_index`.
#[no_mangle]
pub unsafe extern "C" fn ftqkd_variance_chain(
    jitter_fwhm: f64,
    d_lambda: f64,
    wavelength: f64,
    refractive_index: f64,
    out: *mut FtqkdVarianceBudget,
) -> FtqkdStatus {
    guard(|| {
        let b = variance_chain(jitter_fwhm, d_lambda, &phys(wavelength, refractive_index)?)?;
        write(
            out,
            "out",
            FtqkdVarianceBudget {
                delta_t: b.delta_t,
                delta_x: b.delta_x,
                delta_k: b.delta_k,
                delta_sq: b.delta_sq,
            },
        )
    })
}

/// Alice's side of mod-√π distillation: public remainder and key bit.
#[no_mangle]
pub unsafe extern "C" fn ftqkd_gp_encode(q_a: f64, m: *mut f64, bit: *mut u8) -> FtqkdStatus {
    guard(|| {
        if m.is_null() || bit.is_null() {
            return Err(null("m or bit"));
        }
        if !q_a.is_finite() {
            return Err(Failure(FtqkdStatus::Domain, "q_a must be finite".into()));
        }
        let (rem, b) = gp_encode(q_a);
        m.write(rem);
        bit.write(b);
        Ok(())
    })
}

/// Bob's side of mod-√π distillation.
#[no_mangle]
pub unsafe extern "C" fn ftqkd_gp_decode(q_b: f64, m: f64, bit: *mut u8) -> FtqkdStatus {
    guard(|| {
        if !(q_b.is_finite() && m.is_finite()) {
            return Err(Failure(FtqkdStatus::Domain, "q_b and m must be finite".into()));
        }
        write(bit, "bit", gp_decode(q_b, m))
    })
}

/// Tabulate the QBER bound for `steps` evenly spaced jitters.
#[no_mangle]
pub unsafe extern "C" fn ftqkd_curve_new(
    jitter_min: f64,
    jitter_max: f64,
    steps: usize,
    d_lambda: f64,
    wavelength: f64,
    out: *mut *mut FtqkdCurve,
) -> FtqkdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = PhysParams {
            wavelength,
            ..PhysParams::default()
        };
        let rows = qber_curve(jitter_min, jitter_max, steps, d_lambda, &p)?;
        out.write(Box::into_raw(Box::new(FtqkdCurve(rows))));
        Ok(())
    })
}

/// Number of rows; zero for a null handle.
#[no_mangle]
pub unsafe extern "C" fn ftqkd_curve_len(curve: *const FtqkdCurve) -> usize {
    curve.as_ref().map_or(0, |c| c.0.len())
}

#[no_mangle]
pub unsafe extern "C" fn ftqkd_curve_row(
    curve: *const FtqkdCurve,
    index: usize,
    out: *mut FtqkdCurveRow,
) -> FtqkdStatus {
    guard(|| {
        let curve = borrow(curve, "curve")?;
        let r = curve.0.get(index).ok_or_else(|| {
            Failure(
                FtqkdStatus::OutOfRange,
                format!("row {index} of {}", curve.0.len()),
            )
        })?;
        write(
            out,
            "out",
            FtqkdCurveRow {
                jitter_fwhm: r.jitter_fwhm,
                delta_sq: r.delta_sq,
                qber: r.qber,
                qber_exact: r.qber_exact,
                keyrate: r.keyrate,
            },
        )
    })
}

#[no_mangle]
pub unsafe extern "C" fn ftqkd_curve_free(curve: *mut FtqkdCurve) {
    if !curve.is_null() {
        drop(Box::from_raw(curve));
    }
}

/// Default configuration of a mode: `"pm"`, `"epr"`, `"epr-source-at-alice"`
/// or `"epr-midpoint"`.
#[no_mangle]
pub unsafe extern "C" fn ftqkd_config_default(mode: *const c_char, out: *mut *mut FtqkdConfig) -> FtqkdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let name = string_arg(mode, "mode")?;
        let mode: Mode = serde_json::from_value(serde_json::Value::String(name.to_string()))
            .map_err(|_| Failure(FtqkdStatus::Config, format!("unknown mode `{name}`")))?;
        out.write(Box::into_raw(Box::new(FtqkdConfig(SessionConfig::default_for(mode)))));
        Ok(())
    })
}

/// Parse a JSON configuration; omitted fields take the defaults of its mode.
#[no_mangle]
pub unsafe extern "C" fn ftqkd_config_from_json(json: *const c_char, out: *mut *mut FtqkdConfig) -> FtqkdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = SessionConfig::from_json(string_arg(json, "json")?)?;
        out.write(Box::into_raw(Box::new(FtqkdConfig(cfg))));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ftqkd_config_set_pulses(cfg: *mut FtqkdConfig, pulses: u64) -> FtqkdStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        cfg.0.pulses = pulses;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ftqkd_config_set_seed(cfg: *mut FtqkdConfig, seed: u64) -> FtqkdStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        cfg.0.seed = seed;
        Ok(())
    })
}

/// Full configuration as pretty JSON; release with `ftqkd_string_free`.
#[no_mangle]
pub unsafe extern "C" fn ftqkd_config_to_json(cfg: *const FtqkdConfig, out: *mut *mut c_char) -> FtqkdStatus {
    guard(|| {
        let cfg = borrow(cfg, "cfg")?;
        write(out, "out", into_c_string(cfg.0.to_json_pretty()))
    })
}

#[no_mangle]
pub unsafe extern "C" fn ftqkd_config_free(cfg: *mut FtqkdConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Run a Monte Carlo session.
#[no_mangle]
pub unsafe extern "C" fn ftqkd_run_session(cfg: *const FtqkdConfig, out: *mut *mut FtqkdReport) -> FtqkdStatus {
    guard(|| {
        let cfg = borrow(cfg, "cfg")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let report = run_session(&cfg.0, None)?;
        out.write(Box::into_raw(Box::new(FtqkdReport(report))));
        Ok(())
    })
}

/// Pooled QBER of the test sample; `FTQKD_STATUS_EMPTY` when no bits were sifted.
#[no_mangle]
pub unsafe extern "C" fn ftqkd_report_qber(report: *const FtqkdReport, out: *mut f64) -> FtqkdStatus {
    guard(|| {
        let r = borrow(report, "report")?;
        let q = r.0.qber.as_ref().ok_or(Error::Empty("no sifted bits"))?;
        write(out, "out", q.pooled.value)
    })
}

/// Gain used for the key rate (coincidences or receiver clicks per pulse).
#[no_mangle]
pub unsafe extern "C" fn ftqkd_report_gain(report: *const FtqkdReport, out: *mut f64) -> FtqkdStatus {
    guard(|| write(out, "out", borrow(report, "report")?.0.gain.used))
}

/// Gain-corrected key rate per pulse, clamped at zero.
#[no_mangle]
pub unsafe extern "C" fn ftqkd_report_keyrate(report: *const FtqkdReport, out: *mut f64) -> FtqkdStatus {
    guard(|| write(out, "out", borrow(report, "report")?.0.keyrate.gain_corrected))
}

/// Full report as pretty JSON; release with `ftqkd_string_free`.
#[no_mangle]
pub unsafe extern "C" fn ftqkd_report_to_json(report: *const FtqkdReport, out: *mut *mut c_char) -> FtqkdStatus {
    guard(|| {
        let r = borrow(report, "report")?;
        write(out, "out", into_c_string(r.0.to_json_pretty()))
    })
}

#[no_mangle]
pub unsafe extern "C" fn ftqkd_report_free(report: *mut FtqkdReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
