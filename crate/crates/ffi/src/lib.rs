//! C ABI over `hpar_core`.
//!
//! Every fallible function returns an [`HparStatus`]; on failure a message is
//! available from [`hpar_last_error`] on the same thread. Handles are opaque
//! and must be released with their matching `_free` function. Strings returned
//! through `char **` out-parameters are owned by the caller and released with
//! [`hpar_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hpar_core::cli::{emit_config, parse_config};
use hpar_core::geometry::compute_h;
use hpar_core::identity::{make_pseudonym, NodeId};
use hpar_core::simcore::{run_with, write_trace_jsonl, DropReason, RunOptions, RunOutput, ScenarioConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HparStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Parameter = 4,
    Simulation = 5,
    Panic = 6,
}

/// A parsed, validated scenario.
pub struct HparConfig {
    inner: ScenarioConfig,
}

/// The outputs of one completed run.
pub struct HparRun {
    inner: RunOutput,
}

/// Headline metrics of a run. Rates and means that are undefined for the
/// run (no traffic, nothing delivered) are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HparMetrics {
    pub seed: u64,
    pub packets_sent: u64,
    pub packets_delivered: u64,
    pub packets_failed: u64,
    pub delivery_rate: f64,
    pub mean_latency_s: f64,
    pub transmissions: u64,
    pub hello_transmissions: u64,
    pub participating_nodes: u64,
    pub anonymity_set_mean: f64,
    pub src_ident_rate: f64,
    pub dst_ident_rate: f64,
    pub drops_ttl: u64,
    pub drops_unreachable: u64,
    pub drops_loss: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &hpar_core::Error) -> HparStatus {
    match e {
        hpar_core::Error::Config { .. } => HparStatus::Config,
        hpar_core::Error::Parameter { .. } | hpar_core::Error::Zone(_) => HparStatus::Parameter,
        hpar_core::Error::Scenario(_) => HparStatus::Simulation,
    }
}

/// Runs `f`, recording its error message and converting panics.
fn guard<F: FnOnce() -> Result<(), (HparStatus, String)>>(f: F) -> HparStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HparStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            HparStatus::Panic
        }
    }
}

fn core_err(e: hpar_core::Error) -> (HparStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (HparStatus, String) {
    (HparStatus::NullPointer, format!("`{what}` is null"))
}

fn into_c_string(s: String) -> Result<*mut c_char, (HparStatus, String)> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| (HparStatus::Simulation, "output contains a NUL byte".to_string()))
}

fn nan_or(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

/// Message describing the most recent failure on this thread, or NULL.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn hpar_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses a `key = value` scenario config.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hpar_config_parse(text: *const c_char, out: *mut *mut HparConfig) -> HparStatus {
    guard(|| {
        if text.is_null() {
            return Err(null("text"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(text)
            .to_str()
            .map_err(|e| (HparStatus::InvalidUtf8, e.to_string()))?;
        let cfg = parse_config(text).map_err(core_err)?;
        *out = Box::into_raw(Box::new(HparConfig { inner: cfg }));
        Ok(())
    })
}

/// # Safety
/// `config` must be NULL or a handle from [`hpar_config_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hpar_config_free(config: *mut HparConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hpar_config_set_seed(config: *mut HparConfig, seed: u64) -> HparStatus {
    guard(|| {
        let cfg = config.as_mut().ok_or_else(|| null("config"))?;
        cfg.inner.seed = seed;
        Ok(())
    })
}

/// Writes the canonical text form of `config`, every default spelled out.
///
/// # Safety
/// `config` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hpar_config_emit(config: *const HparConfig, out: *mut *mut c_char) -> HparStatus {
    guard(|| {
        let cfg = config.as_ref().ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = into_c_string(emit_config(&cfg.inner))?;
        Ok(())
    })
}

/// Runs the scenario to completion. When `trace` is false the event trace is
/// left empty.
///
/// # Safety
/// `config` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hpar_run(config: *const HparConfig, trace: bool, out: *mut *mut HparRun) -> HparStatus {
    guard(|| {
        let cfg = config.as_ref().ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let output = run_with(&cfg.inner, RunOptions { trace, audit: false }).map_err(core_err)?;
        *out = Box::into_raw(Box::new(HparRun { inner: output }));
        Ok(())
    })
}

/// # Safety
/// `run` must be NULL or a handle from [`hpar_run`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hpar_run_free(run: *mut HparRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hpar_run_metrics(run: *const HparRun, out: *mut HparMetrics) -> HparStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let m = &r.inner.metrics;
        *out = HparMetrics {
            seed: m.seed,
            packets_sent: m.packets_sent as u64,
            packets_delivered: m.packets_delivered as u64,
            packets_failed: m.packets_failed as u64,
            delivery_rate: nan_or(m.delivery_rate),
            mean_latency_s: nan_or(m.mean_latency),
            transmissions: m.transmissions_total,
            hello_transmissions: m.hello_transmissions,
            participating_nodes: m.participating_nodes as u64,
            anonymity_set_mean: nan_or(m.anonymity.anonymity_set_mean),
            src_ident_rate: nan_or(m.anonymity.src_ident_rate),
            dst_ident_rate: nan_or(m.anonymity.dst_ident_rate),
            drops_ttl: m.drops(DropReason::Ttl),
            drops_unreachable: m.drops(DropReason::Unreachable),
            drops_loss: m.drops(DropReason::Loss),
        };
        Ok(())
    })
}

/// Event trace as JSON lines.
///
/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hpar_run_trace_jsonl(run: *const HparRun, out: *mut *mut c_char) -> HparStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut buf = Vec::new();
        write_trace_jsonl(&r.inner.trace, &mut buf).map_err(|e| (HparStatus::Simulation, e.to_string()))?;
        *out = into_c_string(String::from_utf8_lossy(&buf).into_owned())?;
        Ok(())
    })
}

/// The eavesdropper's observation log as JSON lines.
///
/// # Safety
/// `run` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hpar_run_observations_jsonl(run: *const HparRun, out: *mut *mut c_char) -> HparStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut buf = Vec::new();
        r.inner
            .observations
            .write_jsonl(&mut buf)
            .map_err(|e| (HparStatus::Simulation, e.to_string()))?;
        *out = into_c_string(String::from_utf8_lossy(&buf).into_owned())?;
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hpar_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Number of zone partitions for density `rho` (nodes per square meter),
/// area `area` and anonymity target `k`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hpar_compute_h(rho: f64, area: f64, k: u32, out: *mut u32) -> HparStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = compute_h(rho, area, k).map_err(core_err)?;
        Ok(())
    })
}

/// Writes the 20-byte pseudonym of the node with 48-bit address `mac` at
/// `timestamp` seconds.
///
/// # Safety
/// `out` must point to 20 writable bytes.
#[no_mangle]
pub unsafe extern "C" fn hpar_make_pseudonym(mac: u64, timestamp: f64, out: *mut u8) -> HparStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if !timestamp.is_finite() {
            return Err((
                HparStatus::Parameter,
                format!("timestamp must be finite, got {timestamp}"),
            ));
        }
        let p = make_pseudonym(NodeId::new(mac), timestamp);
        ptr::copy_nonoverlapping(p.as_bytes().as_ptr(), out, 20);
        Ok(())
    })
}
