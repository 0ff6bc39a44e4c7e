//! C ABI over the phyid library.
//!
//! Every fallible function returns a [`PhyidStatus`]. On failure a message is
//! kept per thread and can be read with [`phyid_last_error_message`]. Bundles
//! are opaque handles released with [`phyid_bundle_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use phyid::bundle::Bundle;
use phyid::features::{self, INDICATORS_PER_SENSOR};
use phyid::signal::{write_dataset, Waveform};
use phyid::synth::{self, SynthConfig};
use phyid::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhyidStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Malformed = 5,
    InvalidEvent = 6,
    DimensionMismatch = 7,
    SignalTooShort = 8,
    NonFiniteLoss = 9,
    Empty = 10,
    Monotonicity = 11,
    Json = 12,
    BufferTooSmall = 13,
    Panic = 14,
}

impl From<&Error> for PhyidStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Io { .. } => PhyidStatus::Io,
            Error::Malformed { .. } => PhyidStatus::Malformed,
            Error::InvalidEvent { .. } => PhyidStatus::InvalidEvent,
            Error::InvalidArgument(_) => PhyidStatus::InvalidArgument,
            Error::DimensionMismatch { .. } => PhyidStatus::DimensionMismatch,
            Error::SignalTooShort { .. } => PhyidStatus::SignalTooShort,
            Error::NonFiniteLoss { .. } => PhyidStatus::NonFiniteLoss,
            Error::Empty(_) => PhyidStatus::Empty,
            Error::Monotonicity(_) => PhyidStatus::Monotonicity,
            Error::Json { .. } => PhyidStatus::Json,
        }
    }
}

/// Opaque trained-model handle.
pub struct PhyidBundle {
    inner: Bundle,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhyidPrediction {
    pub mass_kg: f64,
    pub v0_mps: f64,
    pub energy_j: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(PhyidStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(PhyidStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(PhyidStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records any failure and converts panics into `Panic`.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PhyidStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PhyidStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            PhyidStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    Ok(PathBuf::from(str_arg(p, what)?))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(PhyidStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message of the last failure on this thread, or null. Valid until the next
/// call into this library on the same thread.
#[no_mangle]
pub extern "C" fn phyid_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn phyid_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a bundle directory. On success `*out` owns a new handle.
///
/// # Safety
/// `dir` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn phyid_bundle_load(dir: *const c_char, out: *mut *mut PhyidBundle) -> PhyidStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = std::ptr::null_mut();
        let inner = Bundle::load(path_arg(dir, "dir")?)?;
        *out = Box::into_raw(Box::new(PhyidBundle { inner }));
        Ok(())
    })
}

/// Releases a handle from `phyid_bundle_load`. Null is ignored.
///
/// # Safety
/// `bundle` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn phyid_bundle_free(bundle: *mut PhyidBundle) {
    if !bundle.is_null() {
        drop(Box::from_raw(bundle));
    }
}

/// Number of raw features the bundle expects, or 0 for a null handle.
///
/// # Safety
/// `bundle` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn phyid_bundle_feature_count(bundle: *const PhyidBundle) -> usize {
    bundle.as_ref().map_or(0, |b| b.inner.n_features())
}

/// Predicts from `n` raw (unnormalized) feature values, ordered sensor by
/// sensor with nine indicators each.
///
/// # Safety
/// `features` must point to `n` doubles and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn phyid_bundle_predict_features(
    bundle: *const PhyidBundle,
    features: *const f64,
    n: usize,
    out: *mut PhyidPrediction,
) -> PhyidStatus {
    guard(|| {
        let b = bundle.as_ref().ok_or_else(|| null("bundle"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let p = b.inner.predict_raw(slice_arg(features, n, "features")?)?;
        *out = PhyidPrediction {
            mass_kg: p.mass_kg,
            v0_mps: p.v0_mps,
            energy_j: p.energy_j,
        };
        Ok(())
    })
}

/// Nine energy indicators of one waveform (RMS, TE, PA, EPR, PCR, WPF, PF,
/// AME, AM) written to `out`, which must hold at least `out_len >= 9` doubles.
///
/// # Safety
/// `samples` must point to `n` doubles and `out` to `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn phyid_waveform_features(
    samples: *const f64,
    n: usize,
    sample_rate_hz: f64,
    out: *mut f64,
    out_len: usize,
) -> PhyidStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if out_len < INDICATORS_PER_SENSOR {
            return Err(Failure(
                PhyidStatus::BufferTooSmall,
                format!("output holds {out_len} values, need {INDICATORS_PER_SENSOR}"),
            ));
        }
        let w = Waveform::new(slice_arg(samples, n, "samples")?.to_vec(), sample_rate_hz, "S1")?;
        let values = features::indicators(&w)?;
        std::slice::from_raw_parts_mut(out, INDICATORS_PER_SENSOR).copy_from_slice(&values);
        Ok(())
    })
}

/// `0.5 * mass_kg * v0_mps^2`; mass must be positive and both finite.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn phyid_kinetic_energy(mass_kg: f64, v0_mps: f64, out: *mut f64) -> PhyidStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = phyid::pinn::kinetic_energy(mass_kg, v0_mps)?;
        Ok(())
    })
}

/// Generates a synthetic data set into `out_dir`. `config_json` may be null
/// for the default configuration.
///
/// # Safety
/// Both arguments must be null or NUL-terminated strings; `out_dir` non-null.
#[no_mangle]
pub unsafe extern "C" fn phyid_generate(config_json: *const c_char, out_dir: *const c_char) -> PhyidStatus {
    guard(|| {
        let dir = path_arg(out_dir, "out_dir")?;
        let config: SynthConfig = if config_json.is_null() {
            SynthConfig::default()
        } else {
            serde_json::from_str(str_arg(config_json, "config_json")?).map_err(|source| Error::Json {
                context: "synth config".into(),
                source,
            })?
        };
        let events = synth::generate(&config)?;
        write_dataset(&dir, &events)?;
        Ok(())
    })
}
