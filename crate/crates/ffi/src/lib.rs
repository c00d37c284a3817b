//! C ABI over the gridiron workbench.
//!
//! Every function returns a [`GridironStatus`]; results come back through
//! out-pointers. On failure the message is available from
//! [`gridiron_last_error`] on the same thread until the next call. Strings
//! handed out by the library must be released with [`gridiron_string_free`],
//! bundles with [`gridiron_bundle_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use gridiron::labels;
use gridiron::playparse::{process_record, FilterOptions, RawPlayRecord};
use gridiron::serve::{enumerate_candidates, rank_plays, CandidatePlay, ModelBundle, ModelSet, RankBy, Situation};
use gridiron::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridironStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    WidthMismatch = 4,
    UnknownTeam = 5,
    Io = 6,
    CorruptModel = 7,
    VersionMismatch = 8,
    ModelError = 9,
    Panic = 99,
}

/// A loaded model bundle.
pub struct GridironBundle(ModelBundle);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(GridironStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::WidthMismatch { .. } => GridironStatus::WidthMismatch,
            Error::UnknownTeam(_) => GridironStatus::UnknownTeam,
            Error::Io(_) => GridironStatus::Io,
            Error::CorruptModel(_) => GridironStatus::CorruptModel,
            Error::VersionMismatch { .. } => GridironStatus::VersionMismatch,
            Error::InvalidInput(_) | Error::Empty(_) | Error::Json(_) => GridironStatus::InvalidInput,
            _ => GridironStatus::ModelError,
        };
        Fail(status, format!("{}: {e}", e.code()))
    }
}

impl From<serde_json::Error> for Fail {
    fn from(e: serde_json::Error) -> Self {
        Fail(GridironStatus::InvalidInput, format!("malformed_json: {e}"))
    }
}

fn null() -> Fail {
    Fail(GridironStatus::NullPointer, "null pointer argument".into())
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> GridironStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GridironStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            GridironStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null());
    }
    CStr::from_ptr(p).to_str().map_err(|e| Fail(GridironStatus::InvalidUtf8, e.to_string()))
}

fn to_c(s: String) -> Result<*mut c_char, Fail> {
    CString::new(s).map(CString::into_raw).map_err(|e| Fail(GridironStatus::InvalidInput, e.to_string()))
}

/// Message for the last failed call on this thread, or NULL. Valid until
/// the next call into the library from this thread.
#[no_mangle]
pub extern "C" fn gridiron_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gridiron_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gridiron_bundle_load(path: *const c_char, out: *mut *mut GridironBundle) -> GridironStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let path = read_str(path)?;
        let bundle = ModelBundle::load(Path::new(path))?;
        *out = Box::into_raw(Box::new(GridironBundle(bundle)));
        Ok(())
    })
}

/// # Safety
/// `bundle` must come from [`gridiron_bundle_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gridiron_bundle_free(bundle: *mut GridironBundle) {
    if !bundle.is_null() {
        drop(Box::from_raw(bundle));
    }
}

/// Number of features the bundle expects.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gridiron_bundle_width(bundle: *const GridironBundle, out: *mut usize) -> GridironStatus {
    guard(|| {
        let b = bundle.as_ref().ok_or_else(null)?;
        *out.as_mut().ok_or_else(null)? = b.0.schema.width();
        Ok(())
    })
}

/// Model output for one encoded feature vector: the regression estimate,
/// or a success score for classifiers.
///
/// # Safety
/// `x` must point to `len` doubles; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gridiron_bundle_predict(
    bundle: *const GridironBundle,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> GridironStatus {
    guard(|| {
        let b = bundle.as_ref().ok_or_else(null)?;
        if x.is_null() {
            return Err(null());
        }
        let out = out.as_mut().ok_or_else(null)?;
        let row = std::slice::from_raw_parts(x, len);
        *out = b.0.pipeline.predict_value(row)?;
        Ok(())
    })
}

/// Progress measure for a play: 0..1.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gridiron_progress(down: u8, togo: u32, gained: i32, out: *mut f64) -> GridironStatus {
    guard(|| {
        if !(1..=4).contains(&down) || togo == 0 {
            return Err(Fail(GridironStatus::InvalidInput, "down must be 1-4 and togo positive".into()));
        }
        *out.as_mut().ok_or_else(null)? = labels::progress(down, togo, gained);
        Ok(())
    })
}

/// Parses one raw play record (JSON) into a JSON result string, the same
/// shape the HTTP `/parse` route returns.
///
/// # Safety
/// `record_json` must be NUL-terminated; `out` valid. Free the result
/// with [`gridiron_string_free`].
#[no_mangle]
pub unsafe extern "C" fn gridiron_parse_json(record_json: *const c_char, out: *mut *mut c_char) -> GridironStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(null)?;
        let record: RawPlayRecord = serde_json::from_str(read_str(record_json)?)?;
        record.validate()?;
        let value = match process_record(&record, &FilterOptions::default()) {
            Ok(p) => serde_json::json!({
                "status": "relevant",
                "labels": labels::label_play(&p.features, &p.outcome),
                "features": p.features,
                "outcome": p.outcome,
            }),
            Err(reason) => serde_json::json!({"status": "rejected", "reason": reason}),
        };
        *out = to_c(value.to_string())?;
        Ok(())
    })
}

#[derive(serde::Deserialize)]
struct RankRequest {
    situation: Situation,
    #[serde(default)]
    playbook: Option<Vec<CandidatePlay>>,
    #[serde(default)]
    rank_by: Option<RankBy>,
}

/// Ranks candidate plays with the given bundles. The request is the JSON
/// body of the HTTP `/rank` route; the result is the ranked play list.
///
/// # Safety
/// `bundles` must point to `n` valid bundle pointers (may be NULL when
/// `n == 0`); strings NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn gridiron_rank_json(
    bundles: *const *const GridironBundle,
    n: usize,
    request_json: *const c_char,
    out: *mut *mut c_char,
) -> GridironStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(null)?;
        let handles: &[*const GridironBundle] = if n == 0 {
            &[]
        } else if bundles.is_null() {
            return Err(null());
        } else {
            std::slice::from_raw_parts(bundles, n)
        };
        let loaded =
            handles.iter().map(|&h| h.as_ref().map(|b| b.0.clone()).ok_or_else(null)).collect::<Result<Vec<_>, _>>()?;
        let req: RankRequest = serde_json::from_str(read_str(request_json)?)?;
        let candidates = enumerate_candidates(req.playbook.as_deref())?;
        let (by, plays) = rank_plays(&req.situation, &candidates, &ModelSet::new(loaded), req.rank_by)?;
        let body = serde_json::json!({"rank_by": by, "score_kind": "model_estimate", "plays": plays});
        *out = to_c(body.to_string())?;
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gridiron_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
