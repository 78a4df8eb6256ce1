//! C ABI over the `solar` library.
//!
//! Every fallible function returns a [`SolarStatus`]. On failure the message
//! is available from [`solar_last_error`] on the same thread until the next
//! call into this library. Strings returned through out-parameters are owned
//! by the caller and must be released with [`solar_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use serde_json::json;
use solar::corpus::{self, Corpus, Judgment, VerdictCode};
use solar::providers::EmbeddingVector;
use solar::retrieval::{retrieve, UserHistory, VectorSpace};
use solar::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolarStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    UnknownVerdict = 4,
    Parse = 5,
    Io = 6,
    Json = 7,
    Empty = 8,
    DimensionMismatch = 9,
    Degenerate = 10,
    ManifestMismatch = 11,
    MissingData = 12,
    Provider = 13,
    Panic = 14,
    Other = 15,
}

/// Binary judgment. `None` stands for a verdict that carries no judgment.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolarJudgment {
    None = -1,
    Acceptable = 0,
    Unacceptable = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolarSpace {
    Situation = 0,
    Value = 1,
    Schwartz = 2,
}

/// Opaque corpus handle.
pub struct SolarCorpus {
    inner: Corpus,
}

/// Opaque per-redditor history handle.
pub struct SolarHistory {
    inner: UserHistory,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> SolarStatus {
    match err {
        Error::Io { .. } => SolarStatus::Io,
        Error::Json(_) => SolarStatus::Json,
        Error::UnknownVerdict(_) => SolarStatus::UnknownVerdict,
        Error::InvalidInput(_) | Error::UnknownRedditor(_) | Error::ThresholdTooHigh { .. } => {
            SolarStatus::InvalidInput
        }
        Error::Empty(_) => SolarStatus::Empty,
        Error::DimensionMismatch { .. } => SolarStatus::DimensionMismatch,
        Error::Degenerate(_) => SolarStatus::Degenerate,
        Error::Parse { .. } => SolarStatus::Parse,
        Error::ManifestMismatch(_) => SolarStatus::ManifestMismatch,
        Error::MissingData { .. } | Error::MissingUpstream { .. } => SolarStatus::MissingData,
        Error::Transport(_) | Error::Provider(_) | Error::NoFixture(_) => SolarStatus::Provider,
    }
}

struct Failure(SolarStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

/// Runs `f`, records any failure as the thread's last error and turns
/// panics into [`SolarStatus::Panic`].
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SolarStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SolarStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside solar".into());
            SolarStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(SolarStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(SolarStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

fn null_check<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(SolarStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

fn to_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(SolarStatus::Other, "output contains a nul byte".into()))
}

fn judgment_to_c(j: Option<Judgment>) -> SolarJudgment {
    match j {
        Some(Judgment::Acceptable) => SolarJudgment::Acceptable,
        Some(Judgment::Unacceptable) => SolarJudgment::Unacceptable,
        None => SolarJudgment::None,
    }
}

fn judgment_from_c(j: SolarJudgment) -> Option<Judgment> {
    match j {
        SolarJudgment::Acceptable => Some(Judgment::Acceptable),
        SolarJudgment::Unacceptable => Some(Judgment::Unacceptable),
        SolarJudgment::None => None,
    }
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn solar_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn solar_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn solar_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Maps a verdict code such as `"NTA"` to a judgment.
///
/// # Safety
/// `code` must be a nul-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn solar_map_verdict(code: *const c_char, out: *mut SolarJudgment) -> SolarStatus {
    guard(|| {
        null_check(out, "out")?;
        let code: VerdictCode = str_arg(code, "code")?.parse()?;
        *out = judgment_to_c(corpus::map_verdict(code));
        Ok(())
    })
}

/// Parses a model completion into a judgment.
///
/// # Safety
/// `completion` must be a nul-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn solar_parse_judgment(completion: *const c_char, out: *mut SolarJudgment) -> SolarStatus {
    guard(|| {
        null_check(out, "out")?;
        let j = solar::inference::parse_judgment(str_arg(completion, "completion")?)?;
        *out = judgment_to_c(Some(j));
        Ok(())
    })
}

/// Macro F1 of `len` predictions against gold labels.
///
/// # Safety
/// `predicted` and `gold` must point to `len` readable values; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn solar_macro_f1(
    predicted: *const SolarJudgment,
    gold: *const SolarJudgment,
    len: usize,
    out: *mut f64,
) -> SolarStatus {
    guard(|| {
        null_check(out, "out")?;
        if len == 0 {
            return Err(Error::Empty("no predictions to score".into()).into());
        }
        null_check(predicted, "predicted")?;
        null_check(gold, "gold")?;
        let (p, g) = (std::slice::from_raw_parts(predicted, len), std::slice::from_raw_parts(gold, len));
        let mut pairs = Vec::with_capacity(len);
        for (i, (&p, &g)) in p.iter().zip(g).enumerate() {
            match (judgment_from_c(p), judgment_from_c(g)) {
                (Some(p), Some(g)) => pairs.push((p, g)),
                _ => return Err(Error::InvalidInput(format!("label {i} is SOLAR_JUDGMENT_NONE")).into()),
            }
        }
        *out = solar::eval::macro_f1(&pairs)?;
        Ok(())
    })
}

/// Reads a newline-delimited JSON corpus. Malformed lines are skipped; their
/// count is written to `issues` when it is not null.
///
/// # Safety
/// `path` must be a nul-terminated string, `out` writable, `issues` null or writable.
#[no_mangle]
pub unsafe extern "C" fn solar_corpus_open(
    path: *const c_char,
    out: *mut *mut SolarCorpus,
    issues: *mut usize,
) -> SolarStatus {
    guard(|| {
        null_check(out, "out")?;
        let outcome = corpus::ingest(Path::new(str_arg(path, "path")?))?;
        if !issues.is_null() {
            *issues = outcome.issues.len();
        }
        *out = Box::into_raw(Box::new(SolarCorpus { inner: outcome.corpus }));
        Ok(())
    })
}

/// # Safety
/// `corpus` must be null or a handle from [`solar_corpus_open`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn solar_corpus_free(corpus: *mut SolarCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Number of instances in the corpus.
///
/// # Safety
/// `corpus` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn solar_corpus_len(corpus: *const SolarCorpus, out: *mut usize) -> SolarStatus {
    guard(|| {
        null_check(corpus, "corpus")?;
        null_check(out, "out")?;
        *out = (*corpus).inner.instances.len();
        Ok(())
    })
}

/// Corpus statistics as a JSON string, listing the `skewed_k` most skewed redditors.
///
/// # Safety
/// `corpus` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn solar_corpus_stats_json(
    corpus: *const SolarCorpus,
    skewed_k: usize,
    out: *mut *mut c_char,
) -> SolarStatus {
    guard(|| {
        null_check(corpus, "corpus")?;
        null_check(out, "out")?;
        let s = corpus::stats(&(*corpus).inner, skewed_k)?;
        *out = to_c_string(serde_json::to_string(&s).map_err(Error::from)?)?;
        Ok(())
    })
}

/// Loads a history written by `solar index`. Fails with
/// `SOLAR_STATUS_MANIFEST_MISMATCH` if it was embedded with another model.
///
/// # Safety
/// `path` and `model` must be nul-terminated strings and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn solar_history_load(
    path: *const c_char,
    model: *const c_char,
    out: *mut *mut SolarHistory,
) -> SolarStatus {
    guard(|| {
        null_check(out, "out")?;
        let h = UserHistory::load(Path::new(str_arg(path, "path")?), str_arg(model, "model")?)?;
        *out = Box::into_raw(Box::new(SolarHistory { inner: h }));
        Ok(())
    })
}

/// # Safety
/// `history` must be null or a handle from [`solar_history_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn solar_history_free(history: *mut SolarHistory) {
    if !history.is_null() {
        drop(Box::from_raw(history));
    }
}

/// Number of entries and vector dimension of a history.
///
/// # Safety
/// `history` must be a live handle; `len` and `dim` writable.
#[no_mangle]
pub unsafe extern "C" fn solar_history_shape(
    history: *const SolarHistory,
    len: *mut usize,
    dim: *mut usize,
) -> SolarStatus {
    guard(|| {
        null_check(history, "history")?;
        null_check(len, "len")?;
        null_check(dim, "dim")?;
        *len = (*history).inner.len();
        *dim = (*history).inner.dim();
        Ok(())
    })
}

/// Exact top-`k` search. Writes a JSON array of
/// `{"instance_id", "situation_id", "distance"}` objects, nearest first.
/// Entries of situation `exclude` are skipped; pass null to keep all.
///
/// # Safety
/// `history` must be a live handle, `query` must point to `dim` readable
/// doubles, `exclude` null or a nul-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn solar_history_search_json(
    history: *const SolarHistory,
    space: SolarSpace,
    query: *const f64,
    dim: usize,
    k: usize,
    exclude: *const c_char,
    out: *mut *mut c_char,
) -> SolarStatus {
    guard(|| {
        null_check(history, "history")?;
        null_check(query, "query")?;
        null_check(out, "out")?;
        let exclude = if exclude.is_null() { None } else { Some(str_arg(exclude, "exclude")?) };
        let q = EmbeddingVector::new(std::slice::from_raw_parts(query, dim).to_vec())?;
        let space = match space {
            SolarSpace::Situation => VectorSpace::Situation,
            SolarSpace::Value => VectorSpace::Value,
            SolarSpace::Schwartz => VectorSpace::Schwartz,
        };
        let hits = retrieve(&(*history).inner, space, &q, k, exclude)?;
        let rows: Vec<_> = hits
            .hits
            .iter()
            .map(|h| {
                json!({
                    "instance_id": h.entry.instance_id,
                    "situation_id": h.entry.situation.situation_id,
                    "distance": h.distance,
                })
            })
            .collect();
        *out = to_c_string(serde_json::Value::Array(rows).to_string())?;
        Ok(())
    })
}
