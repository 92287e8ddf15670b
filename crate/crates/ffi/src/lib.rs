//! C ABI over genrelab: load a model bundle, classify audio, read the report.
//!
//! Every function returns a [`GlStatus`] (or a plain value where nothing can
//! fail) and never unwinds across the boundary. On failure
//! [`gl_last_error_message`] describes the most recent error on the calling
//! thread. Objects handed out as pointers are owned by the caller and must be
//! released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, UnwindSafe};
use std::path::Path;
use std::ptr;

use genrelab::audio::{decode_wav, normalize_clip, AudioClip, AudioError, ANALYSIS_SECONDS, WORKING_RATE};
use genrelab::classify::{Algorithm, BundleError, Distribution, ModelBundle};
use genrelab::eval::{classify_report, ClassificationReport, EvalError};
use genrelab::features::{extract_features, N_FEATURES};
use genrelab::N_GENRES;

/// Loaded model bundle.
pub struct GlBundle {
    inner: ModelBundle,
}

/// Result of classifying one clip.
pub struct GlReport {
    inner: ClassificationReport,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    SchemaVersionMismatch = 4,
    CorruptBundle = 5,
    MalformedAudio = 6,
    UnsupportedEncoding = 7,
    EmptyAudio = 8,
    TooShort = 9,
    InvalidClip = 10,
    FeatureError = 11,
    ClassifyError = 12,
    /// An index was out of range or an output buffer too small.
    OutOfRange = 13,
    Panic = 14,
}

/// Model selector for [`gl_report_algorithm`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlAlgorithm {
    Knn = 0,
    Gnb = 1,
    Tree = 2,
    Forest = 3,
    Mlp = 4,
}

fn algorithm(code: u32) -> FfiResult<Algorithm> {
    Algorithm::ALL
        .get(code as usize)
        .copied()
        .ok_or_else(|| Failure(GlStatus::OutOfRange, format!("no algorithm with code {code}")))
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(GlStatus, String);

type FfiResult<T = ()> = Result<T, Failure>;

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> FfiResult + UnwindSafe) -> GlStatus {
    match catch_unwind(f) {
        Ok(Ok(())) => GlStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .map(String::as_str)
                .or_else(|| panic.downcast_ref::<&str>().copied())
                .unwrap_or("unknown panic");
            set_last_error(&format!("internal panic: {msg}"));
            GlStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(GlStatus::NullPointer, format!("{what} is null"))
}

fn audio_failure(e: AudioError) -> Failure {
    let status = match e {
        AudioError::MalformedContainer(_) => GlStatus::MalformedAudio,
        AudioError::UnsupportedEncoding(_) => GlStatus::UnsupportedEncoding,
        AudioError::EmptyAudio => GlStatus::EmptyAudio,
        AudioError::TooShort { .. } => GlStatus::TooShort,
        AudioError::InvalidClip(_) => GlStatus::InvalidClip,
    };
    Failure(status, e.to_string())
}

fn eval_failure(e: EvalError) -> Failure {
    match e {
        EvalError::Audio(a) => audio_failure(a),
        EvalError::Feature(f) => Failure(GlStatus::FeatureError, f.to_string()),
        other => Failure(GlStatus::ClassifyError, other.to_string()),
    }
}

fn bundle_failure(e: BundleError) -> Failure {
    let status = match e {
        BundleError::SchemaVersionMismatch { .. } => GlStatus::SchemaVersionMismatch,
        BundleError::CorruptBundle(_) => GlStatus::CorruptBundle,
        BundleError::Io(_) => GlStatus::Io,
    };
    Failure(status, e.to_string())
}

/// # Safety
/// `p` is null or points to a NUL-terminated string.
unsafe fn utf8<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(GlStatus::InvalidUtf8, format!("{what}: {e}")))
}

/// # Safety
/// `p` is null or points to `len` readable elements.
unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> FfiResult<&'a [T]> {
    if p.is_null() {
        if len == 0 {
            return Ok(&[]);
        }
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` is null or points to `len` writable elements.
unsafe fn write_probs(d: &Distribution, out: *mut f64, len: usize) -> FfiResult {
    if out.is_null() {
        return Err(null("out_probs"));
    }
    if len < N_GENRES {
        return Err(Failure(GlStatus::OutOfRange, format!("out_probs holds {len} values, need {N_GENRES}")));
    }
    std::slice::from_raw_parts_mut(out, N_GENRES).copy_from_slice(d.probs());
    Ok(())
}

/// Message for the last failed call on this thread; empty if none. Valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Number of genres; probability arrays hold this many values, indexed by
/// genre code.
#[no_mangle]
pub extern "C" fn gl_genre_count() -> usize {
    N_GENRES
}

/// Number of values in a feature vector.
#[no_mangle]
pub extern "C" fn gl_feature_count() -> usize {
    N_FEATURES
}

static GENRE_NAMES: [&CStr; N_GENRES] = [
    c"Blues",
    c"Classical",
    c"Country",
    c"Electronic",
    c"Folk",
    c"Hip-hop",
    c"Jazz",
    c"Metal",
    c"Pop",
    c"Reggae",
    c"Rock",
];

/// Canonical name of genre `code` (static storage), or null when out of range.
#[no_mangle]
pub extern "C" fn gl_genre_name(code: usize) -> *const c_char {
    GENRE_NAMES.get(code).map_or(ptr::null(), |s| s.as_ptr())
}

/// Loads a bundle written by `genrelab train`.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gl_bundle_load(path: *const c_char, out: *mut *mut GlBundle) -> GlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = utf8(path, "path")?;
        let inner = ModelBundle::load(Path::new(path)).map_err(bundle_failure)?;
        *out = Box::into_raw(Box::new(GlBundle { inner }));
        Ok(())
    })
}

/// Parses a bundle from its JSON text.
///
/// # Safety
/// `json` is a NUL-terminated string; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gl_bundle_from_json(json: *const c_char, out: *mut *mut GlBundle) -> GlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = ModelBundle::from_json(utf8(json, "json")?).map_err(bundle_failure)?;
        *out = Box::into_raw(Box::new(GlBundle { inner }));
        Ok(())
    })
}

/// # Safety
/// `bundle` is null or came from `gl_bundle_load`/`gl_bundle_from_json` and
/// has not been freed.
#[no_mangle]
pub unsafe extern "C" fn gl_bundle_free(bundle: *mut GlBundle) {
    if !bundle.is_null() {
        drop(Box::from_raw(bundle));
    }
}

fn classify(bundle: &GlBundle, clip: &AudioClip, out: *mut *mut GlReport) -> FfiResult {
    let inner = classify_report(&bundle.inner, clip).map_err(eval_failure)?;
    // SAFETY: callers check `out` first
    unsafe { *out = Box::into_raw(Box::new(GlReport { inner })) };
    Ok(())
}

/// Classifies a WAV file held in memory.
///
/// # Safety
/// `bundle` is a live bundle, `wav` points to `len` bytes, `out` is valid.
#[no_mangle]
pub unsafe extern "C" fn gl_classify_wav(
    bundle: *const GlBundle,
    wav: *const u8,
    len: usize,
    out: *mut *mut GlReport,
) -> GlStatus {
    guard(|| {
        let bundle = bundle.as_ref().ok_or_else(|| null("bundle"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let clip = decode_wav(slice(wav, len, "wav")?).map_err(audio_failure)?;
        classify(bundle, &clip, out)
    })
}

/// Classifies mono samples in [-1, 1].
///
/// # Safety
/// `bundle` is a live bundle, `samples` points to `len` values, `out` is valid.
#[no_mangle]
pub unsafe extern "C" fn gl_classify_samples(
    bundle: *const GlBundle,
    samples: *const f64,
    len: usize,
    sample_rate: u32,
    out: *mut *mut GlReport,
) -> GlStatus {
    guard(|| {
        let bundle = bundle.as_ref().ok_or_else(|| null("bundle"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let clip = AudioClip::new(slice(samples, len, "samples")?.to_vec(), sample_rate).map_err(audio_failure)?;
        classify(bundle, &clip, out)
    })
}

/// # Safety
/// `report` is null or came from a classify call and has not been freed.
#[no_mangle]
pub unsafe extern "C" fn gl_report_free(report: *mut GlReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Writes the consensus distribution (`gl_genre_count()` values).
///
/// # Safety
/// `report` is live; `out_probs` points to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gl_report_consensus(report: *const GlReport, out_probs: *mut f64, len: usize) -> GlStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        write_probs(&r.inner.consensus, out_probs, len)
    })
}

/// Writes one model's distribution; `algorithm` is a [`GlAlgorithm`] value.
///
/// # Safety
/// `report` is live; `out_probs` points to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gl_report_algorithm(
    report: *const GlReport,
    algorithm: u32,
    out_probs: *mut f64,
    len: usize,
) -> GlStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        let d = r
            .inner
            .per_algorithm
            .get(&self::algorithm(algorithm)?)
            .ok_or_else(|| Failure(GlStatus::ClassifyError, "report lacks this model".into()))?;
        write_probs(d, out_probs, len)
    })
}

/// Consensus top genre code and its probability.
///
/// # Safety
/// `report` is live; the out pointers are valid or null (then skipped).
#[no_mangle]
pub unsafe extern "C" fn gl_report_top(
    report: *const GlReport,
    out_genre: *mut usize,
    out_confidence: *mut f64,
) -> GlStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        if !out_genre.is_null() {
            *out_genre = r.inner.top_genre.code();
        }
        if !out_confidence.is_null() {
            *out_confidence = r.inner.confidence;
        }
        Ok(())
    })
}

/// Tempo in BPM. `*out_has_tempo` is false (and `*out_bpm` 0) when no
/// periodicity was found.
///
/// # Safety
/// `report` is live; both out pointers are valid.
#[no_mangle]
pub unsafe extern "C" fn gl_report_tempo(report: *const GlReport, out_bpm: *mut f64, out_has_tempo: *mut bool) -> GlStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        if out_bpm.is_null() || out_has_tempo.is_null() {
            return Err(null("out_bpm/out_has_tempo"));
        }
        *out_has_tempo = r.inner.tempo_bpm.is_some();
        *out_bpm = r.inner.tempo_bpm.unwrap_or(0.0);
        Ok(())
    })
}

/// The full report as JSON. Free the string with `gl_string_free`.
///
/// # Safety
/// `report` is live; `out` is valid.
#[no_mangle]
pub unsafe extern "C" fn gl_report_to_json(report: *const GlReport, out: *mut *mut c_char) -> GlStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let json = serde_json::to_string(&r.inner).map_err(|e| Failure(GlStatus::ClassifyError, e.to_string()))?;
        *out = CString::new(json).expect("JSON has no NUL").into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` is null or came from this library and has not been freed.
#[no_mangle]
pub unsafe extern "C" fn gl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Feature vector of mono samples after the same resampling and trimming
/// the classifier applies. Writes `gl_feature_count()` values.
///
/// # Safety
/// `samples` points to `len` values; `out` to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gl_extract_features(
    samples: *const f64,
    len: usize,
    sample_rate: u32,
    out: *mut f64,
    out_len: usize,
) -> GlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if out_len < N_FEATURES {
            return Err(Failure(GlStatus::OutOfRange, format!("out holds {out_len} values, need {N_FEATURES}")));
        }
        let clip = AudioClip::new(slice(samples, len, "samples")?.to_vec(), sample_rate).map_err(audio_failure)?;
        let clip = normalize_clip(&clip, WORKING_RATE, ANALYSIS_SECONDS).map_err(audio_failure)?;
        let fv = extract_features(&clip).map_err(|e| Failure(GlStatus::FeatureError, e.to_string()))?;
        std::slice::from_raw_parts_mut(out, N_FEATURES).copy_from_slice(fv.values());
        Ok(())
    })
}
