//! C ABI over `emoalign`.
//!
//! Every entry point returns an [`EaStatus`]. On failure a message is kept
//! per thread and can be read with [`ea_last_error_message`]. Objects cross
//! the boundary as opaque handles that the caller releases with the matching
//! `*_free` function. Strings returned by the library are released with
//! [`ea_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use emoalign::align::{align, AlignConfig, Turn};
use emoalign::fusion::{forward, parse_checkpoint, FusionConfig, FusionParams};
use emoalign::ingest::{
    parse_hypothesis, parse_reference, parse_rttm, parse_words, write_turns, EmbeddingMatrix, EmotionLabel,
};
use emoalign::metrics::{classification_report, compute_steer, compute_teer, match_labels, LabeledInterval, TeerBreakdown};
use emoalign::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EaStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validation = 4,
    Precondition = 5,
    Degenerate = 6,
    Io = 7,
    Training = 8,
    OutOfRange = 9,
    Panic = 10,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: EaStatus, message: impl Into<String>) -> EaStatus {
    set_error(message.into());
    status
}

fn status_of(err: &Error) -> EaStatus {
    match err {
        Error::Parse { .. } => EaStatus::Parse,
        Error::Validation(_) => EaStatus::Validation,
        Error::Precondition(_) => EaStatus::Precondition,
        Error::DegenerateInput(_) => EaStatus::Degenerate,
        Error::Training { .. } => EaStatus::Training,
        Error::Io(_) => EaStatus::Io,
    }
}

fn from_error(err: Error) -> EaStatus {
    fail(status_of(&err), err.to_string())
}

/// Run `body`, turning panics into [`EaStatus::Panic`].
fn guarded(body: impl FnOnce() -> Result<(), EaStatus>) -> EaStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => EaStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(EaStatus::Panic, "internal panic"),
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, EaStatus> {
    if p.is_null() {
        return Err(fail(EaStatus::NullArgument, format!("{what} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(EaStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, EaStatus> {
    // SAFETY: non-null output pointers are required to be valid for writes.
    unsafe { p.as_mut() }.ok_or_else(|| fail(EaStatus::NullArgument, format!("{what} is NULL")))
}

fn c_string(s: &str) -> CString {
    CString::new(s.replace('\0', " ")).unwrap_or_default()
}

/// Message for the last failed call on this thread, or NULL. The pointer stays
/// valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn ea_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Release a string returned by the library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ea_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Lower-case name of an emotion index (0 happy, 1 sad, 2 angry, 3 neutral),
/// or NULL when out of range. The string is static.
#[no_mangle]
pub extern "C" fn ea_emotion_name(index: u32) -> *const c_char {
    match index {
        0 => c"happy".as_ptr(),
        1 => c"sad".as_ptr(),
        2 => c"angry".as_ptr(),
        3 => c"neutral".as_ptr(),
        _ => ptr::null(),
    }
}

// ------------------------------------------------------------------ align

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EaAlignOptions {
    /// Seconds; must be positive.
    pub pause_threshold: f64,
    /// Seconds; zero disables the nearest-segment rescue.
    pub rescue_window: f64,
    /// Keep words no segment claims, as turns of `<unattributed>`.
    pub keep_unattributed: bool,
}

#[no_mangle]
pub extern "C" fn ea_align_options_default() -> EaAlignOptions {
    let d = AlignConfig::default();
    EaAlignOptions {
        pause_threshold: d.pause_threshold,
        rescue_window: d.rescue_window,
        keep_unattributed: !d.drop_unattributed,
    }
}

/// Opaque list of aligned turns.
pub struct EaTurns {
    turns: Vec<Turn>,
    speakers: Vec<CString>,
    texts: Vec<CString>,
}

/// Borrowed view of one turn. The strings belong to the turn list.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EaTurnView {
    pub start: f64,
    pub end: f64,
    pub speaker: *const c_char,
    pub text: *const c_char,
    pub word_count: usize,
}

/// Align a words document (JSON) with RTTM text. `options` may be NULL for
/// the defaults. On success `*out` owns a new turn list.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ea_align(
    words_json: *const c_char,
    rttm: *const c_char,
    options: *const EaAlignOptions,
    out: *mut *mut EaTurns,
) -> EaStatus {
    guarded(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let words_src = read_str(words_json, "words_json")?;
        let rttm_src = read_str(rttm, "rttm")?;
        let opts = options.as_ref().copied().unwrap_or_else(|| ea_align_options_default());
        let config = AlignConfig {
            pause_threshold: opts.pause_threshold,
            rescue_window: opts.rescue_window,
            drop_unattributed: !opts.keep_unattributed,
        };
        let words = if words_src.trim().is_empty() {
            Vec::new()
        } else {
            parse_words(words_src).map_err(from_error)?
        };
        let segments = parse_rttm(rttm_src).map_err(from_error)?;
        let turns = align(&words, &segments, &config).map_err(from_error)?;
        let speakers = turns.iter().map(|t| c_string(&t.speaker)).collect();
        let texts = turns.iter().map(|t| c_string(&t.text)).collect();
        *out = Box::into_raw(Box::new(EaTurns { turns, speakers, texts }));
        Ok(())
    })
}

/// Number of turns; 0 for NULL.
///
/// # Safety
/// `turns` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ea_turns_len(turns: *const EaTurns) -> usize {
    turns.as_ref().map_or(0, |t| t.turns.len())
}

/// # Safety
/// `turns` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ea_turns_get(turns: *const EaTurns, index: usize, out: *mut EaTurnView) -> EaStatus {
    guarded(|| {
        let list = turns
            .as_ref()
            .ok_or_else(|| fail(EaStatus::NullArgument, "turns is NULL"))?;
        let out = out_ptr(out, "out")?;
        let t = list.turns.get(index).ok_or_else(|| {
            fail(
                EaStatus::OutOfRange,
                format!("index {index} out of range for {} turns", list.turns.len()),
            )
        })?;
        *out = EaTurnView {
            start: t.start,
            end: t.end,
            speaker: list.speakers[index].as_ptr(),
            text: list.texts[index].as_ptr(),
            word_count: t.words.len(),
        };
        Ok(())
    })
}

/// Serialize as a turn document. Free the result with [`ea_string_free`].
///
/// # Safety
/// `turns` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ea_turns_to_json(turns: *const EaTurns, out: *mut *mut c_char) -> EaStatus {
    guarded(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let list = turns
            .as_ref()
            .ok_or_else(|| fail(EaStatus::NullArgument, "turns is NULL"))?;
        let doc = write_turns(&list.turns).map_err(from_error)?;
        *out = c_string(&doc).into_raw();
        Ok(())
    })
}

/// # Safety
/// `turns` must be NULL or a handle from [`ea_align`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ea_turns_free(turns: *mut EaTurns) {
    if !turns.is_null() {
        drop(Box::from_raw(turns));
    }
}

// ---------------------------------------------------------------- scoring

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EaBreakdown {
    pub missed: f64,
    pub false_alarm: f64,
    pub confusion: f64,
    pub total: f64,
    pub rate: f64,
}

impl From<TeerBreakdown> for EaBreakdown {
    fn from(b: TeerBreakdown) -> Self {
        EaBreakdown {
            missed: b.ms,
            false_alarm: b.fa,
            confusion: b.conf,
            total: b.total,
            rate: b.rate,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EaScores {
    pub teer: EaBreakdown,
    pub steer: EaBreakdown,
    /// Utterance accuracy (WAR).
    pub accuracy: f64,
    pub weighted_f1: f64,
    pub macro_f1: f64,
    /// Per-class F1 in emotion index order.
    pub f1: [f64; 4],
    pub samples: usize,
}

/// Score a hypothesis document against a reference document.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ea_score(
    reference_json: *const c_char,
    hypothesis_json: *const c_char,
    out: *mut EaScores,
) -> EaStatus {
    guarded(|| {
        let out = out_ptr(out, "out")?;
        let reference = parse_reference(read_str(reference_json, "reference_json")?).map_err(from_error)?;
        let hypothesis = parse_hypothesis(read_str(hypothesis_json, "hypothesis_json")?).map_err(from_error)?;
        let ref_intervals: Vec<LabeledInterval> = reference.iter().cloned().map(LabeledInterval::from).collect();
        let teer = compute_teer(&ref_intervals, &hypothesis).map_err(from_error)?;
        let steer = compute_steer(&ref_intervals, &hypothesis).map_err(from_error)?;
        let report = classification_report(&match_labels(&reference, &hypothesis)).map_err(from_error)?;
        let mut f1 = [0.0; 4];
        for c in &report.per_class {
            f1[c.label.index()] = c.f1;
        }
        *out = EaScores {
            teer: teer.into(),
            steer: steer.into(),
            accuracy: report.accuracy,
            weighted_f1: report.weighted_f1,
            macro_f1: report.macro_f1,
            f1,
            samples: report.samples,
        };
        Ok(())
    })
}

// ----------------------------------------------------------------- fusion

/// Opaque fusion model loaded from a checkpoint.
pub struct EaModel {
    config: FusionConfig,
    params: FusionParams,
}

/// Load a checkpoint document.
///
/// # Safety
/// `checkpoint_json` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ea_model_load(checkpoint_json: *const c_char, out: *mut *mut EaModel) -> EaStatus {
    guarded(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let (config, params) = parse_checkpoint(read_str(checkpoint_json, "checkpoint_json")?).map_err(from_error)?;
        *out = Box::into_raw(Box::new(EaModel { config, params }));
        Ok(())
    })
}

/// Embedding dimension of the model; 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ea_model_dim(model: *const EaModel) -> usize {
    model.as_ref().map_or(0, |m| m.config.dim)
}

unsafe fn matrix(data: *const f64, rows: usize, dim: usize, what: &str) -> Result<EmbeddingMatrix, EaStatus> {
    if data.is_null() {
        return Err(fail(EaStatus::NullArgument, format!("{what} is NULL")));
    }
    if rows == 0 {
        return Err(fail(EaStatus::Validation, format!("{what} has no frames")));
    }
    let len = rows
        .checked_mul(dim)
        .ok_or_else(|| fail(EaStatus::OutOfRange, format!("{what}: {rows} x {dim} overflows")))?;
    let values = std::slice::from_raw_parts(data, len);
    let rows: Vec<Vec<f64>> = values.chunks(dim).map(<[f64]>::to_vec).collect();
    EmbeddingMatrix::from_rows(&rows).map_err(from_error)
}

/// Classify one utterance. `text` and `audio` are row-major
/// `rows x ea_model_dim(model)` arrays. Writes four class probabilities and
/// the arg-max emotion index.
///
/// # Safety
/// `model` must be live; the arrays must hold `rows * dim` doubles;
/// `probabilities` must have room for 4 doubles; `label` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn ea_model_forward(
    model: *const EaModel,
    text: *const f64,
    text_rows: usize,
    audio: *const f64,
    audio_rows: usize,
    probabilities: *mut f64,
    label: *mut u32,
) -> EaStatus {
    guarded(|| {
        let model = model
            .as_ref()
            .ok_or_else(|| fail(EaStatus::NullArgument, "model is NULL"))?;
        if probabilities.is_null() {
            return Err(fail(EaStatus::NullArgument, "probabilities is NULL"));
        }
        let d = model.config.dim;
        let t = matrix(text, text_rows, d, "text")?;
        let a = matrix(audio, audio_rows, d, "audio")?;
        let result = forward(&t, &a, &model.params, &model.config).map_err(from_error)?;
        let probs = std::slice::from_raw_parts_mut(probabilities, EmotionLabel::COUNT);
        for (dst, src) in probs.iter_mut().zip(result.probabilities.iter()) {
            *dst = *src;
        }
        if let Some(label) = label.as_mut() {
            *label = result.predicted.index() as u32;
        }
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a handle from [`ea_model_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ea_model_free(model: *mut EaModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
