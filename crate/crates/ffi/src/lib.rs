//! C ABI over `gec-metrics`.
//!
//! Handles (`GecmCorpus`, `GecmResult`) are opaque and owned by the caller
//! once returned; release them with the matching `*_free`. Every fallible
//! call returns a `GecmStatus`; on failure `gecm_last_error` describes the
//! problem for the calling thread. Strings returned through `char **` must be
//! released with `gecm_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gec_metrics::cli::{meta_report, AnalysisKind, MetaOptions};
use gec_metrics::config::{EvalConfig, MetricId};
use gec_metrics::dataset::load_meta_dataset;
use gec_metrics::meta_eval::stats;
use gec_metrics::runner::{score_systems, SystemScore};
use gec_metrics::{tokenize, Error, TokenSeq};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GecmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    LengthMismatch = 4,
    Config = 5,
    InvalidData = 6,
    Degenerate = 7,
    Io = 8,
    External = 9,
    Missing = 10,
    Panic = 11,
}

impl From<&Error> for GecmStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Usage(_) => GecmStatus::InvalidArgument,
            Error::LengthMismatch { .. } => GecmStatus::LengthMismatch,
            Error::Config(_) => GecmStatus::Config,
            Error::Parse { .. } | Error::Validation(_) | Error::Dataset(_) => GecmStatus::InvalidData,
            Error::Degenerate(_) => GecmStatus::Degenerate,
            Error::Io { .. } => GecmStatus::Io,
            Error::MissingScore { .. } => GecmStatus::Missing,
            Error::Perplexity { .. } | Error::LlmSource { .. } => GecmStatus::External,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

struct Fail(GecmStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(GecmStatus::from(&e), e.to_string())
    }
}

type FfiResult<T> = std::result::Result<T, Fail>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> GecmStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GecmStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(format!("internal panic: {msg}"));
            GecmStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(Fail(GecmStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(GecmStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, what: &str) -> FfiResult<Option<&'a str>> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, what).map(Some)
    }
}

fn null(what: &str) -> Fail {
    Fail(GecmStatus::NullPointer, format!("{what} is null"))
}

/// Parallel sentence lists collected from C.
pub struct GecmCorpus {
    sources: Vec<TokenSeq>,
    hyps: Vec<TokenSeq>,
    /// `refs[k][i]`: reference set `k`, sentence `i`.
    refs: Vec<Vec<TokenSeq>>,
}

pub struct GecmResult {
    score: SystemScore,
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gecm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn gecm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn gecm_corpus_new() -> *mut GecmCorpus {
    Box::into_raw(Box::new(GecmCorpus {
        sources: Vec::new(),
        hyps: Vec::new(),
        refs: Vec::new(),
    }))
}

/// Appends one sentence. Every push must pass the same number of references.
///
/// # Safety
/// `corpus` must come from `gecm_corpus_new`; strings must be NUL-terminated
/// and `refs` must point to `n_refs` of them (or be NULL when `n_refs` is 0).
#[no_mangle]
pub unsafe extern "C" fn gecm_corpus_push(
    corpus: *mut GecmCorpus,
    source: *const c_char,
    hypothesis: *const c_char,
    refs: *const *const c_char,
    n_refs: usize,
) -> GecmStatus {
    guard(|| {
        let c = corpus.as_mut().ok_or_else(|| null("corpus"))?;
        let src = str_arg(source, "source")?;
        let hyp = str_arg(hypothesis, "hypothesis")?;
        if n_refs > 0 && refs.is_null() {
            return Err(null("refs"));
        }
        let refs: Vec<&str> = (0..n_refs)
            .map(|k| str_arg(*refs.add(k), "reference"))
            .collect::<FfiResult<_>>()?;
        if !c.sources.is_empty() && refs.len() != c.refs.len() {
            return Err(Fail(
                GecmStatus::LengthMismatch,
                format!("expected {} references per sentence, got {}", c.refs.len(), refs.len()),
            ));
        }
        if c.sources.is_empty() {
            c.refs = vec![Vec::new(); refs.len()];
        }
        c.sources.push(tokenize(src));
        c.hyps.push(tokenize(hyp));
        for (set, r) in c.refs.iter_mut().zip(refs) {
            set.push(tokenize(r));
        }
        Ok(())
    })
}

/// # Safety
/// `corpus` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gecm_corpus_len(corpus: *const GecmCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.sources.len())
}

/// # Safety
/// `corpus` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gecm_corpus_free(corpus: *mut GecmCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Scores the corpus with `metric` (e.g. "errant"). `config_yaml` may be NULL
/// for defaults. On success `*out` receives a result handle.
///
/// # Safety
/// Pointers must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gecm_score(
    corpus: *const GecmCorpus,
    metric: *const c_char,
    config_yaml: *const c_char,
    out: *mut *mut GecmResult,
) -> GecmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let c = corpus.as_ref().ok_or_else(|| null("corpus"))?;
        let metric: MetricId = str_arg(metric, "metric")?.parse()?;
        let cfg = EvalConfig::from_yaml(opt_str_arg(config_yaml, "config")?.unwrap_or(""))?.resolve(Some(metric))?;
        let systems = vec![("system".to_string(), c.hyps.clone())];
        let mut scores = score_systems(&cfg, &c.sources, &systems, || Ok(c.refs.clone()))?;
        *out = Box::into_raw(Box::new(GecmResult {
            score: scores.remove(0),
        }));
        Ok(())
    })
}

/// Corpus score, or NaN when the metric produced none or `result` is NULL.
///
/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gecm_result_corpus_score(result: *const GecmResult) -> f64 {
    result
        .as_ref()
        .and_then(|r| r.score.corpus_score)
        .unwrap_or(f64::NAN)
}

/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gecm_result_len(result: *const GecmResult) -> usize {
    result.as_ref().map_or(0, |r| r.score.sentence_scores.len())
}

/// Sentence score `index`; `GECM_STATUS_MISSING` when the metric left it out.
///
/// # Safety
/// `result` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gecm_result_sentence_score(
    result: *const GecmResult,
    index: usize,
    out: *mut f64,
) -> GecmStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let n = r.score.sentence_scores.len();
        let v = r.score.sentence_scores.get(index).ok_or_else(|| {
            Fail(GecmStatus::InvalidArgument, format!("index {index} out of range (0..{n})"))
        })?;
        *out = v.ok_or_else(|| Fail(GecmStatus::Missing, format!("sentence {index} has no score")))?;
        Ok(())
    })
}

/// # Safety
/// `result` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gecm_result_free(result: *mut GecmResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gecm_f_beta(precision: f64, recall: f64, beta: f64, out: *mut f64) -> GecmStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = gec_metrics::f_beta(precision, recall, beta)?;
        Ok(())
    })
}

unsafe fn correlation(
    x: *const f64,
    y: *const f64,
    n: usize,
    out: *mut f64,
    f: fn(&[f64], &[f64]) -> Option<f64>,
) -> GecmStatus {
    guard(|| {
        if x.is_null() || y.is_null() {
            return Err(null("input vector"));
        }
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let (x, y) = (std::slice::from_raw_parts(x, n), std::slice::from_raw_parts(y, n));
        *out = f(x, y).ok_or_else(|| {
            Fail(GecmStatus::Degenerate, "correlation undefined for constant or short input".into())
        })?;
        Ok(())
    })
}

/// # Safety
/// `x` and `y` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gecm_pearson(x: *const f64, y: *const f64, n: usize, out: *mut f64) -> GecmStatus {
    correlation(x, y, n, out, stats::pearson)
}

/// # Safety
/// `x` and `y` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gecm_spearman(x: *const f64, y: *const f64, n: usize, out: *mut f64) -> GecmStatus {
    correlation(x, y, n, out, stats::spearman)
}

/// Meta-evaluates the config's metric on a dataset directory and returns the
/// report (with window and pairwise rows) as JSON in `*out_json`.
/// `aggregation` is "average", "expected_wins" or "trueskill"; NULL means
/// "average".
///
/// # Safety
/// Strings must be NUL-terminated or NULL where allowed; `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn gecm_meta_eval_json(
    dataset_root: *const c_char,
    config_yaml: *const c_char,
    aggregation: *const c_char,
    out_json: *mut *mut c_char,
) -> GecmStatus {
    guard(|| {
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        *out_json = ptr::null_mut();
        let root = str_arg(dataset_root, "dataset_root")?;
        let cfg = EvalConfig::from_yaml(opt_str_arg(config_yaml, "config")?.unwrap_or(""))?.resolve(None)?;
        let opts = MetaOptions {
            aggregation: opt_str_arg(aggregation, "aggregation")?.unwrap_or("average").parse()?,
            analysis: AnalysisKind::Both,
            ..Default::default()
        };
        let data = load_meta_dataset(root)?;
        let report = meta_report(&cfg, &data, &opts)?;
        let text = serde_json::to_string(&report).expect("report serializes");
        *out_json = CString::new(text)
            .map_err(|_| Fail(GecmStatus::InvalidData, "report contains NUL".into()))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gecm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
