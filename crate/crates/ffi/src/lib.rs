//! C ABI over the rastmetrics library.
//!
//! Every function returns an [`RmStatus`]; on failure a message is available
//! from [`rm_last_error`] on the same thread. Strings handed out by the
//! library must be released with [`rm_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use rastmetrics::cparser::{parse_str, OnError, ParserConfig};
use rastmetrics::metrics::{compute_row, eigen, expand_variations, Metric, Variation};
use rastmetrics::pipeline::{analyse, run, Analysis, CsvSink, PhaseTimes, PipelineError, RunConfig};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    InvalidSelection = 4,
    Io = 5,
    OutOfRange = 6,
    Panic = 7,
}

/// Run options. Null strings and zero counts select the defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RmOptions {
    /// Regex selecting feature macros.
    pub feature_regex: *const c_char,
    /// Comma-separated variation ids or globs.
    pub metrics: *const c_char,
    /// Comma-separated file extensions.
    pub extensions: *const c_char,
    /// Worker threads for parsing and computing; 0 means one per CPU.
    pub threads: u32,
    pub queue_bound: u32,
    /// Keep parsing files with unbalanced directives instead of skipping them.
    pub best_effort: bool,
}

/// A parsed source tree with its selected variations. Opaque to C.
pub struct RmAnalysis {
    analysis: Analysis,
    variations: Vec<Variation>,
    eigen: Option<Vec<f64>>,
    threads: usize,
    queue_bound: usize,
    keys: Vec<CString>,
    ids: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

struct Fail(RmStatus, String);

impl From<PipelineError> for Fail {
    fn from(e: PipelineError) -> Self {
        let status = match e {
            PipelineError::Config(_) => RmStatus::InvalidConfig,
            PipelineError::Selection(_) => RmStatus::InvalidSelection,
            PipelineError::Io { .. } | PipelineError::Write { .. } => RmStatus::Io,
        };
        Fail(status, e.to_string())
    }
}

/// Runs `f`, turning errors and panics into a status plus last-error message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            RmStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            RmStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(RmStatus::NullArgument, format!("{what} is null"))
}

unsafe fn opt_str<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Fail> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p).to_str().map(Some).map_err(|_| Fail(RmStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn req_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    opt_str(p, what)?.ok_or_else(|| null(what))
}

fn out_string(s: &str, out: *mut *mut c_char) -> Result<(), Fail> {
    let c = CString::new(s).map_err(|_| Fail(RmStatus::InvalidUtf8, "string contains a NUL byte".into()))?;
    unsafe { *out = c.into_raw() };
    Ok(())
}

unsafe fn config(src: &str, options: *const RmOptions) -> Result<RunConfig, Fail> {
    let mut config = RunConfig::new(src);
    let o = if options.is_null() { rm_options_default() } else { *options };
    if let Some(r) = opt_str(o.feature_regex, "feature_regex")? {
        config.feature_regex = r.into();
    }
    if let Some(m) = opt_str(o.metrics, "metrics")? {
        config.metrics = m.into();
    }
    if let Some(e) = opt_str(o.extensions, "extensions")? {
        config.extensions = e.split(',').map(|s| s.trim().to_owned()).filter(|s| !s.is_empty()).collect();
    }
    let threads = match o.threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n as usize,
    };
    config.parse_threads = threads;
    config.compute_threads = threads;
    if o.queue_bound > 0 {
        config.queue_bound = o.queue_bound as usize;
    }
    if o.best_effort {
        config.on_error = OnError::BestEffort;
    }
    Ok(config)
}

/// Default options: every variation, `CONFIG_` features, `.c` and `.h` files.
#[no_mangle]
pub extern "C" fn rm_options_default() -> RmOptions {
    RmOptions {
        feature_regex: ptr::null(),
        metrics: ptr::null(),
        extensions: ptr::null(),
        threads: 0,
        queue_bound: 0,
        best_effort: false,
    }
}

/// Message of the last failed call on this thread, or an empty string.
/// Valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn rm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn rm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn rm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and analyses the tree under `src`. On success `*out` owns a
/// handle to release with [`rm_analysis_free`].
///
/// # Safety
/// `src` must be a NUL-terminated string, `options` null or valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rm_analysis_open(
    src: *const c_char,
    options: *const RmOptions,
    out: *mut *mut RmAnalysis,
) -> RmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config = config(req_str(src, "src")?, options)?;
        let variations = expand_variations(&config.metrics).map_err(PipelineError::from)?;
        let analysis = analyse(&config, &mut PhaseTimes::default())?;
        let eigen = variations
            .iter()
            .any(|v| v.metric == Metric::Eigen)
            .then(|| eigen::eigenvector_centrality(&analysis.records, &analysis.calls, config.eigen));
        let keys = analysis
            .records
            .iter()
            .map(|r| CString::new(format!("{}:{}:{}", r.path, r.name, r.start_line)).unwrap_or_default())
            .collect();
        let ids = variations.iter().map(|v| CString::new(v.id.as_str()).unwrap_or_default()).collect();
        let handle = RmAnalysis {
            analysis,
            variations,
            eigen,
            threads: config.compute_threads,
            queue_bound: config.queue_bound,
            keys,
            ids,
        };
        *out = Box::into_raw(Box::new(handle));
        Ok(())
    })
}

/// Releases an analysis handle. Null is ignored.
///
/// # Safety
/// `h` must come from [`rm_analysis_open`] and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn rm_analysis_free(h: *mut RmAnalysis) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

unsafe fn handle<'a>(h: *const RmAnalysis) -> Result<&'a RmAnalysis, Fail> {
    h.as_ref().ok_or_else(|| null("analysis"))
}

unsafe fn write_out<T>(out: *mut T, v: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = v;
    Ok(())
}

/// Number of functions (rows).
///
/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rm_analysis_function_count(h: *const RmAnalysis, out: *mut usize) -> RmStatus {
    guard(|| write_out(out, handle(h)?.analysis.records.len()))
}

/// Number of selected variations (columns after the key columns).
///
/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rm_analysis_variation_count(h: *const RmAnalysis, out: *mut usize) -> RmStatus {
    guard(|| write_out(out, handle(h)?.variations.len()))
}

/// Number of files skipped because they could not be parsed.
///
/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rm_analysis_skipped_count(h: *const RmAnalysis, out: *mut usize) -> RmStatus {
    guard(|| write_out(out, handle(h)?.analysis.files.iter().filter(|f| f.is_skipped()).count()))
}

/// `path:name:start_line` of function `index`. The string is owned by the
/// handle and lives as long as it does.
///
/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rm_analysis_function_key(
    h: *const RmAnalysis,
    index: usize,
    out: *mut *const c_char,
) -> RmStatus {
    guard(|| {
        let k = handle(h)?.keys.get(index).ok_or_else(|| Fail(RmStatus::OutOfRange, format!("no function {index}")))?;
        write_out(out, k.as_ptr())
    })
}

/// Id of variation `index`. The string is owned by the handle.
///
/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rm_analysis_variation_id(
    h: *const RmAnalysis,
    index: usize,
    out: *mut *const c_char,
) -> RmStatus {
    guard(|| {
        let id =
            handle(h)?.ids.get(index).ok_or_else(|| Fail(RmStatus::OutOfRange, format!("no variation {index}")))?;
        write_out(out, id.as_ptr())
    })
}

/// Computes the row of function `index` into `values`, which must hold at
/// least the variation count.
///
/// # Safety
/// `h` must be a live handle and `values` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn rm_analysis_row(h: *const RmAnalysis, index: usize, values: *mut f64, len: usize) -> RmStatus {
    guard(|| {
        let a = handle(h)?;
        if values.is_null() {
            return Err(null("values"));
        }
        if index >= a.analysis.records.len() {
            return Err(Fail(RmStatus::OutOfRange, format!("no function {index}")));
        }
        if len < a.variations.len() {
            return Err(Fail(RmStatus::OutOfRange, format!("buffer holds {len} values, need {}", a.variations.len())));
        }
        let row = compute_row(a.analysis.model(a.eigen.as_deref()), index, &a.variations);
        std::slice::from_raw_parts_mut(values, row.len()).copy_from_slice(&row);
        Ok(())
    })
}

/// Writes the CSV of all rows to `path`.
///
/// # Safety
/// `h` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rm_analysis_write_csv(h: *const RmAnalysis, path: *const c_char) -> RmStatus {
    guard(|| {
        let a = handle(h)?;
        let path = Path::new(req_str(path, "path")?);
        let io = |source| PipelineError::Io { path: path.display().to_string(), source };
        let file = std::fs::File::create(path).map_err(io)?;
        let mut csv = CsvSink::new(std::io::BufWriter::new(file), &a.variations).map_err(io)?;
        let model = a.analysis.model(a.eigen.as_deref());
        rastmetrics::pipeline::stream_rows(model, &a.variations, a.threads, a.queue_bound, |rec, values| {
            csv.row(rec, values)
        })?;
        csv.finish().map_err(io)?;
        Ok(())
    })
}

/// Full run: analyses `src` and writes the CSV to `out_path`. When `report`
/// is non-null it receives the run report as JSON, to release with
/// [`rm_string_free`].
///
/// # Safety
/// String arguments must be NUL-terminated, `options` null or valid.
#[no_mangle]
pub unsafe extern "C" fn rm_run(
    src: *const c_char,
    out_path: *const c_char,
    options: *const RmOptions,
    report: *mut *mut c_char,
) -> RmStatus {
    guard(|| {
        let config = config(req_str(src, "src")?, options)?;
        let r = run(&config, Path::new(req_str(out_path, "out_path")?))?;
        if !report.is_null() {
            out_string(&serde_json::to_string(&r).map_err(|e| Fail(RmStatus::Io, e.to_string()))?, report)?;
        }
        Ok(())
    })
}

/// Parses one source text and returns the debug dump of its tree, to
/// release with [`rm_string_free`]. A file that cannot be parsed still
/// succeeds; its dump records the skip reason.
///
/// # Safety
/// `path` and `text` must be NUL-terminated strings, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn rm_parse_dump(path: *const c_char, text: *const c_char, out: *mut *mut c_char) -> RmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let file = parse_str(req_str(path, "path")?, req_str(text, "text")?, &ParserConfig::default());
        out_string(&file.dump(), out)
    })
}
