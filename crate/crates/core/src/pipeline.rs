//! End-to-end run: enumerate, parse, prepass, compute, stream CSV.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Instant;

use rayon::prelude::*;
use regex::Regex;
use serde::Serialize;

use crate::cparser::{parse_file, OnError, ParserConfig, DEFAULT_FEATURE_REGEX};
use crate::metrics::{
    compute_row, eigen, expand_variations, format_value, EigenParams, Metric, Model, SelectionError, Variation,
};
use crate::prepass::{self, FeatureFilter, FunctionRecord};
use crate::rast::{ParseStatus, SourceFile};

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub src: PathBuf,
    pub extensions: Vec<String>,
    pub feature_regex: String,
    pub feature_list: Option<PathBuf>,
    /// Comma-separated variation selection (globs allowed).
    pub metrics: String,
    pub parse_threads: usize,
    pub compute_threads: usize,
    /// Finished rows that may wait for the writer beyond one per worker.
    pub queue_bound: usize,
    pub on_error: OnError,
    pub eigen: EigenParams,
    pub dump_rast: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(src: impl Into<PathBuf>) -> Self {
        RunConfig {
            src: src.into(),
            extensions: vec!["c".into(), "h".into()],
            feature_regex: DEFAULT_FEATURE_REGEX.into(),
            feature_list: None,
            metrics: "*".into(),
            parse_threads: 1,
            compute_threads: 1,
            queue_bound: 64,
            on_error: OnError::SkipFile,
            eigen: EigenParams::default(),
            dump_rast: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("writing output failed after {rows} rows: {source}")]
    Write { rows: usize, source: io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.display().to_string(), source }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SkippedFile {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FileTangling {
    pub path: String,
    pub td_sum: u64,
    pub td_max: u64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct PhaseTimes {
    pub enumerate: f64,
    pub parse: f64,
    pub prepass: f64,
    pub eigen: f64,
    pub compute: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RunReport {
    pub files_parsed: usize,
    pub files_skipped: Vec<SkippedFile>,
    pub functions: usize,
    pub rows_written: usize,
    pub variations: usize,
    pub bytes_written: u64,
    /// Most finished rows ever waiting for the writer at once.
    pub peak_buffered_rows: usize,
    /// Tangling degree over the VPs of each parsed file.
    pub file_tangling: Vec<FileTangling>,
    pub seconds: PhaseTimes,
}

impl RunReport {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "files parsed: {}\nfiles skipped: {}\nfunctions: {}\nrows written: {}\nvariations: {}\nbytes written: {}\n",
            self.files_parsed,
            self.files_skipped.len(),
            self.functions,
            self.rows_written,
            self.variations,
            self.bytes_written
        );
        for sk in &self.files_skipped {
            s += &format!("  skipped {}: {}\n", sk.path, sk.reason);
        }
        let t = &self.seconds;
        s += &format!(
            "seconds: enumerate {:.3} parse {:.3} prepass {:.3} eigen {:.3} compute {:.3}\n",
            t.enumerate, t.parse, t.prepass, t.eigen, t.compute
        );
        s
    }
}

/// Source files under `root` with a selected extension, sorted, as paths
/// relative to the root with `/` separators.
pub fn enumerate_files(root: &Path, extensions: &[String]) -> Result<Vec<String>, PipelineError> {
    let cfg = ParserConfig { extensions: extensions.to_vec(), ..ParserConfig::default() };
    let mut out = Vec::new();
    for entry in walkdir::WalkDir::new(root) {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).display().to_string();
            PipelineError::Io { path, source: e.into() }
        })?;
        if entry.file_type().is_file() && cfg.accepts(entry.path()) {
            let rel = entry.path().strip_prefix(root).unwrap_or(entry.path());
            let parts: Vec<String> = rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
            out.push(parts.join("/"));
        }
    }
    out.sort();
    Ok(out)
}

/// Streams CSV rows; counts bytes.
pub struct CsvSink<W: Write> {
    writer: csv::Writer<Counting<W>>,
    integral: Vec<bool>,
}

struct Counting<W> {
    inner: W,
    bytes: u64,
}

impl<W: Write> Write for Counting<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.bytes += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

impl<W: Write> CsvSink<W> {
    pub fn new(sink: W, variations: &[Variation]) -> io::Result<Self> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .quote_style(csv::QuoteStyle::Necessary)
            .from_writer(Counting { inner: sink, bytes: 0 });
        let mut header = vec!["file", "function", "start_line", "end_line"];
        header.extend(variations.iter().map(|v| v.id.as_str()));
        writer.write_record(&header)?;
        Ok(CsvSink { writer, integral: variations.iter().map(Variation::is_integral).collect() })
    }

    pub fn row(&mut self, rec: &FunctionRecord, values: &[f64]) -> io::Result<()> {
        let mut cells = vec![rec.path.clone(), rec.name.clone(), rec.start_line.to_string(), rec.end_line.to_string()];
        cells.extend(values.iter().zip(&self.integral).map(|(&v, &i)| format_value(v, i)));
        self.writer.write_record(&cells).map_err(io::Error::from)
    }

    /// Flushes and returns the sink with the byte count.
    pub fn finish(self) -> io::Result<(W, u64)> {
        let counting = self.writer.into_inner().map_err(|e| e.into_error())?;
        Ok((counting.inner, counting.bytes))
    }
}

/// Writes a complete table at once; returns the byte count.
pub fn write_csv<W: Write>(rows: &[(FunctionRecord, Vec<f64>)], variations: &[Variation], sink: W) -> io::Result<u64> {
    let mut s = CsvSink::new(sink, variations)?;
    for (rec, values) in rows {
        s.row(rec, values)?;
    }
    Ok(s.finish()?.1)
}

/// Parses and analyses `config.src`, writing the CSV to `out` (through a
/// `.partial` file renamed on success).
pub fn run(config: &RunConfig, out: &Path) -> Result<RunReport, PipelineError> {
    let partial = {
        let mut p = out.as_os_str().to_owned();
        p.push(".partial");
        PathBuf::from(p)
    };
    let file = fs::File::create(&partial).map_err(io_err(&partial))?;
    let (report, _) = run_to(config, io::BufWriter::new(file))?;
    fs::rename(&partial, out).map_err(io_err(out))?;
    Ok(report)
}

/// Everything parsed and precomputed before the metric pass.
pub struct Analysis {
    pub files: Vec<SourceFile>,
    pub records: Vec<FunctionRecord>,
    pub calls: prepass::CallMap,
    pub stats: prepass::FeatureStats,
    pub filter: FeatureFilter,
}

impl Analysis {
    pub fn model<'a>(&'a self, eigen: Option<&'a [f64]>) -> Model<'a> {
        Model {
            files: &self.files,
            records: &self.records,
            calls: &self.calls,
            stats: &self.stats,
            filter: &self.filter,
            eigen,
        }
    }
}

fn check(config: &RunConfig) -> Result<(Vec<Variation>, FeatureFilter), PipelineError> {
    if config.parse_threads == 0 || config.compute_threads == 0 {
        return Err(PipelineError::Config("thread counts must be at least 1".into()));
    }
    let regex = Regex::new(&config.feature_regex).map_err(|e| PipelineError::Config(e.to_string()))?;
    let list = match &config.feature_list {
        Some(p) => Some(prepass::read_feature_list(p).map_err(io_err(p))?),
        None => None,
    };
    Ok((expand_variations(&config.metrics)?, FeatureFilter::new(regex, list)))
}

fn pool(threads: usize) -> Result<rayon::ThreadPool, PipelineError> {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| PipelineError::Config(e.to_string()))
}

/// Phases one to three: enumerate, parse, prepass.
pub fn analyse(config: &RunConfig, times: &mut PhaseTimes) -> Result<Analysis, PipelineError> {
    let (_, filter) = check(config)?;
    let t = Instant::now();
    let paths = enumerate_files(&config.src, &config.extensions)?;
    times.enumerate = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let parser = ParserConfig {
        feature_regex: filter.regex.clone(),
        on_error: config.on_error,
        extensions: config.extensions.clone(),
    };
    let pool = pool(config.parse_threads)?;
    let files: Vec<SourceFile> = pool.install(|| {
        paths
            .par_iter()
            .map(|rel| match fs::read(config.src.join(rel)) {
                Ok(bytes) => parse_file(rel, &bytes, &parser),
                Err(e) => SourceFile::skipped(rel.as_str(), format!("{rel}: {e}"), Vec::new()),
            })
            .collect()
    });
    times.parse = t.elapsed().as_secs_f64();
    if let Some(dir) = &config.dump_rast {
        for f in &files {
            let target = dir.join(format!("{}.rast", f.path));
            if let Some(parent) = target.parent() {
                fs::create_dir_all(parent).map_err(io_err(parent))?;
            }
            fs::write(&target, f.dump()).map_err(io_err(&target))?;
        }
    }

    let t = Instant::now();
    let (records, calls, stats) = pool.install(|| {
        let records = prepass::filter_functions(&files);
        let calls = prepass::build_call_map(&records, &files);
        let stats = prepass::feature_stats(&files, &filter);
        (records, calls, stats)
    });
    times.prepass = t.elapsed().as_secs_f64();
    Ok(Analysis { files, records, calls, stats, filter })
}

/// Full run writing to an arbitrary sink.
pub fn run_to<W: Write + Send>(config: &RunConfig, sink: W) -> Result<(RunReport, W), PipelineError> {
    let (variations, _) = check(config)?;
    let mut report = RunReport { variations: variations.len(), ..RunReport::default() };
    let analysis = analyse(config, &mut report.seconds)?;

    for f in &analysis.files {
        match &f.status {
            ParseStatus::Skipped(reason) => {
                report.files_skipped.push(SkippedFile { path: f.path.clone(), reason: reason.clone() })
            }
            ParseStatus::Ok => {
                report.files_parsed += 1;
                let tds: Vec<u64> = prepass::vp_conditions(f).iter().map(|c| c.variables().len() as u64).collect();
                report.file_tangling.push(FileTangling {
                    path: f.path.clone(),
                    td_sum: tds.iter().sum(),
                    td_max: tds.iter().copied().max().unwrap_or(0),
                });
            }
        }
    }
    report.functions = analysis.records.len();

    let t = Instant::now();
    let scores = variations
        .iter()
        .any(|v| v.metric == Metric::Eigen)
        .then(|| eigen::eigenvector_centrality(&analysis.records, &analysis.calls, config.eigen));
    report.seconds.eigen = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let model = analysis.model(scores.as_deref());
    let mut csv = CsvSink::new(sink, &variations).map_err(|source| PipelineError::Write { rows: 0, source })?;
    let stream = stream_rows(model, &variations, config.compute_threads, config.queue_bound, |rec, values| {
        csv.row(rec, values)
    })?;
    let (sink, bytes) = csv.finish().map_err(|source| PipelineError::Write { rows: stream.rows, source })?;
    report.seconds.compute = t.elapsed().as_secs_f64();
    report.rows_written = stream.rows;
    report.peak_buffered_rows = stream.peak_buffered;
    report.bytes_written = bytes;
    Ok((report, sink))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamStats {
    pub rows: usize,
    pub peak_buffered: usize,
}

struct Window {
    /// Rows handed to the writer so far.
    written: usize,
    done: BTreeMap<usize, Vec<f64>>,
    peak: usize,
}

/// Computes every record's row on `threads` workers and hands rows to
/// `write` in record order. A worker only claims record `i` once
/// `i < written + threads + queue_bound`, which bounds buffered rows.
pub fn stream_rows<F>(
    model: Model<'_>,
    variations: &[Variation],
    threads: usize,
    queue_bound: usize,
    mut write: F,
) -> Result<StreamStats, PipelineError>
where
    F: FnMut(&FunctionRecord, &[f64]) -> io::Result<()>,
{
    let n = model.records.len();
    let limit = threads + queue_bound;
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let window = Mutex::new(Window { written: 0, done: BTreeMap::new(), peak: 0 });
    let ready = Condvar::new();

    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                {
                    let mut w = window.lock().unwrap();
                    while i >= w.written + limit && !abort.load(Ordering::SeqCst) {
                        w = ready.wait(w).unwrap();
                    }
                }
                if abort.load(Ordering::SeqCst) {
                    break;
                }
                let row = compute_row(model, i, variations);
                let mut w = window.lock().unwrap();
                w.done.insert(i, row);
                w.peak = w.peak.max(w.done.len());
                ready.notify_all();
            });
        }

        let mut written = 0;
        while written < n {
            let row = {
                let mut w = window.lock().unwrap();
                loop {
                    if let Some(row) = w.done.remove(&written) {
                        break row;
                    }
                    w = ready.wait(w).unwrap();
                }
            };
            if let Err(source) = write(&model.records[written], &row) {
                abort.store(true, Ordering::SeqCst);
                ready.notify_all();
                return Err(PipelineError::Write { rows: written, source });
            }
            written += 1;
            window.lock().unwrap().written = written;
            ready.notify_all();
        }
        let peak = window.lock().unwrap().peak;
        Ok(StreamStats { rows: written, peak_buffered: peak })
    })
}
