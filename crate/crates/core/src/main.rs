use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use rastmetrics::cparser::{OnError, DEFAULT_FEATURE_REGEX};
use rastmetrics::metrics::EigenParams;
use rastmetrics::pipeline::{run, RunConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ErrorPolicy {
    Skip,
    BestEffort,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportFormat {
    Json,
    Text,
}

/// Variability-aware code metrics for un-preprocessed C.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    /// Source tree to analyse.
    #[arg(long)]
    src: PathBuf,
    /// File extensions to parse.
    #[arg(long, value_delimiter = ',', default_value = "c,h")]
    ext: Vec<String>,
    /// Macro names matching this regex count as features.
    #[arg(long, default_value = DEFAULT_FEATURE_REGEX)]
    features_regex: String,
    /// Restrict features to the names listed in this file.
    #[arg(long)]
    feature_list: Option<PathBuf>,
    /// Metric variations, comma-separated ids or globs.
    #[arg(long, default_value = "*")]
    metrics: String,
    #[arg(long, default_value_t = default_threads())]
    parse_threads: usize,
    #[arg(long, default_value_t = default_threads())]
    compute_threads: usize,
    /// Finished rows allowed to wait for the writer, beyond one per worker.
    #[arg(long, default_value_t = 64)]
    queue_bound: usize,
    #[arg(long, default_value = "metrics.csv")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "skip")]
    on_error: ErrorPolicy,
    #[arg(long, default_value_t = EigenParams::default().iterations)]
    eigen_iters: usize,
    #[arg(long, default_value_t = EigenParams::default().damping)]
    eigen_damping: f64,
    /// Write a debug dump of every parsed file into this directory.
    #[arg(long)]
    dump_rast: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    report: ReportFormat,
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = RunConfig {
        src: cli.src,
        extensions: cli.ext,
        feature_regex: cli.features_regex,
        feature_list: cli.feature_list,
        metrics: cli.metrics,
        parse_threads: cli.parse_threads,
        compute_threads: cli.compute_threads,
        queue_bound: cli.queue_bound,
        on_error: match cli.on_error {
            ErrorPolicy::Skip => OnError::SkipFile,
            ErrorPolicy::BestEffort => OnError::BestEffort,
        },
        eigen: EigenParams { iterations: cli.eigen_iters, damping: cli.eigen_damping },
        dump_rast: cli.dump_rast,
    };
    match run(&config, &cli.out) {
        Ok(report) => {
            match cli.report {
                ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&report).expect("serializable")),
                ReportFormat::Text => print!("{}", report.to_text()),
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
