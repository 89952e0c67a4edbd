//! Per-window report records followed by one aggregate record.
//!
//! Runtimes are left out unless asked for, so that two runs with the same
//! seed produce byte-identical files.

use std::io::Write;

use serde::Serialize;
use sparsestream_core::{StreamAggregate, WindowReport};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum ReportFormat {
    #[default]
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EmitOptions {
    pub format: ReportFormat,
    pub timings: bool,
}

#[derive(Serialize)]
struct WindowRecord {
    record: &'static str,
    window_index: usize,
    n_objects: usize,
    bank_size: usize,
    purity: Option<f64>,
    f_measure: Option<f64>,
    n_clusters: usize,
    n_outliers: usize,
    solver_iterations: usize,
    converged: bool,
    skipped: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    runtime_ms: Option<f64>,
}

#[derive(Serialize)]
struct AggregateRecord {
    record: &'static str,
    windows: usize,
    processed: usize,
    skipped: usize,
    mean_purity: Option<f64>,
    mean_f_measure: Option<f64>,
    mean_clusters: Option<f64>,
    total_outliers: usize,
    all_converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_runtime_ms: Option<f64>,
}

const CSV_COLUMNS: [&str; 14] = [
    "record",
    "window_index",
    "n_objects",
    "bank_size",
    "purity",
    "f_measure",
    "n_clusters",
    "n_outliers",
    "solver_iterations",
    "converged",
    "skipped",
    "runtime_ms",
    "windows",
    "processed",
];

fn window_record(r: &WindowReport, timings: bool) -> WindowRecord {
    WindowRecord {
        record: "window",
        window_index: r.window_index,
        n_objects: r.n_objects,
        bank_size: r.bank_size,
        purity: r.purity,
        f_measure: r.f_measure,
        n_clusters: r.n_clusters,
        n_outliers: r.n_outliers,
        solver_iterations: r.solver_iterations,
        converged: r.converged,
        skipped: r.skipped,
        runtime_ms: timings.then_some(r.runtime_ms),
    }
}

fn aggregate_record(a: &StreamAggregate, timings: bool) -> AggregateRecord {
    AggregateRecord {
        record: "aggregate",
        windows: a.windows,
        processed: a.processed,
        skipped: a.skipped,
        mean_purity: a.mean_purity,
        mean_f_measure: a.mean_f_measure,
        mean_clusters: a.mean_clusters,
        total_outliers: a.total_outliers,
        all_converged: a.all_converged,
        mean_runtime_ms: if timings { a.mean_runtime_ms } else { None },
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

/// Writes one record per report and a trailing aggregate over all of them.
pub fn write_reports<W: Write>(out: W, reports: &[WindowReport], opts: EmitOptions) -> Result<()> {
    let aggregate = StreamAggregate::from_reports(reports);
    match opts.format {
        ReportFormat::Jsonl => {
            let mut out = out;
            let io = |e| Error::io("<report>", e);
            for r in reports {
                serde_json::to_writer(&mut out, &window_record(r, opts.timings))?;
                out.write_all(b"\n").map_err(io)?;
            }
            serde_json::to_writer(&mut out, &aggregate_record(&aggregate, opts.timings))?;
            out.write_all(b"\n").map_err(io)?;
            out.flush().map_err(io)
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(CSV_COLUMNS)?;
            let time = |v: f64| if opts.timings { format!("{v:?}") } else { String::new() };
            for r in reports {
                w.write_record([
                    "window".to_string(),
                    r.window_index.to_string(),
                    r.n_objects.to_string(),
                    r.bank_size.to_string(),
                    opt(r.purity),
                    opt(r.f_measure),
                    r.n_clusters.to_string(),
                    r.n_outliers.to_string(),
                    r.solver_iterations.to_string(),
                    r.converged.to_string(),
                    r.skipped.to_string(),
                    time(r.runtime_ms),
                    String::new(),
                    String::new(),
                ])?;
            }
            // Aggregate row: n_objects is the total, n_clusters the mean,
            // skipped the number of skipped windows.
            let a = &aggregate;
            w.write_record([
                "aggregate".to_string(),
                String::new(),
                reports.iter().map(|r| r.n_objects).sum::<usize>().to_string(),
                String::new(),
                opt(a.mean_purity),
                opt(a.mean_f_measure),
                opt(a.mean_clusters),
                a.total_outliers.to_string(),
                String::new(),
                a.all_converged.to_string(),
                a.skipped.to_string(),
                if opts.timings { opt(a.mean_runtime_ms) } else { String::new() },
                a.windows.to_string(),
                a.processed.to_string(),
            ])?;
            w.flush().map_err(|e| Error::io("<report>", e))
        }
    }
}

/// Writes reports to `path`, or to stdout when `path` is `-`.
pub fn emit_reports(reports: &[WindowReport], path: &std::path::Path, opts: EmitOptions) -> Result<()> {
    if path.as_os_str() == "-" {
        return write_reports(std::io::stdout().lock(), reports, opts);
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_reports(std::io::BufWriter::new(file), reports, opts)
}
