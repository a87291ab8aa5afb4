//! Result files: `metrics.csv`, `topics.json`, `config.json`, `timing.csv`.
//!
//! Everything except `timing.csv` is a pure function of the configuration
//! and the corpus. Measured solver time goes to `timing.csv`; the
//! `wall_clock_s` column of `metrics.csv` stays empty unless
//! [`RunConfig::timing_in_metrics`] is set.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::runner::{ComparisonTable, MethodKind, TopicTerms};

pub const METRICS_FILE: &str = "metrics.csv";
pub const TOPICS_FILE: &str = "topics.json";
pub const CONFIG_FILE: &str = "config.json";
pub const TIMING_FILE: &str = "timing.csv";

pub const METRICS_HEADER: [&str; 6] = [
    "time_index",
    "method",
    "cscore",
    "dscore",
    "re",
    "wall_clock_s",
];

/// Paths of the files written by [`emit_outputs`].
#[derive(Debug, Clone)]
pub struct OutputFiles {
    pub metrics: PathBuf,
    pub topics: PathBuf,
    pub config: PathBuf,
    pub timing: PathBuf,
}

#[derive(Serialize)]
struct TopicsDoc<'a> {
    steps: Vec<StepTopics<'a>>,
}

#[derive(Serialize)]
struct StepTopics<'a> {
    time_index: usize,
    label: &'a str,
    methods: Vec<MethodTopics<'a>>,
}

#[derive(Serialize)]
struct MethodTopics<'a> {
    method: MethodKind,
    common: &'a TopicTerms,
    distinct_prior: &'a TopicTerms,
    distinct_new: &'a TopicTerms,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| Error::io(path, e.into()))
}

fn write_metrics(path: &Path, table: &ComparisonTable, with_timing: bool) -> Result<()> {
    let mut out = csv_writer(path)?;
    let fail = |e: csv::Error| Error::io(path, e.into());
    out.write_record(METRICS_HEADER).map_err(fail)?;
    for result in &table.results {
        for r in &result.records {
            let wall = if with_timing {
                r.wall_clock.to_string()
            } else {
                String::new()
            };
            out.write_record([
                r.time_index.to_string(),
                r.method.to_string(),
                r.cscore.to_string(),
                r.dscore.to_string(),
                r.re.to_string(),
                wall,
            ])
            .map_err(fail)?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn write_timing(path: &Path, table: &ComparisonTable) -> Result<()> {
    let mut out = csv_writer(path)?;
    let fail = |e: csv::Error| Error::io(path, e.into());
    out.write_record([
        "time_index",
        "method",
        "label",
        "input_rows",
        "k_used",
        "skipped",
        "wall_clock_s",
    ])
    .map_err(fail)?;
    for result in &table.results {
        for step in &result.steps {
            let wall = result
                .records
                .iter()
                .find(|r| r.time_index == step.time_index)
                .map(|r| r.wall_clock.to_string())
                .unwrap_or_default();
            out.write_record([
                step.time_index.to_string(),
                result.method.to_string(),
                step.label.clone(),
                step.input_rows.to_string(),
                step.k_used.to_string(),
                step.skipped.to_string(),
                wall,
            ])
            .map_err(fail)?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn topics_doc(table: &ComparisonTable) -> TopicsDoc<'_> {
    let mut indices: Vec<usize> = table
        .results
        .iter()
        .flat_map(|r| r.reports.iter().map(|rep| rep.time_index))
        .collect();
    indices.sort_unstable();
    indices.dedup();
    let steps = indices
        .into_iter()
        .map(|t| {
            let mut label = "";
            let methods = table
                .results
                .iter()
                .filter_map(|r| {
                    r.reports
                        .iter()
                        .find(|rep| rep.time_index == t)
                        .map(|rep| (r.method, rep))
                })
                .map(|(method, rep)| {
                    label = &rep.label;
                    MethodTopics {
                        method,
                        common: &rep.common_topics,
                        distinct_prior: &rep.distinct_prior,
                        distinct_new: &rep.distinct_new,
                    }
                })
                .collect();
            StepTopics {
                time_index: t,
                label,
                methods,
            }
        })
        .collect();
    TopicsDoc { steps }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Writes all result files into `output_dir`, creating it if needed.
pub fn emit_outputs(
    table: &ComparisonTable,
    config: &RunConfig,
    output_dir: &Path,
) -> Result<OutputFiles> {
    fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;
    let files = OutputFiles {
        metrics: output_dir.join(METRICS_FILE),
        topics: output_dir.join(TOPICS_FILE),
        config: output_dir.join(CONFIG_FILE),
        timing: output_dir.join(TIMING_FILE),
    };
    write_metrics(&files.metrics, table, config.timing_in_metrics)?;
    write_json(&files.topics, &topics_doc(table))?;
    write_json(&files.config, config)?;
    write_timing(&files.timing, table)?;
    Ok(files)
}
