//! The `topicbridge` command line: `run`, `compare` and `synth`.
//!
//! Log verbosity comes from `TOPICBRIDGE_LOG` (`error`, `warn`, `info`,
//! `debug`; default `warn`).

use std::collections::HashSet;
use std::ffi::OsString;
use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use log::info;

use crate::config::{parse_month, RunConfig};
use crate::corpus::{load_corpus, write_corpus, OfflineFields};
use crate::error::{Error, Result};
use crate::output::{emit_outputs, OutputFiles};
use crate::runner::{compare_methods, ComparisonTable, MethodKind};
use crate::synth::{generate, SynthConfig};
use crate::textpipe::{
    build_vocabulary, english_stopwords, interleave_schedule, month_start, Source,
};

pub const LOG_ENV: &str = "TOPICBRIDGE_LOG";

#[derive(Debug, Parser)]
#[command(
    name = "topicbridge",
    version,
    about = "Common and distinct topics across an online and an offline stream"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured methods over a corpus and write the result files.
    Run(RunArgs),
    /// Like `run`, but defaults to all methods and prints a table of means.
    Compare(RunArgs),
    /// Write a seeded synthetic corpus with planted topics.
    Synth(SynthArgs),
}

/// Flags override values from `--config`, which override the defaults.
#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// JSON file with a RunConfig.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// First month, YYYY-MM.
    #[arg(long, value_parser = month_arg)]
    pub start_month: Option<NaiveDate>,
    /// Last month (inclusive), YYYY-MM.
    #[arg(long, value_parser = month_arg)]
    pub end_month: Option<NaiveDate>,
    #[arg(long)]
    pub k_c: Option<usize>,
    #[arg(long)]
    pub k_d: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub initial_step: Option<f64>,
    #[arg(long)]
    pub min_df: Option<usize>,
    #[arg(long)]
    pub max_df_ratio: Option<f64>,
    /// Keep at most this many random documents per source per month.
    #[arg(long)]
    pub per_month_cap: Option<usize>,
    /// Comma-separated: JointONMF, ONMF, SNMF.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<MethodKind>>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub top_terms: Option<usize>,
    /// Offline fields used as document text, e.g. `title`, `body`, `title+summary`.
    #[arg(long)]
    pub offline_fields: Option<OfflineFields>,
    /// Keep English stopwords in the vocabulary.
    #[arg(long)]
    pub keep_stopwords: bool,
    /// Also write measured seconds into metrics.csv.
    #[arg(long)]
    pub timing_in_metrics: bool,
}

fn month_arg(s: &str) -> std::result::Result<NaiveDate, String> {
    parse_month(s).map_err(|e| e.to_string())
}

impl RunArgs {
    /// Resolves the configuration: flag, then config file, then default.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $field:ident),* $(,)?) => {
                $(if let Some(v) = &self.$flag { cfg.$field = v.clone(); })*
            };
        }
        set!(
            k_c => k_c, k_d => k_d, alpha => alpha, beta => beta, max_iters => max_iters, tol => tol,
            seed => seed, initial_step => initial_step, min_df => min_df, max_df_ratio => max_df_ratio,
            methods => methods, output_dir => output_dir, top_terms => top_terms_count,
            offline_fields => offline_fields,
        );
        if self.corpus.is_some() {
            cfg.corpus_path = self.corpus.clone();
        }
        if self.start_month.is_some() {
            cfg.start_month = self.start_month;
        }
        if self.end_month.is_some() {
            cfg.end_month = self.end_month;
        }
        if self.per_month_cap.is_some() {
            cfg.per_month_cap = self.per_month_cap;
        }
        if self.keep_stopwords {
            cfg.english_stopwords = false;
        }
        if self.timing_in_metrics {
            cfg.timing_in_metrics = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = SynthConfig::default().months)]
    pub months: usize,
    #[arg(long, default_value_t = SynthConfig::default().seed)]
    pub seed: u64,
    /// Documents per source per month.
    #[arg(long, default_value_t = SynthConfig::default().docs_per_source_month)]
    pub docs_per_month: usize,
    #[arg(long, default_value_t = SynthConfig::default().vocab_size)]
    pub vocab_size: usize,
    /// First month, YYYY-MM.
    #[arg(long, value_parser = month_arg)]
    pub start_month: Option<NaiveDate>,
    /// Corpus file to write.
    #[arg(long, default_value = "synthetic.jsonl")]
    pub output: PathBuf,
}

/// Everything a pipeline run produced.
#[derive(Debug)]
pub struct PipelineRun {
    pub config: RunConfig,
    pub table: ComparisonTable,
    pub files: OutputFiles,
}

/// Loads the corpus, builds the schedule, runs the methods and writes the files.
///
/// Documents outside the resolved month range are dropped.
pub fn run_pipeline(mut config: RunConfig) -> Result<PipelineRun> {
    config.validate()?;
    let path = config
        .corpus_path
        .clone()
        .ok_or_else(|| Error::Parameter("no corpus given (--corpus or corpus_path)".into()))?;
    let docs = load_corpus(&path, &config.offline_fields)?;
    // Absolute, so the written config.json works from any directory.
    config.corpus_path = Some(std::fs::canonicalize(&path).map_err(|e| Error::io(&path, e))?);
    config.resolve_months(&docs)?;
    let (start, end) = (
        config.start_month.expect("resolved"),
        config.end_month.expect("resolved"),
    );
    let docs: Vec<_> = docs
        .into_iter()
        .filter(|d| {
            let m = month_start(d.timestamp.date_naive());
            start <= m && m <= end
        })
        .collect();
    if docs.is_empty() {
        return Err(Error::Parameter(format!(
            "no documents between {start} and {end}"
        )));
    }
    info!("{} documents from {}", docs.len(), path.display());

    let stopwords = if config.english_stopwords {
        english_stopwords()
    } else {
        HashSet::new()
    };
    let vocab = build_vocabulary(&docs, config.min_df, config.max_df_ratio, &stopwords)?;
    info!("vocabulary of {} terms", vocab.len());
    let (online, offline): (Vec<_>, Vec<_>) =
        docs.into_iter().partition(|d| d.source == Source::Online);
    let mut schedule = interleave_schedule(&online, &offline, start, end)?;
    if let Some(cap) = config.per_month_cap {
        schedule = schedule.capped(cap, config.seed);
    }

    let table = compare_methods(
        &schedule,
        &config.methods,
        &config.joint_params(),
        &vocab,
        config.top_terms_count,
    )?;
    let files = emit_outputs(&table, &config, &config.output_dir)?;
    Ok(PipelineRun {
        config,
        table,
        files,
    })
}

fn print_means(table: &ComparisonTable) {
    println!(
        "{:<10} {:>5} {:>14} {:>12} {:>12} {:>12}",
        "method", "steps", "mean_cscore", "mean_dscore", "mean_re", "mean_wall_s"
    );
    for s in &table.summaries {
        println!(
            "{:<10} {:>5} {:>14.6e} {:>12.4} {:>12.4} {:>12.4}",
            s.method.name(),
            s.steps,
            s.mean_cscore,
            s.mean_dscore,
            s.mean_re,
            s.mean_wall_clock
        );
    }
}

fn synth(args: &SynthArgs) -> Result<()> {
    let defaults = SynthConfig::default();
    let cfg = SynthConfig {
        months: args.months,
        seed: args.seed,
        docs_per_source_month: args.docs_per_month,
        vocab_size: args.vocab_size,
        start_month: args.start_month.unwrap_or(defaults.start_month),
        ..defaults
    };
    let corpus = generate(&cfg)?;
    write_corpus(&args.output, &corpus.records)?;
    println!(
        "wrote {} records to {}",
        corpus.records.len(),
        args.output.display()
    );
    Ok(())
}

/// Executes one parsed command.
pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run(args) => {
            let run = run_pipeline(args.resolve()?)?;
            for path in [&run.files.metrics, &run.files.topics, &run.files.config] {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Compare(args) => {
            let mut cfg = args.resolve()?;
            if args.methods.is_none() {
                cfg.methods = MethodKind::ALL.to_vec();
            }
            let run = run_pipeline(cfg)?;
            print_means(&run.table);
            println!("results in {}", run.config.output_dir.display());
            Ok(())
        }
        Command::Synth(args) => synth(args),
    }
}

fn init_logging() {
    let filter = std::env::var(LOG_ENV).unwrap_or_else(|_| "warn".into());
    let _ = env_logger::Builder::new().parse_filters(&filter).try_init();
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    init_logging();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn main() -> std::process::ExitCode {
    let code = main_with_args(std::env::args_os());
    std::process::ExitCode::from(code.clamp(0, 255) as u8)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> std::result::Result<Cli, clap::Error> {
        Cli::try_parse_from(std::iter::once("topicbridge").chain(args.iter().copied()))
    }

    #[test]
    fn flags_override_defaults() {
        let cli = parse(&[
            "run",
            "--k-c",
            "3",
            "--methods",
            "onmf,snmf",
            "--start-month",
            "2020-02",
        ])
        .unwrap();
        let Command::Run(args) = cli.command else {
            panic!()
        };
        let cfg = args.resolve().unwrap();
        assert_eq!(cfg.k_c, 3);
        assert_eq!(cfg.k_d, 3);
        assert_eq!(cfg.methods, vec![MethodKind::ONMF, MethodKind::SNMF]);
        assert_eq!(cfg.start_month, NaiveDate::from_ymd_opt(2020, 2, 1));
    }

    #[test]
    fn zero_k_c_is_rejected() {
        let cli = parse(&["run", "--k-c", "0"]).unwrap();
        let Command::Run(args) = cli.command else {
            panic!()
        };
        assert!(args
            .resolve()
            .unwrap_err()
            .to_string()
            .contains("k_c must be >= 1"));
    }

    #[test]
    fn unknown_flags_and_values_fail_to_parse() {
        assert!(parse(&["run", "--kc", "2"]).is_err());
        assert!(parse(&["run", "--methods", "lda"]).is_err());
        assert!(parse(&["frobnicate"]).is_err());
        assert!(parse(&["run", "--start-month", "soon"]).is_err());
    }
}
