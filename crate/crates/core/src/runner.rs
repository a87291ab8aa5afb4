//! Streaming orchestration over an interleaved schedule.
//!
//! The first non-empty batch is factorized with plain NMF to seed `H_t`.
//! Every later batch runs one of the three methods, is scored against the
//! previous topics, and hands its topics forward as the next `H_t`.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use log::{info, warn};
use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorization::{
    nmf_factorize, nmf_factorize_restarts, onmf_update, reconstruction_error, seeded_rng,
    tail_rows, uniform_matrix, FactorPair, SolverOptions, TermDocMatrix,
};
use crate::joint::{joint_onmf_step, split_common_distinct, JointParams};
use crate::metrics::{assign_common_topics, cscore, dscore, top_terms, MetricRecord};
use crate::textpipe::{tfidf_matrix, StreamSchedule, Vocabulary};

/// Restarts for the factorization of the first non-empty batch.
const INITIAL_RESTARTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum MethodKind {
    JointONMF,
    ONMF,
    SNMF,
}

impl MethodKind {
    pub const ALL: [MethodKind; 3] = [MethodKind::JointONMF, MethodKind::ONMF, MethodKind::SNMF];

    pub fn name(self) -> &'static str {
        match self {
            MethodKind::JointONMF => "JointONMF",
            MethodKind::ONMF => "ONMF",
            MethodKind::SNMF => "SNMF",
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "jointonmf" | "joint" => Ok(MethodKind::JointONMF),
            "onmf" => Ok(MethodKind::ONMF),
            "snmf" => Ok(MethodKind::SNMF),
            _ => Err(Error::Parameter(format!(
                "unknown method {s:?}, expected one of JointONMF, ONMF, SNMF"
            ))),
        }
    }
}

// Accepts the same spellings as `FromStr`.
impl<'de> Deserialize<'de> for MethodKind {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermWeight {
    pub term: String,
    pub weight: f64,
}

/// Top terms of each topic in one group.
pub type TopicTerms = Vec<Vec<TermWeight>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicReport {
    pub time_index: usize,
    pub label: String,
    /// Topics shared between the previous step and the new batch.
    pub common_topics: TopicTerms,
    /// Distinct topics on the before-`t` side.
    pub distinct_prior: TopicTerms,
    /// Distinct topics of the new batch.
    pub distinct_new: TopicTerms,
}

/// Numeric topic blocks behind a [`TopicReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct TopicSnapshot {
    pub time_index: usize,
    pub common: Array2<f64>,
    pub distinct_prior: Array2<f64>,
    pub distinct_new: Array2<f64>,
}

/// Bookkeeping for one schedule step, including skipped ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub time_index: usize,
    pub label: String,
    /// Rows in the matrix the method actually factorized at this step.
    pub input_rows: usize,
    /// Topic count used (below `k` only when the batch was too small).
    pub k_used: usize,
    pub skipped: bool,
    pub warning: Option<String>,
}

#[derive(Debug, Clone)]
pub struct TimeSeriesResult {
    pub method: MethodKind,
    pub params: JointParams,
    /// One record per executed step after the initial one.
    pub records: Vec<MetricRecord>,
    pub reports: Vec<TopicReport>,
    pub snapshots: Vec<TopicSnapshot>,
    pub steps: Vec<StepTrace>,
}

impl TimeSeriesResult {
    pub fn mean_cscore(&self) -> f64 {
        mean(self.records.iter().map(|r| r.cscore))
    }

    pub fn mean_dscore(&self) -> f64 {
        mean(self.records.iter().map(|r| r.dscore))
    }

    pub fn mean_re(&self) -> f64 {
        mean(self.records.iter().map(|r| r.re))
    }

    pub fn mean_wall_clock(&self) -> f64 {
        mean(self.records.iter().map(|r| r.wall_clock))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Method-specific state carried between steps.
enum Carry {
    Joint,
    Online(FactorPair),
    Standard(TermDocMatrix),
}

struct StepOutput {
    record: MetricRecord,
    snapshot: TopicSnapshot,
    next_topics: Array2<f64>,
    input_rows: usize,
    k_used: usize,
    warning: Option<String>,
}

fn rows_of(h: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    h.select(Axis(0), idx)
}

/// Pads or truncates `h` to exactly `k` rows; padding draws are seeded and
/// scaled to the mean level of `h`.
fn fit_rows(h: Array2<f64>, k: usize, seed: u64) -> Array2<f64> {
    if h.nrows() >= k {
        return h.slice(s![..k, ..]).to_owned();
    }
    let level = h.mean().filter(|v| *v > 0.0).unwrap_or(1.0);
    let mut rng = seeded_rng(seed);
    let pad = uniform_matrix(k - h.nrows(), h.ncols(), &mut rng) * level;
    concatenate(Axis(0), &[h.view(), pad.view()]).expect("same column count")
}

fn step_solver(params: &JointParams, time_index: usize) -> SolverOptions {
    SolverOptions {
        seed: params.solver.seed.wrapping_add(time_index as u64),
        ..params.solver
    }
}

fn joint_step(
    h_t: &Array2<f64>,
    u: &TermDocMatrix,
    params: &JointParams,
    t: usize,
) -> Result<StepOutput> {
    let k = params.k();
    let limit = u.rows().min(u.cols());
    let mut warning = None;
    let mut step_params = JointParams {
        solver: step_solver(params, t),
        ..*params
    };
    if k > limit {
        let k_used = limit;
        if k_used <= params.k_c {
            return Err(Error::Parameter(format!(
                "batch too small for k_c = {} (min dimension {limit})",
                params.k_c
            )));
        }
        step_params.k_d = k_used - params.k_c;
        warning = Some(format!(
            "k reduced from {k} to {k_used}: batch has {} rows",
            u.rows()
        ));
    }
    let k_used = step_params.k();
    let h_in = h_t.slice(s![..k_used, ..]);

    let j = joint_onmf_step(h_in, u, &step_params)?;
    let split = split_common_distinct(&j);
    let re = reconstruction_error(u, &FactorPair::new(j.w_u.clone(), j.h_u.clone())?)?;
    let c = cscore(split.prior_common.view(), split.common.view())?;
    let d = dscore(
        split.prior_distinct.view(),
        split.distinct.view(),
        params.dscore_epsilon,
    )?;

    // Topics that could not be refit on a small batch carry over unchanged.
    let next_topics = if k_used < k {
        concatenate(Axis(0), &[j.h_u.view(), h_t.slice(s![k_used.., ..])]).expect("same columns")
    } else {
        j.h_u.clone()
    };
    Ok(StepOutput {
        record: MetricRecord {
            time_index: t,
            method: MethodKind::JointONMF,
            cscore: c,
            dscore: d,
            re,
            wall_clock: 0.0,
        },
        snapshot: TopicSnapshot {
            time_index: t,
            common: split.common,
            distinct_prior: split.prior_distinct,
            distinct_new: split.distinct,
        },
        next_topics,
        input_rows: u.rows(),
        k_used,
        warning,
    })
}

/// Scores a baseline step by pairing previous and new topics.
fn baseline_output(
    method: MethodKind,
    h_prev: &Array2<f64>,
    fit: &FactorPair,
    u: &TermDocMatrix,
    params: &JointParams,
    t: usize,
    input_rows: usize,
) -> Result<StepOutput> {
    let assignment = assign_common_topics(h_prev.view(), fit.h.view(), params.k_c)?;
    let prev_common: Vec<usize> = assignment.pairs.iter().map(|p| p.0).collect();
    let new_common: Vec<usize> = assignment.pairs.iter().map(|p| p.1).collect();
    let prior_c = rows_of(h_prev, &prev_common);
    let new_c = rows_of(&fit.h, &new_common);
    let prior_d = rows_of(h_prev, &assignment.distinct_prev);
    let new_d = rows_of(&fit.h, &assignment.distinct_new);

    let w_new = tail_rows(&fit.w, u.rows());
    let re = reconstruction_error(u, &FactorPair::new(w_new, fit.h.clone())?)?;
    Ok(StepOutput {
        record: MetricRecord {
            time_index: t,
            method,
            cscore: cscore(prior_c.view(), new_c.view())?,
            dscore: dscore(prior_d.view(), new_d.view(), params.dscore_epsilon)?,
            re,
            wall_clock: 0.0,
        },
        snapshot: TopicSnapshot {
            time_index: t,
            common: new_c,
            distinct_prior: prior_d,
            distinct_new: new_d,
        },
        next_topics: fit.h.clone(),
        input_rows,
        k_used: fit.k(),
        warning: None,
    })
}

fn terms_for(block: ArrayView2<'_, f64>, vocab: &Vocabulary, count: usize) -> Result<TopicTerms> {
    block
        .rows()
        .into_iter()
        .map(|row| {
            Ok(top_terms(row, vocab, count)?
                .into_iter()
                .map(|(term, weight)| TermWeight { term, weight })
                .collect())
        })
        .collect()
}

/// Runs `method` over every step of `schedule`.
///
/// `top_terms_count` is the number of terms listed per topic in the reports.
pub fn run_stream(
    schedule: &StreamSchedule,
    method: MethodKind,
    params: &JointParams,
    vocab: &Vocabulary,
    top_terms_count: usize,
) -> Result<TimeSeriesResult> {
    if schedule.is_empty() {
        return Err(Error::Parameter("schedule has no steps".into()));
    }
    params.validate()?;
    let k = params.k();
    let count = top_terms_count.min(vocab.len()).max(1);

    let mut result = TimeSeriesResult {
        method,
        params: *params,
        records: Vec::new(),
        reports: Vec::new(),
        snapshots: Vec::new(),
        steps: Vec::new(),
    };
    let mut topics: Option<Array2<f64>> = None;
    let mut carry = match method {
        MethodKind::JointONMF => Carry::Joint,
        MethodKind::ONMF => Carry::Online(FactorPair {
            w: Array2::zeros((0, k)),
            h: Array2::zeros((k, vocab.len())),
        }),
        MethodKind::SNMF => Carry::Standard(TermDocMatrix::empty(vocab.len())),
    };

    for step in &schedule.steps {
        let t = step.time_index;
        let label = step.label();
        if step.is_empty() {
            info!("{method}: step {t} ({label}) has no documents, skipping");
            result.steps.push(StepTrace {
                time_index: t,
                label,
                input_rows: 0,
                k_used: 0,
                skipped: true,
                warning: Some("empty batch".into()),
            });
            continue;
        }
        let u = tfidf_matrix(&step.documents, vocab)?;

        let Some(h_t) = topics.as_ref() else {
            // Initial factorization seeds H_t.
            let started = Instant::now();
            let k0 = k.min(u.rows()).min(u.cols());
            let fit = nmf_factorize_restarts(&u, k0, &step_solver(params, t), INITIAL_RESTARTS)?;
            let elapsed = started.elapsed().as_secs_f64();
            let warning = (k0 < k)
                .then(|| format!("k reduced from {k} to {k0}: batch has {} rows", u.rows()));
            if let Some(w) = &warning {
                warn!("{method}: step {t} ({label}): {w}");
            }
            let h0 = fit_rows(fit.h.clone(), k, params.solver.seed ^ 0x5eed);
            match &mut carry {
                Carry::Joint => {}
                Carry::Online(pair) => {
                    let w0 = if k0 < k {
                        concatenate(
                            Axis(1),
                            &[fit.w.view(), Array2::zeros((fit.w.nrows(), k - k0)).view()],
                        )
                        .expect("same rows")
                        .mapv(|x| x.max(params.solver.epsilon))
                    } else {
                        fit.w.clone()
                    };
                    *pair = FactorPair {
                        w: w0,
                        h: h0.clone(),
                    };
                }
                Carry::Standard(acc) => *acc = u.clone(),
            }
            info!("{method}: step {t} ({label}) initial factorization in {elapsed:.3}s");
            result.steps.push(StepTrace {
                time_index: t,
                label,
                input_rows: u.rows(),
                k_used: k0,
                skipped: false,
                warning,
            });
            topics = Some(h0);
            continue;
        };

        let started = Instant::now();
        let mut out = match &mut carry {
            Carry::Joint => joint_step(h_t, &u, params, t)?,
            Carry::Online(pair) => {
                let next = onmf_update(pair, &u, &step_solver(params, t))?;
                let rows = next.w.nrows();
                let out = baseline_output(method, h_t, &next, &u, params, t, rows)?;
                *pair = next;
                out
            }
            Carry::Standard(acc) => {
                let stacked = acc.vstack(&u)?;
                let fit = nmf_factorize(&stacked, k, &step_solver(params, t))?;
                let out = baseline_output(method, h_t, &fit, &u, params, t, stacked.rows())?;
                *acc = stacked;
                out
            }
        };
        out.record.wall_clock = started.elapsed().as_secs_f64();
        if let Some(w) = &out.warning {
            warn!("{method}: step {t} ({label}): {w}");
        }
        info!(
            "{method}: step {t} ({label}) cscore={:.4e} dscore={:.4} re={:.4} in {:.3}s",
            out.record.cscore, out.record.dscore, out.record.re, out.record.wall_clock
        );

        result.reports.push(TopicReport {
            time_index: t,
            label: label.clone(),
            common_topics: terms_for(out.snapshot.common.view(), vocab, count)?,
            distinct_prior: terms_for(out.snapshot.distinct_prior.view(), vocab, count)?,
            distinct_new: terms_for(out.snapshot.distinct_new.view(), vocab, count)?,
        });
        result.steps.push(StepTrace {
            time_index: t,
            label,
            input_rows: out.input_rows,
            k_used: out.k_used,
            skipped: false,
            warning: out.warning,
        });
        result.records.push(out.record);
        result.snapshots.push(out.snapshot);
        topics = Some(out.next_topics);
    }
    Ok(result)
}

/// Per-method means over all recorded steps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: MethodKind,
    pub steps: usize,
    pub mean_cscore: f64,
    pub mean_dscore: f64,
    pub mean_re: f64,
    pub mean_wall_clock: f64,
}

#[derive(Debug, Clone)]
pub struct ComparisonTable {
    pub results: Vec<TimeSeriesResult>,
    pub summaries: Vec<MethodSummary>,
}

impl ComparisonTable {
    pub fn result(&self, method: MethodKind) -> Option<&TimeSeriesResult> {
        self.results.iter().find(|r| r.method == method)
    }

    pub fn summary(&self, method: MethodKind) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }
}

/// Runs each method on the same schedule and parameters, concurrently;
/// results come back in the order of `methods`.
pub fn compare_methods(
    schedule: &StreamSchedule,
    methods: &[MethodKind],
    params: &JointParams,
    vocab: &Vocabulary,
    top_terms_count: usize,
) -> Result<ComparisonTable> {
    if methods.is_empty() {
        return Err(Error::Parameter("at least one method is required".into()));
    }
    // Runs share nothing but read-only inputs, so each gets its own thread.
    let results = std::thread::scope(|scope| {
        let handles: Vec<_> = methods
            .iter()
            .map(|&m| scope.spawn(move || run_stream(schedule, m, params, vocab, top_terms_count)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("method run panicked"))
            .collect::<Result<Vec<_>>>()
    })?;
    let summaries = results
        .iter()
        .map(|r| MethodSummary {
            method: r.method,
            steps: r.records.len(),
            mean_cscore: r.mean_cscore(),
            mean_dscore: r.mean_dscore(),
            mean_re: r.mean_re(),
            mean_wall_clock: r.mean_wall_clock(),
        })
        .collect();
    Ok(ComparisonTable { results, summaries })
}
