//! Seeded synthetic two-source corpora with planted topics.
//!
//! The vocabulary is cut into blocks of `words_per_topic` words. The first
//! `shared_topics` blocks are topics present in both sources every month;
//! each (month, source) pair additionally gets `drifting_topics` blocks of
//! its own, rotating through the remaining blocks. Documents are Dirichlet
//! mixtures of the topics active for their batch.

use chrono::{Datelike, Months, NaiveDate};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::corpus::CorpusRecord;
use crate::error::{Error, Result};
use crate::factorization::seeded_rng;
use crate::textpipe::{Source, Vocabulary};

const BLOCK_NAMES: [&str; 20] = [
    "vaccine", "mask", "lockdown", "trial", "booster", "school", "travel", "hospital", "mandate",
    "variant", "testing", "economy", "election", "protest", "research", "symptom", "immunity",
    "pharmacy", "distance", "outbreak",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub months: usize,
    pub start_month: NaiveDate,
    pub docs_per_source_month: usize,
    pub vocab_size: usize,
    pub words_per_topic: usize,
    pub shared_topics: usize,
    pub drifting_topics: usize,
    /// Symmetric Dirichlet concentration of per-document topic mixtures.
    pub doc_concentration: f64,
    /// Probability that a word is drawn uniformly from the whole vocabulary.
    pub noise: f64,
    pub online_len: (usize, usize),
    pub title_len: (usize, usize),
    pub summary_len: (usize, usize),
    pub body_len: (usize, usize),
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            months: 6,
            start_month: NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date"),
            docs_per_source_month: 200,
            vocab_size: 500,
            words_per_topic: 25,
            shared_topics: 2,
            drifting_topics: 3,
            doc_concentration: 0.1,
            noise: 0.05,
            online_len: (12, 20),
            title_len: (6, 10),
            summary_len: (25, 35),
            body_len: (80, 120),
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.months == 0 || self.docs_per_source_month == 0 {
            return Err(Error::Parameter(
                "months and docs_per_source_month must be >= 1".into(),
            ));
        }
        if self.words_per_topic == 0 || !self.vocab_size.is_multiple_of(self.words_per_topic) {
            return Err(Error::Parameter(format!(
                "vocab_size {} must be a positive multiple of words_per_topic {}",
                self.vocab_size, self.words_per_topic
            )));
        }
        let blocks = self.vocab_size / self.words_per_topic;
        if blocks < self.shared_topics + 2 * self.drifting_topics {
            return Err(Error::Parameter(format!(
                "{blocks} word blocks cannot hold {} shared and 2 x {} drifting topics",
                self.shared_topics, self.drifting_topics
            )));
        }
        if self.shared_topics + self.drifting_topics == 0 {
            return Err(Error::Parameter("at least one topic is required".into()));
        }
        if !(0.0..1.0).contains(&self.noise)
            || self.doc_concentration.is_nan()
            || self.doc_concentration <= 0.0
        {
            return Err(Error::Parameter(
                "noise must be in [0, 1) and doc_concentration > 0".into(),
            ));
        }
        for (lo, hi) in [
            self.online_len,
            self.title_len,
            self.summary_len,
            self.body_len,
        ] {
            if lo == 0 || lo > hi {
                return Err(Error::Parameter(format!("bad length range {lo}..={hi}")));
            }
        }
        Ok(())
    }
}

/// Generated records together with the ground-truth topics.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub config: SynthConfig,
    pub records: Vec<CorpusRecord>,
    /// All generated words, in block order.
    pub words: Vec<String>,
    /// Shared topics as distributions over `words`.
    pub shared: Array2<f64>,
}

impl SyntheticCorpus {
    /// Shared topics re-indexed onto `vocab`; words absent from it are dropped.
    pub fn shared_in(&self, vocab: &Vocabulary) -> Array2<f64> {
        let mut out = Array2::zeros((self.shared.nrows(), vocab.len()));
        for (w, word) in self.words.iter().enumerate() {
            if let Some(j) = vocab.index_of(word) {
                for t in 0..self.shared.nrows() {
                    out[[t, j]] = self.shared[[t, w]];
                }
            }
        }
        out
    }
}

fn block_name(b: usize) -> String {
    let base = BLOCK_NAMES[b % BLOCK_NAMES.len()];
    match b / BLOCK_NAMES.len() {
        0 => base.to_string(),
        round => format!("{base}x{round}"),
    }
}

/// Block-local weights decaying with rank, normalized to 1.
fn block_weights(size: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..size).map(|r| 1.0 / ((r + 1) as f64).sqrt()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

fn draw_index(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let mut x = rng.random::<f64>();
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    weights.len() - 1
}

struct Sampler<'a> {
    cfg: &'a SynthConfig,
    words: &'a [String],
    weights: Vec<f64>,
}

impl Sampler<'_> {
    fn text(&self, blocks: &[usize], mixture: &[f64], len: usize, rng: &mut ChaCha8Rng) -> String {
        let per = self.cfg.words_per_topic;
        let tokens: Vec<&str> = (0..len)
            .map(|_| {
                let idx = if rng.random::<f64>() < self.cfg.noise {
                    rng.random_range(0..self.words.len())
                } else {
                    let block = blocks[draw_index(mixture, rng)];
                    block * per + draw_index(&self.weights, rng)
                };
                self.words[idx].as_str()
            })
            .collect();
        tokens.join(" ")
    }
}

fn length(range: (usize, usize), rng: &mut ChaCha8Rng) -> usize {
    rng.random_range(range.0..=range.1)
}

/// Generates the corpus for `cfg`, deterministic in `cfg.seed`.
pub fn generate(cfg: &SynthConfig) -> Result<SyntheticCorpus> {
    cfg.validate()?;
    let per = cfg.words_per_topic;
    let blocks = cfg.vocab_size / per;
    let words: Vec<String> = (0..blocks)
        .flat_map(|b| (0..per).map(move |r| format!("{}{r:02}", block_name(b))))
        .collect();
    let weights = block_weights(per);

    let mut shared = Array2::zeros((cfg.shared_topics, cfg.vocab_size));
    for s in 0..cfg.shared_topics {
        for (r, w) in weights.iter().enumerate() {
            shared[[s, s * per + r]] = *w;
        }
    }

    let pool = blocks - cfg.shared_topics;
    let topics_per_batch = cfg.shared_topics + cfg.drifting_topics;
    let gamma =
        Gamma::new(cfg.doc_concentration, 1.0).map_err(|e| Error::Parameter(e.to_string()))?;
    let sampler = Sampler {
        cfg,
        words: &words,
        weights,
    };
    let mut rng = seeded_rng(cfg.seed);
    let mut records = Vec::with_capacity(cfg.months * 2 * cfg.docs_per_source_month);

    for month in 0..cfg.months {
        let first = cfg.start_month.with_day(1).expect("day 1") + Months::new(month as u32);
        let days = (first + Months::new(1) - first).num_days() as u32;
        for (s_idx, source) in [Source::Online, Source::Offline].into_iter().enumerate() {
            let mut active: Vec<usize> = (0..cfg.shared_topics).collect();
            for j in 0..cfg.drifting_topics {
                let slot =
                    (month * 2 * cfg.drifting_topics + s_idx * cfg.drifting_topics + j) % pool;
                active.push(cfg.shared_topics + slot);
            }
            for d in 0..cfg.docs_per_source_month {
                let mut mixture: Vec<f64> = (0..topics_per_batch)
                    .map(|_| gamma.sample(&mut rng).max(1e-300))
                    .collect();
                let total: f64 = mixture.iter().sum();
                mixture.iter_mut().for_each(|m| *m /= total);
                let day = rng.random_range(1..=days);
                let date = first.with_day(day).expect("day within month");
                let id = format!("{}-{}-{d:04}", source, first.format("%Y-%m"));
                let timestamp = date.format("%Y-%m-%d").to_string();
                let record = match source {
                    Source::Online => CorpusRecord {
                        id,
                        source: source.to_string(),
                        timestamp,
                        text: Some(sampler.text(
                            &active,
                            &mixture,
                            length(cfg.online_len, &mut rng),
                            &mut rng,
                        )),
                        title: None,
                        summary: None,
                        body: None,
                    },
                    Source::Offline => {
                        let title = sampler.text(
                            &active,
                            &mixture,
                            length(cfg.title_len, &mut rng),
                            &mut rng,
                        );
                        let summary = sampler.text(
                            &active,
                            &mixture,
                            length(cfg.summary_len, &mut rng),
                            &mut rng,
                        );
                        let body = sampler.text(
                            &active,
                            &mixture,
                            length(cfg.body_len, &mut rng),
                            &mut rng,
                        );
                        CorpusRecord {
                            id,
                            source: source.to_string(),
                            timestamp,
                            text: None,
                            title: Some(title),
                            summary: Some(summary),
                            body: Some(body),
                        }
                    }
                };
                records.push(record);
            }
        }
    }

    Ok(SyntheticCorpus {
        config: cfg.clone(),
        records,
        words,
        shared,
    })
}
