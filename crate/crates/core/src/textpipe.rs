//! Corpus preprocessing: tokenization, a global vocabulary, TF-IDF rows and
//! the month-by-month online/offline schedule.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Months, NaiveDate, Utc};
use ndarray::Array2;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorization::{seeded_rng, TermDocMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Online,
    Offline,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Online => "online",
            Source::Offline => "offline",
        })
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "online" => Ok(Source::Online),
            "offline" => Ok(Source::Offline),
            other => Err(Error::Parameter(format!(
                "unknown source {other:?}, expected \"online\" or \"offline\""
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub source: Source,
    pub timestamp: DateTime<Utc>,
    pub text: String,
}

/// Lowercased word tokens.
///
/// URLs and `@mentions` are dropped whole, a hashtag keeps its word, the
/// rest is split on anything that is not alphanumeric, and tokens shorter
/// than two characters are discarded.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let trimmed = chunk.trim_start_matches(|c: char| "([{\"'<".contains(c));
        let lower = trimmed.to_lowercase();
        if trimmed.starts_with('@')
            || lower.starts_with("http://")
            || lower.starts_with("https://")
            || lower.starts_with("www.")
        {
            continue;
        }
        tokens.extend(
            lower
                .split(|c: char| !c.is_alphanumeric())
                .filter(|t| t.chars().count() >= 2)
                .map(str::to_owned),
        );
    }
    tokens
}

/// Fixed term list shared by every time step.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    doc_freq: Vec<usize>,
    num_docs: usize,
}

impl Vocabulary {
    /// A vocabulary over `terms` with unit document frequencies, for callers
    /// that only need the term ↔ index mapping.
    pub fn from_terms(terms: Vec<String>) -> Result<Self> {
        let n = terms.len();
        Self::from_parts(terms, vec![1; n], 1)
    }

    fn from_parts(terms: Vec<String>, doc_freq: Vec<usize>, num_docs: usize) -> Result<Self> {
        let mut index = HashMap::with_capacity(terms.len());
        for (i, t) in terms.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Parameter(format!("duplicate vocabulary term {t:?}")));
            }
        }
        Ok(Self {
            terms,
            index,
            doc_freq,
            num_docs,
        })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term(&self, i: usize) -> &str {
        &self.terms[i]
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn doc_freq(&self, i: usize) -> usize {
        self.doc_freq[i]
    }

    /// Number of documents the frequencies were counted over.
    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    /// Smoothed inverse document frequency `ln((1 + N) / (1 + df)) + 1`.
    pub fn idf(&self, i: usize) -> f64 {
        ((1.0 + self.num_docs as f64) / (1.0 + self.doc_freq[i] as f64)).ln() + 1.0
    }
}

/// A short English stopword list for social-media and news text.
pub const ENGLISH_STOPWORDS: &[&str] = &[
    "about", "after", "all", "also", "am", "an", "and", "any", "are", "as", "at", "be", "because",
    "been", "before", "being", "but", "by", "can", "could", "did", "do", "does", "for", "from",
    "had", "has", "have", "he", "her", "here", "him", "his", "how", "if", "in", "into", "is", "it",
    "its", "just", "me", "more", "most", "my", "no", "not", "now", "of", "on", "one", "only", "or",
    "our", "out", "over", "rt", "said", "says", "she", "so", "some", "than", "that", "the",
    "their", "them", "then", "there", "these", "they", "this", "to", "up", "us", "was", "we",
    "were", "what", "when", "which", "who", "why", "will", "with", "would", "you", "your",
];

pub fn english_stopwords() -> HashSet<String> {
    ENGLISH_STOPWORDS.iter().map(|s| s.to_string()).collect()
}

/// Builds the global vocabulary, sorted lexicographically.
///
/// A term is kept when `min_df ≤ df` and `df / N ≤ max_df_ratio` and it is
/// not a stopword.
pub fn build_vocabulary(
    corpus: &[Document],
    min_df: usize,
    max_df_ratio: f64,
    stopwords: &HashSet<String>,
) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::Parameter(
            "cannot build a vocabulary from an empty corpus".into(),
        ));
    }
    if min_df < 1 {
        return Err(Error::Parameter("min_df must be at least 1".into()));
    }
    if !(max_df_ratio > 0.0 && max_df_ratio <= 1.0) {
        return Err(Error::Parameter(format!(
            "max_df_ratio must be in (0, 1], got {max_df_ratio}"
        )));
    }
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for doc in corpus {
        let unique: HashSet<String> = tokenize(&doc.text).into_iter().collect();
        for token in unique {
            *df.entry(token).or_insert(0) += 1;
        }
    }
    let n = corpus.len() as f64;
    let (terms, freqs): (Vec<_>, Vec<_>) = df
        .into_iter()
        .filter(|(t, f)| *f >= min_df && *f as f64 / n <= max_df_ratio && !stopwords.contains(t))
        .unzip();
    Vocabulary::from_parts(terms, freqs, corpus.len())
}

/// TF-IDF rows for a batch: `tf` is the count over the document's in-vocabulary
/// token total, `idf` comes from the global vocabulary. Out-of-vocabulary
/// tokens are skipped; documents with none left become zero rows.
pub fn tfidf_matrix(batch: &[Document], vocab: &Vocabulary) -> Result<TermDocMatrix> {
    if vocab.is_empty() {
        return Err(Error::Parameter("vocabulary is empty".into()));
    }
    let idf: Vec<f64> = (0..vocab.len()).map(|i| vocab.idf(i)).collect();
    let mut values = Array2::zeros((batch.len(), vocab.len()));
    for (row, doc) in batch.iter().enumerate() {
        let ids: Vec<usize> = tokenize(&doc.text)
            .iter()
            .filter_map(|t| vocab.index_of(t))
            .collect();
        if ids.is_empty() {
            continue;
        }
        let inv_len = 1.0 / ids.len() as f64;
        for id in ids {
            values[[row, id]] += inv_len;
        }
        for (col, w) in idf.iter().enumerate() {
            values[[row, col]] *= w;
        }
    }
    TermDocMatrix::new(values)
}

/// One batch of the interleaved stream.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleStep {
    pub time_index: usize,
    /// First day of the calendar month this batch covers.
    pub month: NaiveDate,
    pub source: Source,
    pub documents: Vec<Document>,
}

impl ScheduleStep {
    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn label(&self) -> String {
        format!("{}-{}", self.source, self.month.format("%Y-%m"))
    }
}

/// Online and offline batches alternating month by month.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StreamSchedule {
    pub steps: Vec<ScheduleStep>,
}

impl StreamSchedule {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn documents(&self) -> impl Iterator<Item = &Document> {
        self.steps.iter().flat_map(|s| s.documents.iter())
    }

    /// Keeps at most `cap` uniformly drawn documents per step, preserving
    /// their order. Seeded per step so the result does not depend on how
    /// many steps precede it.
    pub fn capped(&self, cap: usize, seed: u64) -> StreamSchedule {
        let steps = self
            .steps
            .iter()
            .map(|step| {
                if step.documents.len() <= cap {
                    return step.clone();
                }
                let mut rng = seeded_rng(seed ^ (step.time_index as u64).wrapping_mul(0x9E37_79B9));
                let mut keep = index::sample(&mut rng, step.documents.len(), cap).into_vec();
                keep.sort_unstable();
                ScheduleStep {
                    documents: keep
                        .into_iter()
                        .map(|i| step.documents[i].clone())
                        .collect(),
                    ..step.clone()
                }
            })
            .collect();
        StreamSchedule { steps }
    }
}

pub fn month_start(date: NaiveDate) -> NaiveDate {
    date.with_day(1).expect("day 1 exists in every month")
}

fn document_month(doc: &Document) -> NaiveDate {
    month_start(doc.timestamp.date_naive())
}

/// Splits both sources by calendar month and interleaves them as
/// online(m0), offline(m0), online(m1), offline(m1), ...
///
/// Every month in `[start_month, end_month]` yields two steps even when a
/// batch is empty. Documents inside a batch are ordered by timestamp, then id.
pub fn interleave_schedule(
    online: &[Document],
    offline: &[Document],
    start_month: NaiveDate,
    end_month: NaiveDate,
) -> Result<StreamSchedule> {
    let start = month_start(start_month);
    let end = month_start(end_month);
    if start > end {
        return Err(Error::Parameter(format!(
            "start month {start} is after end month {end}"
        )));
    }
    let mut months = Vec::new();
    let mut m = start;
    while m <= end {
        months.push(m);
        m = m + Months::new(1);
    }

    let mut buckets: BTreeMap<(NaiveDate, Source), Vec<Document>> = BTreeMap::new();
    for (docs, source) in [(online, Source::Online), (offline, Source::Offline)] {
        for doc in docs {
            let month = document_month(doc);
            if month < start || month > end {
                return Err(Error::Parameter(format!(
                    "document {} dated {} lies outside {}..{}",
                    doc.id,
                    doc.timestamp,
                    start.format("%Y-%m"),
                    end.format("%Y-%m")
                )));
            }
            buckets
                .entry((month, source))
                .or_default()
                .push(doc.clone());
        }
    }

    let mut steps = Vec::with_capacity(months.len() * 2);
    for month in months {
        for source in [Source::Online, Source::Offline] {
            let mut documents = buckets.remove(&(month, source)).unwrap_or_default();
            documents.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.id.cmp(&b.id)));
            steps.push(ScheduleStep {
                time_index: steps.len(),
                month,
                source,
                documents,
            });
        }
    }
    Ok(StreamSchedule { steps })
}
