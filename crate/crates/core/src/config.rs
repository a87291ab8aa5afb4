//! Run configuration: defaults, JSON files, validation.
//!
//! Values resolve as command-line flag, then config file, then default.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::corpus::OfflineFields;
use crate::error::{Error, Result};
use crate::factorization::SolverOptions;
use crate::joint::JointParams;
use crate::runner::MethodKind;
use crate::textpipe::{month_start, Document};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Corpus file. Relative paths in a config file are taken relative to that file.
    pub corpus_path: Option<PathBuf>,
    /// First month of the schedule; inferred from the corpus when absent.
    #[serde(with = "month_format")]
    pub start_month: Option<NaiveDate>,
    /// Last month of the schedule (inclusive); inferred when absent.
    #[serde(with = "month_format")]
    pub end_month: Option<NaiveDate>,
    pub k_c: usize,
    pub k_d: usize,
    pub alpha: f64,
    pub beta: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    /// First trial step of the joint solver's line search.
    pub initial_step: f64,
    pub min_df: usize,
    pub max_df_ratio: f64,
    /// Random cap on documents per source per month.
    pub per_month_cap: Option<usize>,
    pub methods: Vec<MethodKind>,
    pub output_dir: PathBuf,
    pub top_terms_count: usize,
    pub offline_fields: OfflineFields,
    /// Drop the built-in English stopwords from the vocabulary.
    pub english_stopwords: bool,
    /// Write measured solver seconds into `metrics.csv` (makes it non-reproducible).
    pub timing_in_metrics: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let joint = JointParams::default();
        Self {
            corpus_path: None,
            start_month: None,
            end_month: None,
            k_c: joint.k_c,
            k_d: joint.k_d,
            alpha: joint.alpha,
            beta: joint.beta,
            max_iters: joint.solver.max_iters,
            tol: joint.solver.tol,
            seed: joint.solver.seed,
            initial_step: joint.solver.initial_step,
            min_df: 2,
            max_df_ratio: 0.95,
            per_month_cap: None,
            methods: vec![MethodKind::JointONMF],
            output_dir: PathBuf::from("topicbridge-out"),
            top_terms_count: 5,
            offline_fields: OfflineFields::default(),
            english_stopwords: true,
            timing_in_metrics: false,
        }
    }
}

impl RunConfig {
    /// Reads a JSON config file; missing fields take their defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Parameter(format!("{}: {e}", path.display())))?;
        if let (Some(corpus), Some(dir)) = (&cfg.corpus_path, path.parent()) {
            if corpus.is_relative() {
                cfg.corpus_path = Some(dir.join(corpus));
            }
        }
        Ok(cfg)
    }

    pub fn joint_params(&self) -> JointParams {
        JointParams {
            k_c: self.k_c,
            k_d: self.k_d,
            alpha: self.alpha,
            beta: self.beta,
            solver: SolverOptions {
                max_iters: self.max_iters,
                tol: self.tol,
                seed: self.seed,
                initial_step: self.initial_step,
                ..SolverOptions::default()
            },
            ..JointParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.joint_params().validate()?;
        if self.min_df < 1 {
            return Err(Error::Parameter("min_df must be >= 1".into()));
        }
        if !(self.max_df_ratio > 0.0 && self.max_df_ratio <= 1.0) {
            return Err(Error::Parameter(format!(
                "max_df_ratio must be in (0, 1], got {}",
                self.max_df_ratio
            )));
        }
        if self.per_month_cap == Some(0) {
            return Err(Error::Parameter(
                "per_month_cap must be >= 1 when set".into(),
            ));
        }
        if self.methods.is_empty() {
            return Err(Error::Parameter("at least one method is required".into()));
        }
        if self.top_terms_count < 1 {
            return Err(Error::Parameter("top_terms_count must be >= 1".into()));
        }
        if let (Some(start), Some(end)) = (self.start_month, self.end_month) {
            if start > end {
                return Err(Error::Parameter(format!(
                    "start_month {start} is after end_month {end}"
                )));
            }
        }
        Ok(())
    }

    /// Fills in missing start/end months from the corpus timestamps and
    /// normalizes both to the first of the month.
    pub fn resolve_months(&mut self, docs: &[Document]) -> Result<()> {
        let dates = || docs.iter().map(|d| d.timestamp.date_naive());
        let start = match self.start_month {
            Some(m) => m,
            None => dates()
                .min()
                .ok_or_else(|| Error::Parameter("corpus is empty".into()))?,
        };
        let end = match self.end_month {
            Some(m) => m,
            None => dates()
                .max()
                .ok_or_else(|| Error::Parameter("corpus is empty".into()))?,
        };
        self.start_month = Some(month_start(start));
        self.end_month = Some(month_start(end));
        self.validate()
    }
}

/// `Option<NaiveDate>` as `"YYYY-MM"`; `"YYYY-MM-DD"` is accepted on input.
mod month_format {
    use chrono::NaiveDate;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn parse(s: &str) -> Option<NaiveDate> {
        NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .or_else(|_| NaiveDate::parse_from_str(&format!("{s}-01"), "%Y-%m-%d"))
            .ok()
    }

    pub fn serialize<S: Serializer>(
        value: &Option<NaiveDate>,
        serializer: S,
    ) -> Result<S::Ok, S::Error> {
        match value {
            Some(d) => serializer.collect_str(&d.format("%Y-%m")),
            None => serializer.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> Result<Option<NaiveDate>, D::Error> {
        match Option::<String>::deserialize(deserializer)? {
            None => Ok(None),
            Some(s) => parse(&s)
                .map(Some)
                .ok_or_else(|| serde::de::Error::custom(format!("expected YYYY-MM, got {s:?}"))),
        }
    }
}

/// Parses `YYYY-MM` or `YYYY-MM-DD`.
pub fn parse_month(s: &str) -> Result<NaiveDate> {
    month_format::parse(s)
        .ok_or_else(|| Error::Parameter(format!("expected a month as YYYY-MM, got {s:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn defaults_validate() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!((cfg.k_c, cfg.k_d, cfg.max_iters), (2, 3, 100));
        assert_eq!(cfg.methods, vec![MethodKind::JointONMF]);
    }

    #[test]
    fn file_values_and_defaults_mix() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        let mut f = fs::File::create(&path).unwrap();
        write!(
            f,
            r#"{{"corpus_path":"c.jsonl","k_d":4,"start_month":"2020-02","methods":["onmf","SNMF"],"offline_fields":"title+body"}}"#
        )
        .unwrap();
        let cfg = RunConfig::from_file(&path).unwrap();
        assert_eq!(
            cfg.corpus_path.as_deref(),
            Some(dir.path().join("c.jsonl").as_path())
        );
        assert_eq!(cfg.k_d, 4);
        assert_eq!(cfg.k_c, 2);
        assert_eq!(cfg.start_month, NaiveDate::from_ymd_opt(2020, 2, 1));
        assert_eq!(cfg.methods, vec![MethodKind::ONMF, MethodKind::SNMF]);
        assert_eq!(cfg.offline_fields.to_string(), "title+body");
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = RunConfig {
            start_month: NaiveDate::from_ymd_opt(2021, 3, 1),
            per_month_cap: Some(10),
            ..RunConfig::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains(r#""start_month":"2021-03""#));
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_values() {
        let err = RunConfig {
            k_c: 0,
            ..RunConfig::default()
        }
        .validate()
        .unwrap_err();
        assert!(err.to_string().contains("k_c must be >= 1"));
        assert!(RunConfig {
            max_df_ratio: 0.0,
            ..RunConfig::default()
        }
        .validate()
        .is_err());
        assert!(RunConfig {
            methods: vec![],
            ..RunConfig::default()
        }
        .validate()
        .is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"kc":2}"#).is_err());
        assert!(parse_month("March").is_err());
    }
}
