//! Newline-delimited JSON corpus files.
//!
//! One object per line:
//!
//! ```json
//! {"id":"1","source":"online","timestamp":"2020-01-05","text":"vaccines work"}
//! {"id":"n1","source":"offline","timestamp":"2020-01-06T08:00:00Z","title":"...","summary":"...","body":"..."}
//! ```
//!
//! Offline records may carry `title`/`summary`/`body` instead of `text`;
//! an [`OfflineFields`] selector decides which of them become the document text.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textpipe::{Document, Source};

/// One raw line of a corpus file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub source: String,
    pub timestamp: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OfflineField {
    Title,
    Summary,
    Body,
}

/// Which offline article fields make up the document text, joined in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OfflineFields(Vec<OfflineField>);

impl Default for OfflineFields {
    fn default() -> Self {
        Self(vec![OfflineField::Title])
    }
}

impl OfflineFields {
    pub fn new(fields: Vec<OfflineField>) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::Parameter("offline field selector is empty".into()));
        }
        Ok(Self(fields))
    }

    pub fn fields(&self) -> &[OfflineField] {
        &self.0
    }
}

impl fmt::Display for OfflineFields {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self
            .0
            .iter()
            .map(|field| match field {
                OfflineField::Title => "title",
                OfflineField::Summary => "summary",
                OfflineField::Body => "body",
            })
            .collect();
        f.write_str(&names.join("+"))
    }
}

impl FromStr for OfflineFields {
    type Err = Error;

    /// Parses `title`, `body`, `title+summary`, ...
    fn from_str(s: &str) -> Result<Self> {
        let fields = s
            .split(['+', ','])
            .map(|part| match part.trim() {
                "title" => Ok(OfflineField::Title),
                "summary" => Ok(OfflineField::Summary),
                "body" => Ok(OfflineField::Body),
                other => Err(Error::Parameter(format!("unknown offline field {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(fields)
    }
}

impl Serialize for OfflineFields {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for OfflineFields {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Accepts `YYYY-MM-DD`, RFC 3339, or a zone-less `YYYY-MM-DDTHH:MM:SS` (read as UTC).
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(d.and_hms_opt(0, 0, 0)?.and_utc());
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc));
    }
    for fmt in [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M:%S%.f",
    ] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc());
        }
    }
    None
}

impl CorpusRecord {
    fn text_for(&self, selector: &OfflineFields, source: Source) -> Option<String> {
        if source == Source::Offline {
            let parts: Vec<&str> = selector
                .fields()
                .iter()
                .filter_map(|f| match f {
                    OfflineField::Title => self.title.as_deref(),
                    OfflineField::Summary => self.summary.as_deref(),
                    OfflineField::Body => self.body.as_deref(),
                })
                .collect();
            if !parts.is_empty() {
                return Some(parts.join(" "));
            }
        }
        self.text.clone()
    }

    /// Validates the record into a [`Document`]; errors are plain messages
    /// so the caller can attach a location.
    pub fn to_document(&self, selector: &OfflineFields) -> std::result::Result<Document, String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        let source: Source = self.source.parse().map_err(|e: Error| e.to_string())?;
        let timestamp = parse_timestamp(&self.timestamp)
            .ok_or_else(|| format!("unparseable timestamp {:?}", self.timestamp))?;
        let text = self.text_for(selector, source).ok_or_else(|| match source {
            Source::Online => "online record has no \"text\"".to_string(),
            Source::Offline => format!("offline record has neither \"text\" nor any of the selected fields ({selector})"),
        })?;
        Ok(Document {
            id: self.id.clone(),
            source,
            timestamp,
            text,
        })
    }
}

/// Reads and validates a corpus file. Blank lines are ignored; line
/// numbers in errors are 1-based.
pub fn load_corpus(path: &Path, selector: &OfflineFields) -> Result<Vec<Document>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let located = |message: String| Error::Corpus {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let record: CorpusRecord =
            serde_json::from_str(&line).map_err(|e| located(format!("malformed record: {e}")))?;
        let doc = record.to_document(selector).map_err(located)?;
        if !seen.insert(doc.id.clone()) {
            return Err(located(format!("duplicate id {:?}", doc.id)));
        }
        docs.push(doc);
    }
    Ok(docs)
}

/// Writes records one JSON object per line, LF-terminated.
pub fn write_corpus(path: &Path, records: &[CorpusRecord]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
