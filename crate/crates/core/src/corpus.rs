//! Manifest ingestion, decade assignment and paragraph segmentation.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textproc::Analyzer;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("manifest line {line}: {message}")]
    Validation { line: usize, message: String },
    #[error("year {0} is outside the corpus span 1831-1899")]
    YearOutOfRange(i64),
    #[error("unknown collection label {0:?}")]
    UnknownCollection(String),
}

/// One collection: a decade sub-collection or the full union.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DecadeId {
    #[serde(rename = "1830s")]
    D1830s,
    #[serde(rename = "1840s")]
    D1840s,
    #[serde(rename = "1850s")]
    D1850s,
    #[serde(rename = "1860s")]
    D1860s,
    #[serde(rename = "1870s")]
    D1870s,
    #[serde(rename = "1880s")]
    D1880s,
    #[serde(rename = "1890s")]
    D1890s,
    #[serde(rename = "FULL")]
    Full,
}

impl DecadeId {
    pub const DECADES: [DecadeId; 7] = [
        DecadeId::D1830s,
        DecadeId::D1840s,
        DecadeId::D1850s,
        DecadeId::D1860s,
        DecadeId::D1870s,
        DecadeId::D1880s,
        DecadeId::D1890s,
    ];

    pub fn label(self) -> &'static str {
        match self {
            DecadeId::D1830s => "1830s",
            DecadeId::D1840s => "1840s",
            DecadeId::D1850s => "1850s",
            DecadeId::D1860s => "1860s",
            DecadeId::D1870s => "1870s",
            DecadeId::D1880s => "1880s",
            DecadeId::D1890s => "1890s",
            DecadeId::Full => "FULL",
        }
    }

    pub fn is_full(self) -> bool {
        self == DecadeId::Full
    }
}

impl fmt::Display for DecadeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for DecadeId {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("full") || s == "1831-99" {
            return Ok(DecadeId::Full);
        }
        DecadeId::DECADES
            .into_iter()
            .find(|d| d.label() == s)
            .ok_or_else(|| CorpusError::UnknownCollection(s.to_owned()))
    }
}

/// Decade whose span `[10i+1, 10i+10]` contains `year`; the last decade ends at 1899.
pub fn assign_decade(year: i64) -> Result<DecadeId, CorpusError> {
    if !(1831..=1899).contains(&year) {
        return Err(CorpusError::YearOutOfRange(year));
    }
    let slot = ((year - 1831) / 10) as usize;
    Ok(DecadeId::DECADES[slot])
}

/// One novel as listed in the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestRecord {
    pub novel_id: String,
    pub title: String,
    pub year: i64,
    pub path: PathBuf,
}

#[derive(Deserialize)]
struct RawRecord {
    id: Option<String>,
    #[serde(default)]
    title: String,
    year: Option<i64>,
    path: Option<PathBuf>,
}

/// Parses a JSON-lines manifest. Blank lines are ignored.
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestRecord>, CorpusError> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(line).map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let invalid = |message: &str| CorpusError::Validation {
            line: line_no,
            message: message.to_owned(),
        };
        let novel_id = raw
            .id
            .filter(|s| !s.is_empty())
            .ok_or_else(|| invalid("missing id"))?;
        let year = raw.year.ok_or_else(|| invalid("missing year"))?;
        let path = raw
            .path
            .filter(|p| !p.as_os_str().is_empty())
            .ok_or_else(|| invalid("missing path"))?;
        if !seen.insert(novel_id.clone()) {
            return Err(invalid(&format!("duplicate id {novel_id:?}")));
        }
        records.push(ManifestRecord {
            novel_id,
            title: raw.title,
            year,
            path,
        });
    }
    Ok(records)
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestRecord>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_manifest(&text)
}

/// The retrieval unit: one stemmed paragraph of a novel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Paragraph {
    pub doc_id: String,
    pub novel_id: String,
    pub decade: DecadeId,
    pub tokens: Vec<String>,
}

impl Paragraph {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Doc ids sort lexicographically in paragraph order within a novel.
pub fn paragraph_doc_id(novel_id: &str, ordinal: usize) -> String {
    format!("{novel_id}#{ordinal:06}")
}

/// Splits text into blank-line separated runs and analyzes each run.
/// Runs that produce no terms are dropped; ordinals count kept paragraphs.
pub fn segment_paragraphs(
    raw_text: &str,
    novel_id: &str,
    decade: DecadeId,
    analyzer: &Analyzer,
) -> Vec<Paragraph> {
    let text = raw_text.replace("\r\n", "\n");
    let mut runs: Vec<String> = Vec::new();
    let mut current = String::new();
    for line in text.split('\n') {
        if line.trim().is_empty() {
            if !current.is_empty() {
                runs.push(std::mem::take(&mut current));
            }
        } else {
            current.push_str(line);
            current.push('\n');
        }
    }
    if !current.is_empty() {
        runs.push(current);
    }
    runs.iter()
        .map(|run| analyzer.analyze(run))
        .filter(|tokens| !tokens.is_empty())
        .enumerate()
        .map(|(ordinal, tokens)| Paragraph {
            doc_id: paragraph_doc_id(novel_id, ordinal),
            novel_id: novel_id.to_owned(),
            decade,
            tokens,
        })
        .collect()
}

/// A novel excluded during ingestion, with the reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exclusion {
    pub novel_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct Ingested {
    /// Paragraphs in manifest order.
    pub paragraphs: Vec<Paragraph>,
    /// Distinct novels per decade.
    pub novels_per_decade: BTreeMap<DecadeId, usize>,
    pub excluded: Vec<Exclusion>,
}

/// Reads and segments every manifest entry. Relative paths resolve against `base_dir`.
pub fn ingest(
    records: &[ManifestRecord],
    base_dir: &Path,
    analyzer: &Analyzer,
) -> Result<Ingested, CorpusError> {
    let per_novel: Vec<Result<Result<Vec<Paragraph>, Exclusion>, CorpusError>> = records
        .par_iter()
        .map(|rec| {
            let decade = match assign_decade(rec.year) {
                Ok(d) => d,
                Err(e) => {
                    return Ok(Err(Exclusion {
                        novel_id: rec.novel_id.clone(),
                        reason: e.to_string(),
                    }))
                }
            };
            let path = if rec.path.is_absolute() {
                rec.path.clone()
            } else {
                base_dir.join(&rec.path)
            };
            let bytes = fs::read(&path).map_err(|source| CorpusError::Io { path, source })?;
            let text = String::from_utf8_lossy(&bytes);
            Ok(Ok(segment_paragraphs(
                &text,
                &rec.novel_id,
                decade,
                analyzer,
            )))
        })
        .collect();

    let mut out = Ingested::default();
    for (rec, result) in records.iter().zip(per_novel) {
        match result? {
            Ok(paragraphs) => {
                if let Some(first) = paragraphs.first() {
                    *out.novels_per_decade.entry(first.decade).or_default() += 1;
                } else {
                    warn!("novel {} produced no paragraphs", rec.novel_id);
                }
                out.paragraphs.extend(paragraphs);
            }
            Err(exclusion) => {
                warn!(
                    "excluding novel {}: {}",
                    exclusion.novel_id, exclusion.reason
                );
                out.excluded.push(exclusion);
            }
        }
    }
    Ok(out)
}
