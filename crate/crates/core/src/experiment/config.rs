use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{ExperimentError, QuerySet};
use crate::feedback::FeedbackParams;
use crate::metrics::LogBase;
use crate::partition::PartitionedCorpus;
use crate::textproc::Analyzer;

/// Numeric settings of one pipeline run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PipelineParams {
    pub feedback: FeedbackParams,
    /// Depth of the second-stage rankings compared with τ.
    pub depth: usize,
    /// Terms shown per row of a term table.
    pub top_n: usize,
    pub js_base: LogBase,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            feedback: FeedbackParams::default(),
            depth: 1000,
            top_n: 15,
            js_base: LogBase::Two,
        }
    }
}

impl PipelineParams {
    /// Stable textual key; equal keys mean equal results over the same corpus.
    pub fn cache_key(&self) -> String {
        let f = &self.feedback;
        format!(
            "fb_docs={};fb_terms={};lambda={:?};mu={:?};k1={:?};b={:?};depth={};top_n={};js_base={}",
            f.fb_docs, f.fb_terms, f.lambda, f.mu, f.bm25.k1, f.bm25.b, self.depth, self.top_n,
            self.js_base
        )
    }
}

/// Parsed `key = value` experiment file. Relative paths resolve against the
/// file's directory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentConfig {
    pub manifest: Option<PathBuf>,
    pub index_dir: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub params: PipelineParams,
}

impl ExperimentConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ExperimentError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| ExperimentError::Config {
                line: line_no,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected key = value".into()))?;
            let (key, value) = (key.trim(), value.trim());
            let path = || base_dir.join(value);
            fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
                value
                    .parse()
                    .map_err(|_| format!("{key}: cannot parse {value:?}"))
            }
            let p = &mut cfg.params;
            match key {
                "manifest" => cfg.manifest = Some(path()),
                "index_dir" => cfg.index_dir = Some(path()),
                "queries" => cfg.queries = Some(path()),
                "stopwords" => cfg.stopwords = Some(path()),
                "fb_docs" => p.feedback.fb_docs = num(key, value).map_err(err)?,
                "fb_terms" => p.feedback.fb_terms = num(key, value).map_err(err)?,
                "lambda" => p.feedback.lambda = num(key, value).map_err(err)?,
                "mu" => p.feedback.mu = num(key, value).map_err(err)?,
                "k1" => p.feedback.bm25.k1 = num(key, value).map_err(err)?,
                "b" => p.feedback.bm25.b = num(key, value).map_err(err)?,
                "depth" => p.depth = num(key, value).map_err(err)?,
                "top_n" => p.top_n = num(key, value).map_err(err)?,
                "js_base" => p.js_base = value.parse().map_err(|e| err(format!("{e}")))?,
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        let p = &self.params;
        let f = &p.feedback;
        let problem = if f.fb_docs == 0 || f.fb_terms == 0 || p.depth == 0 || p.top_n == 0 {
            Some("fb_docs, fb_terms, depth and top_n must be positive")
        } else if !(0.0..=1.0).contains(&f.lambda) {
            Some("lambda must lie in [0, 1]")
        } else if !(f.mu > 0.0 && f.mu.is_finite()) {
            Some("mu must be positive")
        } else if !(f.bm25.k1 >= 0.0 && (0.0..=1.0).contains(&f.bm25.b)) {
            Some("k1 must be non-negative and b in [0, 1]")
        } else {
            None
        };
        match problem {
            Some(message) => Err(ExperimentError::Config {
                line: 0,
                message: message.into(),
            }),
            None => Ok(()),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(|source| ExperimentError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn load_queries(&self) -> Result<QuerySet, ExperimentError> {
        match &self.queries {
            None => Ok(QuerySet::default()),
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|source| ExperimentError::Io {
                    path: path.clone(),
                    source,
                })?;
                QuerySet::parse(&text)
            }
        }
    }

    /// Loads saved indices from `index_dir`, or builds them from `manifest`.
    pub fn load_corpus(&self) -> Result<PartitionedCorpus, ExperimentError> {
        if let Some(dir) = &self.index_dir {
            return Ok(PartitionedCorpus::load(dir)?);
        }
        let manifest = self.manifest.as_ref().ok_or(ExperimentError::NoCorpus)?;
        let analyzer = match &self.stopwords {
            Some(path) => {
                Analyzer::from_stopword_file(path).map_err(|source| ExperimentError::Io {
                    path: path.clone(),
                    source,
                })?
            }
            None => Analyzer::default(),
        };
        Ok(PartitionedCorpus::from_manifest(manifest, analyzer)?)
    }
}
