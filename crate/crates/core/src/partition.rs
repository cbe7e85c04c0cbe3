//! The full collection plus its decade sub-collections, each with its own index.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{self, CorpusError, DecadeId, Paragraph};
use crate::index::{Index, IndexError};
use crate::textproc::Analyzer;

const CORPUS_FILE: &str = "corpus.json";
const STOPWORDS_FILE: &str = "stopwords.txt";

#[derive(Debug, Error)]
pub enum PartitionError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{collection}: {source}")]
    Index {
        collection: DecadeId,
        #[source]
        source: IndexError,
    },
    #[error("no paragraphs to index")]
    EmptyCorpus,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Descriptor { path: PathBuf, message: String },
}

/// Per-collection counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollectionSummary {
    pub label: DecadeId,
    pub num_novels: usize,
    pub num_paragraphs: usize,
}

#[derive(Serialize, Deserialize)]
struct Descriptor {
    format_version: u32,
    collections: Vec<CollectionSummary>,
}

#[derive(Debug, Clone)]
pub struct PartitionedCorpus {
    analyzer: Analyzer,
    indices: BTreeMap<DecadeId, Index>,
}

impl PartitionedCorpus {
    /// Indexes FULL and every decade that has at least one paragraph.
    pub fn build(paragraphs: &[Paragraph], analyzer: Analyzer) -> Result<Self, PartitionError> {
        if paragraphs.is_empty() {
            return Err(PartitionError::EmptyCorpus);
        }
        let mut by_decade: BTreeMap<DecadeId, Vec<Paragraph>> = BTreeMap::new();
        for p in paragraphs {
            by_decade.entry(p.decade).or_default().push(p.clone());
        }
        let mut jobs: Vec<(DecadeId, &[Paragraph])> = by_decade
            .iter()
            .map(|(d, ps)| (*d, ps.as_slice()))
            .collect();
        jobs.push((DecadeId::Full, paragraphs));
        let built: Vec<(DecadeId, Result<Index, IndexError>)> = jobs
            .into_par_iter()
            .map(|(d, ps)| (d, Index::build(d, ps)))
            .collect();
        let mut indices = BTreeMap::new();
        for (collection, result) in built {
            let index = result.map_err(|source| PartitionError::Index { collection, source })?;
            indices.insert(collection, index);
        }
        Ok(Self { analyzer, indices })
    }

    /// Reads a manifest, ingests every novel and builds all indices.
    pub fn from_manifest(manifest: &Path, analyzer: Analyzer) -> Result<Self, PartitionError> {
        let records = corpus::load_manifest(manifest)?;
        let base = manifest.parent().unwrap_or(Path::new("."));
        let ingested = corpus::ingest(&records, base, &analyzer)?;
        Self::build(&ingested.paragraphs, analyzer)
    }

    pub fn analyzer(&self) -> &Analyzer {
        &self.analyzer
    }

    pub fn index(&self, collection: DecadeId) -> Option<&Index> {
        self.indices.get(&collection)
    }

    pub fn full(&self) -> &Index {
        &self.indices[&DecadeId::Full]
    }

    /// Indexed decades in chronological order, then FULL.
    pub fn labels(&self) -> Vec<DecadeId> {
        self.indices.keys().copied().collect()
    }

    pub fn decades(&self) -> Vec<DecadeId> {
        self.indices
            .keys()
            .copied()
            .filter(|d| !d.is_full())
            .collect()
    }

    pub fn collections(&self) -> Vec<CollectionSummary> {
        self.indices
            .iter()
            .map(|(label, idx)| CollectionSummary {
                label: *label,
                num_novels: idx.num_novels(),
                num_paragraphs: idx.num_docs(),
            })
            .collect()
    }

    /// Writes `corpus.json`, `stopwords.txt` and one `<label>.idx` per collection.
    pub fn save(&self, dir: &Path) -> Result<(), PartitionError> {
        let io = |path: &Path| {
            let path = path.to_owned();
            move |source| PartitionError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        for (collection, index) in &self.indices {
            index
                .save(&index_path(dir, *collection))
                .map_err(|source| PartitionError::Index {
                    collection: *collection,
                    source,
                })?;
        }
        let stop = dir.join(STOPWORDS_FILE);
        fs::write(&stop, self.analyzer.stopword_list()).map_err(io(&stop))?;
        let descriptor = Descriptor {
            format_version: crate::index::FORMAT_VERSION,
            collections: self.collections(),
        };
        let desc = dir.join(CORPUS_FILE);
        let json = serde_json::to_string_pretty(&descriptor).expect("descriptor serializes");
        fs::write(&desc, json + "\n").map_err(io(&desc))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, PartitionError> {
        let desc_path = dir.join(CORPUS_FILE);
        let text = fs::read_to_string(&desc_path).map_err(|source| PartitionError::Io {
            path: desc_path.clone(),
            source,
        })?;
        let descriptor: Descriptor =
            serde_json::from_str(&text).map_err(|e| PartitionError::Descriptor {
                path: desc_path.clone(),
                message: e.to_string(),
            })?;
        let stop = dir.join(STOPWORDS_FILE);
        let analyzer = Analyzer::from_stopword_file(&stop)
            .map_err(|source| PartitionError::Io { path: stop, source })?;
        let loaded: Vec<(DecadeId, Result<Index, IndexError>)> = descriptor
            .collections
            .par_iter()
            .map(|c| (c.label, Index::load(&index_path(dir, c.label))))
            .collect();
        let mut indices = BTreeMap::new();
        for (collection, result) in loaded {
            let index = result.map_err(|source| PartitionError::Index { collection, source })?;
            if index.collection() != collection {
                return Err(PartitionError::Descriptor {
                    path: index_path(dir, collection),
                    message: format!("file holds the {} index", index.collection()),
                });
            }
            indices.insert(collection, index);
        }
        if !indices.contains_key(&DecadeId::Full) {
            return Err(PartitionError::Descriptor {
                path: desc_path,
                message: "no FULL collection".into(),
            });
        }
        Ok(Self { analyzer, indices })
    }
}

pub fn index_path(dir: &Path, collection: DecadeId) -> PathBuf {
    dir.join(format!("{}.idx", collection.label()))
}
