//! End-to-end protocol: expand every keyword in every collection, compare
//! expansions pairwise, compare the full-collection rankings they induce, and
//! aggregate over the query set.

mod config;
mod queries;
mod report;

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::DecadeId;
use crate::feedback::{self, ExpandedQuery, FeedbackError};
use crate::metrics::{self, Metric, MetricCell, MetricError};
use crate::partition::{PartitionError, PartitionedCorpus};
use crate::retrieval::{self, RankedList, RetrievalError};

pub use config::{ExperimentConfig, PipelineParams};
pub use queries::{Category, QueryEntry, QuerySet, DEFAULT_QUERIES};
pub use report::{
    render_matrix_markdown, render_pairs_csv, render_tau_csv, render_term_table,
    render_term_tables, write_reports, REPORT_FILES,
};

/// Marker written wherever a keyword does not occur in a collection.
pub const ABSENT: &str = "ABSENT";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("query file line {line}: {message}")]
    Queries { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config names neither index_dir nor manifest")]
    NoCorpus,
    #[error("collection {0} has no index")]
    MissingIndex(DecadeId),
    #[error("query {0:?} is not in the report")]
    UnknownQuery(String),
    #[error("{keyword:?} in {collection}: {source}")]
    Feedback {
        keyword: String,
        collection: DecadeId,
        #[source]
        source: FeedbackError,
    },
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// One row of a term table: the top terms of one collection, each flagged
/// when it also appears in another row, or `None` when the keyword is absent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermRow {
    pub collection: DecadeId,
    pub terms: Option<Vec<(String, bool)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermTable {
    pub query: String,
    pub top_n: usize,
    pub rows: Vec<TermRow>,
}

/// τ between the FULL-expansion ranking and each decade-expansion ranking,
/// per query; `None` marks an absent keyword.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauTable {
    pub queries: Vec<String>,
    pub decades: Vec<DecadeId>,
    /// `cells[query][decade]`
    pub cells: Vec<Vec<Option<f64>>>,
}

/// Per collection pair, one metric aggregated over the query set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonMatrix {
    pub metric: Metric,
    pub labels: Vec<DecadeId>,
    /// `cells[row][col]`; `None` when no query had both sides present.
    pub cells: Vec<Vec<Option<MetricCell>>>,
}

impl ComparisonMatrix {
    pub fn cell(&self, row: DecadeId, col: DecadeId) -> Option<&MetricCell> {
        let r = self.labels.iter().position(|l| *l == row)?;
        let c = self.labels.iter().position(|l| *l == col)?;
        self.cells[r][c].as_ref()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportBundle {
    pub params: PipelineParams,
    /// Indexed decades in order, then FULL.
    pub labels: Vec<DecadeId>,
    pub queries: Vec<QueryEntry>,
    /// `expansions[query][label]`
    pub expansions: Vec<Vec<ExpandedQuery>>,
    pub term_tables: Vec<TermTable>,
    pub tau_table: TauTable,
    pub jaccard: ComparisonMatrix,
    pub jsd: ComparisonMatrix,
}

impl ReportBundle {
    pub fn query_position(&self, keyword: &str) -> Option<usize> {
        self.queries.iter().position(|q| q.keyword == keyword)
    }

    /// Top-`top_n` terms per collection with cross-row overlap flags.
    pub fn term_table(&self, keyword: &str, top_n: usize) -> Result<TermTable, ExperimentError> {
        let qi = self
            .query_position(keyword)
            .ok_or_else(|| ExperimentError::UnknownQuery(keyword.to_owned()))?;
        Ok(term_table(
            keyword,
            &self.labels,
            &self.expansions[qi],
            top_n,
        ))
    }

    pub fn matrix(&self, metric: Metric) -> Option<&ComparisonMatrix> {
        match metric {
            Metric::Jaccard => Some(&self.jaccard),
            Metric::Jsd => Some(&self.jsd),
            Metric::Tau => None,
        }
    }
}

fn term_table(
    keyword: &str,
    labels: &[DecadeId],
    expansions: &[ExpandedQuery],
    top_n: usize,
) -> TermTable {
    let tops: Vec<Option<BTreeSet<&str>>> = expansions
        .iter()
        .map(|eq| {
            eq.expansion()
                .map(|e| e.top(top_n).iter().map(|(t, _)| t.as_str()).collect())
        })
        .collect();
    let rows = labels
        .iter()
        .zip(expansions)
        .enumerate()
        .map(|(row, (label, eq))| TermRow {
            collection: *label,
            terms: eq.expansion().map(|e| {
                e.top(top_n)
                    .iter()
                    .map(|(t, _)| {
                        let shared = tops.iter().enumerate().any(|(other, set)| {
                            other != row && set.as_ref().is_some_and(|s| s.contains(t.as_str()))
                        });
                        (t.clone(), shared)
                    })
                    .collect()
            }),
        })
        .collect();
    TermTable {
        query: keyword.to_owned(),
        top_n,
        rows,
    }
}

/// Metrics for one keyword across two collections, present only when the
/// keyword occurs in both.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairMetrics {
    pub jaccard: f64,
    pub jsd: f64,
    /// τ between the FULL-collection rankings the two expansions induce.
    pub tau: f64,
    pub overlap_terms: Vec<String>,
    pub a_only: Vec<String>,
    pub b_only: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairComparison {
    pub query: String,
    pub a: DecadeId,
    pub b: DecadeId,
    pub a_absent: bool,
    pub b_absent: bool,
    pub metrics: Option<PairMetrics>,
}

/// Expands `keyword` in collections `a` and `b` and compares the results.
pub fn compare_pair(
    corpus: &PartitionedCorpus,
    keyword: &str,
    a: DecadeId,
    b: DecadeId,
    params: &PipelineParams,
) -> Result<PairComparison, ExperimentError> {
    let expand = |label| {
        feedback::expand_query(corpus, label, keyword, &params.feedback).map_err(|source| {
            ExperimentError::Feedback {
                keyword: keyword.to_owned(),
                collection: label,
                source,
            }
        })
    };
    let (ea, eb) = (expand(a)?, expand(b)?);
    let metrics = match (ea.expansion(), eb.expansion()) {
        (Some(x), Some(y)) => {
            let full = corpus.full();
            let rank = |e: &feedback::Expansion| {
                retrieval::search(
                    full,
                    &e.to_weighted_query(),
                    params.depth,
                    params.feedback.bm25,
                )
            };
            let (sx, sy) = (x.term_set(), y.term_set());
            let owned = |set: BTreeSet<&&str>| set.into_iter().map(|t| t.to_string()).collect();
            Some(PairMetrics {
                jaccard: metrics::jaccard(&sx, &sy),
                jsd: metrics::js_divergence(&x.distribution(), &y.distribution(), params.js_base)?,
                tau: metrics::kendall_tau(&rank(x)?, &rank(y)?)?,
                overlap_terms: owned(sx.intersection(&sy).collect()),
                a_only: owned(sx.difference(&sy).collect()),
                b_only: owned(sy.difference(&sx).collect()),
            })
        }
        _ => None,
    };
    Ok(PairComparison {
        query: keyword.to_owned(),
        a,
        b,
        a_absent: ea.is_absent(),
        b_absent: eb.is_absent(),
        metrics,
    })
}

struct QueryOutcome {
    expansions: Vec<ExpandedQuery>,
    tau: Vec<Option<f64>>,
    jaccard: Vec<Vec<Option<f64>>>,
    jsd: Vec<Vec<Option<f64>>>,
}

fn run_query(
    corpus: &PartitionedCorpus,
    labels: &[DecadeId],
    keyword: &str,
    params: &PipelineParams,
) -> Result<QueryOutcome, ExperimentError> {
    let expansions = labels
        .par_iter()
        .map(|&label| {
            feedback::expand_query(corpus, label, keyword, &params.feedback).map_err(|source| {
                ExperimentError::Feedback {
                    keyword: keyword.to_owned(),
                    collection: label,
                    source,
                }
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    // Every expansion is re-run against the full collection.
    let full = corpus.full();
    let rankings = expansions
        .par_iter()
        .map(|eq| {
            eq.expansion()
                .map(|e| {
                    retrieval::search(
                        full,
                        &e.to_weighted_query(),
                        params.depth,
                        params.feedback.bm25,
                    )
                })
                .transpose()
        })
        .collect::<Result<Vec<Option<RankedList>>, _>>()?;
    let full_pos = labels.len() - 1;
    let mut tau = Vec::with_capacity(full_pos);
    for ranking in &rankings[..full_pos] {
        tau.push(match (&rankings[full_pos], ranking) {
            (Some(c), Some(ci)) => Some(metrics::kendall_tau(c, ci)?),
            _ => None,
        });
    }

    let n = labels.len();
    let mut jaccard = vec![vec![None; n]; n];
    let mut jsd = vec![vec![None; n]; n];
    for i in 0..n {
        for j in i..n {
            let (Some(a), Some(b)) = (expansions[i].expansion(), expansions[j].expansion()) else {
                continue;
            };
            let jac = metrics::jaccard(&a.term_set(), &b.term_set());
            let div = metrics::js_divergence(&a.distribution(), &b.distribution(), params.js_base)?;
            jaccard[i][j] = Some(jac);
            jaccard[j][i] = Some(jac);
            jsd[i][j] = Some(div);
            jsd[j][i] = Some(div);
        }
    }
    Ok(QueryOutcome {
        expansions,
        tau,
        jaccard,
        jsd,
    })
}

fn aggregate_matrix(
    metric: Metric,
    labels: &[DecadeId],
    outcomes: &[QueryOutcome],
    pick: impl Fn(&QueryOutcome) -> &Vec<Vec<Option<f64>>>,
) -> ComparisonMatrix {
    let n = labels.len();
    let cells = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let values: Vec<f64> = outcomes.iter().filter_map(|o| pick(o)[i][j]).collect();
                    metrics::aggregate(&values, metric)
                })
                .collect()
        })
        .collect();
    ComparisonMatrix {
        metric,
        labels: labels.to_vec(),
        cells,
    }
}

/// Runs the whole protocol over every indexed collection of `corpus`.
pub fn run_pipeline(
    corpus: &PartitionedCorpus,
    queries: &QuerySet,
    params: &PipelineParams,
) -> Result<ReportBundle, ExperimentError> {
    let labels = corpus.labels();
    for &label in &labels {
        if corpus.index(label).is_none() {
            return Err(ExperimentError::MissingIndex(label));
        }
    }
    let outcomes = queries
        .entries
        .par_iter()
        .map(|q| run_query(corpus, &labels, &q.keyword, params))
        .collect::<Result<Vec<_>, _>>()?;

    let term_tables = queries
        .entries
        .iter()
        .zip(&outcomes)
        .map(|(q, o)| term_table(&q.keyword, &labels, &o.expansions, params.top_n))
        .collect();
    let tau_table = TauTable {
        queries: queries.keywords().map(str::to_owned).collect(),
        decades: labels[..labels.len() - 1].to_vec(),
        cells: outcomes.iter().map(|o| o.tau.clone()).collect(),
    };
    let jaccard = aggregate_matrix(Metric::Jaccard, &labels, &outcomes, |o| &o.jaccard);
    let jsd = aggregate_matrix(Metric::Jsd, &labels, &outcomes, |o| &o.jsd);
    Ok(ReportBundle {
        params: *params,
        labels,
        queries: queries.entries.clone(),
        expansions: outcomes.into_iter().map(|o| o.expansions).collect(),
        term_tables,
        tau_table,
        jaccard,
        jsd,
    })
}

/// Loads the configured corpus and query set, runs the pipeline and writes
/// every report file into `out_dir`.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: &std::path::Path,
) -> Result<ReportBundle, ExperimentError> {
    let corpus = config.load_corpus()?;
    let queries = config.load_queries()?;
    let bundle = run_pipeline(&corpus, &queries, &config.params)?;
    write_reports(&bundle, out_dir)?;
    Ok(bundle)
}
