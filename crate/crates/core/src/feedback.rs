//! Relevance-model (RM1 / RM3) expansion terms estimated from pseudo-relevant
//! feedback paragraphs.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::DecadeId;
use crate::index::Index;
use crate::partition::PartitionedCorpus;
use crate::retrieval::{self, Bm25Params, RetrievalError, WeightedQuery};

/// Term → probability. Keys iterate in term order.
pub type TermDistribution = BTreeMap<String, f64>;

#[derive(Debug, Error, PartialEq)]
pub enum FeedbackError {
    #[error("query term {0:?} is not in the collection vocabulary")]
    OutOfVocabulary(String),
    #[error("keyword {0:?} contains no indexable terms")]
    EmptyQuery(String),
    #[error("collection {0} is not indexed")]
    UnknownCollection(DecadeId),
    #[error("fb_docs and fb_terms must be at least 1")]
    BadDepth,
    #[error("interpolation weight {0} is outside [0, 1]")]
    BadLambda(f64),
    #[error("no feedback documents matched the query")]
    NoFeedbackDocs,
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackParams {
    /// Feedback paragraphs taken from the first-stage ranking.
    pub fb_docs: usize,
    /// Expansion terms kept after truncation.
    pub fb_terms: usize,
    /// Dirichlet pseudo-count used in the query likelihood.
    pub mu: f64,
    /// Weight of the original query in RM3 mixing; 0 keeps pure RM1.
    pub lambda: f64,
    pub bm25: Bm25Params,
}

impl Default for FeedbackParams {
    fn default() -> Self {
        Self {
            fb_docs: 100,
            fb_terms: 100,
            mu: 1000.0,
            lambda: 0.0,
            bm25: Bm25Params::default(),
        }
    }
}

/// RM1: `P(w|R) ∝ Σ_{d∈D} P_ml(w|d) · P(Q|d)` over the top `fb_docs` BM25
/// paragraphs, with `P(Q|d)` the Dirichlet-smoothed query likelihood.
pub fn estimate_rm1(
    index: &Index,
    query_terms: &[String],
    fb_docs: usize,
    mu: f64,
    bm25: Bm25Params,
) -> Result<TermDistribution, FeedbackError> {
    if fb_docs == 0 {
        return Err(FeedbackError::BadDepth);
    }
    let mut ordinals = Vec::with_capacity(query_terms.len());
    for t in query_terms {
        let ord = index
            .term_ordinal(t)
            .ok_or_else(|| FeedbackError::OutOfVocabulary(t.clone()))?;
        ordinals.push(ord);
    }
    let first_stage = WeightedQuery::keywords(query_terms, index.collection());
    let feedback = retrieval::search_ordinals(index, &first_stage, fb_docs, bm25)?;
    if feedback.is_empty() {
        return Err(FeedbackError::NoFeedbackDocs);
    }
    if feedback.len() < fb_docs {
        warn!(
            "{}: only {} of {} feedback paragraphs matched {:?}",
            index.collection(),
            feedback.len(),
            fb_docs,
            query_terms
        );
    }

    let total = index.total_tokens() as f64;
    let log_likelihoods: Vec<f64> = feedback
        .iter()
        .map(|&(doc, _)| {
            let dl = f64::from(index.doc(doc).len);
            ordinals
                .iter()
                .map(|&q| {
                    let tf = f64::from(index.tf(q, doc));
                    let background = index.term_cf(q) as f64 / total;
                    ((tf + mu * background) / (dl + mu)).ln()
                })
                .sum()
        })
        .collect();
    // Shift by the maximum so the best document has weight 1; the shift
    // cancels in normalization.
    let max = log_likelihoods
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);

    let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
    for (&(doc, _), ll) in feedback.iter().zip(&log_likelihoods) {
        let doc_weight = (ll - max).exp();
        let dl = f64::from(index.doc(doc).len);
        for &(term, tf) in index.doc_terms(doc) {
            *acc.entry(term).or_insert(0.0) += f64::from(tf) / dl * doc_weight;
        }
    }
    let norm: f64 = acc.values().sum();
    Ok(acc
        .into_iter()
        .map(|(t, w)| (index.term(t).to_owned(), w / norm))
        .collect())
}

/// Orders by weight descending, then term ascending.
fn rank_order(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

/// Keeps the `fb_terms` heaviest terms (lexicographic tiebreak) and rescales
/// them to sum to 1. Zero-weight terms are dropped.
pub fn truncate_renormalize(dist: &TermDistribution, fb_terms: usize) -> Vec<(String, f64)> {
    let mut ranked: Vec<(String, f64)> = dist
        .iter()
        .filter(|(_, &w)| w > 0.0)
        .map(|(t, &w)| (t.clone(), w))
        .collect();
    ranked.sort_by(rank_order);
    ranked.truncate(fb_terms);
    let scale = 1.0 / ranked.iter().map(|(_, w)| w).sum::<f64>();
    for (_, w) in &mut ranked {
        *w *= scale;
    }
    ranked
}

/// RM3: `λ · P_orig(w) + (1 − λ) · P_rm1(w)` with `P_orig` uniform over the
/// original query terms, renormalized.
pub fn interpolate_rm3(
    original: &[String],
    rm1: &TermDistribution,
    lambda: f64,
) -> Result<TermDistribution, FeedbackError> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(FeedbackError::BadLambda(lambda));
    }
    let mut mixed: TermDistribution = rm1
        .iter()
        .map(|(t, &w)| (t.clone(), (1.0 - lambda) * w))
        .collect();
    if !original.is_empty() {
        let share = lambda / original.len() as f64;
        for t in original {
            *mixed.entry(t.clone()).or_insert(0.0) += share;
        }
    }
    mixed.retain(|_, w| *w > 0.0);
    let norm: f64 = mixed.values().sum();
    for w in mixed.values_mut() {
        *w /= norm;
    }
    Ok(mixed)
}

/// A truncated, normalized expansion for one (keyword, collection).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Expansion {
    pub query: String,
    pub origin: DecadeId,
    /// Weight descending, term ascending on ties; weights sum to 1.
    pub terms: Vec<(String, f64)>,
    pub fb_docs: usize,
    pub fb_terms: usize,
}

impl Expansion {
    pub fn term_set(&self) -> std::collections::BTreeSet<&str> {
        self.terms.iter().map(|(t, _)| t.as_str()).collect()
    }

    pub fn distribution(&self) -> BTreeMap<&str, f64> {
        self.terms.iter().map(|(t, w)| (t.as_str(), *w)).collect()
    }

    pub fn top(&self, n: usize) -> &[(String, f64)] {
        &self.terms[..n.min(self.terms.len())]
    }

    pub fn to_weighted_query(&self) -> WeightedQuery {
        WeightedQuery::weighted(&self.terms, self.origin)
    }
}

/// An expansion, or the marker for a keyword the collection never uses.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExpandedQuery {
    Absent { query: String, origin: DecadeId },
    Present(Expansion),
}

impl ExpandedQuery {
    pub fn is_absent(&self) -> bool {
        matches!(self, ExpandedQuery::Absent { .. })
    }

    pub fn expansion(&self) -> Option<&Expansion> {
        match self {
            ExpandedQuery::Present(e) => Some(e),
            ExpandedQuery::Absent { .. } => None,
        }
    }
}

/// Analyzes `keyword`, then expands it against `collection`. The result is
/// Absent when any of the keyword's stems is missing from that collection.
pub fn expand_query(
    corpus: &PartitionedCorpus,
    collection: DecadeId,
    keyword: &str,
    params: &FeedbackParams,
) -> Result<ExpandedQuery, FeedbackError> {
    if params.fb_docs == 0 || params.fb_terms == 0 {
        return Err(FeedbackError::BadDepth);
    }
    let index = corpus
        .index(collection)
        .ok_or(FeedbackError::UnknownCollection(collection))?;
    let terms = corpus.analyzer().analyze(keyword);
    if terms.is_empty() {
        return Err(FeedbackError::EmptyQuery(keyword.to_owned()));
    }
    if terms.iter().any(|t| !index.contains_term(t)) {
        return Ok(ExpandedQuery::Absent {
            query: keyword.to_owned(),
            origin: collection,
        });
    }
    let mut dist = estimate_rm1(index, &terms, params.fb_docs, params.mu, params.bm25)?;
    if params.lambda > 0.0 {
        dist = interpolate_rm3(&terms, &dist, params.lambda)?;
    }
    Ok(ExpandedQuery::Present(Expansion {
        query: keyword.to_owned(),
        origin: collection,
        terms: truncate_renormalize(&dist, params.fb_terms),
        fb_docs: params.fb_docs,
        fb_terms: params.fb_terms,
    }))
}
