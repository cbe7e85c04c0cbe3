//! BM25 scoring and top-k retrieval for keyword and weighted expanded queries.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::DecadeId;
use crate::index::Index;

#[derive(Debug, Error, PartialEq)]
pub enum RetrievalError {
    #[error("unknown doc id {0:?}")]
    UnknownDoc(String),
    #[error("retrieval depth must be at least 1")]
    ZeroDepth,
    #[error("query weight for {0:?} is negative or not finite")]
    BadWeight(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

/// Non-negative BM25 idf: `ln(1 + (N - df + 0.5) / (df + 0.5))`.
pub fn idf(num_docs: usize, df: u32) -> f64 {
    let n = num_docs as f64;
    let df = f64::from(df);
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

/// Saturating, length-normalized term weight for one posting.
pub fn bm25_weight(idf: f64, tf: u32, doc_len: u32, avg_doc_len: f64, p: Bm25Params) -> f64 {
    let tf = f64::from(tf);
    let dl = f64::from(doc_len);
    idf * (tf * (p.k1 + 1.0)) / (tf + p.k1 * (1.0 - p.b + p.b * dl / avg_doc_len))
}

/// BM25 contribution of `term` to `doc_id`; 0 when the doc lacks the term.
pub fn bm25_term_score(
    index: &Index,
    term: &str,
    doc_id: &str,
    params: Bm25Params,
) -> Result<f64, RetrievalError> {
    let doc = index
        .doc_ordinal(doc_id)
        .ok_or_else(|| RetrievalError::UnknownDoc(doc_id.to_owned()))?;
    let Some(t) = index.term_ordinal(term) else {
        return Ok(0.0);
    };
    let tf = index.tf(t, doc);
    if tf == 0 {
        return Ok(0.0);
    }
    let idf = idf(index.num_docs(), index.df(term));
    Ok(bm25_weight(
        idf,
        tf,
        index.doc(doc).len,
        index.avg_doc_len(),
        params,
    ))
}

/// Term → non-negative weight, plus the collection that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedQuery {
    pub terms: BTreeMap<String, f64>,
    pub origin: DecadeId,
}

impl WeightedQuery {
    /// First-stage query: weight = number of occurrences of each term.
    pub fn keywords<S: AsRef<str>>(terms: &[S], origin: DecadeId) -> Self {
        let mut map = BTreeMap::new();
        for t in terms {
            *map.entry(t.as_ref().to_owned()).or_insert(0.0) += 1.0;
        }
        Self { terms: map, origin }
    }

    pub fn weighted<S: AsRef<str>>(terms: &[(S, f64)], origin: DecadeId) -> Self {
        let mut map = BTreeMap::new();
        for (t, w) in terms {
            *map.entry(t.as_ref().to_owned()).or_insert(0.0) += *w;
        }
        Self { terms: map, origin }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedList {
    pub entries: Vec<(String, f64)>,
    pub depth: usize,
}

impl RankedList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(d, _)| d.as_str())
    }
}

/// Top-k documents by `Σ weight · bm25`, score descending then doc_id
/// ascending. Only documents sharing a positively weighted term are returned.
pub fn search(
    index: &Index,
    query: &WeightedQuery,
    k: usize,
    params: Bm25Params,
) -> Result<RankedList, RetrievalError> {
    Ok(RankedList {
        entries: search_ordinals(index, query, k, params)?
            .into_iter()
            .map(|(doc, score)| (index.doc(doc).doc_id.clone(), score))
            .collect(),
        depth: k,
    })
}

/// As [`search`], returning doc ordinals.
pub fn search_ordinals(
    index: &Index,
    query: &WeightedQuery,
    k: usize,
    params: Bm25Params,
) -> Result<Vec<(u32, f64)>, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::ZeroDepth);
    }
    for (term, &w) in &query.terms {
        if !(w.is_finite() && w >= 0.0) {
            return Err(RetrievalError::BadWeight(term.clone()));
        }
    }
    let n = index.num_docs();
    let avg = index.avg_doc_len();
    let mut acc = vec![0.0f64; n];
    let mut touched: Vec<u32> = Vec::new();
    // Term-at-a-time in term order.
    for (term, &weight) in &query.terms {
        if weight == 0.0 {
            continue;
        }
        let Some(t) = index.term_ordinal(term) else {
            continue;
        };
        let postings = index.term_postings(t);
        let idf = idf(n, postings.len() as u32);
        for p in postings {
            let slot = &mut acc[p.doc as usize];
            if *slot == 0.0 {
                touched.push(p.doc);
            }
            *slot += weight * bm25_weight(idf, p.tf, index.doc(p.doc).len, avg, params);
        }
    }
    let mut hits: Vec<(u32, f64)> = touched.into_iter().map(|d| (d, acc[d as usize])).collect();
    // Doc ordinals follow doc_id order, so ordinal ascending is the tiebreak.
    let by_rank =
        |a: &(u32, f64), b: &(u32, f64)| -> Ordering { b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)) };
    if hits.len() > k {
        hits.select_nth_unstable_by(k - 1, by_rank);
        hits.truncate(k);
    }
    hits.sort_unstable_by(by_rank);
    Ok(hits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Paragraph;

    const D: DecadeId = DecadeId::D1860s;

    fn index(docs: &[(&str, &[&str])]) -> Index {
        let paragraphs: Vec<Paragraph> = docs
            .iter()
            .map(|(id, toks)| Paragraph {
                doc_id: id.to_string(),
                novel_id: id.to_string(),
                decade: D,
                tokens: toks.iter().map(|s| s.to_string()).collect(),
            })
            .collect();
        Index::build(D, &paragraphs).unwrap()
    }

    #[test]
    fn absent_term_scores_zero() {
        let idx = index(&[("a", &["man"]), ("b", &["crime"])]);
        let p = Bm25Params::default();
        assert_eq!(bm25_term_score(&idx, "crime", "a", p).unwrap(), 0.0);
        assert_eq!(bm25_term_score(&idx, "unseen", "a", p).unwrap(), 0.0);
        assert_eq!(
            bm25_term_score(&idx, "crime", "zz", p),
            Err(RetrievalError::UnknownDoc("zz".into()))
        );
    }

    #[test]
    fn single_doc_hand_value() {
        let idx = index(&[("a", &["crime"])]);
        let s = bm25_term_score(&idx, "crime", "a", Bm25Params::default()).unwrap();
        // ln(1 + 0.5/1.5) · (1·2.2 / 2.2)
        assert!((s - (4.0f64 / 3.0).ln()).abs() < 1e-12);
        assert!((s - 0.28768).abs() < 1e-5);
    }

    #[test]
    fn tf_saturation() {
        let p = Bm25Params::default();
        let one = bm25_weight(1.0, 1, 10, 10.0, p);
        let two = bm25_weight(1.0, 2, 10, 10.0, p);
        assert!(two > one && two < 2.0 * one);
    }

    #[test]
    fn only_matching_doc_returned() {
        let idx = index(&[("a", &["man"]), ("b", &["crime", "man"]), ("c", &["trial"])]);
        let q = WeightedQuery::keywords(&["crime"], D);
        let hits = search(&idx, &q, 10, Bm25Params::default()).unwrap();
        assert_eq!(hits.doc_ids().collect::<Vec<_>>(), ["b"]);
        assert_eq!(hits.depth, 10);
    }

    #[test]
    fn ties_break_by_doc_id() {
        let idx = index(&[("b", &["crime"]), ("a", &["crime"]), ("c", &["man"])]);
        let q = WeightedQuery::keywords(&["crime"], D);
        let hits = search(&idx, &q, 10, Bm25Params::default()).unwrap();
        assert_eq!(hits.doc_ids().collect::<Vec<_>>(), ["a", "b"]);
        assert_eq!(hits.entries[0].1, hits.entries[1].1);
        let top1 = search(&idx, &q, 1, Bm25Params::default()).unwrap();
        assert_eq!(top1.doc_ids().collect::<Vec<_>>(), ["a"]);
    }

    #[test]
    fn query_without_indexed_terms_is_empty() {
        let idx = index(&[("a", &["man"])]);
        let q = WeightedQuery::keywords(&["ghost"], D);
        assert!(search(&idx, &q, 5, Bm25Params::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn zero_depth_and_bad_weights_are_errors() {
        let idx = index(&[("a", &["man"])]);
        let q = WeightedQuery::keywords(&["man"], D);
        assert_eq!(
            search(&idx, &q, 0, Bm25Params::default()),
            Err(RetrievalError::ZeroDepth)
        );
        let bad = WeightedQuery::weighted(&[("man", f64::NAN)], D);
        assert!(search(&idx, &bad, 1, Bm25Params::default()).is_err());
    }
}
