//! Brute-force reference implementations, computed directly from raw
//! paragraphs and lists without touching the index or the fast paths.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use lexdrift_core::corpus::{DecadeId, Paragraph};
use lexdrift_core::synth::filler_word;
use rand::seq::SliceRandom;
use rand::Rng;

pub struct RawCorpus<'a> {
    docs: Vec<&'a Paragraph>,
    tf: Vec<HashMap<&'a str, u32>>,
    df: HashMap<&'a str, u32>,
    cf: HashMap<&'a str, u64>,
    total: u64,
}

impl<'a> RawCorpus<'a> {
    pub fn new(paragraphs: &'a [Paragraph]) -> Self {
        let mut docs: Vec<&Paragraph> = paragraphs.iter().collect();
        docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        let mut tf = Vec::new();
        let mut df: HashMap<&str, u32> = HashMap::new();
        let mut cf: HashMap<&str, u64> = HashMap::new();
        let mut total = 0;
        for d in &docs {
            let mut counts: HashMap<&str, u32> = HashMap::new();
            for t in &d.tokens {
                *counts.entry(t.as_str()).or_default() += 1;
                *cf.entry(t.as_str()).or_default() += 1;
                total += 1;
            }
            for t in counts.keys() {
                *df.entry(t).or_default() += 1;
            }
            tf.push(counts);
        }
        Self {
            docs,
            tf,
            df,
            cf,
            total,
        }
    }

    /// Scores every document, keeps positive scores, sorts, truncates.
    pub fn bm25_search(
        &self,
        query: &BTreeMap<String, f64>,
        k: usize,
        k1: f64,
        b: f64,
    ) -> Vec<(String, f64)> {
        let n = self.docs.len() as f64;
        let avgdl = self.total as f64 / n;
        let mut scored = Vec::new();
        for (i, doc) in self.docs.iter().enumerate() {
            let dl = doc.tokens.len() as f64;
            let mut score = 0.0;
            for (term, &w) in query {
                let Some(&tf) = self.tf[i].get(term.as_str()) else {
                    continue;
                };
                let df = f64::from(self.df[term.as_str()]);
                let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                let tf = f64::from(tf);
                score += w * (idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * dl / avgdl)));
            }
            if score > 0.0 {
                scored.push((doc.doc_id.clone(), score));
            }
        }
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        scored.truncate(k);
        scored
    }

    /// RM1 with an explicit (non-log) query-likelihood product.
    pub fn rm1(&self, query: &[String], fb_docs: usize, mu: f64) -> BTreeMap<String, f64> {
        let mut q = BTreeMap::new();
        for t in query {
            *q.entry(t.clone()).or_insert(0.0) += 1.0;
        }
        let top = self.bm25_search(&q, fb_docs, 1.2, 0.75);
        let by_id: HashMap<&str, usize> = self
            .docs
            .iter()
            .enumerate()
            .map(|(i, d)| (d.doc_id.as_str(), i))
            .collect();
        let mut acc: BTreeMap<String, f64> = BTreeMap::new();
        for (doc_id, _) in &top {
            let i = by_id[doc_id.as_str()];
            let dl = self.docs[i].tokens.len() as f64;
            let mut likelihood = 1.0;
            for t in query {
                let tf = f64::from(self.tf[i].get(t.as_str()).copied().unwrap_or(0));
                let p_c = self.cf[t.as_str()] as f64 / self.total as f64;
                likelihood *= (tf + mu * p_c) / (dl + mu);
            }
            for (t, &tf) in &self.tf[i] {
                *acc.entry(t.to_string()).or_insert(0.0) += f64::from(tf) / dl * likelihood;
            }
        }
        let z: f64 = acc.values().sum();
        acc.values_mut().for_each(|v| *v /= z);
        acc
    }
}

/// Random corpus: up to `max_docs` paragraphs over at most `vocab` words.
pub fn random_paragraphs(rng: &mut impl Rng, max_docs: usize, vocab: usize) -> Vec<Paragraph> {
    let n = rng.gen_range(1..=max_docs);
    let v = rng.gen_range(1..=vocab);
    let words: Vec<String> = (0..v).map(filler_word).collect();
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(rng);
    ids.into_iter()
        .map(|i| {
            let len = rng.gen_range(1..=12);
            Paragraph {
                doc_id: format!("n{:02}#{:06}", i % 7, i),
                novel_id: format!("n{:02}", i % 7),
                decade: DecadeId::D1860s,
                tokens: (0..len)
                    .map(|_| words[rng.gen_range(0..v)].clone())
                    .collect(),
            }
        })
        .collect()
}

/// τ-b by direct pair enumeration over the union of two lists.
pub fn tau_by_pairs(
    a: &[(String, f64)],
    a_depth: usize,
    b: &[(String, f64)],
    b_depth: usize,
) -> f64 {
    fn ranks(list: &[(String, f64)]) -> HashMap<&str, u64> {
        list.iter()
            .map(|(d, s)| {
                let higher = list.iter().filter(|(_, t)| t > s).count() as u64;
                (d.as_str(), higher + 1)
            })
            .collect()
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let mut union: Vec<&str> = a.iter().chain(b).map(|(d, _)| d.as_str()).collect();
    union.sort_unstable();
    union.dedup();
    let x: Vec<u64> = union
        .iter()
        .map(|d| ra.get(d).copied().unwrap_or(a_depth as u64 + 1))
        .collect();
    let y: Vec<u64> = union
        .iter()
        .map(|d| rb.get(d).copied().unwrap_or(b_depth as u64 + 1))
        .collect();
    let (mut concordant, mut discordant, mut tie_x, mut tie_y, mut pairs) =
        (0i64, 0i64, 0u64, 0u64, 0u64);
    for i in 0..union.len() {
        for j in i + 1..union.len() {
            pairs += 1;
            let dx = x[i].cmp(&x[j]);
            let dy = y[i].cmp(&y[j]);
            if dx.is_eq() {
                tie_x += 1;
            }
            if dy.is_eq() {
                tie_y += 1;
            }
            if dx.is_ne() && dy.is_ne() {
                if dx == dy {
                    concordant += 1;
                } else {
                    discordant += 1;
                }
            }
        }
    }
    let (nx, ny) = (pairs - tie_x, pairs - tie_y);
    if nx == 0 || ny == 0 {
        let same = a.len() == b.len() && a.iter().zip(b).all(|(p, q)| p.0 == q.0);
        return if same { 1.0 } else { 0.0 };
    }
    (concordant - discordant) as f64 / ((nx as f64) * (ny as f64)).sqrt()
}

/// Random ranked list over a shared doc universe with score ties.
pub fn random_list(rng: &mut impl Rng, universe: &[String], max_len: usize) -> Vec<(String, f64)> {
    let len = rng.gen_range(0..=max_len.min(universe.len()));
    let mut docs: Vec<String> = universe.choose_multiple(rng, len).cloned().collect();
    docs.shuffle(rng);
    let levels = rng.gen_range(1..=len.max(1) + 1) as u32;
    let mut scores: Vec<f64> = (0..len)
        .map(|_| f64::from(rng.gen_range(0..levels)))
        .collect();
    scores.sort_by(|a, b| b.partial_cmp(a).unwrap());
    docs.into_iter().zip(scores).collect()
}

/// Random normalized distribution over a subset of `support` terms.
pub fn random_distribution(rng: &mut impl Rng, support: usize) -> BTreeMap<String, f64> {
    let mut d = BTreeMap::new();
    let k = rng.gen_range(1..=support);
    for i in 0..support {
        if d.len() < k && rng.gen_bool(0.7) {
            d.insert(format!("t{i}"), rng.gen_range(0.0..1.0f64) + 1e-6);
        }
    }
    if d.is_empty() {
        d.insert("t0".to_string(), 1.0);
    }
    let z: f64 = d.values().sum();
    d.values_mut().for_each(|v| *v /= z);
    d
}
