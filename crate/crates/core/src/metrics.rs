//! Comparison measures between expansions and between ranked lists, and their
//! aggregation over a query set.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::retrieval::RankedList;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("Kendall's tau is undefined for two empty lists")]
    EmptyLists,
    #[error("distribution sums to {0}, expected 1")]
    NotNormalized(f64),
    #[error("distribution has a negative or non-finite weight")]
    BadWeight,
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),
    #[error("unknown log base {0:?} (expected 2 or e)")]
    UnknownBase(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Jaccard,
    Jsd,
    Tau,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Jaccard => "jaccard",
            Metric::Jsd => "jsd",
            Metric::Tau => "tau",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jaccard" => Ok(Metric::Jaccard),
            "jsd" => Ok(Metric::Jsd),
            "tau" => Ok(Metric::Tau),
            other => Err(MetricError::UnknownMetric(other.to_owned())),
        }
    }
}

/// |a ∩ b| / |a ∪ b|, and 1 for two empty sets.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LogBase {
    #[default]
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "e")]
    E,
}

impl LogBase {
    fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Two => x.log2(),
            LogBase::E => x.ln(),
        }
    }

    /// Largest attainable divergence: 1 bit, or ln 2 nats.
    pub fn max_divergence(self) -> f64 {
        match self {
            LogBase::Two => 1.0,
            LogBase::E => std::f64::consts::LN_2,
        }
    }
}

impl fmt::Display for LogBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LogBase::Two => "2",
            LogBase::E => "e",
        })
    }
}

impl FromStr for LogBase {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "2" => Ok(LogBase::Two),
            "e" => Ok(LogBase::E),
            other => Err(MetricError::UnknownBase(other.to_owned())),
        }
    }
}

fn check_distribution<K>(d: &BTreeMap<K, f64>) -> Result<(), MetricError> {
    if d.values().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(MetricError::BadWeight);
    }
    let sum: f64 = d.values().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(MetricError::NotNormalized(sum));
    }
    Ok(())
}

/// Jensen–Shannon divergence over the union of supports (missing terms have
/// probability 0).
pub fn js_divergence<K: Ord>(
    p: &BTreeMap<K, f64>,
    q: &BTreeMap<K, f64>,
    base: LogBase,
) -> Result<f64, MetricError> {
    check_distribution(p)?;
    check_distribution(q)?;
    let term = |x: f64, m: f64| if x > 0.0 { x * base.log(x / m) } else { 0.0 };
    let mut kl_p = 0.0;
    let mut kl_q = 0.0;
    let keys: BTreeSet<&K> = p.keys().chain(q.keys()).collect();
    for k in keys {
        let pk = p.get(k).copied().unwrap_or(0.0);
        let qk = q.get(k).copied().unwrap_or(0.0);
        let m = (pk + qk) / 2.0;
        kl_p += term(pk, m);
        kl_q += term(qk, m);
    }
    let jsd = 0.5 * kl_p + 0.5 * kl_q;
    Ok(jsd.clamp(0.0, base.max_divergence()))
}

/// Competition ranks (1, 2, 2, 4, ...) by score for every listed doc.
fn list_ranks(list: &RankedList) -> HashMap<&str, u64> {
    let mut ranks = HashMap::with_capacity(list.entries.len());
    let mut rank = 0u64;
    let mut prev: Option<f64> = None;
    for (i, (doc, score)) in list.entries.iter().enumerate() {
        if prev != Some(*score) {
            rank = i as u64 + 1;
            prev = Some(*score);
        }
        ranks.insert(doc.as_str(), rank);
    }
    ranks
}

/// Paired ranks over the union of both lists. A doc missing from a list gets
/// rank depth + 1 there, so all of a list's absentees are tied.
pub fn paired_ranks(a: &RankedList, b: &RankedList) -> Vec<(u64, u64)> {
    let ra = list_ranks(a);
    let rb = list_ranks(b);
    let absent_a = a.depth.max(a.len()) as u64 + 1;
    let absent_b = b.depth.max(b.len()) as u64 + 1;
    let union: BTreeSet<&str> = a.doc_ids().chain(b.doc_ids()).collect();
    union
        .into_iter()
        .map(|d| {
            (
                ra.get(d).copied().unwrap_or(absent_a),
                rb.get(d).copied().unwrap_or(absent_b),
            )
        })
        .collect()
}

/// Pair counts behind τ-b.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TauCounts {
    /// Concordant minus discordant pairs.
    pub score: i64,
    pub pairs: u64,
    pub ties_x: u64,
    pub ties_y: u64,
}

impl TauCounts {
    /// τ-b, or `None` when either variable is constant.
    pub fn tau_b(&self) -> Option<f64> {
        let dx = self.pairs - self.ties_x;
        let dy = self.pairs - self.ties_y;
        if dx == 0 || dy == 0 {
            return None;
        }
        Some(self.score as f64 / ((dx as f64) * (dy as f64)).sqrt())
    }
}

fn tie_pairs<T: PartialEq>(sorted: impl Iterator<Item = T>) -> u64 {
    let mut total = 0u64;
    let mut run = 0u64;
    let mut prev: Option<T> = None;
    for v in sorted {
        if prev.as_ref() == Some(&v) {
            run += 1;
        } else {
            total += run * (run.saturating_sub(1)) / 2;
            run = 1;
            prev = Some(v);
        }
    }
    total + run * run.saturating_sub(1) / 2
}

/// Merge sort on `ys`, returning the number of inversions (strictly
/// decreasing pairs).
fn sort_count_inversions(ys: &mut [u64], buf: &mut Vec<u64>) -> u64 {
    let n = ys.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = sort_count_inversions(&mut ys[..mid], buf);
    swaps += sort_count_inversions(&mut ys[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if ys[i] <= ys[j] {
            buf.push(ys[i]);
            i += 1;
        } else {
            buf.push(ys[j]);
            swaps += (mid - i) as u64;
            j += 1;
        }
    }
    buf.extend_from_slice(&ys[i..mid]);
    buf.extend_from_slice(&ys[j..n]);
    ys.copy_from_slice(buf);
    swaps
}

/// O(n log n) pair counts (Knight's method).
pub fn tau_counts(pairs: &[(u64, u64)]) -> TauCounts {
    let n = pairs.len() as u64;
    let total = n * n.saturating_sub(1) / 2;
    let mut sorted = pairs.to_vec();
    sorted.sort_unstable();
    let ties_x = tie_pairs(sorted.iter().map(|p| p.0));
    let ties_xy = tie_pairs(sorted.iter().copied());
    let mut ys: Vec<u64> = sorted.iter().map(|p| p.1).collect();
    let mut buf = Vec::with_capacity(ys.len());
    let swaps = sort_count_inversions(&mut ys, &mut buf);
    let ties_y = tie_pairs(ys.iter().copied());
    let score = total as i64 - ties_x as i64 - ties_y as i64 + ties_xy as i64 - 2 * swaps as i64;
    TauCounts {
        score,
        pairs: total,
        ties_x,
        ties_y,
    }
}

/// Kendall's τ-b between two ranked lists over the union of their docs.
///
/// Score ties within a list are rank ties. When τ-b is undefined because one
/// side is constant, the result is 1 if both lists hold the same docs in the
/// same order and 0 otherwise.
pub fn kendall_tau(a: &RankedList, b: &RankedList) -> Result<f64, MetricError> {
    if a.is_empty() && b.is_empty() {
        return Err(MetricError::EmptyLists);
    }
    let pairs = paired_ranks(a, b);
    Ok(tau_counts(&pairs).tau_b().unwrap_or_else(|| {
        if a.doc_ids().eq(b.doc_ids()) {
            1.0
        } else {
            0.0
        }
    }))
}

/// Mean and population standard deviation of one metric over a query set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricCell {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
    pub metric: Metric,
}

/// `None` when no query contributed a value.
pub fn aggregate(values: &[f64], metric: Metric) -> Option<MetricCell> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some(MetricCell {
        mean,
        std: var.sqrt(),
        n: values.len(),
        metric,
    })
}
