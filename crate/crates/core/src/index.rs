//! Immutable in-memory inverted index with BM25 / language-model statistics
//! and a checksummed single-file persisted form.
//!
//! File layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes   "LXDRIDX\0"
//! version    u32       FORMAT_VERSION
//! length     u64       payload byte count
//! checksum   32 bytes  SHA-256 of the payload
//! payload:
//!   collection  str
//!   num_docs    u32, then per doc: doc_id str, novel_id str, length u32
//!   num_terms   u32, then per term (sorted): term str, df u32,
//!               then df × (doc ordinal u32, tf u32)
//! ```
//!
//! `str` is a u32 byte length followed by UTF-8 bytes. Documents are stored in
//! doc_id order and doc ordinals index that table.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{DecadeId, Paragraph};

pub const MAGIC: &[u8; 8] = b"LXDRIDX\0";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8 + 32;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("cannot index an empty paragraph set for {0}")]
    Empty(DecadeId),
    #[error("duplicate doc id {0:?}")]
    DuplicateDocId(String),
    #[error("paragraph {doc_id} belongs to {found}, not {expected}")]
    WrongCollection {
        doc_id: String,
        expected: DecadeId,
        found: DecadeId,
    },
    #[error("paragraph {0} has no tokens")]
    EmptyParagraph(String),
    #[error("unknown doc id {0:?}")]
    UnknownDoc(String),
    #[error("not an index file (bad magic)")]
    BadMagic,
    #[error("index format version {found} is not supported (expected {FORMAT_VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("checksum mismatch: index file is truncated or corrupt")]
    Checksum,
    #[error("malformed index payload: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocEntry {
    pub doc_id: String,
    pub novel_id: String,
    pub len: u32,
}

/// Posting with the doc referenced by its ordinal in the doc table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawPosting {
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting<'a> {
    pub doc_id: &'a str,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexStats {
    pub num_docs: usize,
    pub avg_doc_len: f64,
    pub total_tokens: u64,
    pub df: BTreeMap<String, u32>,
    pub cf: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq)]
struct TermEntry {
    cf: u64,
    postings: Vec<RawPosting>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    collection: DecadeId,
    docs: Vec<DocEntry>,
    doc_lookup: HashMap<String, u32>,
    vocab: Vec<String>,
    term_lookup: HashMap<String, u32>,
    entries: Vec<TermEntry>,
    /// Per doc: (term ordinal, tf), sorted by term ordinal.
    forward: Vec<Vec<(u32, u32)>>,
    total_tokens: u64,
}

impl Index {
    pub fn build(collection: DecadeId, paragraphs: &[Paragraph]) -> Result<Self, IndexError> {
        if paragraphs.is_empty() {
            return Err(IndexError::Empty(collection));
        }
        let mut sorted: Vec<&Paragraph> = paragraphs.iter().collect();
        sorted.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        for pair in sorted.windows(2) {
            if pair[0].doc_id == pair[1].doc_id {
                return Err(IndexError::DuplicateDocId(pair[0].doc_id.clone()));
            }
        }
        for p in &sorted {
            if !collection.is_full() && p.decade != collection {
                return Err(IndexError::WrongCollection {
                    doc_id: p.doc_id.clone(),
                    expected: collection,
                    found: p.decade,
                });
            }
            if p.tokens.is_empty() {
                return Err(IndexError::EmptyParagraph(p.doc_id.clone()));
            }
        }

        let mut postings: HashMap<&str, Vec<RawPosting>> = HashMap::new();
        let mut docs = Vec::with_capacity(sorted.len());
        for (ordinal, p) in sorted.iter().enumerate() {
            let mut counts: HashMap<&str, u32> = HashMap::new();
            for t in &p.tokens {
                *counts.entry(t.as_str()).or_default() += 1;
            }
            for (term, tf) in counts {
                postings.entry(term).or_default().push(RawPosting {
                    doc: ordinal as u32,
                    tf,
                });
            }
            docs.push(DocEntry {
                doc_id: p.doc_id.clone(),
                novel_id: p.novel_id.clone(),
                len: p.tokens.len() as u32,
            });
        }
        let mut terms: Vec<(String, Vec<RawPosting>)> = postings
            .into_iter()
            .map(|(t, mut ps)| {
                ps.sort_unstable_by_key(|p| p.doc);
                (t.to_owned(), ps)
            })
            .collect();
        terms.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        Ok(Self::assemble(collection, docs, terms))
    }

    fn assemble(
        collection: DecadeId,
        docs: Vec<DocEntry>,
        terms: Vec<(String, Vec<RawPosting>)>,
    ) -> Self {
        let mut forward: Vec<Vec<(u32, u32)>> = vec![Vec::new(); docs.len()];
        let mut vocab = Vec::with_capacity(terms.len());
        let mut entries = Vec::with_capacity(terms.len());
        for (term_ord, (term, postings)) in terms.into_iter().enumerate() {
            for p in &postings {
                forward[p.doc as usize].push((term_ord as u32, p.tf));
            }
            let cf = postings.iter().map(|p| u64::from(p.tf)).sum();
            vocab.push(term);
            entries.push(TermEntry { cf, postings });
        }
        let doc_lookup = docs
            .iter()
            .enumerate()
            .map(|(i, d)| (d.doc_id.clone(), i as u32))
            .collect();
        let term_lookup = vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        let total_tokens = docs.iter().map(|d| u64::from(d.len)).sum();
        Self {
            collection,
            docs,
            doc_lookup,
            vocab,
            term_lookup,
            entries,
            forward,
            total_tokens,
        }
    }

    pub fn collection(&self) -> DecadeId {
        self.collection
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.total_tokens as f64 / self.docs.len() as f64
    }

    pub fn num_novels(&self) -> usize {
        self.docs
            .iter()
            .map(|d| d.novel_id.as_str())
            .collect::<HashSet<_>>()
            .len()
    }

    pub fn vocabulary_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn contains_term(&self, term: &str) -> bool {
        self.term_lookup.contains_key(term)
    }

    pub fn term_ordinal(&self, term: &str) -> Option<u32> {
        self.term_lookup.get(term).copied()
    }

    pub fn term(&self, ordinal: u32) -> &str {
        &self.vocab[ordinal as usize]
    }

    pub fn doc(&self, ordinal: u32) -> &DocEntry {
        &self.docs[ordinal as usize]
    }

    pub fn doc_ordinal(&self, doc_id: &str) -> Option<u32> {
        self.doc_lookup.get(doc_id).copied()
    }

    pub fn df(&self, term: &str) -> u32 {
        self.term_ordinal(term)
            .map_or(0, |t| self.entries[t as usize].postings.len() as u32)
    }

    pub fn cf(&self, term: &str) -> u64 {
        self.term_ordinal(term)
            .map_or(0, |t| self.entries[t as usize].cf)
    }

    pub fn term_postings(&self, ordinal: u32) -> &[RawPosting] {
        &self.entries[ordinal as usize].postings
    }

    pub fn term_cf(&self, ordinal: u32) -> u64 {
        self.entries[ordinal as usize].cf
    }

    /// Term frequencies of one document, ordered by term ordinal.
    pub fn doc_terms(&self, doc: u32) -> &[(u32, u32)] {
        &self.forward[doc as usize]
    }

    /// Term frequency of `term_ordinal` in `doc`, 0 if absent.
    pub fn tf(&self, term_ordinal: u32, doc: u32) -> u32 {
        let row = &self.forward[doc as usize];
        row.binary_search_by_key(&term_ordinal, |&(t, _)| t)
            .map_or(0, |i| row[i].1)
    }

    /// All postings of `term` in doc_id order; empty for unseen terms.
    pub fn postings(&self, term: &str) -> Vec<Posting<'_>> {
        let Some(t) = self.term_ordinal(term) else {
            return Vec::new();
        };
        self.term_postings(t)
            .iter()
            .map(|p| Posting {
                doc_id: &self.docs[p.doc as usize].doc_id,
                tf: p.tf,
            })
            .collect()
    }

    pub fn stats(&self) -> IndexStats {
        IndexStats {
            num_docs: self.num_docs(),
            avg_doc_len: self.avg_doc_len(),
            total_tokens: self.total_tokens,
            df: self
                .vocab
                .iter()
                .zip(&self.entries)
                .map(|(t, e)| (t.clone(), e.postings.len() as u32))
                .collect(),
            cf: self
                .vocab
                .iter()
                .zip(&self.entries)
                .map(|(t, e)| (t.clone(), e.cf))
                .collect(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut payload = Vec::new();
        put_str(&mut payload, self.collection.label());
        put_u32(&mut payload, self.docs.len() as u32);
        for d in &self.docs {
            put_str(&mut payload, &d.doc_id);
            put_str(&mut payload, &d.novel_id);
            put_u32(&mut payload, d.len);
        }
        put_u32(&mut payload, self.vocab.len() as u32);
        for (term, entry) in self.vocab.iter().zip(&self.entries) {
            put_str(&mut payload, term);
            put_u32(&mut payload, entry.postings.len() as u32);
            for p in &entry.postings {
                put_u32(&mut payload, p.doc);
                put_u32(&mut payload, p.tf);
            }
        }
        let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, FORMAT_VERSION);
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&Sha256::digest(&payload));
        out.extend_from_slice(&payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IndexError> {
        if bytes.len() < 8 || &bytes[..8] != MAGIC {
            return Err(IndexError::BadMagic);
        }
        if bytes.len() < HEADER_LEN {
            return Err(IndexError::Checksum);
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(IndexError::UnsupportedVersion { found: version });
        }
        let len = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
        let payload = &bytes[HEADER_LEN..];
        if payload.len() as u64 != len || Sha256::digest(payload).as_slice() != &bytes[20..52] {
            return Err(IndexError::Checksum);
        }
        let mut r = Reader { buf: payload };
        let label = r.str()?;
        let collection = label
            .parse::<DecadeId>()
            .map_err(|e| IndexError::Malformed(e.to_string()))?;
        let num_docs = r.u32()? as usize;
        let mut docs = Vec::with_capacity(num_docs.min(payload.len()));
        for _ in 0..num_docs {
            docs.push(DocEntry {
                doc_id: r.str()?,
                novel_id: r.str()?,
                len: r.u32()?,
            });
        }
        let num_terms = r.u32()? as usize;
        let mut terms = Vec::with_capacity(num_terms.min(payload.len()));
        for _ in 0..num_terms {
            let term = r.str()?;
            let df = r.u32()? as usize;
            let mut postings = Vec::with_capacity(df.min(payload.len()));
            for _ in 0..df {
                let doc = r.u32()?;
                let tf = r.u32()?;
                if doc as usize >= num_docs || tf == 0 {
                    return Err(IndexError::Malformed(format!("bad posting for {term:?}")));
                }
                postings.push(RawPosting { doc, tf });
            }
            terms.push((term, postings));
        }
        if !r.buf.is_empty() {
            return Err(IndexError::Malformed("trailing bytes".into()));
        }
        Ok(Self::assemble(collection, docs, terms))
    }

    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IndexError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], IndexError> {
        if self.buf.len() < n {
            return Err(IndexError::Malformed("unexpected end of payload".into()));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32, IndexError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn str(&mut self) -> Result<String, IndexError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| IndexError::Malformed(e.to_string()))
    }
}
