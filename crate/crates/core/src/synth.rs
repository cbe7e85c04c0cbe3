//! Seeded synthetic corpora for testing and benchmarking the pipeline.
//!
//! Filler vocabulary is made of consonant-vowel syllables with vowels `a` and
//! `o` only, so every filler word is its own Porter stem and can never collide
//! with a real English keyword.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::{self, DecadeId, Paragraph};
use crate::experiment::QuerySet;
use crate::textproc::Analyzer;

const CONSONANTS: &[u8] = b"bdfgkmnprtvz";
const VOWELS: &[u8] = b"ao";

/// Deterministic filler word for `id`; distinct ids give distinct words.
pub fn filler_word(id: usize) -> String {
    let syllables = CONSONANTS.len() * VOWELS.len();
    let mut n = id;
    let mut out = Vec::new();
    // At least three syllables keeps words clear of short stopwords.
    for _ in 0..3 {
        let s = n % syllables;
        n /= syllables;
        out.push(CONSONANTS[s / VOWELS.len()]);
        out.push(VOWELS[s % VOWELS.len()]);
    }
    while n > 0 {
        let s = (n - 1) % syllables;
        n = (n - 1) / syllables;
        out.push(CONSONANTS[s / VOWELS.len()]);
        out.push(VOWELS[s % VOWELS.len()]);
    }
    String::from_utf8(out).expect("ascii")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SyntheticNovel {
    pub novel_id: String,
    pub title: String,
    pub year: i64,
    pub text: String,
}

impl SyntheticNovel {
    pub fn decade(&self) -> DecadeId {
        corpus::assign_decade(self.year).expect("generated years lie in the corpus span")
    }
}

/// Segments and analyzes novels in memory, as ingestion would from files.
pub fn paragraphs(novels: &[SyntheticNovel], analyzer: &Analyzer) -> Vec<Paragraph> {
    novels
        .iter()
        .flat_map(|n| corpus::segment_paragraphs(&n.text, &n.novel_id, n.decade(), analyzer))
        .collect()
}

/// Writes one text file per novel plus `manifest.jsonl`; returns the manifest path.
pub fn write_corpus(dir: &Path, novels: &[SyntheticNovel]) -> io::Result<PathBuf> {
    let texts = dir.join("texts");
    fs::create_dir_all(&texts)?;
    let mut manifest = String::new();
    for n in novels {
        let rel = format!("texts/{}.txt", n.novel_id);
        fs::write(dir.join(&rel), &n.text)?;
        let line = serde_json::json!({
            "id": n.novel_id,
            "title": n.title,
            "year": n.year,
            "path": rel,
        });
        manifest.push_str(&line.to_string());
        manifest.push('\n');
    }
    let path = dir.join("manifest.jsonl");
    fs::write(&path, manifest)?;
    Ok(path)
}

/// Zipf-like sampler over a block of filler words.
struct Background {
    words: Vec<String>,
    dist: WeightedIndex<f64>,
}

impl Background {
    fn new(first_id: usize, size: usize) -> Self {
        Self {
            words: (first_id..first_id + size).map(filler_word).collect(),
            dist: WeightedIndex::new((0..size).map(|r| 1.0 / (r as f64 + 1.0)))
                .expect("positive weights"),
        }
    }

    fn sample<'a>(&'a self, rng: &mut impl Rng) -> &'a str {
        &self.words[self.dist.sample(rng)]
    }
}

fn push_paragraph(text: &mut String, mut words: Vec<String>, rng: &mut impl Rng) {
    words.shuffle(rng);
    if !text.is_empty() {
        text.push_str("\n\n");
    }
    text.push_str(&words.join(" "));
    text.push('.');
}

/// Two-decade corpus with one drifting and one stable keyword.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftScenario {
    pub drifting_keyword: String,
    pub stable_keyword: String,
    pub early: DecadeId,
    pub late: DecadeId,
    pub novels_per_decade: usize,
    pub paragraphs_per_novel: usize,
    pub words_per_paragraph: usize,
    /// Neighbor words mixed into each keyword paragraph.
    pub neighbors_per_paragraph: usize,
    /// Size of each keyword's neighborhood.
    pub neighborhood: usize,
    /// Probability that a paragraph is about a given keyword.
    pub keyword_rate: f64,
    pub background_size: usize,
}

impl Default for DriftScenario {
    fn default() -> Self {
        Self {
            drifting_keyword: "immigrant".into(),
            stable_keyword: "murder".into(),
            early: DecadeId::D1840s,
            late: DecadeId::D1850s,
            novels_per_decade: 8,
            paragraphs_per_novel: 40,
            words_per_paragraph: 20,
            neighbors_per_paragraph: 6,
            neighborhood: 20,
            keyword_rate: 0.12,
            background_size: 1500,
        }
    }
}

impl DriftScenario {
    /// The drifting keyword co-occurs with one neighborhood in the early decade
    /// and a disjoint one in the late decade; the stable keyword keeps the
    /// same neighborhood throughout.
    pub fn generate(&self, seed: u64) -> Vec<SyntheticNovel> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let background = Background::new(0, self.background_size);
        let hood = |k: usize| -> Vec<String> {
            let start = self.background_size + k * self.neighborhood;
            (start..start + self.neighborhood)
                .map(filler_word)
                .collect()
        };
        let (drift_early, drift_late, stable) = (hood(0), hood(1), hood(2));
        let mut novels = Vec::new();
        for (slot, decade) in [self.early, self.late].into_iter().enumerate() {
            let base_year = decade_start(decade);
            let drift_hood = if slot == 0 { &drift_early } else { &drift_late };
            for n in 0..self.novels_per_decade {
                let mut text = String::new();
                for _ in 0..self.paragraphs_per_novel {
                    let roll: f64 = rng.gen();
                    let topic = if roll < self.keyword_rate {
                        Some((&self.drifting_keyword, drift_hood))
                    } else if roll < 2.0 * self.keyword_rate {
                        Some((&self.stable_keyword, &stable))
                    } else {
                        None
                    };
                    let mut words: Vec<String> = (0..self.words_per_paragraph)
                        .map(|_| background.sample(&mut rng).to_owned())
                        .collect();
                    if let Some((keyword, neighbors)) = topic {
                        words.push(keyword.clone());
                        words.extend(
                            (0..self.neighbors_per_paragraph)
                                .map(|_| neighbors.choose(&mut rng).unwrap().clone()),
                        );
                    }
                    push_paragraph(&mut text, words, &mut rng);
                }
                novels.push(SyntheticNovel {
                    novel_id: format!("{}-{n:03}", decade.label()),
                    title: format!("Synthetic {} novel {n}", decade.label()),
                    year: base_year + rng.gen_range(0..10),
                    text,
                });
            }
        }
        novels
    }
}

fn decade_start(decade: DecadeId) -> i64 {
    let slot = DecadeId::DECADES
        .iter()
        .position(|d| *d == decade)
        .expect("a decade, not FULL");
    1831 + 10 * slot as i64
}

/// Seven-decade corpus mentioning every keyword of a query set, with some
/// keywords missing from the earliest decades.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolCorpus {
    pub queries: QuerySet,
    pub novels_per_decade: usize,
    pub paragraphs_per_novel: usize,
    pub words_per_paragraph: usize,
    pub keyword_rate: f64,
    pub background_size: usize,
    /// Neighborhood size per keyword; a quarter of it shifts each decade.
    pub neighborhood: usize,
}

impl Default for ProtocolCorpus {
    fn default() -> Self {
        Self {
            queries: QuerySet::default(),
            novels_per_decade: 20,
            paragraphs_per_novel: 72,
            words_per_paragraph: 24,
            keyword_rate: 0.3,
            background_size: 5000,
            neighborhood: 24,
        }
    }
}

impl ProtocolCorpus {
    /// Index of the first decade in which keyword `k` occurs. Every fourth
    /// keyword (from the first) is missing from the 1830s, every fourth from
    /// the third is missing from the 1830s and 1840s.
    pub fn first_decade(k: usize) -> usize {
        match k % 4 {
            0 => 1,
            2 => 2,
            _ => 0,
        }
    }

    pub fn total_paragraphs(&self) -> usize {
        7 * self.novels_per_decade * self.paragraphs_per_novel
    }

    pub fn generate(&self, seed: u64) -> Vec<SyntheticNovel> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let background = Background::new(0, self.background_size);
        let keywords: Vec<&str> = self.queries.keywords().collect();
        let hood_base = self.background_size;
        let shift = (self.neighborhood / 4).max(1);
        let mut novels = Vec::new();
        for (slot, decade) in DecadeId::DECADES.into_iter().enumerate() {
            let present: Vec<usize> = (0..keywords.len())
                .filter(|&k| Self::first_decade(k) <= slot)
                .collect();
            for n in 0..self.novels_per_decade {
                let mut text = String::new();
                for _ in 0..self.paragraphs_per_novel {
                    let mut words: Vec<String> = (0..self.words_per_paragraph)
                        .map(|_| background.sample(&mut rng).to_owned())
                        .collect();
                    if !present.is_empty() && rng.gen_bool(self.keyword_rate) {
                        let k = *present.choose(&mut rng).unwrap();
                        words.push(keywords[k].to_owned());
                        // Keyword k's window over its private block slides by
                        // `shift` words per decade.
                        let block = hood_base + k * (self.neighborhood + 7 * shift);
                        let start = block + slot * shift;
                        for _ in 0..6 {
                            words.push(filler_word(start + rng.gen_range(0..self.neighborhood)));
                        }
                    }
                    push_paragraph(&mut text, words, &mut rng);
                }
                novels.push(SyntheticNovel {
                    novel_id: format!("{}-{n:03}", decade.label()),
                    title: format!("Synthetic {} novel {n}", decade.label()),
                    year: decade_start(decade) + rng.gen_range(0..10),
                    text,
                });
            }
        }
        novels
    }
}
