//! Text normalization shared by indexing and querying: tokenize, drop
//! stopwords, Porter-stem.

mod porter;

use std::collections::HashSet;
use std::fs;
use std::io;
use std::path::Path;

pub use porter::stem;

/// Stopword list shipped with the crate.
pub const DEFAULT_STOPWORDS: &str = include_str!("../../data/stopwords.txt");

/// Lowercases `text` and splits it on every non-alphabetic character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphabetic())
        .filter(|fragment| !fragment.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// A stopword set plus the fixed tokenize/stem pipeline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Analyzer {
    stopwords: HashSet<String>,
}

impl Default for Analyzer {
    fn default() -> Self {
        Self::from_stopword_list(DEFAULT_STOPWORDS)
    }
}

impl Analyzer {
    /// Parses a one-word-per-line list. Blank lines and `#` comments are skipped.
    pub fn from_stopword_list(list: &str) -> Self {
        let stopwords = list
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Self { stopwords }
    }

    pub fn from_stopword_file(path: &Path) -> io::Result<Self> {
        Ok(Self::from_stopword_list(&fs::read_to_string(path)?))
    }

    /// The stopword list in sorted, one-per-line form.
    pub fn stopword_list(&self) -> String {
        let mut words: Vec<&str> = self.stopwords.iter().map(String::as_str).collect();
        words.sort_unstable();
        let mut out = words.join("\n");
        out.push('\n');
        out
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    pub fn remove_stopwords(&self, tokens: Vec<String>) -> Vec<String> {
        tokens
            .into_iter()
            .filter(|t| !self.is_stopword(t))
            .collect()
    }

    /// Full pipeline: the term sequence that indices and queries share.
    pub fn analyze(&self, text: &str) -> Vec<String> {
        self.remove_stopwords(tokenize(text))
            .iter()
            .map(|t| stem(t))
            .collect()
    }
}
