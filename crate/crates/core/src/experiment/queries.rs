use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ExperimentError;

/// Keyword set shipped with the crate.
pub const DEFAULT_QUERIES: &str = include_str!("../../data/queries.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Thematic,
    Plot,
    Genre,
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::Thematic => "thematic",
            Category::Plot => "plot",
            Category::Genre => "genre",
        })
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "thematic" => Ok(Category::Thematic),
            "plot" => Ok(Category::Plot),
            "genre" => Ok(Category::Genre),
            _ => Err(format!("unknown category {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QueryEntry {
    pub keyword: String,
    pub category: Category,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuerySet {
    pub entries: Vec<QueryEntry>,
}

impl QuerySet {
    /// Parses `keyword<TAB>category` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |message: String| ExperimentError::Queries {
                line: i + 1,
                message,
            };
            let mut fields = line.split('\t').map(str::trim);
            let keyword = fields.next().unwrap_or_default().to_owned();
            let category = fields
                .next()
                .ok_or_else(|| bad("expected keyword<TAB>category".into()))?
                .parse::<Category>()
                .map_err(bad)?;
            if !seen.insert(keyword.to_lowercase()) {
                return Err(bad(format!("duplicate keyword {keyword:?}")));
            }
            entries.push(QueryEntry { keyword, category });
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn keywords(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.keyword.as_str())
    }
}

impl Default for QuerySet {
    fn default() -> Self {
        Self::parse(DEFAULT_QUERIES).expect("bundled query file parses")
    }
}
