//! Markdown and CSV renderings of a [`ReportBundle`].

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{ComparisonMatrix, ExperimentError, ReportBundle, TermTable, ABSENT};

/// Files written by [`write_reports`], in order.
pub const REPORT_FILES: [&str; 5] = [
    "term_tables.md",
    "tau.csv",
    "pairs_jaccard.csv",
    "pairs_jsd.csv",
    "matrix.md",
];

fn term_table_markdown(table: &TermTable, category: Option<&str>, out: &mut String) {
    match category {
        Some(c) => writeln!(out, "## {} ({c})\n", table.query).unwrap(),
        None => writeln!(out, "## {}\n", table.query).unwrap(),
    }
    writeln!(out, "| Collection | Top {} feedback terms |", table.top_n).unwrap();
    out.push_str("|---|---|\n");
    for row in &table.rows {
        let cell = match &row.terms {
            None => ABSENT.to_owned(),
            Some(terms) => terms
                .iter()
                .map(|(t, shared)| {
                    if *shared {
                        format!("**{t}**")
                    } else {
                        t.clone()
                    }
                })
                .collect::<Vec<_>>()
                .join(", "),
        };
        writeln!(out, "| {} | {cell} |", row.collection).unwrap();
    }
    out.push('\n');
}

/// One query's term table. Bold terms also occur in another collection's
/// top `top_n`; absent collections show the absence marker.
pub fn render_term_table(
    bundle: &ReportBundle,
    query: &str,
    top_n: usize,
) -> Result<String, ExperimentError> {
    let table = bundle.term_table(query, top_n)?;
    let mut out = String::new();
    term_table_markdown(&table, None, &mut out);
    Ok(out)
}

pub fn render_term_tables(bundle: &ReportBundle) -> String {
    let mut out = format!(
        "# Top {} feedback terms per collection\n\n",
        bundle.params.top_n
    );
    for (table, q) in bundle.term_tables.iter().zip(&bundle.queries) {
        term_table_markdown(table, Some(&q.category.to_string()), &mut out);
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// Decades as rows, queries as columns.
pub fn render_tau_csv(bundle: &ReportBundle) -> String {
    let tau = &bundle.tau_table;
    let mut out = String::from("decade");
    for q in &tau.queries {
        out.push(',');
        out.push_str(&csv_field(q));
    }
    out.push('\n');
    for (d, decade) in tau.decades.iter().enumerate() {
        out.push_str(decade.label());
        for row in &tau.cells {
            match row[d] {
                Some(v) => write!(out, ",{v}").unwrap(),
                None => write!(out, ",{ABSENT}").unwrap(),
            }
        }
        out.push('\n');
    }
    out
}

/// One line per ordered collection pair: `row,col,mean,std,n`.
pub fn render_pairs_csv(matrix: &ComparisonMatrix) -> String {
    let mut out = String::from("row,col,mean,std,n\n");
    for (i, row) in matrix.labels.iter().enumerate() {
        for (j, col) in matrix.labels.iter().enumerate() {
            match &matrix.cells[i][j] {
                Some(c) => writeln!(out, "{row},{col},{},{},{}", c.mean, c.std, c.n).unwrap(),
                None => writeln!(out, "{row},{col},{ABSENT},{ABSENT},0").unwrap(),
            }
        }
    }
    out
}

/// Combined matrix: Jaccard above the diagonal, JS divergence below, each
/// cell as its mean over a second line holding the bracketed std.
pub fn render_matrix_markdown(jaccard: &ComparisonMatrix, jsd: &ComparisonMatrix) -> String {
    let labels = &jaccard.labels;
    let mut out = String::from(
        "# Expansion similarity between collections\n\n\
         Upper triangle: Jaccard similarity of expansion term sets. \
         Lower triangle: JS divergence of expansion weights. \
         Each cell: mean over queries, standard deviation in brackets.\n\n|",
    );
    for l in labels {
        write!(out, " | {l}").unwrap();
    }
    out.push_str(" |\n|---|");
    for _ in labels {
        out.push_str("---|");
    }
    out.push('\n');
    for (i, row) in labels.iter().enumerate() {
        let mut means = format!("| {row} |");
        let mut stds = String::from("| |");
        for j in 0..labels.len() {
            let cell = match j.cmp(&i) {
                std::cmp::Ordering::Greater => &jaccard.cells[i][j],
                std::cmp::Ordering::Less => &jsd.cells[i][j],
                std::cmp::Ordering::Equal => &jaccard.cells[i][j],
            };
            let (m, s) = match cell {
                None => (ABSENT.to_owned(), String::new()),
                Some(_) if i == j => ("1".to_owned(), "(0)".to_owned()),
                Some(c) => (format!("{:.4}", c.mean), format!("({:.4})", c.std)),
            };
            write!(means, " {m} |").unwrap();
            write!(stds, " {s} |").unwrap();
        }
        out.push_str(&means);
        out.push('\n');
        out.push_str(&stds);
        out.push('\n');
    }
    out
}

/// Writes every report file into `dir` (created if missing).
pub fn write_reports(bundle: &ReportBundle, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    let io = |path: &Path| {
        let path = path.to_owned();
        move |source| ExperimentError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let contents = [
        render_term_tables(bundle),
        render_tau_csv(bundle),
        render_pairs_csv(&bundle.jaccard),
        render_pairs_csv(&bundle.jsd),
        render_matrix_markdown(&bundle.jaccard, &bundle.jsd),
    ];
    let mut written = Vec::new();
    for (name, body) in REPORT_FILES.iter().zip(contents) {
        let path = dir.join(name);
        fs::write(&path, body).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}
