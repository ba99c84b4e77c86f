//! Dataset files.
//!
//! Native format (UTF-8 text):
//!
//! ```text
//! N q nnz_w p nnz_b
//! doc word count      (nnz_w lines)
//! doc blob count      (nnz_b lines)
//! word token          (q lines)
//! blob token          (p lines)
//! ```
//!
//! Counts are written with Rust's shortest round-trip float formatting, so a
//! write/load cycle reproduces every count bit for bit.
//!
//! The Corel JMLR-2003 adapter reads one sample directory. Per split prefix
//! (`""`, `"test_1_"`, `"test_3_"`) it expects `{prefix}document_words` and
//! `{prefix}document_blobs`, one line per image holding whitespace-separated
//! 1-based ids (repeated blob ids are counts). The keyword vocabulary comes from
//! `words`; the blob vocabulary from `blobs` when present, otherwise from the
//! configured blob vocabulary size.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{index_doc_ids, CountMatrix, Dataset, Vocabulary};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorelSplit {
    Train,
    Test1,
    Test3,
}

impl CorelSplit {
    pub fn prefix(self) -> &'static str {
        match self {
            CorelSplit::Train => "",
            CorelSplit::Test1 => "test_1_",
            CorelSplit::Test3 => "test_3_",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Native,
    CorelJmlr {
        split: CorelSplit,
        /// Used only when the sample has no `blobs` vocabulary file.
        blob_vocab_size: usize,
    },
}

impl DatasetFormat {
    pub fn corel(split: CorelSplit) -> Self {
        DatasetFormat::CorelJmlr {
            split,
            blob_vocab_size: 500,
        }
    }
}

pub fn load_dataset(path: impl AsRef<Path>, format: DatasetFormat) -> Result<Dataset> {
    let path = path.as_ref();
    match format {
        DatasetFormat::Native => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_native(path, &text)
        }
        DatasetFormat::CorelJmlr {
            split,
            blob_vocab_size,
        } => load_corel(path, split, blob_vocab_size),
    }
}

pub fn write_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_native(ds)).map_err(|e| Error::io(path, e))
}

pub(crate) fn format_native(ds: &Dataset) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} {} {} {} {}",
        ds.n_docs(),
        ds.words.cols(),
        ds.words.nnz(),
        ds.blobs.cols(),
        ds.blobs.nnz()
    );
    for m in [&ds.words, &ds.blobs] {
        for (i, j, v) in m.iter() {
            let _ = writeln!(out, "{i} {j} {v}");
        }
    }
    for t in ds.word_vocab.tokens().iter().chain(ds.blob_vocab.tokens()) {
        out.push_str(t);
        out.push('\n');
    }
    out
}

fn parse_native(path: &Path, text: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "missing header"))?;
    let fields: Vec<usize> = header
        .split_whitespace()
        .map(|f| {
            f.parse::<usize>()
                .map_err(|_| Error::parse(path, hline, format!("bad header field {f:?}")))
        })
        .collect::<Result<_>>()?;
    let [n, q, nnz_w, p, nnz_b] = fields[..] else {
        return Err(Error::parse(
            path,
            hline,
            format!(
                "header needs 5 fields `N q nnz_w p nnz_b`, found {}",
                fields.len()
            ),
        ));
    };

    let mut read_entries = |count: usize, cols: usize, what: &str| -> Result<CountMatrix> {
        let mut triplets = Vec::with_capacity(count);
        for _ in 0..count {
            let (ln, line) = lines.next().ok_or_else(|| {
                Error::Dimension(format!("file ends before {count} {what} entries"))
            })?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            let [d, c, v] = parts[..] else {
                return Err(Error::parse(path, ln, "expected `doc id count`"));
            };
            let d: usize = d
                .parse()
                .map_err(|_| Error::parse(path, ln, format!("bad document index {d:?}")))?;
            let c: usize = c
                .parse()
                .map_err(|_| Error::parse(path, ln, format!("bad {what} id {c:?}")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| Error::parse(path, ln, format!("bad count {v:?}")))?;
            if d >= n {
                return Err(Error::parse(
                    path,
                    ln,
                    format!("document {d} out of range (N={n})"),
                ));
            }
            if c >= cols {
                return Err(Error::parse(path, ln, format!("unknown {what} id {c}")));
            }
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::parse(
                    path,
                    ln,
                    format!("count {v} must be finite and >= 0"),
                ));
            }
            triplets.push((d, c, v));
        }
        CountMatrix::from_triplets(n, cols, triplets)
    };
    let words = read_entries(nnz_w, q, "word")?;
    let blobs = read_entries(nnz_b, p, "blob")?;

    let mut read_tokens = |count: usize, what: &str| -> Result<Vec<String>> {
        (0..count)
            .map(|_| {
                let (ln, line) = lines.next().ok_or_else(|| {
                    Error::Dimension(format!("file ends before {count} {what} tokens"))
                })?;
                let t = line.trim();
                if t.is_empty() {
                    return Err(Error::parse(path, ln, format!("empty {what} token")));
                }
                Ok(t.to_string())
            })
            .collect()
    };
    let word_tokens = read_tokens(q, "word")?;
    let blob_tokens = read_tokens(p, "blob")?;
    if let Some((ln, _)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(Error::parse(
            path,
            ln,
            "unexpected content after blob tokens",
        ));
    }

    Dataset::new(
        words,
        blobs,
        Vocabulary::new(word_tokens)?,
        Vocabulary::new(blob_tokens)?,
        index_doc_ids(n),
    )
}

fn load_corel(dir: &Path, split: CorelSplit, blob_vocab_size: usize) -> Result<Dataset> {
    let word_vocab = Vocabulary::new(read_vocab_file(&dir.join("words"))?)?;
    let blobs_path = dir.join("blobs");
    let blob_vocab = if blobs_path.exists() {
        Vocabulary::new(read_vocab_file(&blobs_path)?)?
    } else {
        Vocabulary::new((1..=blob_vocab_size).map(|i| format!("b{i}")).collect())?
    };
    let prefix = split.prefix();
    let word_rows = read_id_lists(
        &dir.join(format!("{prefix}document_words")),
        word_vocab.len(),
    )?;
    let blob_rows = read_id_lists(
        &dir.join(format!("{prefix}document_blobs")),
        blob_vocab.len(),
    )?;
    if word_rows.len() != blob_rows.len() {
        return Err(Error::Dimension(format!(
            "{} word rows but {} blob rows",
            word_rows.len(),
            blob_rows.len()
        )));
    }
    let n = word_rows.len();
    let to_matrix = |rows: &[Vec<usize>], cols| {
        CountMatrix::from_triplets(
            n,
            cols,
            rows.iter()
                .enumerate()
                .flat_map(|(i, ids)| ids.iter().map(move |&j| (i, j, 1.0))),
        )
    };
    Dataset::new(
        to_matrix(&word_rows, word_vocab.len())?,
        to_matrix(&blob_rows, blob_vocab.len())?,
        word_vocab,
        blob_vocab,
        index_doc_ids(n),
    )
}

/// One token per line; a leading numeric index column (`12 sky`) is skipped.
fn read_vocab_file(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut tokens = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts[..] {
            [] => continue,
            [t] => tokens.push(t.to_string()),
            [idx, t] if idx.parse::<usize>().is_ok() => tokens.push(t.to_string()),
            _ => return Err(Error::parse(path, i + 1, "expected one token per line")),
        }
    }
    Ok(tokens)
}

fn read_id_lists(path: &Path, vocab_len: usize) -> Result<Vec<Vec<usize>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let ids = line
            .split_whitespace()
            .map(|f| {
                let id: usize = f
                    .parse()
                    .map_err(|_| Error::parse(path, i + 1, format!("bad id {f:?}")))?;
                if id == 0 || id > vocab_len {
                    return Err(Error::parse(
                        path,
                        i + 1,
                        format!("unknown id {id} (vocabulary has {vocab_len} entries, 1-based)"),
                    ));
                }
                Ok(id - 1)
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(ids);
    }
    Ok(rows)
}
