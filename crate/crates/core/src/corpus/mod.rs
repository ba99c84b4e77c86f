//! Annotated-image corpora: sparse count matrices, vocabularies, file formats
//! and a synthetic loosely-annotated corpus generator.
//!
//! An image is a pair of histograms: a word histogram over the keyword
//! vocabulary and a blob histogram over quantized visual features. A keyword
//! with positive count is *annotated*; every other keyword is *missing* for
//! that image.

mod io;
mod matrix;
mod synth;

use std::collections::HashMap;

pub use io::{load_dataset, write_dataset, CorelSplit, DatasetFormat};
pub use matrix::{row_normalize, CountMatrix};
pub use synth::{generate_synthetic, SyntheticCorpus, SyntheticSpec};

use crate::error::{Error, Result};

/// Ordered set of unique tokens; a token's position is its id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::InvalidArgument(
                "vocabulary must not be empty".into(),
            ));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::InvalidArgument(format!(
                    "token {t:?} is empty or contains whitespace"
                )));
            }
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate token {t:?}")));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    /// Tokens `{prefix}0 .. {prefix}{size-1}`.
    pub fn numbered(prefix: &str, size: usize) -> Result<Self> {
        Self::new((0..size).map(|i| format!("{prefix}{i}")).collect())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Paired word and blob counts for a set of images.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub words: CountMatrix,
    pub blobs: CountMatrix,
    pub word_vocab: Vocabulary,
    pub blob_vocab: Vocabulary,
    pub doc_ids: Vec<String>,
}

impl Dataset {
    pub fn new(
        words: CountMatrix,
        blobs: CountMatrix,
        word_vocab: Vocabulary,
        blob_vocab: Vocabulary,
        doc_ids: Vec<String>,
    ) -> Result<Self> {
        if words.rows() != blobs.rows() || words.rows() != doc_ids.len() {
            return Err(Error::Dimension(format!(
                "{} word rows, {} blob rows, {} document ids",
                words.rows(),
                blobs.rows(),
                doc_ids.len()
            )));
        }
        if words.cols() != word_vocab.len() {
            return Err(Error::Dimension(format!(
                "{} word columns but {} word tokens",
                words.cols(),
                word_vocab.len()
            )));
        }
        if blobs.cols() != blob_vocab.len() {
            return Err(Error::Dimension(format!(
                "{} blob columns but {} blob tokens",
                blobs.cols(),
                blob_vocab.len()
            )));
        }
        Ok(Dataset {
            words,
            blobs,
            word_vocab,
            blob_vocab,
            doc_ids,
        })
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    /// Annotated keyword ids of image `i`.
    pub fn annotated(&self, i: usize) -> Vec<usize> {
        self.words.support(i).collect()
    }

    /// Sub-dataset with the listed documents, in order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            words: self.words.select_rows(indices),
            blobs: self.blobs.select_rows(indices),
            word_vocab: self.word_vocab.clone(),
            blob_vocab: self.blob_vocab.clone(),
            doc_ids: indices.iter().map(|&i| self.doc_ids[i].clone()).collect(),
        }
    }

    /// Splits off the last `n_test` documents as a test set.
    pub fn split_tail(&self, n_test: usize) -> Result<(Dataset, Dataset)> {
        let n = self.n_docs();
        if n_test > n {
            return Err(Error::InvalidArgument(format!(
                "cannot hold out {n_test} of {n} documents"
            )));
        }
        let train: Vec<usize> = (0..n - n_test).collect();
        let test: Vec<usize> = (n - n_test..n).collect();
        Ok((self.select(&train), self.select(&test)))
    }

    /// Replaces the word matrix, keeping everything else.
    pub fn with_words(&self, words: CountMatrix) -> Result<Dataset> {
        Dataset::new(
            words,
            self.blobs.clone(),
            self.word_vocab.clone(),
            self.blob_vocab.clone(),
            self.doc_ids.clone(),
        )
    }
}

pub(crate) fn index_doc_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_rejects_duplicates_and_empty() {
        assert!(Vocabulary::new(vec![]).is_err());
        assert!(Vocabulary::new(vec!["a".into(), "a".into()]).is_err());
        assert!(Vocabulary::new(vec!["a b".into()]).is_err());
        let v = Vocabulary::new(vec!["sky".into(), "sea".into()]).unwrap();
        assert_eq!(v.id("sea"), Some(1));
        assert_eq!(v.id("tree"), None);
    }

    #[test]
    fn dataset_checks_shapes() {
        let wv = Vocabulary::numbered("w", 2).unwrap();
        let bv = Vocabulary::numbered("b", 3).unwrap();
        let ok = Dataset::new(
            CountMatrix::zeros(1, 2),
            CountMatrix::zeros(1, 3),
            wv.clone(),
            bv.clone(),
            index_doc_ids(1),
        );
        assert!(ok.is_ok());
        let bad = Dataset::new(
            CountMatrix::zeros(1, 2),
            CountMatrix::zeros(2, 3),
            wv,
            bv,
            index_doc_ids(1),
        );
        assert!(matches!(bad, Err(Error::Dimension(_))));
    }
}
