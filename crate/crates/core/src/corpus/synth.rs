use ndarray::{Array1, Array2};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;

use super::{index_doc_ids, CountMatrix, Dataset, Vocabulary};
use crate::error::{Error, Result};

/// Parameters of a synthetic loosely-annotated corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub n_docs: usize,
    pub n_words: usize,
    pub n_blobs: usize,
    pub n_topics_true: usize,
    /// Distinct keywords annotated per image before dropping.
    pub words_per_doc: usize,
    /// Blob draws (with replacement) per image.
    pub blobs_per_doc: usize,
    /// Probability that each annotated keyword is removed from the observed copy.
    pub drop_rate: f64,
    /// Symmetric Dirichlet parameter for topics and mixtures; 1 is uniform on
    /// the simplex, smaller values give sparser topics.
    pub concentration: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_docs: 200,
            n_words: 50,
            n_blobs: 80,
            n_topics_true: 8,
            words_per_doc: 5,
            blobs_per_doc: 10,
            drop_rate: 0.4,
            concentration: 1.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_docs", self.n_docs),
            ("n_words", self.n_words),
            ("n_blobs", self.n_blobs),
            ("n_topics_true", self.n_topics_true),
            ("words_per_doc", self.words_per_doc),
            ("blobs_per_doc", self.blobs_per_doc),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("{name} must be >= 1")));
        }
        if self.words_per_doc > self.n_words {
            return Err(Error::InvalidArgument(format!(
                "words_per_doc {} exceeds n_words {}",
                self.words_per_doc, self.n_words
            )));
        }
        if !(0.0..1.0).contains(&self.drop_rate) {
            return Err(Error::InvalidArgument(format!(
                "drop_rate {} must lie in [0, 1)",
                self.drop_rate
            )));
        }
        if !(self.concentration.is_finite() && self.concentration > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "concentration {} must be > 0",
                self.concentration
            )));
        }
        Ok(())
    }
}

/// A generated corpus together with the hidden model it was sampled from.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub full_truth: Dataset,
    pub observed: Dataset,
    pub word_given_topic: Array2<f64>,
    pub blob_given_topic: Array2<f64>,
    pub topic_given_doc: Array2<f64>,
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let t = spec.n_topics_true;

    let dirichlet = Gamma::new(spec.concentration, 1.0)
        .map_err(|e| Error::InvalidArgument(format!("concentration: {e}")))?;
    let word_given_topic = simplex_rows(&mut rng, &dirichlet, t, spec.n_words);
    let blob_given_topic = simplex_rows(&mut rng, &dirichlet, t, spec.n_blobs);
    let topic_given_doc = simplex_rows(&mut rng, &dirichlet, spec.n_docs, t);

    let mut full_words = Vec::new();
    let mut observed_words = Vec::new();
    let mut blobs = Vec::new();
    let word_ids: Vec<usize> = (0..spec.n_words).collect();

    for d in 0..spec.n_docs {
        let mix = topic_given_doc.row(d);
        let p_word: Array1<f64> = mix.dot(&word_given_topic);
        let p_blob: Array1<f64> = mix.dot(&blob_given_topic);

        let mut keywords: Vec<usize> = word_ids
            .choose_multiple_weighted(&mut rng, spec.words_per_doc, |&w| p_word[w])
            .map_err(|e| Error::Degenerate(format!("keyword sampling: {e}")))?
            .copied()
            .collect();
        keywords.sort_unstable();

        let mut kept: Vec<usize> = keywords
            .iter()
            .copied()
            .filter(|_| !rng.random_bool(spec.drop_rate))
            .collect();
        if kept.is_empty() {
            kept.push(keywords[rng.random_range(0..keywords.len())]);
        }

        full_words.extend(keywords.iter().map(|&w| (d, w, 1.0)));
        observed_words.extend(kept.iter().map(|&w| (d, w, 1.0)));

        let blob_dist = WeightedIndex::new(p_blob.iter().copied())
            .map_err(|e| Error::Degenerate(format!("blob sampling: {e}")))?;
        for _ in 0..spec.blobs_per_doc {
            blobs.push((d, blob_dist.sample(&mut rng), 1.0));
        }
    }

    let word_vocab = Vocabulary::numbered("w", spec.n_words)?;
    let blob_vocab = Vocabulary::numbered("b", spec.n_blobs)?;
    let blobs = CountMatrix::from_triplets(spec.n_docs, spec.n_blobs, blobs)?;
    let doc_ids = index_doc_ids(spec.n_docs);

    let full_truth = Dataset::new(
        CountMatrix::from_triplets(spec.n_docs, spec.n_words, full_words)?,
        blobs.clone(),
        word_vocab.clone(),
        blob_vocab.clone(),
        doc_ids.clone(),
    )?;
    let observed = Dataset::new(
        CountMatrix::from_triplets(spec.n_docs, spec.n_words, observed_words)?,
        blobs,
        word_vocab,
        blob_vocab,
        doc_ids,
    )?;
    Ok(SyntheticCorpus {
        full_truth,
        observed,
        word_given_topic,
        blob_given_topic,
        topic_given_doc,
    })
}

/// Symmetric Dirichlet rows via normalized Gamma draws.
fn simplex_rows<R: Rng>(rng: &mut R, gamma: &Gamma<f64>, rows: usize, cols: usize) -> Array2<f64> {
    let mut out = Array2::zeros((rows, cols));
    for mut row in out.rows_mut() {
        loop {
            row.mapv_inplace(|_| gamma.sample(rng));
            let s = row.sum();
            // Tiny concentrations can underflow every draw.
            if s > 0.0 {
                row.mapv_inplace(|x| x / s);
                break;
            }
        }
    }
    out
}
