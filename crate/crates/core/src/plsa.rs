//! Probabilistic latent semantic analysis fit by EM on real-valued counts.
//!
//! `p(item | doc) = Σ_t p(t | doc) p(item | t)`. Training estimates both
//! factors from word counts; feature folding estimates `p(blob | t)` with the
//! training mixtures frozen; document folding estimates `p(t | doc)` for unseen
//! images with `p(blob | t)` frozen.
//!
//! Documents are processed in fixed chunks of [`CHUNK_DOCS`] and partial sums
//! are reduced in chunk order, so results do not depend on the thread count.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::CountMatrix;
use crate::error::{Error, Result};

pub const CHUNK_DOCS: usize = 64;

const MODEL_TAG: &str = "plsa-vw-model v1";

#[derive(Debug, Clone, PartialEq)]
pub struct PlsaModel {
    /// T × q, rows are `p(word | t)`.
    pub word_given_topic: Array2<f64>,
    /// T × p, rows are `p(blob | t)`; absent until features are folded in.
    pub blob_given_topic: Option<Array2<f64>>,
    /// N × T, rows are `p(t | doc)` for the training documents.
    pub topic_given_doc: Array2<f64>,
}

impl PlsaModel {
    pub fn n_topics(&self) -> usize {
        self.word_given_topic.nrows()
    }

    pub fn n_words(&self) -> usize {
        self.word_given_topic.ncols()
    }

    pub fn n_docs(&self) -> usize {
        self.topic_given_doc.nrows()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(path, &text)
    }

    /// Version tag, header `T q p hasBlobs N`, then the word, blob and
    /// mixture rows.
    pub fn to_text(&self) -> String {
        let p = self.blob_given_topic.as_ref().map_or(0, |b| b.ncols());
        let mut out = format!(
            "{MODEL_TAG}\n{} {} {} {} {}\n",
            self.n_topics(),
            self.n_words(),
            p,
            u8::from(self.blob_given_topic.is_some()),
            self.n_docs()
        );
        let mut push_rows = |m: &Array2<f64>| {
            for row in m.rows() {
                let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                let _ = writeln!(out, "{}", line.join(" "));
            }
        };
        push_rows(&self.word_given_topic);
        if let Some(b) = &self.blob_given_topic {
            push_rows(b);
        }
        push_rows(&self.topic_given_doc);
        out
    }

    fn from_text(path: &Path, text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, tag)) if tag.trim() == MODEL_TAG => {}
            _ => return Err(Error::parse(path, 1, format!("expected `{MODEL_TAG}`"))),
        }
        let (hl, header) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 2, "missing header"))?;
        let h: Vec<usize> = header
            .split_whitespace()
            .map(|f| {
                f.parse()
                    .map_err(|_| Error::parse(path, hl, format!("bad header field {f:?}")))
            })
            .collect::<Result<_>>()?;
        let [t, q, p, has_blobs, n] = h[..] else {
            return Err(Error::parse(path, hl, "header needs `T q p hasBlobs N`"));
        };
        let mut read = |rows: usize, cols: usize| -> Result<Array2<f64>> {
            let mut m = Array2::zeros((rows, cols));
            for i in 0..rows {
                let (ln, line) = lines
                    .next()
                    .ok_or_else(|| Error::Dimension("model file ends early".into()))?;
                let vals: Vec<f64> = line
                    .split_whitespace()
                    .map(|f| {
                        f.parse()
                            .map_err(|_| Error::parse(path, ln, format!("bad value {f:?}")))
                    })
                    .collect::<Result<_>>()?;
                if vals.len() != cols {
                    return Err(Error::parse(
                        path,
                        ln,
                        format!("expected {cols} values, found {}", vals.len()),
                    ));
                }
                m.row_mut(i).assign(&ArrayView1::from(&vals[..]));
            }
            Ok(m)
        };
        let word_given_topic = read(t, q)?;
        let blob_given_topic = if has_blobs == 1 {
            Some(read(t, p)?)
        } else {
            None
        };
        let topic_given_doc = read(n, t)?;
        Ok(PlsaModel {
            word_given_topic,
            blob_given_topic,
            topic_given_doc,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOptions {
    pub max_iters: usize,
    /// Stop once the log-likelihood gain falls below `rel_tol * |LL|`.
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            max_iters: 500,
            rel_tol: 1e-6,
            seed: 0,
        }
    }
}

impl EmOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
        }
        if self.rel_tol.is_nan() || self.rel_tol <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "rel_tol {} must be > 0",
                self.rel_tol
            )));
        }
        Ok(())
    }
}

/// Fits word topics and training mixtures. Returns the model and the
/// log-likelihood after every EM iteration.
pub fn train_plsa(
    counts: &CountMatrix,
    n_topics: usize,
    opts: &EmOptions,
) -> Result<(PlsaModel, Vec<f64>)> {
    opts.validate()?;
    if n_topics == 0 {
        return Err(Error::InvalidArgument(
            "number of topics must be >= 1".into(),
        ));
    }
    if counts.is_empty() {
        return Err(Error::Degenerate(
            "count matrix has no positive entry".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut mixtures = random_stochastic(&mut rng, counts.rows(), n_topics);
    let mut topics = random_stochastic(&mut rng, n_topics, counts.cols());

    let trace = iterate(opts, |update| {
        let step = em_step(counts, &mixtures, &topics, update, update);
        if let Some(m) = step.mixtures {
            mixtures = m;
        }
        if let Some(c) = step.components {
            topics = c;
        }
        step.ll
    });
    Ok((
        PlsaModel {
            word_given_topic: topics,
            blob_given_topic: None,
            topic_given_doc: mixtures,
        },
        trace,
    ))
}

/// Estimates `p(blob | t)` with the training mixtures held fixed.
///
/// Starts from the model's existing blob topics when present, otherwise from a
/// seeded random draw.
pub fn fold_in_features(
    model: &PlsaModel,
    blob_counts: &CountMatrix,
    opts: &EmOptions,
) -> Result<(PlsaModel, Vec<f64>)> {
    opts.validate()?;
    if blob_counts.rows() != model.n_docs() {
        return Err(Error::Dimension(format!(
            "{} blob rows but model has {} training documents",
            blob_counts.rows(),
            model.n_docs()
        )));
    }
    let mut topics = match &model.blob_given_topic {
        Some(b) if b.ncols() == blob_counts.cols() => b.clone(),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            random_stochastic(&mut rng, model.n_topics(), blob_counts.cols())
        }
    };
    let mixtures = &model.topic_given_doc;
    let trace = iterate(opts, |update| {
        let step = em_step(blob_counts, mixtures, &topics, false, update);
        if let Some(c) = step.components {
            topics = c;
        }
        step.ll
    });
    let mut out = model.clone();
    out.blob_given_topic = Some(topics);
    Ok((out, trace))
}

/// Topic mixtures of unseen documents, one EM run per document.
#[derive(Debug, Clone)]
pub struct FoldedDocuments {
    /// Ntest × T.
    pub mixtures: Array2<f64>,
    /// Per-document log-likelihood after each iteration; empty for documents
    /// without usable evidence.
    pub traces: Vec<Vec<f64>>,
}

/// Infers `p(t | doc)` for test documents from their blob counts, keeping
/// `p(blob | t)` fixed.
///
/// Each document starts from the uniform mixture. Blobs with zero probability
/// under every topic carry no information and are skipped; a document with no
/// remaining evidence keeps the uniform mixture.
pub fn fold_in_documents(
    model: &PlsaModel,
    test_blobs: &CountMatrix,
    opts: &EmOptions,
) -> Result<FoldedDocuments> {
    opts.validate()?;
    let topics = model
        .blob_given_topic
        .as_ref()
        .ok_or(Error::MissingBlobTopics)?;
    if test_blobs.cols() != topics.ncols() {
        return Err(Error::Dimension(format!(
            "{} test blob columns but model has {} blobs",
            test_blobs.cols(),
            topics.ncols()
        )));
    }
    let t = model.n_topics();
    let results: Vec<(Array1<f64>, Vec<f64>)> = (0..test_blobs.rows())
        .into_par_iter()
        .map(|i| fold_in_one(test_blobs.row(i), topics, t, opts))
        .collect();
    let mut mixtures = Array2::zeros((test_blobs.rows(), t));
    let mut traces = Vec::with_capacity(results.len());
    for (i, (mix, trace)) in results.into_iter().enumerate() {
        mixtures.row_mut(i).assign(&mix);
        traces.push(trace);
    }
    Ok(FoldedDocuments { mixtures, traces })
}

fn fold_in_one(
    row: &[(usize, f64)],
    topics: &Array2<f64>,
    t: usize,
    opts: &EmOptions,
) -> (Array1<f64>, Vec<f64>) {
    let usable: Vec<(usize, f64)> = row
        .iter()
        .copied()
        .filter(|&(j, _)| topics.column(j).iter().any(|&p| p > 0.0))
        .collect();
    let mut mix = Array1::from_elem(t, 1.0 / t as f64);
    if usable.is_empty() {
        return (mix, Vec::new());
    }
    let mut joint = vec![0.0; t];
    let trace = iterate(opts, |update| {
        let mut ll = 0.0;
        let mut acc = vec![0.0; t];
        for &(j, n) in &usable {
            let denom = fill_joint(&mut joint, mix.view(), topics, j);
            if denom == 0.0 {
                continue;
            }
            ll += n * denom.ln();
            if update {
                let scale = n / denom;
                for (a, &p) in acc.iter_mut().zip(&joint) {
                    *a += p * scale;
                }
            }
        }
        if update {
            let s: f64 = acc.iter().sum();
            if s > 0.0 {
                for (m, a) in mix.iter_mut().zip(&acc) {
                    *m = a / s;
                }
            }
        }
        ll
    });
    (mix, trace)
}

/// `Σ_i Σ_j counts(i,j) · ln Σ_t mixtures(i,t) · item_given_topic(t,j)`.
///
/// Zero counts contribute nothing. A positive count whose mixture probability
/// is exactly zero makes the result `f64::NEG_INFINITY`.
pub fn log_likelihood(
    counts: &CountMatrix,
    mixtures: &Array2<f64>,
    item_given_topic: &Array2<f64>,
) -> Result<f64> {
    if mixtures.nrows() != counts.rows()
        || item_given_topic.ncols() != counts.cols()
        || mixtures.ncols() != item_given_topic.nrows()
    {
        return Err(Error::Dimension(format!(
            "counts {:?}, mixtures {:?}, item distributions {:?}",
            counts.shape(),
            mixtures.dim(),
            item_given_topic.dim()
        )));
    }
    let partials: Vec<f64> = chunk_ranges(counts.rows())
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut ll = 0.0;
            for i in lo..hi {
                let mix = mixtures.row(i);
                for &(j, n) in counts.row(i) {
                    let p = mix.dot(&item_given_topic.column(j));
                    if p <= 0.0 {
                        return f64::NEG_INFINITY;
                    }
                    ll += n * p.ln();
                }
            }
            ll
        })
        .collect();
    Ok(partials.into_iter().sum())
}

/// `p(word | doc) = mixtures · p(word | t)` for each row of `mixtures`.
pub fn annotate(model: &PlsaModel, mixtures: &Array2<f64>) -> Result<Array2<f64>> {
    if mixtures.ncols() != model.n_topics() {
        return Err(Error::Dimension(format!(
            "mixtures have {} columns but model has {} topics",
            mixtures.ncols(),
            model.n_topics()
        )));
    }
    Ok(mixtures.dot(&model.word_given_topic))
}

/// Ids of the `k` highest scores, best first, ties to the lower id.
pub fn top_keywords(scores: ArrayView1<'_, f64>, k: usize) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..scores.len()).collect();
    ids.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    ids.truncate(k);
    ids
}

struct Step {
    ll: f64,
    mixtures: Option<Array2<f64>>,
    components: Option<Array2<f64>>,
}

struct ChunkResult {
    ll: f64,
    mixture_rows: Vec<f64>,
    component_acc: Option<Array2<f64>>,
}

/// One EM iteration. Returns the log-likelihood of the *incoming* parameters
/// and, for each block requested, its re-estimate.
fn em_step(
    counts: &CountMatrix,
    mixtures: &Array2<f64>,
    components: &Array2<f64>,
    update_mixtures: bool,
    update_components: bool,
) -> Step {
    let t = components.nrows();
    let v = components.ncols();
    let chunks: Vec<ChunkResult> = chunk_ranges(counts.rows())
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut ll = 0.0;
            let mut mixture_rows = if update_mixtures {
                Vec::with_capacity((hi - lo) * t)
            } else {
                Vec::new()
            };
            let mut comp = update_components.then(|| Array2::<f64>::zeros((t, v)));
            let mut joint = vec![0.0; t];
            let mut acc = vec![0.0; t];
            for i in lo..hi {
                let mix = mixtures.row(i);
                acc.iter_mut().for_each(|a| *a = 0.0);
                for &(j, n) in counts.row(i) {
                    let denom = fill_joint(&mut joint, mix, components, j);
                    if denom == 0.0 {
                        continue;
                    }
                    ll += n * denom.ln();
                    let scale = n / denom;
                    for (k, &p) in joint.iter().enumerate() {
                        let w = p * scale;
                        acc[k] += w;
                        if let Some(c) = comp.as_mut() {
                            c[[k, j]] += w;
                        }
                    }
                }
                if update_mixtures {
                    let s: f64 = acc.iter().sum();
                    if s > 0.0 {
                        mixture_rows.extend(acc.iter().map(|a| a / s));
                    } else {
                        mixture_rows.extend(mix.iter().copied());
                    }
                }
            }
            ChunkResult {
                ll,
                mixture_rows,
                component_acc: comp,
            }
        })
        .collect();

    let mut ll = 0.0;
    let mut mixture_data = Vec::new();
    let mut comp_acc = update_components.then(|| Array2::<f64>::zeros((t, v)));
    for c in chunks {
        ll += c.ll;
        mixture_data.extend(c.mixture_rows);
        if let (Some(total), Some(part)) = (comp_acc.as_mut(), c.component_acc) {
            *total += &part;
        }
    }
    let new_mixtures = update_mixtures.then(|| {
        Array2::from_shape_vec((counts.rows(), t), mixture_data)
            .expect("chunk rows cover all documents")
    });
    let new_components = comp_acc.map(|mut acc| {
        for (mut row, old) in acc
            .axis_iter_mut(Axis(0))
            .zip(components.axis_iter(Axis(0)))
        {
            let s = row.sum();
            if s > 0.0 {
                row.mapv_inplace(|x| x / s);
            } else {
                row.assign(&old);
            }
        }
        acc
    });
    Step {
        ll,
        mixtures: new_mixtures,
        components: new_components,
    }
}

/// Writes `mix[t] * comp[t, j]` into `joint` and returns the sum.
#[inline]
fn fill_joint(joint: &mut [f64], mix: ArrayView1<'_, f64>, comp: &Array2<f64>, j: usize) -> f64 {
    let mut s = 0.0;
    for (k, out) in joint.iter_mut().enumerate() {
        *out = mix[k] * comp[[k, j]];
        s += *out;
    }
    s
}

/// Drives EM. `step(true)` returns the log-likelihood of the current
/// parameters and then updates them; `step(false)` only evaluates.
fn iterate(opts: &EmOptions, mut step: impl FnMut(bool) -> f64) -> Vec<f64> {
    let mut trace = Vec::new();
    let mut prev = step(true);
    for _ in 1..opts.max_iters {
        let ll = step(true);
        trace.push(ll);
        // Written so that a NaN gain also stops.
        let gain = ll - prev;
        if gain.is_nan() || gain <= opts.rel_tol * prev.abs() {
            break;
        }
        prev = ll;
    }
    trace.push(step(false));
    trace
}

fn chunk_ranges(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .step_by(CHUNK_DOCS)
        .map(|lo| (lo, (lo + CHUNK_DOCS).min(n)))
        .collect()
}

fn random_stochastic<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<f64> {
    let mut m = Array2::zeros((rows, cols));
    for mut row in m.rows_mut() {
        // (0, 1]
        row.mapv_inplace(|_| 1.0 - rng.random::<f64>());
        let s = row.sum();
        row.mapv_inplace(|x| x / s);
    }
    m
}
