//! Python bindings. Matrices cross the boundary as lists of row lists.

use ndarray::Array2;
use pyo3::create_exception;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use plsa_vw::corpus::{self, CorelSplit, CountMatrix, DatasetFormat, SyntheticSpec, Vocabulary};
use plsa_vw::imagination::{self, ImaginationConfig, SimilarityMatrix};
use plsa_vw::metrics::{self, AnnotationRun};
use plsa_vw::pipeline::{self, ImaginationMode, TestImagination};
use plsa_vw::plsa::{self, EmOptions};
use plsa_vw::Error;

create_exception!(plsa_vw_py, PlsaError, PyValueError);

fn err(e: Error) -> PyErr {
    let mut msg = e.to_string();
    let mut source = std::error::Error::source(&e);
    while let Some(s) = source {
        msg.push_str(": ");
        msg.push_str(&s.to_string());
        source = s.source();
    }
    let mut root: &Error = &e;
    while let Error::Stage { source, .. } = root {
        root = source;
    }
    match root {
        Error::Io { .. } => PyIOError::new_err(msg),
        _ => PlsaError::new_err(msg),
    }
}

type Dense = Vec<Vec<f64>>;

fn to_dense(a: &Array2<f64>) -> Dense {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn from_dense(rows: &[Vec<f64>]) -> PyResult<Array2<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PlsaError::new_err("ragged matrix rows"));
    }
    Ok(Array2::from_shape_fn((rows.len(), cols), |(i, j)| {
        rows[i][j]
    }))
}

fn counts(rows: &[Vec<f64>]) -> PyResult<CountMatrix> {
    CountMatrix::from_dense(rows).map_err(err)
}

fn em_options(max_iters: usize, rel_tol: f64, seed: u64) -> EmOptions {
    EmOptions {
        max_iters,
        rel_tol,
        seed,
    }
}

/// Word and blob counts of a set of images with their vocabularies.
#[pyclass(module = "plsa_vw_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Dataset {
    inner: corpus::Dataset,
}

#[pymethods]
impl Dataset {
    #[new]
    #[pyo3(signature = (words, blobs, word_tokens=None, blob_tokens=None))]
    fn new(
        words: Dense,
        blobs: Dense,
        word_tokens: Option<Vec<String>>,
        blob_tokens: Option<Vec<String>>,
    ) -> PyResult<Self> {
        let words = counts(&words)?;
        let blobs = counts(&blobs)?;
        let vocab = |tokens: Option<Vec<String>>, prefix, n| match tokens {
            Some(t) => Vocabulary::new(t),
            None => Vocabulary::numbered(prefix, n),
        };
        let n = words.rows();
        let word_vocab = vocab(word_tokens, "w", words.cols()).map_err(err)?;
        let blob_vocab = vocab(blob_tokens, "b", blobs.cols()).map_err(err)?;
        let ids = (0..n).map(|i| i.to_string()).collect();
        corpus::Dataset::new(words, blobs, word_vocab, blob_vocab, ids)
            .map(|inner| Dataset { inner })
            .map_err(err)
    }

    /// Reads the native text format.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        corpus::load_dataset(path, DatasetFormat::Native)
            .map(|inner| Dataset { inner })
            .map_err(err)
    }

    /// Reads one split (`train`, `test1` or `test3`) of a Corel sample directory.
    #[staticmethod]
    #[pyo3(signature = (directory, split="train", blob_vocab_size=500))]
    fn load_corel(directory: &str, split: &str, blob_vocab_size: usize) -> PyResult<Self> {
        let split = match split {
            "train" => CorelSplit::Train,
            "test1" => CorelSplit::Test1,
            "test3" => CorelSplit::Test3,
            other => return Err(PlsaError::new_err(format!("unknown split {other:?}"))),
        };
        let format = DatasetFormat::CorelJmlr {
            split,
            blob_vocab_size,
        };
        corpus::load_dataset(directory, format)
            .map(|inner| Dataset { inner })
            .map_err(err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        corpus::write_dataset(&self.inner, path).map_err(err)
    }

    #[getter]
    fn n_docs(&self) -> usize {
        self.inner.n_docs()
    }

    #[getter]
    fn words(&self) -> Dense {
        to_dense(&self.inner.words.to_dense())
    }

    #[getter]
    fn blobs(&self) -> Dense {
        to_dense(&self.inner.blobs.to_dense())
    }

    #[getter]
    fn word_tokens(&self) -> Vec<String> {
        self.inner.word_vocab.tokens().to_vec()
    }

    #[getter]
    fn blob_tokens(&self) -> Vec<String> {
        self.inner.blob_vocab.tokens().to_vec()
    }

    /// Keyword ids annotated on image `i`.
    fn annotated(&self, i: usize) -> PyResult<Vec<usize>> {
        if i >= self.inner.n_docs() {
            return Err(PlsaError::new_err(format!("image {i} out of range")));
        }
        Ok(self.inner.annotated(i))
    }

    /// `(train, test)` with the last `n_test` images held out.
    fn split_tail(&self, n_test: usize) -> PyResult<(Dataset, Dataset)> {
        let (a, b) = self.inner.split_tail(n_test).map_err(err)?;
        Ok((Dataset { inner: a }, Dataset { inner: b }))
    }

    fn __len__(&self) -> usize {
        self.inner.n_docs()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(n_docs={}, words={}, blobs={})",
            self.inner.n_docs(),
            self.inner.word_vocab.len(),
            self.inner.blob_vocab.len()
        )
    }
}

/// Samples a corpus from a hidden topic model. Returns `(full_truth, observed)`.
#[pyfunction]
#[pyo3(signature = (
    n_docs=200, n_words=50, n_blobs=80, n_topics_true=8, words_per_doc=5,
    blobs_per_doc=10, drop_rate=0.4, concentration=1.0, seed=0,
))]
#[allow(clippy::too_many_arguments)]
fn generate_synthetic(
    n_docs: usize,
    n_words: usize,
    n_blobs: usize,
    n_topics_true: usize,
    words_per_doc: usize,
    blobs_per_doc: usize,
    drop_rate: f64,
    concentration: f64,
    seed: u64,
) -> PyResult<(Dataset, Dataset)> {
    let spec = SyntheticSpec {
        n_docs,
        n_words,
        n_blobs,
        n_topics_true,
        words_per_doc,
        blobs_per_doc,
        drop_rate,
        concentration,
        seed,
    };
    let c = corpus::generate_synthetic(&spec).map_err(err)?;
    Ok((
        Dataset {
            inner: c.full_truth,
        },
        Dataset { inner: c.observed },
    ))
}

/// Cosine similarity between the columns of the row-normalized counts.
#[pyfunction]
fn similarity_matrix(counts_rows: Dense) -> PyResult<Dense> {
    let m = counts(&counts_rows)?;
    Ok(to_dense(
        imagination::similarity_matrix(&corpus::row_normalize(&m)).as_array(),
    ))
}

/// Similarity-weighted average of each row's counts.
#[pyfunction]
fn imagine_counts(counts_rows: Dense, sim: Dense) -> PyResult<Dense> {
    let sim = SimilarityMatrix::new(from_dense(&sim)?).map_err(err)?;
    let out = imagination::imagine_counts(&counts(&counts_rows)?, &sim).map_err(err)?;
    Ok(to_dense(&out.to_dense()))
}

fn imagination_config(tau: f64, top_k: Option<usize>, mask_annotated: bool) -> ImaginationConfig {
    let mut cfg = match top_k {
        Some(k) => ImaginationConfig::top_k(k),
        None => ImaginationConfig::threshold(tau),
    };
    cfg.mask_annotated = mask_annotated;
    cfg
}

/// Augmented training counts. Returns `(words_aug, blobs_aug, word_sim, blob_sim)`.
#[pyfunction]
#[pyo3(signature = (dataset, tau=0.01, top_k=None, mask_annotated=true))]
fn imagine(
    dataset: &Dataset,
    tau: f64,
    top_k: Option<usize>,
    mask_annotated: bool,
) -> PyResult<(Dense, Dense, Dense, Dense)> {
    let cfg = imagination_config(tau, top_k, mask_annotated);
    let im = imagination::imagine_pipeline(&dataset.inner, &cfg).map_err(err)?;
    Ok((
        to_dense(&im.words_aug.to_dense()),
        to_dense(&im.blobs_aug.to_dense()),
        to_dense(im.word_sim.as_array()),
        to_dense(im.blob_sim.as_array()),
    ))
}

#[pyclass(module = "plsa_vw_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PlsaModel {
    inner: plsa::PlsaModel,
}

#[pymethods]
impl PlsaModel {
    #[getter]
    fn n_topics(&self) -> usize {
        self.inner.n_topics()
    }

    #[getter]
    fn word_given_topic(&self) -> Dense {
        to_dense(&self.inner.word_given_topic)
    }

    #[getter]
    fn blob_given_topic(&self) -> Option<Dense> {
        self.inner.blob_given_topic.as_ref().map(to_dense)
    }

    #[getter]
    fn topic_given_doc(&self) -> Dense {
        to_dense(&self.inner.topic_given_doc)
    }

    /// Estimates blob distributions with the training mixtures fixed.
    /// Returns `(model, trace)`.
    #[pyo3(signature = (blobs, max_iters=500, rel_tol=1e-6, seed=0))]
    fn fold_in_features(
        &self,
        blobs: Dense,
        max_iters: usize,
        rel_tol: f64,
        seed: u64,
    ) -> PyResult<(PlsaModel, Vec<f64>)> {
        let (m, trace) = plsa::fold_in_features(
            &self.inner,
            &counts(&blobs)?,
            &em_options(max_iters, rel_tol, seed),
        )
        .map_err(err)?;
        Ok((PlsaModel { inner: m }, trace))
    }

    /// Topic mixtures of unseen images. Returns `(mixtures, traces)`.
    #[pyo3(signature = (test_blobs, max_iters=500, rel_tol=1e-6))]
    fn fold_in_documents(
        &self,
        test_blobs: Dense,
        max_iters: usize,
        rel_tol: f64,
    ) -> PyResult<(Dense, Vec<Vec<f64>>)> {
        let folded = plsa::fold_in_documents(
            &self.inner,
            &counts(&test_blobs)?,
            &em_options(max_iters, rel_tol, 0),
        )
        .map_err(err)?;
        Ok((to_dense(&folded.mixtures), folded.traces))
    }

    /// Keyword probabilities for each mixture row.
    fn annotate(&self, mixtures: Dense) -> PyResult<Dense> {
        let scores = plsa::annotate(&self.inner, &from_dense(&mixtures)?).map_err(err)?;
        Ok(to_dense(&scores))
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        plsa::PlsaModel::load(path)
            .map(|inner| PlsaModel { inner })
            .map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "PlsaModel(n_topics={}, n_words={}, n_docs={}, has_blobs={})",
            self.inner.n_topics(),
            self.inner.n_words(),
            self.inner.n_docs(),
            self.inner.blob_given_topic.is_some()
        )
    }
}

/// Fits word topics on a count matrix. Returns `(model, trace)`.
#[pyfunction]
#[pyo3(signature = (counts_rows, n_topics, max_iters=500, rel_tol=1e-6, seed=0))]
fn train_plsa(
    counts_rows: Dense,
    n_topics: usize,
    max_iters: usize,
    rel_tol: f64,
    seed: u64,
) -> PyResult<(PlsaModel, Vec<f64>)> {
    let (m, trace) = plsa::train_plsa(
        &counts(&counts_rows)?,
        n_topics,
        &em_options(max_iters, rel_tol, seed),
    )
    .map_err(err)?;
    Ok((PlsaModel { inner: m }, trace))
}

/// The `k` best keyword ids of a score row, ties to the lower id.
#[pyfunction]
fn top_keywords(scores: Vec<f64>, k: usize) -> Vec<usize> {
    plsa::top_keywords(ndarray::ArrayView1::from(&scores), k)
}

#[pyclass(module = "plsa_vw_py", frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct MetricsReport {
    ap: f64,
    map: f64,
    rp: f64,
    rsi: f64,
    retrieval_m: usize,
    n_test: usize,
    per_keyword_ap: Vec<Option<f64>>,
    per_keyword_correct: Vec<bool>,
}

impl From<metrics::MetricsReport> for MetricsReport {
    fn from(r: metrics::MetricsReport) -> Self {
        MetricsReport {
            ap: r.ap,
            map: r.map,
            rp: r.rp,
            rsi: r.rsi,
            retrieval_m: r.retrieval_m,
            n_test: r.n_test,
            per_keyword_ap: r.per_keyword_ap,
            per_keyword_correct: r.per_keyword_correct,
        }
    }
}

#[pymethods]
impl MetricsReport {
    fn __repr__(&self) -> String {
        format!(
            "MetricsReport(ap={:.2}, map={:.2}, rp={:.2}, rsi={:.2})",
            self.ap, self.map, self.rp, self.rsi
        )
    }
}

/// AP, mAP, RP@M and RSI of a score matrix against per-image keyword sets.
#[pyfunction]
#[pyo3(signature = (scores, ground_truth, annotate_k=5, retrieval_m=20))]
fn evaluate(
    scores: Dense,
    ground_truth: Vec<Vec<usize>>,
    annotate_k: usize,
    retrieval_m: usize,
) -> PyResult<MetricsReport> {
    let truth = ground_truth
        .into_iter()
        .map(|t| t.into_iter().collect())
        .collect();
    let run = AnnotationRun::from_scores(from_dense(&scores)?, truth, annotate_k).map_err(err)?;
    metrics::evaluate(&run, retrieval_m)
        .map(Into::into)
        .map_err(err)
}

/// Experiment settings; defaults are 120 topics, tau 0.01, top-5, M = 20.
#[pyclass(module = "plsa_vw_py", get_all, set_all, skip_from_py_object)]
#[derive(Clone)]
struct RunConfig {
    topics: usize,
    tau: f64,
    /// `"threshold"`, `"top-k"` or `"off"`.
    mode: String,
    top_k: usize,
    mask_annotated: bool,
    /// `"raw"`, `"same-as-training"` or `"off"`.
    test_imagination: String,
    annotate_k: usize,
    retrieval_m: usize,
    seed: u64,
    max_iters: usize,
    rel_tol: f64,
}

#[pymethods]
impl RunConfig {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(py: Python<'_>, kwargs: Option<&Bound<'_, pyo3::types::PyDict>>) -> PyResult<Self> {
        let d = pipeline::RunConfig::default();
        let cfg = Bound::new(
            py,
            RunConfig {
                topics: d.topics,
                tau: d.tau,
                mode: "threshold".into(),
                top_k: d.top_k,
                mask_annotated: d.mask_annotated,
                test_imagination: "raw".into(),
                annotate_k: d.annotate_k,
                retrieval_m: d.retrieval_m,
                seed: d.em.seed,
                max_iters: d.em.max_iters,
                rel_tol: d.em.rel_tol,
            },
        )?;
        if let Some(k) = kwargs {
            for (key, value) in k.iter() {
                cfg.setattr(key.extract::<String>()?.as_str(), value)?;
            }
        }
        let out = cfg.borrow().clone();
        out.to_core()?;
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!(
            "RunConfig(topics={}, tau={}, mode={:?}, top_k={}, seed={})",
            self.topics, self.tau, self.mode, self.top_k, self.seed
        )
    }
}

impl RunConfig {
    fn to_core(&self) -> PyResult<pipeline::RunConfig> {
        let mode = match self.mode.as_str() {
            "threshold" => ImaginationMode::Threshold,
            "top-k" => ImaginationMode::TopK,
            "off" => ImaginationMode::Off,
            other => return Err(PlsaError::new_err(format!("unknown mode {other:?}"))),
        };
        let test_imagination = match self.test_imagination.as_str() {
            "raw" => TestImagination::Raw,
            "same-as-training" => TestImagination::SameAsTraining,
            "off" => TestImagination::Off,
            other => {
                return Err(PlsaError::new_err(format!(
                    "unknown test imagination {other:?}"
                )))
            }
        };
        Ok(pipeline::RunConfig {
            topics: self.topics,
            tau: self.tau,
            mode,
            top_k: self.top_k,
            mask_annotated: self.mask_annotated,
            test_imagination,
            annotate_k: self.annotate_k,
            retrieval_m: self.retrieval_m,
            em: em_options(self.max_iters, self.rel_tol, self.seed),
            ..pipeline::RunConfig::default()
        })
    }
}

#[pyclass(module = "plsa_vw_py", frozen, get_all, skip_from_py_object)]
struct PipelineResult {
    report: MetricsReport,
    model: PlsaModel,
    scores: Dense,
    predicted: Vec<Vec<usize>>,
    report_text: String,
    train_trace: Vec<f64>,
}

fn config(cfg: Option<&RunConfig>) -> PyResult<pipeline::RunConfig> {
    cfg.map_or_else(|| Ok(pipeline::RunConfig::default()), RunConfig::to_core)
}

/// Train, annotate and evaluate. Artifacts go to `out_dir` when given.
#[pyfunction]
#[pyo3(signature = (train, test, config=None, out_dir=None))]
fn run_pipeline(
    py: Python<'_>,
    train: &Dataset,
    test: &Dataset,
    config: Option<&RunConfig>,
    out_dir: Option<&str>,
) -> PyResult<PipelineResult> {
    let cfg = self::config(config)?;
    let out = py
        .detach(|| pipeline::cmd_pipeline(&cfg, &train.inner, &test.inner))
        .map_err(err)?;
    if let Some(dir) = out_dir {
        out.write_to(dir).map_err(err)?;
    }
    Ok(PipelineResult {
        report: out.report.clone().into(),
        model: PlsaModel {
            inner: out.model.clone(),
        },
        scores: to_dense(&out.run.scores),
        predicted: out.run.predicted.clone(),
        report_text: out.report_text().to_string(),
        train_trace: out.train_trace.clone(),
    })
}

#[pyclass(module = "plsa_vw_py", frozen, get_all, skip_from_py_object)]
struct Comparison {
    seeds: Vec<u64>,
    plsa_words: Vec<MetricsReport>,
    plsa_vw: Vec<MetricsReport>,
    table: String,
}

/// PLSA-words against PLSA-vw for every seed.
#[pyfunction]
#[pyo3(signature = (train, test, seeds, config=None))]
fn compare(
    py: Python<'_>,
    train: &Dataset,
    test: &Dataset,
    seeds: Vec<u64>,
    config: Option<&RunConfig>,
) -> PyResult<Comparison> {
    let cfg = self::config(config)?;
    let cmp = py
        .detach(|| pipeline::cmd_compare(&cfg, &train.inner, &test.inner, &seeds))
        .map_err(err)?;
    Ok(Comparison {
        table: cmp.table(),
        seeds: cmp.seeds,
        plsa_words: cmp.plsa_words.into_iter().map(Into::into).collect(),
        plsa_vw: cmp.plsa_vw.into_iter().map(Into::into).collect(),
    })
}

#[pymodule]
fn plsa_vw_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PlsaError", m.py().get_type::<PlsaError>())?;
    m.add_class::<Dataset>()?;
    m.add_class::<PlsaModel>()?;
    m.add_class::<MetricsReport>()?;
    m.add_class::<RunConfig>()?;
    m.add_class::<PipelineResult>()?;
    m.add_class::<Comparison>()?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(similarity_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(imagine_counts, m)?)?;
    m.add_function(wrap_pyfunction!(imagine, m)?)?;
    m.add_function(wrap_pyfunction!(train_plsa, m)?)?;
    m.add_function(wrap_pyfunction!(top_keywords, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    Ok(())
}
