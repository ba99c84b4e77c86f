//! End-to-end experiment: optional imagination, PLSA-words training, feature
//! folding, test-time blob imagination, document folding, annotation and
//! evaluation.
//!
//! With imagination off this is plain PLSA-words; with it on, the same
//! procedure runs on the enriched training matrices (PLSA-vw).

use std::fs;
use std::path::Path;

use crate::corpus::{generate_synthetic, write_dataset, CountMatrix, Dataset, SyntheticSpec};
use crate::error::{Error, Result};
use crate::imagination::{
    imagine_pipeline, imagine_test_blobs, ImaginationConfig, Selection, SimilarityMatrix,
};
use crate::metrics::{
    aggregate, comparison_table, evaluate, frequency_coverage_report, ground_truth_sets,
    AggregateReport, AnnotationRun, CoverageReport, MetricsReport, DEFAULT_COVERAGE_CUTOFF,
    DEFAULT_RETRIEVAL_M,
};
use crate::plsa::{
    annotate, fold_in_documents, fold_in_features, train_plsa, EmOptions, PlsaModel,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImaginationMode {
    Off,
    Threshold,
    TopK,
}

/// How test-image blobs are enriched before folding in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestImagination {
    /// Every imagined blob entry is added, unmasked and unthresholded.
    Raw,
    /// The training selection rule (threshold or top-k, with masking) is applied.
    SameAsTraining,
    Off,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub topics: usize,
    pub tau: f64,
    pub mode: ImaginationMode,
    pub top_k: usize,
    pub mask_annotated: bool,
    pub test_imagination: TestImagination,
    pub annotate_k: usize,
    pub retrieval_m: usize,
    pub coverage_cutoff: f64,
    pub em: EmOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            topics: 120,
            tau: 0.01,
            mode: ImaginationMode::Threshold,
            top_k: 5,
            mask_annotated: true,
            test_imagination: TestImagination::Raw,
            annotate_k: 5,
            retrieval_m: DEFAULT_RETRIEVAL_M,
            coverage_cutoff: DEFAULT_COVERAGE_CUTOFF,
            em: EmOptions::default(),
        }
    }
}

impl RunConfig {
    /// The imagination settings, or `None` when imagination is off.
    pub fn imagination(&self) -> Option<ImaginationConfig> {
        let selection = match self.mode {
            ImaginationMode::Off => return None,
            ImaginationMode::Threshold => Selection::Threshold { tau: self.tau },
            ImaginationMode::TopK => Selection::TopK { k: self.top_k },
        };
        Some(ImaginationConfig {
            selection,
            mask_annotated: self.mask_annotated,
        })
    }

    pub fn with_mode(&self, mode: ImaginationMode) -> Self {
        RunConfig {
            mode,
            ..self.clone()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut cfg = self.clone();
        cfg.em.seed = seed;
        cfg
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: MetricsReport,
    pub coverage: CoverageReport,
    pub model: PlsaModel,
    pub run: AnnotationRun,
    pub word_sim: Option<SimilarityMatrix>,
    pub blob_sim: Option<SimilarityMatrix>,
    pub train_trace: Vec<f64>,
    pub feature_trace: Vec<f64>,
    pub test_traces: Vec<Vec<f64>>,
    report_text: String,
}

impl PipelineOutput {
    pub fn report_text(&self) -> &str {
        &self.report_text
    }

    /// Writes `model.txt`, `report.txt` and, when imagination ran,
    /// `word_sim.txt` and `blob_sim.txt` into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.model.save(dir.join("model.txt"))?;
        let report = dir.join("report.txt");
        fs::write(&report, &self.report_text).map_err(|e| Error::io(&report, e))?;
        if let Some(s) = &self.word_sim {
            s.save(dir.join("word_sim.txt"))?;
        }
        if let Some(s) = &self.blob_sim {
            s.save(dir.join("blob_sim.txt"))?;
        }
        Ok(())
    }
}

pub fn check_compatible(train: &Dataset, test: &Dataset) -> Result<()> {
    if train.word_vocab != test.word_vocab {
        return Err(Error::Dimension(
            "train and test word vocabularies differ".into(),
        ));
    }
    if train.blob_vocab != test.blob_vocab {
        return Err(Error::Dimension(
            "train and test blob vocabularies differ".into(),
        ));
    }
    Ok(())
}

/// Runs the full train/annotate/evaluate procedure. Ground truth is the test
/// set's word matrix.
pub fn cmd_pipeline(cfg: &RunConfig, train: &Dataset, test: &Dataset) -> Result<PipelineOutput> {
    check_compatible(train, test).map_err(Error::at_stage("input"))?;
    let icfg = cfg.imagination();

    let (words, blobs, word_sim, blob_sim) = match &icfg {
        Some(icfg) => {
            let im = imagine_pipeline(train, icfg).map_err(Error::at_stage("imagine"))?;
            (
                im.words_aug,
                im.blobs_aug,
                Some(im.word_sim),
                Some(im.blob_sim),
            )
        }
        None => (train.words.clone(), train.blobs.clone(), None, None),
    };

    let (model, train_trace) =
        train_plsa(&words, cfg.topics, &cfg.em).map_err(Error::at_stage("train"))?;
    let (model, feature_trace) =
        fold_in_features(&model, &blobs, &cfg.em).map_err(Error::at_stage("fold"))?;

    let test_blobs = test_blob_counts(cfg, icfg.as_ref(), blob_sim.as_ref(), &test.blobs)
        .map_err(Error::at_stage("imagine-test"))?;
    let folded =
        fold_in_documents(&model, &test_blobs, &cfg.em).map_err(Error::at_stage("fold-test"))?;

    let scores = annotate(&model, &folded.mixtures).map_err(Error::at_stage("annotate"))?;
    let run = AnnotationRun::from_scores(scores, ground_truth_sets(&test.words), cfg.annotate_k)
        .map_err(Error::at_stage("annotate"))?;
    let report = evaluate(&run, cfg.retrieval_m).map_err(Error::at_stage("eval"))?;
    let coverage = frequency_coverage_report(&train.words, &run, cfg.coverage_cutoff);
    let report_text = report.to_text(&train.word_vocab, Some(&coverage));

    Ok(PipelineOutput {
        report,
        coverage,
        model,
        run,
        word_sim,
        blob_sim,
        train_trace,
        feature_trace,
        test_traces: folded.traces,
        report_text,
    })
}

fn test_blob_counts(
    cfg: &RunConfig,
    icfg: Option<&ImaginationConfig>,
    blob_sim: Option<&SimilarityMatrix>,
    blobs: &CountMatrix,
) -> Result<CountMatrix> {
    match (blob_sim, cfg.test_imagination) {
        (Some(sim), TestImagination::Raw) => imagine_test_blobs(blobs, sim, None),
        (Some(sim), TestImagination::SameAsTraining) => imagine_test_blobs(blobs, sim, icfg),
        _ => Ok(blobs.clone()),
    }
}

/// PLSA-words and PLSA-vw results over several EM seeds.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub seeds: Vec<u64>,
    pub plsa_words: Vec<MetricsReport>,
    pub plsa_vw: Vec<MetricsReport>,
}

impl Comparison {
    pub fn summaries(&self) -> (AggregateReport, AggregateReport) {
        (aggregate(&self.plsa_vw), aggregate(&self.plsa_words))
    }

    pub fn table(&self) -> String {
        let (vw, words) = self.summaries();
        comparison_table(&[("PLSA-vw", vw), ("PLSA-words", words)])
    }
}

/// Runs the baseline (imagination off) and the enriched configuration for
/// every seed. An `Off` mode in `cfg` is promoted to thresholding for the
/// enriched runs.
pub fn cmd_compare(
    cfg: &RunConfig,
    train: &Dataset,
    test: &Dataset,
    seeds: &[u64],
) -> Result<Comparison> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument(
            "compare needs at least one seed".into(),
        ));
    }
    let vw_mode = match cfg.mode {
        ImaginationMode::Off => ImaginationMode::Threshold,
        m => m,
    };
    let mut out = Comparison {
        seeds: seeds.to_vec(),
        plsa_words: Vec::new(),
        plsa_vw: Vec::new(),
    };
    for &seed in seeds {
        let base = cfg.with_seed(seed);
        out.plsa_words
            .push(cmd_pipeline(&base.with_mode(ImaginationMode::Off), train, test)?.report);
        out.plsa_vw
            .push(cmd_pipeline(&base.with_mode(vw_mode), train, test)?.report);
    }
    Ok(out)
}

/// Writes the ground-truth and observed synthetic datasets.
pub fn cmd_synth(
    spec: &SyntheticSpec,
    truth_path: impl AsRef<Path>,
    observed_path: impl AsRef<Path>,
) -> Result<()> {
    let corpus = generate_synthetic(spec)?;
    write_dataset(&corpus.full_truth, truth_path)?;
    write_dataset(&corpus.observed, observed_path)
}

/// A synthetic train/test pair: training on observed (dropped) annotations,
/// testing against the full annotations of held-out images.
pub fn synthetic_split(spec: &SyntheticSpec, n_test: usize) -> Result<(Dataset, Dataset)> {
    let corpus = generate_synthetic(spec)?;
    let (train, _) = corpus.observed.split_tail(n_test)?;
    let (_, test) = corpus.full_truth.split_tail(n_test)?;
    Ok((train, test))
}
