//! Command-line front end.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array2;
use serde::Deserialize;

use crate::corpus::{
    load_dataset, write_dataset, CorelSplit, Dataset, DatasetFormat, SyntheticSpec,
};
use crate::imagination::{imagine_test_blobs, SimilarityMatrix};
use crate::metrics::{evaluate, frequency_coverage_report, ground_truth_sets, AnnotationRun};
use crate::pipeline::{
    cmd_compare, cmd_pipeline, cmd_synth, ImaginationMode, RunConfig, TestImagination,
};
use crate::plsa::{annotate, fold_in_documents, fold_in_features, train_plsa, PlsaModel};

#[derive(Debug, Parser)]
#[command(
    name = "plsa-vw",
    version,
    about = "Imagined annotations for PLSA image annotation"
)]
pub struct Cli {
    /// Worker threads for the parallel E-step (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic loosely-annotated corpus.
    Synth(SynthArgs),
    /// Enrich a training set with imagined annotations.
    Imagine(ImagineArgs),
    /// Train word topics on a dataset's word counts.
    Train(TrainArgs),
    /// Fold blob counts into a trained model.
    Fold(FoldArgs),
    /// Score keywords for test images.
    Annotate(AnnotateArgs),
    /// Evaluate a score file against test annotations.
    Eval(EvalArgs),
    /// Full train / annotate / evaluate run.
    Pipeline(PipelineArgs),
    /// PLSA-words vs PLSA-vw over several seeds.
    Compare(CompareArgs),
    /// Convert a Corel JMLR-2003 sample split to the native format.
    Convert(ConvertArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    pub docs: usize,
    #[arg(long, default_value_t = 50)]
    pub words: usize,
    #[arg(long, default_value_t = 80)]
    pub blobs: usize,
    #[arg(long, default_value_t = 8)]
    pub true_topics: usize,
    #[arg(long, default_value_t = 5)]
    pub words_per_doc: usize,
    #[arg(long, default_value_t = 10)]
    pub blobs_per_doc: usize,
    #[arg(long, default_value_t = 0.4)]
    pub drop_rate: f64,
    #[arg(long, default_value_t = 1.0)]
    pub concentration: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output for the complete annotations.
    #[arg(long)]
    pub truth: PathBuf,
    /// Output for the annotations with keywords dropped.
    #[arg(long)]
    pub observed: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Threshold,
    TopK,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestImaginationArg {
    Raw,
    SameAsTraining,
    Off,
}

/// Run settings; every flag overrides the config file, which overrides the
/// built-in defaults (120 topics, tau 0.01, top-5 annotations, M = 20).
#[derive(Debug, Args, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunFlags {
    /// TOML file with any of the settings below.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub topics: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Keep imagined mass on already annotated positions.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub no_mask: Option<bool>,
    #[arg(long, value_enum)]
    pub test_imagination: Option<TestImaginationArg>,
    #[arg(long)]
    pub annotate_k: Option<usize>,
    #[arg(long)]
    pub retrieval_m: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
}

impl RunFlags {
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let file: RunFlags =
                toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            file.apply(&mut cfg);
        }
        self.apply(&mut cfg);
        Ok(cfg)
    }

    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = self.topics {
            cfg.topics = v;
        }
        if let Some(v) = self.tau {
            cfg.tau = v;
        }
        if let Some(v) = self.mode {
            cfg.mode = match v {
                ModeArg::Threshold => ImaginationMode::Threshold,
                ModeArg::TopK => ImaginationMode::TopK,
                ModeArg::Off => ImaginationMode::Off,
            };
        }
        if let Some(v) = self.top_k {
            cfg.top_k = v;
        }
        if let Some(v) = self.no_mask {
            cfg.mask_annotated = !v;
        }
        if let Some(v) = self.test_imagination {
            cfg.test_imagination = match v {
                TestImaginationArg::Raw => TestImagination::Raw,
                TestImaginationArg::SameAsTraining => TestImagination::SameAsTraining,
                TestImaginationArg::Off => TestImagination::Off,
            };
        }
        if let Some(v) = self.annotate_k {
            cfg.annotate_k = v;
        }
        if let Some(v) = self.retrieval_m {
            cfg.retrieval_m = v;
        }
        if let Some(v) = self.seed {
            cfg.em.seed = v;
        }
        if let Some(v) = self.max_iters {
            cfg.em.max_iters = v;
        }
        if let Some(v) = self.rel_tol {
            cfg.em.rel_tol = v;
        }
    }
}

#[derive(Debug, Args)]
pub struct ImagineArgs {
    #[arg(long)]
    pub train: PathBuf,
    /// Receives `augmented.txt`, `word_sim.txt` and `blob_sim.txt`.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub run: RunFlags,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub run: RunFlags,
}

#[derive(Debug, Args)]
pub struct FoldArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset whose blob counts are folded in (same documents as training).
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub run: RunFlags,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Training blob similarity for test-time blob imagination.
    #[arg(long)]
    pub blob_sim: Option<PathBuf>,
    /// Score matrix output.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub run: RunFlags,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Training set, for the keyword frequency/coverage table.
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub run: RunFlags,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub run: RunFlags,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Comma-separated EM seeds.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub run: RunFlags,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SplitArg {
    Train,
    Test1,
    Test3,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Sample directory of the Corel JMLR-2003 distribution.
    #[arg(long)]
    pub corel_dir: PathBuf,
    #[arg(long, value_enum, default_value = "train")]
    pub split: SplitArg,
    #[arg(long, default_value_t = 500)]
    pub blob_vocab_size: usize,
    #[arg(long)]
    pub out: PathBuf,
}

fn load(path: &Path) -> anyhow::Result<Dataset> {
    load_dataset(path, DatasetFormat::Native).with_context(|| format!("loading {}", path.display()))
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring thread pool")?;
    }
    match cli.command {
        Command::Synth(a) => {
            let spec = SyntheticSpec {
                n_docs: a.docs,
                n_words: a.words,
                n_blobs: a.blobs,
                n_topics_true: a.true_topics,
                words_per_doc: a.words_per_doc,
                blobs_per_doc: a.blobs_per_doc,
                drop_rate: a.drop_rate,
                concentration: a.concentration,
                seed: a.seed,
            };
            cmd_synth(&spec, &a.truth, &a.observed).context("synth")?;
            println!("wrote {} and {}", a.truth.display(), a.observed.display());
        }
        Command::Imagine(a) => {
            let cfg = a.run.resolve()?;
            let Some(icfg) = cfg.imagination() else {
                bail!("imagine: mode is off");
            };
            let ds = load(&a.train)?;
            let im = crate::imagination::imagine_pipeline(&ds, &icfg).context("imagine")?;
            fs::create_dir_all(&a.out_dir)
                .with_context(|| format!("creating {}", a.out_dir.display()))?;
            let aug = Dataset::new(
                im.words_aug.clone(),
                im.blobs_aug.clone(),
                ds.word_vocab.clone(),
                ds.blob_vocab.clone(),
                ds.doc_ids.clone(),
            )?;
            write_dataset(&aug, a.out_dir.join("augmented.txt"))?;
            im.word_sim.save(a.out_dir.join("word_sim.txt"))?;
            im.blob_sim.save(a.out_dir.join("blob_sim.txt"))?;
            println!(
                "imagined word mass {:.3}, blob mass {:.3} added to {} documents",
                im.words_aug.total() - ds.words.total(),
                im.blobs_aug.total() - ds.blobs.total(),
                ds.n_docs()
            );
        }
        Command::Train(a) => {
            let cfg = a.run.resolve()?;
            let ds = load(&a.train)?;
            let (model, trace) = train_plsa(&ds.words, cfg.topics, &cfg.em).context("train")?;
            model.save(&a.out)?;
            println!(
                "trained {} topics in {} iterations, log-likelihood {:.6}",
                cfg.topics,
                trace.len(),
                trace.last().copied().unwrap_or(f64::NAN)
            );
        }
        Command::Fold(a) => {
            let cfg = a.run.resolve()?;
            let model = PlsaModel::load(&a.model)?;
            let ds = load(&a.train)?;
            let (model, trace) = fold_in_features(&model, &ds.blobs, &cfg.em).context("fold")?;
            model.save(&a.out)?;
            println!(
                "folded in {} blobs in {} iterations, log-likelihood {:.6}",
                ds.blobs.cols(),
                trace.len(),
                trace.last().copied().unwrap_or(f64::NAN)
            );
        }
        Command::Annotate(a) => {
            let cfg = a.run.resolve()?;
            let model = PlsaModel::load(&a.model)?;
            let test = load(&a.test)?;
            let blobs = match &a.blob_sim {
                Some(p) => {
                    let sim = SimilarityMatrix::load(p)?;
                    imagine_test_blobs(&test.blobs, &sim, None).context("imagine-test")?
                }
                None => test.blobs.clone(),
            };
            let folded = fold_in_documents(&model, &blobs, &cfg.em).context("fold-test")?;
            let scores = annotate(&model, &folded.mixtures).context("annotate")?;
            write_scores(&a.out, &scores)?;
            let run =
                AnnotationRun::from_scores(scores, ground_truth_sets(&test.words), cfg.annotate_k)?;
            for (id, pred) in test.doc_ids.iter().zip(&run.predicted).take(5) {
                let words: Vec<&str> = pred.iter().map(|&w| test.word_vocab.token(w)).collect();
                println!("{id}: {}", words.join(" "));
            }
        }
        Command::Eval(a) => {
            let cfg = a.run.resolve()?;
            let test = load(&a.test)?;
            let scores = read_scores(&a.scores)?;
            let run =
                AnnotationRun::from_scores(scores, ground_truth_sets(&test.words), cfg.annotate_k)?;
            let report = evaluate(&run, cfg.retrieval_m).context("eval")?;
            let coverage = match &a.train {
                Some(p) => Some(frequency_coverage_report(
                    &load(p)?.words,
                    &run,
                    cfg.coverage_cutoff,
                )),
                None => None,
            };
            fs::write(&a.out, report.to_text(&test.word_vocab, coverage.as_ref()))
                .with_context(|| format!("writing {}", a.out.display()))?;
            println!("{}", report.summary_line());
        }
        Command::Pipeline(a) => {
            let cfg = a.run.resolve()?;
            let train = load(&a.train)?;
            let test = load(&a.test)?;
            let out = cmd_pipeline(&cfg, &train, &test).context("pipeline")?;
            out.write_to(&a.out_dir)?;
            println!("{}", out.report.summary_line());
        }
        Command::Compare(a) => {
            let cfg = a.run.resolve()?;
            let train = load(&a.train)?;
            let test = load(&a.test)?;
            let cmp = cmd_compare(&cfg, &train, &test, &a.seeds).context("compare")?;
            let table = cmp.table();
            fs::write(&a.out, &table).with_context(|| format!("writing {}", a.out.display()))?;
            print!("{table}");
        }
        Command::Convert(a) => {
            let split = match a.split {
                SplitArg::Train => CorelSplit::Train,
                SplitArg::Test1 => CorelSplit::Test1,
                SplitArg::Test3 => CorelSplit::Test3,
            };
            let format = DatasetFormat::CorelJmlr {
                split,
                blob_vocab_size: a.blob_vocab_size,
            };
            let ds = load_dataset(&a.corel_dir, format).context("convert")?;
            write_dataset(&ds, &a.out)?;
            println!(
                "converted {} images ({} keywords, {} blobs)",
                ds.n_docs(),
                ds.word_vocab.len(),
                ds.blob_vocab.len()
            );
        }
    }
    Ok(())
}

/// Header `N q`, then one row of keyword scores per test image.
pub fn write_scores(path: &Path, scores: &Array2<f64>) -> anyhow::Result<()> {
    let mut out = format!("{} {}\n", scores.nrows(), scores.ncols());
    for row in scores.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn read_scores(path: &Path) -> anyhow::Result<Array2<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<usize> = lines
        .next()
        .unwrap_or_default()
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .context("score header")?;
    let [n, q] = header[..] else {
        bail!("{}: header must be `N q`", path.display());
    };
    let mut values = Vec::with_capacity(n * q);
    for (i, line) in lines.take(n).enumerate() {
        let row: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .with_context(|| format!("{}:{}", path.display(), i + 2))?;
        if row.len() != q {
            bail!("{}:{}: expected {q} scores", path.display(), i + 2);
        }
        values.extend(row);
    }
    Array2::from_shape_vec((n, q), values).context("score file ends early")
}
