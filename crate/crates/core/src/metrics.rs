//! Annotation, indexing and retrieval scores.
//!
//! * AP: mean over test images of `|predicted ∩ truth| / |truth|`.
//! * mAP: mean over keywords of the average precision of the image ranking
//!   induced by that keyword's scores.
//! * RP: mean over keywords of the precision among the top `M` images.
//! * RSI: share of the vocabulary correctly predicted for at least one image.
//!
//! All four are reported as percentages. Keywords without a relevant test image
//! are left out of the mAP and RP means. Equal scores rank the lower image
//! index first.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use ndarray::{Array2, ArrayView1};

use crate::corpus::{CountMatrix, Vocabulary};
use crate::error::{Error, Result};
use crate::plsa::top_keywords;

pub const DEFAULT_RETRIEVAL_M: usize = 20;
pub const DEFAULT_COVERAGE_CUTOFF: f64 = 50.0;

/// Predictions and ground truth for a set of test images.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationRun {
    /// Ordered predicted keyword ids per image.
    pub predicted: Vec<Vec<usize>>,
    /// Ntest × q keyword scores.
    pub scores: Array2<f64>,
    pub ground_truth: Vec<BTreeSet<usize>>,
}

impl AnnotationRun {
    /// Top-`k` predictions from full score rows.
    pub fn from_scores(
        scores: Array2<f64>,
        ground_truth: Vec<BTreeSet<usize>>,
        k: usize,
    ) -> Result<Self> {
        if scores.nrows() != ground_truth.len() {
            return Err(Error::Dimension(format!(
                "{} score rows but {} ground-truth sets",
                scores.nrows(),
                ground_truth.len()
            )));
        }
        let predicted = scores
            .rows()
            .into_iter()
            .map(|r| top_keywords(r, k))
            .collect();
        Ok(AnnotationRun {
            predicted,
            scores,
            ground_truth,
        })
    }

    pub fn n_images(&self) -> usize {
        self.ground_truth.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.scores.ncols()
    }
}

/// Keyword sets of every row of a word-count matrix.
pub fn ground_truth_sets(words: &CountMatrix) -> Vec<BTreeSet<usize>> {
    (0..words.rows())
        .map(|i| words.support(i).collect())
        .collect()
}

/// Mean per-image annotation precision, in percent. Images with empty ground
/// truth are skipped.
pub fn annotation_precision(run: &AnnotationRun) -> Result<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for (pred, truth) in run.predicted.iter().zip(&run.ground_truth) {
        if truth.is_empty() {
            continue;
        }
        let hits = pred.iter().filter(|w| truth.contains(w)).count();
        total += hits as f64 / truth.len() as f64;
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyTestSet);
    }
    Ok(100.0 * total / n as f64)
}

/// Image indices ranked by descending score for keyword `w`.
fn ranking(scores: ArrayView1<'_, f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

fn relevant_images(run: &AnnotationRun, w: usize) -> Vec<bool> {
    run.ground_truth.iter().map(|t| t.contains(&w)).collect()
}

/// Average precision per keyword; `None` for keywords with no relevant image.
pub fn per_keyword_average_precision(run: &AnnotationRun) -> Vec<Option<f64>> {
    (0..run.vocab_size())
        .map(|w| {
            let relevant = relevant_images(run, w);
            let n_rel = relevant.iter().filter(|&&r| r).count();
            if n_rel == 0 {
                return None;
            }
            let mut hits = 0usize;
            let mut sum = 0.0;
            for (rank, &img) in ranking(run.scores.column(w)).iter().enumerate() {
                if relevant[img] {
                    hits += 1;
                    sum += hits as f64 / (rank + 1) as f64;
                }
            }
            Some(sum / n_rel as f64)
        })
        .collect()
}

/// Mean over keywords with at least one relevant image, in percent.
pub fn mean_average_precision(run: &AnnotationRun) -> f64 {
    mean_percent(per_keyword_average_precision(run).into_iter().flatten())
}

/// Precision among the top `m` ranked images per keyword, averaged, in
/// percent. When `m` exceeds the test-set size every image is retrieved and
/// the denominator stays `m`.
pub fn retrieval_precision(run: &AnnotationRun, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidArgument(
            "retrieval depth M must be >= 1".into(),
        ));
    }
    let per_keyword = (0..run.vocab_size()).filter_map(|w| {
        let relevant = relevant_images(run, w);
        if !relevant.contains(&true) {
            return None;
        }
        let hits = ranking(run.scores.column(w))
            .into_iter()
            .take(m)
            .filter(|&img| relevant[img])
            .count();
        Some(hits as f64 / m as f64)
    });
    Ok(mean_percent(per_keyword))
}

/// Whether each keyword is correctly predicted for at least one image.
pub fn ever_correct(run: &AnnotationRun) -> Vec<bool> {
    let mut flags = vec![false; run.vocab_size()];
    for (pred, truth) in run.predicted.iter().zip(&run.ground_truth) {
        for &w in pred {
            if truth.contains(&w) {
                flags[w] = true;
            }
        }
    }
    flags
}

/// Percent of the `vocab_size` keywords ever correctly predicted.
pub fn rsi(run: &AnnotationRun, vocab_size: usize) -> f64 {
    if vocab_size == 0 {
        return 0.0;
    }
    let correct = ever_correct(run).into_iter().filter(|&c| c).count();
    100.0 * correct as f64 / vocab_size as f64
}

fn mean_percent(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        100.0 * sum / n as f64
    }
}

/// Every test image gets the `k` most frequent training keywords.
pub fn frequency_prior_baseline(
    train_words: &CountMatrix,
    n_test: usize,
    k: usize,
) -> Vec<Vec<usize>> {
    let totals = ndarray::Array1::from(train_words.col_sums());
    let top = top_keywords(totals.view(), k);
    vec![top; n_test]
}

/// Frequency-prior predictions as a full run, scoring every image with the
/// training keyword frequencies.
pub fn frequency_prior_run(
    train_words: &CountMatrix,
    ground_truth: Vec<BTreeSet<usize>>,
    k: usize,
) -> AnnotationRun {
    let totals = train_words.col_sums();
    let n = ground_truth.len();
    let scores = Array2::from_shape_fn((n, totals.len()), |(_, j)| totals[j]);
    AnnotationRun {
        predicted: frequency_prior_baseline(train_words, n, k),
        scores,
        ground_truth,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRow {
    pub train_count: f64,
    pub ever_correct: bool,
}

/// Training frequency against correct-at-least-once, per keyword.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub rows: Vec<CoverageRow>,
    pub cutoff: f64,
    /// Keywords with training count below `cutoff` that were ever correct.
    pub correct_below_cutoff: usize,
}

pub fn frequency_coverage_report(
    train_words: &CountMatrix,
    run: &AnnotationRun,
    cutoff: f64,
) -> CoverageReport {
    let counts = train_words.col_sums();
    let mut flags = ever_correct(run);
    flags.resize(counts.len(), false);
    let rows: Vec<CoverageRow> = counts
        .into_iter()
        .zip(flags)
        .map(|(train_count, ever_correct)| CoverageRow {
            train_count,
            ever_correct,
        })
        .collect();
    let correct_below_cutoff = rows
        .iter()
        .filter(|r| r.ever_correct && r.train_count < cutoff)
        .count();
    CoverageReport {
        rows,
        cutoff,
        correct_below_cutoff,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub ap: f64,
    pub map: f64,
    pub rp: f64,
    pub rsi: f64,
    pub retrieval_m: usize,
    pub n_test: usize,
    pub per_keyword_ap: Vec<Option<f64>>,
    pub per_keyword_correct: Vec<bool>,
}

pub fn evaluate(run: &AnnotationRun, retrieval_m: usize) -> Result<MetricsReport> {
    Ok(MetricsReport {
        ap: annotation_precision(run)?,
        map: mean_average_precision(run),
        rp: retrieval_precision(run, retrieval_m)?,
        rsi: rsi(run, run.vocab_size()),
        retrieval_m,
        n_test: run.n_images(),
        per_keyword_ap: per_keyword_average_precision(run),
        per_keyword_correct: ever_correct(run),
    })
}

impl MetricsReport {
    /// Plain-text report with fixed field names; percentages to 2 decimals.
    pub fn to_text(&self, vocab: &Vocabulary, coverage: Option<&CoverageReport>) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "ap {:.2}", self.ap);
        let _ = writeln!(out, "map {:.2}", self.map);
        let _ = writeln!(out, "rp {:.2}", self.rp);
        let _ = writeln!(out, "rsi {:.2}", self.rsi);
        let _ = writeln!(out, "retrieval_m {}", self.retrieval_m);
        let _ = writeln!(out, "n_test {}", self.n_test);
        out.push_str("\n[per_keyword]\nkeyword average_precision ever_correct train_count\n");
        for (w, (ap, correct)) in self
            .per_keyword_ap
            .iter()
            .zip(&self.per_keyword_correct)
            .enumerate()
        {
            let ap = ap.map_or_else(|| "-".to_string(), |v| format!("{v:.6}"));
            let count = coverage
                .and_then(|c| c.rows.get(w))
                .map_or_else(|| "-".to_string(), |r| r.train_count.to_string());
            let _ = writeln!(
                out,
                "{} {} {} {}",
                vocab.token(w),
                ap,
                u8::from(*correct),
                count
            );
        }
        if let Some(c) = coverage {
            let _ = writeln!(
                out,
                "\n[coverage]\ncutoff {}\ncorrect_below_cutoff {}",
                c.cutoff, c.correct_below_cutoff
            );
        }
        out
    }

    pub fn summary_line(&self) -> String {
        format!(
            "AP {:.2}  mAP {:.2}  RP@{} {:.2}  RSI {:.2}",
            self.ap, self.map, self.retrieval_m, self.rp, self.rsi
        )
    }
}

/// Mean and variance of one index across runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexSummary {
    pub mean: f64,
    /// Unbiased sample variance; zero for a single run.
    pub variance: f64,
}

impl IndexSummary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return IndexSummary {
                mean: 0.0,
                variance: 0.0,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let variance = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        IndexSummary { mean, variance }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateReport {
    pub ap: IndexSummary,
    pub map: IndexSummary,
    pub rp: IndexSummary,
    pub rsi: IndexSummary,
    pub runs: usize,
}

pub fn aggregate(reports: &[MetricsReport]) -> AggregateReport {
    let col =
        |f: fn(&MetricsReport) -> f64| IndexSummary::of(&reports.iter().map(f).collect::<Vec<_>>());
    AggregateReport {
        ap: col(|r| r.ap),
        map: col(|r| r.map),
        rp: col(|r| r.rp),
        rsi: col(|r| r.rsi),
        runs: reports.len(),
    }
}

/// Method-by-index table, `mean (variance)` per cell.
pub fn comparison_table(rows: &[(&str, AggregateReport)]) -> String {
    let mut out = format!(
        "{:<12} {:>15} {:>15} {:>15} {:>15}\n",
        "method", "AP", "mAP", "RP", "RSI"
    );
    for (name, agg) in rows {
        let cell = |s: IndexSummary| format!("{:.2} ({:.2})", s.mean, s.variance);
        let _ = writeln!(
            out,
            "{:<12} {:>15} {:>15} {:>15} {:>15}",
            name,
            cell(agg.ap),
            cell(agg.map),
            cell(agg.rp),
            cell(agg.rsi)
        );
    }
    let runs = rows.first().map_or(0, |r| r.1.runs);
    let _ = writeln!(out, "values in %, variance over {runs} run(s) in brackets");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn set(ids: &[usize]) -> BTreeSet<usize> {
        ids.iter().copied().collect()
    }

    #[test]
    fn ap_examples() {
        // sky=0, water=1, tree=2
        let run = AnnotationRun {
            predicted: vec![vec![0, 1, 3, 4, 5], vec![0, 1, 2], vec![3]],
            scores: Array2::zeros((3, 6)),
            ground_truth: vec![set(&[0, 1, 2]), set(&[0, 1]), set(&[0])],
        };
        let ap = annotation_precision(&run).unwrap();
        assert!((ap - 100.0 * (2.0 / 3.0 + 1.0 + 0.0) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ap_empty_test_set() {
        let run = AnnotationRun {
            predicted: vec![vec![0]],
            scores: Array2::zeros((1, 1)),
            ground_truth: vec![set(&[])],
        };
        assert!(matches!(
            annotation_precision(&run),
            Err(Error::EmptyTestSet)
        ));
    }

    #[test]
    fn map_example() {
        // relevant at ranks 1 and 3 of 4 images.
        let run = AnnotationRun {
            predicted: vec![vec![]; 4],
            scores: array![[0.9], [0.8], [0.7], [0.1]],
            ground_truth: vec![set(&[0]), set(&[]), set(&[0]), set(&[])],
        };
        let ap = per_keyword_average_precision(&run)[0].unwrap();
        assert!((ap - 5.0 / 6.0).abs() < 1e-15);
        let all = AnnotationRun {
            ground_truth: vec![set(&[0]); 4],
            ..run
        };
        assert_eq!(per_keyword_average_precision(&all)[0], Some(1.0));
    }

    #[test]
    fn rp_examples() {
        let run = AnnotationRun {
            predicted: vec![vec![]; 4],
            scores: array![[0.9, 0.1], [0.8, 0.1], [0.7, 0.1], [0.1, 0.1]],
            ground_truth: vec![set(&[0]), set(&[]), set(&[]), set(&[0])],
        };
        // keyword 1 has no relevant image and is excluded.
        assert!((retrieval_precision(&run, 2).unwrap() - 50.0).abs() < 1e-12);
        // M beyond the pool keeps the denominator.
        assert!((retrieval_precision(&run, 8).unwrap() - 25.0).abs() < 1e-12);
        assert!(retrieval_precision(&run, 0).is_err());
        assert_eq!(DEFAULT_RETRIEVAL_M, 20);
    }

    #[test]
    fn rsi_examples() {
        let mut run = AnnotationRun {
            predicted: vec![vec![0], vec![1]],
            scores: Array2::zeros((2, 3)),
            ground_truth: vec![set(&[0]), set(&[1, 2])],
        };
        assert!((rsi(&run, 3) - 200.0 / 3.0).abs() < 1e-12);
        assert_eq!(format!("{:.2}", rsi(&run, 3)), "66.67");
        run.predicted = vec![vec![2], vec![0]];
        assert_eq!(rsi(&run, 3), 0.0);
        run.predicted = vec![vec![0], vec![1, 2]];
        assert_eq!(rsi(&run, 3), 100.0);
    }

    #[test]
    fn frequency_prior_examples() {
        let m = CountMatrix::from_dense(&[vec![5.0, 4.0, 2.0], vec![0.0, 5.0, 0.0]]).unwrap();
        assert_eq!(frequency_prior_baseline(&m, 2, 2), vec![vec![1, 0]; 2]);
        assert_eq!(frequency_prior_baseline(&m, 1, 1), vec![vec![1]]);
        let flat = CountMatrix::from_dense(&[vec![1.0, 1.0, 1.0]]).unwrap();
        assert_eq!(frequency_prior_baseline(&flat, 1, 2), vec![vec![0, 1]]);
    }

    #[test]
    fn coverage_examples() {
        let train = CountMatrix::from_dense(&[vec![0.0, 60.0, 10.0], vec![0.0, 0.0, 5.0]]).unwrap();
        let run = AnnotationRun {
            predicted: vec![vec![1, 2]],
            scores: Array2::zeros((1, 3)),
            ground_truth: vec![set(&[1, 2])],
        };
        let c = frequency_coverage_report(&train, &run, 50.0);
        assert_eq!(
            c.rows[0],
            CoverageRow {
                train_count: 0.0,
                ever_correct: false
            }
        );
        assert_eq!(c.correct_below_cutoff, 1);
        let empty = AnnotationRun {
            predicted: vec![],
            scores: Array2::zeros((0, 3)),
            ground_truth: vec![],
        };
        assert!(frequency_coverage_report(&train, &empty, 50.0)
            .rows
            .iter()
            .all(|r| !r.ever_correct));
    }

    #[test]
    fn single_run_aggregate_has_zero_variance() {
        let s = IndexSummary::of(&[17.5]);
        assert_eq!(
            s,
            IndexSummary {
                mean: 17.5,
                variance: 0.0
            }
        );
        let s = IndexSummary::of(&[1.0, 3.0]);
        assert_eq!(s.variance, 2.0);
    }
}
