//! "Imagined" annotations.
//!
//! A missing keyword of an image receives a real-valued count equal to the
//! count-weighted average of its similarity to the keywords the image does
//! carry. Similarity is the cosine between keyword columns of the
//! row-normalized count matrix. The same machinery runs unchanged over blobs,
//! and at test time over the blobs of unseen images using the similarity
//! matrix learned on the training images.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;

use crate::corpus::{row_normalize, CountMatrix, Dataset};
use crate::error::{Error, Result};

/// Dense symmetric vocabulary × vocabulary similarities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    values: Array2<f64>,
}

impl SimilarityMatrix {
    /// Wraps a square matrix after checking symmetry and range.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let n = values.nrows();
        if values.ncols() != n {
            return Err(Error::Dimension(format!(
                "similarity matrix must be square, got {}x{}",
                n,
                values.ncols()
            )));
        }
        for ((i, j), &v) in values.indexed_iter() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!(
                    "similarity ({i}, {j}) = {v} outside [0, 1]"
                )));
            }
            if values[[j, i]] != v {
                return Err(Error::InvalidArgument(format!(
                    "similarity not symmetric at ({i}, {j})"
                )));
            }
        }
        Ok(SimilarityMatrix { values })
    }

    pub fn identity(size: usize) -> Self {
        SimilarityMatrix {
            values: Array2::eye(size),
        }
    }

    pub fn size(&self) -> usize {
        self.values.nrows()
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.values[[j, k]]
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.values
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

    /// Header line `size`, then one whitespace-separated row per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.size());
        for row in self.values.rows() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    fn from_text(path: &Path, text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let size: usize = lines
            .next()
            .and_then(|l| l.trim().parse().ok())
            .ok_or_else(|| Error::parse(path, 1, "expected matrix size"))?;
        let mut values = Array2::zeros((size, size));
        for i in 0..size {
            let line = lines
                .next()
                .ok_or_else(|| Error::Dimension(format!("expected {size} rows, found {i}")))?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|f| {
                    f.parse()
                        .map_err(|_| Error::parse(path, i + 2, format!("bad value {f:?}")))
                })
                .collect::<Result<_>>()?;
            if row.len() != size {
                return Err(Error::parse(
                    path,
                    i + 2,
                    format!("expected {size} values, found {}", row.len()),
                ));
            }
            values
                .row_mut(i)
                .assign(&ndarray::ArrayView1::from(&row[..]));
        }
        Self::new(values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selection {
    /// Keep imagined entries `>= tau`.
    Threshold { tau: f64 },
    /// Keep the `k` largest imagined entries per row.
    TopK { k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImaginationConfig {
    pub selection: Selection,
    /// Restrict imagination to positions that carry no given count.
    pub mask_annotated: bool,
}

impl Default for ImaginationConfig {
    fn default() -> Self {
        ImaginationConfig {
            selection: Selection::Threshold { tau: 0.01 },
            mask_annotated: true,
        }
    }
}

impl ImaginationConfig {
    pub fn threshold(tau: f64) -> Self {
        ImaginationConfig {
            selection: Selection::Threshold { tau },
            mask_annotated: true,
        }
    }

    pub fn top_k(k: usize) -> Self {
        ImaginationConfig {
            selection: Selection::TopK { k },
            mask_annotated: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.selection {
            Selection::Threshold { tau } if !(0.0..=1.0).contains(&tau) => Err(
                Error::InvalidArgument(format!("tau {tau} must lie in [0, 1]")),
            ),
            Selection::TopK { k: 0 } => Err(Error::InvalidArgument("top-k needs k >= 1".into())),
            _ => Ok(()),
        }
    }
}

/// Cosine similarity between the columns of `norm`.
///
/// All-zero columns have similarity 0 to everything, themselves included.
pub fn similarity_matrix(norm: &CountMatrix) -> SimilarityMatrix {
    let q = norm.cols();
    let mut gram = Array2::<f64>::zeros((q, q));
    for row in norm.row_iter() {
        for (a, &(j, vj)) in row.iter().enumerate() {
            for &(k, vk) in &row[a..] {
                gram[[j, k]] += vj * vk;
            }
        }
    }
    let sq_norms: Vec<f64> = (0..q).map(|j| gram[[j, j]]).collect();
    let mut sim = Array2::<f64>::zeros((q, q));
    for j in 0..q {
        if sq_norms[j] == 0.0 {
            continue;
        }
        sim[[j, j]] = 1.0;
        for k in j + 1..q {
            if sq_norms[k] == 0.0 {
                continue;
            }
            let s = (gram[[j, k]] / (sq_norms[j] * sq_norms[k]).sqrt()).clamp(0.0, 1.0);
            sim[[j, k]] = s;
            sim[[k, j]] = s;
        }
    }
    SimilarityMatrix { values: sim }
}

/// Count-weighted average similarity of every vocabulary item to the items
/// present in each row: `(C · S) / (C · 1 · 1ᵀ)`. Empty rows stay empty.
pub fn imagine_counts(counts: &CountMatrix, sim: &SimilarityMatrix) -> Result<CountMatrix> {
    if counts.cols() != sim.size() {
        return Err(Error::Dimension(format!(
            "{} count columns but similarity size {}",
            counts.cols(),
            sim.size()
        )));
    }
    let q = counts.cols();
    let rows: Vec<Vec<(usize, f64)>> = (0..counts.rows())
        .into_par_iter()
        .map(|i| {
            let row = counts.row(i);
            let total: f64 = row.iter().map(|&(_, c)| c).sum();
            if total == 0.0 {
                return Vec::new();
            }
            let mut acc = vec![0.0; q];
            for &(k, c) in row {
                for (a, &s) in acc.iter_mut().zip(sim.values.row(k)) {
                    *a += c * s;
                }
            }
            acc.into_iter()
                .enumerate()
                .map(|(j, a)| (j, (a / total).min(1.0)))
                .filter(|&(_, v)| v > 0.0)
                .collect()
        })
        .collect();
    Ok(CountMatrix::from_rows(q, rows))
}

/// Picks which imagined entries become pseudo-counts.
///
/// With `mask_annotated`, positions already carrying a given count are cleared
/// first. Top-k ties go to the lower column id.
pub fn select_imagined(
    imagined: &CountMatrix,
    given: &CountMatrix,
    cfg: &ImaginationConfig,
) -> Result<CountMatrix> {
    cfg.validate()?;
    if imagined.shape() != given.shape() {
        return Err(Error::Dimension(format!(
            "imagined {:?} vs given {:?}",
            imagined.shape(),
            given.shape()
        )));
    }
    let rows = (0..imagined.rows())
        .map(|i| {
            let mut row: Vec<(usize, f64)> = imagined
                .row(i)
                .iter()
                .copied()
                .filter(|&(j, _)| !cfg.mask_annotated || given.get(i, j) == 0.0)
                .collect();
            match cfg.selection {
                Selection::Threshold { tau } => row.retain(|&(_, v)| v >= tau),
                Selection::TopK { k } => {
                    if row.len() > k {
                        row.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                        row.truncate(k);
                        row.sort_by_key(|&(j, _)| j);
                    }
                }
            }
            row
        })
        .collect();
    Ok(CountMatrix::from_rows(imagined.cols(), rows))
}

/// Elementwise sum of given and imagined counts.
pub fn augment(given: &CountMatrix, selected: &CountMatrix) -> Result<CountMatrix> {
    if given.shape() != selected.shape() {
        return Err(Error::Dimension(format!(
            "given {:?} vs selected {:?}",
            given.shape(),
            selected.shape()
        )));
    }
    CountMatrix::from_triplets(
        given.rows(),
        given.cols(),
        given.iter().chain(selected.iter()),
    )
}

/// Enriched training observations plus the similarity matrices they came from.
#[derive(Debug, Clone)]
pub struct Imagined {
    pub words_aug: CountMatrix,
    pub blobs_aug: CountMatrix,
    pub word_sim: SimilarityMatrix,
    pub blob_sim: SimilarityMatrix,
}

/// Similarity, imagination, selection and augmentation for one count matrix.
pub fn imagine_matrix(
    counts: &CountMatrix,
    cfg: &ImaginationConfig,
) -> Result<(CountMatrix, SimilarityMatrix)> {
    let sim = similarity_matrix(&row_normalize(counts));
    let imagined = imagine_counts(counts, &sim)?;
    let selected = select_imagined(&imagined, counts, cfg)?;
    Ok((augment(counts, &selected)?, sim))
}

/// Builds the augmented word and blob matrices of a training set.
pub fn imagine_pipeline(ds: &Dataset, cfg: &ImaginationConfig) -> Result<Imagined> {
    let (words_aug, word_sim) = imagine_matrix(&ds.words, cfg)?;
    let (blobs_aug, blob_sim) = imagine_matrix(&ds.blobs, cfg)?;
    Ok(Imagined {
        words_aug,
        blobs_aug,
        word_sim,
        blob_sim,
    })
}

/// Test-time blob enrichment with a training-derived similarity matrix.
///
/// `selection` of `None` adds every imagined entry unmasked.
pub fn imagine_test_blobs(
    test_blobs: &CountMatrix,
    blob_sim: &SimilarityMatrix,
    selection: Option<&ImaginationConfig>,
) -> Result<CountMatrix> {
    let imagined = imagine_counts(test_blobs, blob_sim)?;
    let selected = match selection {
        Some(cfg) => select_imagined(&imagined, test_blobs, cfg)?,
        None => imagined,
    };
    augment(test_blobs, &selected)
}
