//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;

/// Random nonnegative dense matrix. Roughly `density` of the entries are
/// nonzero; values are small integers or fractions so ties and zero rows occur.
pub fn random_dense<R: Rng>(rng: &mut R, rows: usize, cols: usize, density: f64) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| {
                    if rng.random_bool(density) {
                        if rng.random_bool(0.5) {
                            rng.random_range(1..4) as f64
                        } else {
                            rng.random_range(0.05..2.5)
                        }
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

pub fn row_normalize(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    m.iter()
        .map(|row| {
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter().map(|x| x / s).collect()
            } else {
                row.clone()
            }
        })
        .collect()
}

/// Cosine similarity of columns, 0 wherever either column is all zero.
pub fn cosine_columns(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let cols = m.first().map_or(0, Vec::len);
    let mut out = vec![vec![0.0; cols]; cols];
    for j in 0..cols {
        for k in 0..cols {
            let (mut dot, mut nj, mut nk) = (0.0, 0.0, 0.0);
            for row in m {
                dot += row[j] * row[k];
                nj += row[j] * row[j];
                nk += row[k] * row[k];
            }
            if nj > 0.0 && nk > 0.0 {
                out[j][k] = dot / (nj.sqrt() * nk.sqrt());
            }
        }
    }
    out
}

/// `out(i,j) = sum_k c(i,k) sim(k,j) / sum_k c(i,k)`, zero rows stay zero.
pub fn imagine(counts: &[Vec<f64>], sim: &[Vec<f64>]) -> Vec<Vec<f64>> {
    counts
        .iter()
        .map(|row| {
            let total: f64 = row.iter().sum();
            (0..sim.len())
                .map(|j| {
                    if total <= 0.0 {
                        return 0.0;
                    }
                    let mut acc = 0.0;
                    for (k, &c) in row.iter().enumerate() {
                        acc += c * sim[k][j];
                    }
                    acc / total
                })
                .collect()
        })
        .collect()
}

/// Position of image `i` (1-based) when ranking by descending score, lower
/// index first on ties, computed by pairwise comparison.
fn image_rank(col: &[f64], i: usize) -> usize {
    1 + (0..col.len())
        .filter(|&j| col[j] > col[i] || (col[j] == col[i] && j < i))
        .count()
}

/// Whether keyword `w` is among the `k` best of `row`.
pub fn in_top_k(row: &[f64], w: usize, k: usize) -> bool {
    let better = (0..row.len())
        .filter(|&v| row[v] > row[w] || (row[v] == row[w] && v < w))
        .count();
    better < k
}

fn column(scores: &[Vec<f64>], w: usize) -> Vec<f64> {
    scores.iter().map(|r| r[w]).collect()
}

/// Relevant-image ranks for keyword `w`, ascending.
fn relevant_ranks(scores: &[Vec<f64>], truth: &[BTreeSet<usize>], w: usize) -> Vec<usize> {
    let col = column(scores, w);
    let mut ranks: Vec<usize> = (0..col.len())
        .filter(|&i| truth[i].contains(&w))
        .map(|i| image_rank(&col, i))
        .collect();
    ranks.sort_unstable();
    ranks
}

fn mean_percent(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut s = 0.0;
    for v in values {
        s += v;
    }
    100.0 * s / values.len() as f64
}

pub fn annotation_precision(scores: &[Vec<f64>], truth: &[BTreeSet<usize>], k: usize) -> f64 {
    let mut per_image = Vec::new();
    for (row, t) in scores.iter().zip(truth) {
        if t.is_empty() {
            continue;
        }
        let hits = t.iter().filter(|&&w| in_top_k(row, w, k)).count();
        per_image.push(hits as f64 / t.len() as f64);
    }
    mean_percent(&per_image)
}

pub fn mean_average_precision(scores: &[Vec<f64>], truth: &[BTreeSet<usize>]) -> f64 {
    let q = scores.first().map_or(0, Vec::len);
    let mut per_keyword = Vec::new();
    for w in 0..q {
        let ranks = relevant_ranks(scores, truth, w);
        if ranks.is_empty() {
            continue;
        }
        let mut s = 0.0;
        for (n, &r) in ranks.iter().enumerate() {
            s += (n + 1) as f64 / r as f64;
        }
        per_keyword.push(s / ranks.len() as f64);
    }
    mean_percent(&per_keyword)
}

pub fn retrieval_precision(scores: &[Vec<f64>], truth: &[BTreeSet<usize>], m: usize) -> f64 {
    let q = scores.first().map_or(0, Vec::len);
    let mut per_keyword = Vec::new();
    for w in 0..q {
        let ranks = relevant_ranks(scores, truth, w);
        if ranks.is_empty() {
            continue;
        }
        let hits = ranks.iter().filter(|&&r| r <= m).count();
        per_keyword.push(hits as f64 / m as f64);
    }
    mean_percent(&per_keyword)
}

pub fn rsi(scores: &[Vec<f64>], truth: &[BTreeSet<usize>], k: usize) -> f64 {
    let q = scores.first().map_or(0, Vec::len);
    let correct = (0..q)
        .filter(|&w| {
            scores
                .iter()
                .zip(truth)
                .any(|(row, t)| t.contains(&w) && in_top_k(row, w, k))
        })
        .count();
    100.0 * correct as f64 / q as f64
}

pub fn row_sums(m: &ndarray::Array2<f64>) -> Vec<f64> {
    m.rows().into_iter().map(|r| r.sum()).collect()
}

/// Largest deviation of any row sum from 1.
pub fn simplex_error(m: &ndarray::Array2<f64>) -> f64 {
    row_sums(m)
        .into_iter()
        .map(|s| (s - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Largest drop between consecutive trace entries (0 when nondecreasing).
pub fn max_decrease(trace: &[f64]) -> f64 {
    trace.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
}
