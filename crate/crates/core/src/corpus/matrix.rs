use ndarray::Array2;

use crate::error::{Error, Result};

/// Sparse nonnegative document × vocabulary counts.
///
/// Rows are stored as column-sorted `(col, value)` lists. Zero values are never
/// stored, so two matrices with the same logical entries compare equal.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CountMatrix {
    cols: usize,
    data: Vec<Vec<(usize, f64)>>,
}

impl CountMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CountMatrix {
            cols,
            data: vec![Vec::new(); rows],
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicate positions are
    /// summed; positions summing to zero are dropped.
    pub fn from_triplets<I>(rows: usize, cols: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut data: Vec<Vec<(usize, f64)>> = vec![Vec::new(); rows];
        for (r, c, v) in triplets {
            if r >= rows || c >= cols {
                return Err(Error::Dimension(format!(
                    "entry ({r}, {c}) outside {rows}x{cols} matrix"
                )));
            }
            check_value(v)?;
            data[r].push((c, v));
        }
        for row in &mut data {
            canonicalize(row);
        }
        Ok(CountMatrix { cols, data })
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged dense rows".into()));
        }
        Self::from_triplets(
            rows.len(),
            cols,
            rows.iter()
                .enumerate()
                .flat_map(|(i, r)| r.iter().enumerate().map(move |(j, &v)| (i, j, v))),
        )
    }

    pub fn from_array(a: &Array2<f64>) -> Result<Self> {
        Self::from_triplets(
            a.nrows(),
            a.ncols(),
            a.indexed_iter().map(|((i, j), &v)| (i, j, v)),
        )
    }

    /// Builds a matrix from already-sorted sparse rows.
    pub(crate) fn from_rows(cols: usize, data: Vec<Vec<(usize, f64)>>) -> Self {
        debug_assert!(data.iter().all(|r| r.windows(2).all(|w| w[0].0 < w[1].0)
            && r.iter().all(|&(c, v)| c < cols && v > 0.0)));
        CountMatrix { cols, data }
    }

    pub fn rows(&self) -> usize {
        self.data.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows(), self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.data.iter().map(Vec::len).sum()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.data[i]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[(usize, f64)]> + '_ {
        self.data.iter().map(Vec::as_slice)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self.data[i].binary_search_by_key(&j, |&(c, _)| c) {
            Ok(pos) => self.data[i][pos].1,
            Err(_) => 0.0,
        }
    }

    /// Row-major iteration over stored entries.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.data
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().map(move |&(j, v)| (i, j, v)))
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.data[i].iter().map(|&(_, v)| v).sum()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for (_, j, v) in self.iter() {
            sums[j] += v;
        }
        sums
    }

    pub fn total(&self) -> f64 {
        self.data.iter().flatten().map(|&(_, v)| v).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(Vec::is_empty)
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.rows(), self.cols));
        for (i, j, v) in self.iter() {
            out[[i, j]] = v;
        }
        out
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "scale factor {c} must be positive"
            )));
        }
        Ok(CountMatrix {
            cols: self.cols,
            data: self
                .data
                .iter()
                .map(|r| r.iter().map(|&(j, v)| (j, v * c)).collect())
                .collect(),
        })
    }

    /// Keeps only the rows listed in `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        CountMatrix {
            cols: self.cols,
            data: indices.iter().map(|&i| self.data[i].clone()).collect(),
        }
    }

    /// Column ids with a positive count in row `i`.
    pub fn support(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.data[i].iter().map(|&(j, _)| j)
    }
}

fn check_value(v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "count {v} is not a finite nonnegative number"
        )))
    }
}

fn canonicalize(row: &mut Vec<(usize, f64)>) {
    row.sort_by_key(|&(c, _)| c);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(row.len());
    for &(c, v) in row.iter() {
        match out.last_mut() {
            Some(last) if last.0 == c => last.1 += v,
            _ => out.push((c, v)),
        }
    }
    out.retain(|&(_, v)| v != 0.0);
    *row = out;
}

/// Scales each nonempty row to sum to one; empty rows stay empty.
pub fn row_normalize(m: &CountMatrix) -> CountMatrix {
    let data = m
        .row_iter()
        .map(|row| {
            let s: f64 = row.iter().map(|&(_, v)| v).sum();
            row.iter()
                .map(|&(j, v)| (j, v / s))
                .filter(|&(_, v)| v > 0.0)
                .collect()
        })
        .collect();
    CountMatrix::from_rows(m.cols(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed_and_zeros_dropped() {
        let m = CountMatrix::from_triplets(2, 3, [(0, 1, 1.0), (0, 1, 2.0), (1, 0, 0.0)]).unwrap();
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.nnz(), 1);
        assert!(m.row(1).is_empty());
    }

    #[test]
    fn rejects_bad_entries() {
        assert!(CountMatrix::from_triplets(1, 1, [(0, 0, -1.0)]).is_err());
        assert!(CountMatrix::from_triplets(1, 1, [(0, 0, f64::NAN)]).is_err());
        assert!(matches!(
            CountMatrix::from_triplets(1, 1, [(0, 3, 1.0)]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn iteration_is_row_major() {
        let m = CountMatrix::from_triplets(2, 3, [(1, 0, 1.0), (0, 2, 1.0), (0, 0, 1.0)]).unwrap();
        let pos: Vec<_> = m.iter().map(|(i, j, _)| (i, j)).collect();
        assert_eq!(pos, vec![(0, 0), (0, 2), (1, 0)]);
    }

    #[test]
    fn normalize_examples() {
        let m = CountMatrix::from_dense(&[vec![2.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]]).unwrap();
        let n = row_normalize(&m);
        assert_eq!(n.to_dense().row(0).to_vec(), vec![1.0, 0.0, 0.0]);
        assert!(n.row(1).is_empty());

        let m = CountMatrix::from_dense(&[vec![1.0, 3.0]]).unwrap();
        assert_eq!(
            row_normalize(&m).to_dense().row(0).to_vec(),
            vec![0.25, 0.75]
        );
    }
}
