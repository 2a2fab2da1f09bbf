//! Compressed sparse row matrices for the adjacency chain products.
//!
//! Adjacency matrices here are extremely sparse (a text has a single author,
//! a handful of entities), so the chain product over a meta-path is evaluated
//! right-to-left: every intermediate stays at `nodes x feature_dim` and no
//! `nodes x nodes` dense product is ever materialized.

use crate::dense::Mat;

/// CSR matrix over `f64`. Column indices are sorted and unique within a row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Build from (row, col, value) triplets. Duplicate coordinates are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut entries: Vec<(usize, usize, f64)> = triplets.to_vec();
        entries.sort_by_key(|&(r, c, _)| (r, c));

        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            assert!(r < rows && c < cols, "triplet out of bounds");
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }

        let mut indptr = vec![0usize; rows + 1];
        for &(r, _, _) in &merged {
            indptr[r + 1] += 1;
        }
        for i in 0..rows {
            indptr[i + 1] += indptr[i];
        }

        Self {
            rows,
            cols,
            indptr,
            indices: merged.iter().map(|e| e.1).collect(),
            values: merged.iter().map(|e| e.2).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    /// Scale every nonzero row to sum to one. All-zero rows stay all-zero.
    pub fn row_normalized(&self) -> CsrMatrix {
        let mut out = self.clone();
        for i in 0..out.rows {
            let (a, b) = (out.indptr[i], out.indptr[i + 1]);
            let sum: f64 = out.values[a..b].iter().sum();
            if sum != 0.0 {
                for v in &mut out.values[a..b] {
                    *v /= sum;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> CsrMatrix {
        let triplets: Vec<(usize, usize, f64)> =
            self.iter().map(|(r, c, v)| (c, r, v)).collect();
        CsrMatrix::from_triplets(self.cols, self.rows, &triplets)
    }

    /// `self * dense`, the workhorse of the chain product.
    pub fn mul_dense(&self, dense: &Mat) -> Mat {
        assert_eq!(self.cols, dense.rows(), "sparse-dense shape mismatch");
        let mut out = Mat::zeros(self.rows, dense.cols());
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            let out_row = out.row_mut(i);
            for (&c, &v) in cols.iter().zip(vals) {
                let d_row = dense.row(c);
                for (o, &d) in out_row.iter_mut().zip(d_row) {
                    *o += v * d;
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> Mat {
        let mut out = Mat::zeros(self.rows, self.cols);
        for (r, c, v) in self.iter() {
            out.set(r, c, out.get(r, c) + v);
        }
        out
    }

    /// Sum of each row; used by the normalization invariant checks.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).1.iter().sum())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let m = CsrMatrix::from_triplets(2, 3, &[(1, 2, 1.0), (0, 1, 2.0), (1, 2, 0.5), (1, 0, 3.0)]);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.row(0), (&[1usize][..], &[2.0][..]));
        assert_eq!(m.row(1), (&[0usize, 2][..], &[3.0, 1.5][..]));
    }

    #[test]
    fn empty_rows_have_empty_slices() {
        let m = CsrMatrix::from_triplets(4, 2, &[(2, 0, 1.0)]);
        assert_eq!(m.row(0).0.len(), 0);
        assert_eq!(m.row(1).0.len(), 0);
        assert_eq!(m.row(3).0.len(), 0);
        assert_eq!(m.row(2), (&[0usize][..], &[1.0][..]));
    }

    #[test]
    fn row_normalization_skips_zero_rows() {
        let m = CsrMatrix::from_triplets(3, 3, &[(0, 0, 2.0), (0, 2, 2.0), (2, 1, 5.0)]);
        let n = m.row_normalized();
        assert_eq!(n.row(0).1, &[0.5, 0.5]);
        assert_eq!(n.row(1).1.len(), 0);
        assert_eq!(n.row(2).1, &[1.0]);
    }

    #[test]
    fn mul_dense_matches_dense_product() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0)]);
        let d = Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]);
        let got = m.mul_dense(&d);
        let want = m.to_dense().matmul(&d);
        assert!(got.max_abs_diff(&want) == 0.0);
    }

    #[test]
    fn transpose_pattern() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 1, 1.0), (1, 2, 4.0)]);
        let t = m.transpose();
        assert_eq!(t.rows(), 3);
        assert_eq!(t.cols(), 2);
        assert_eq!(t.row(1), (&[0usize][..], &[1.0][..]));
        assert_eq!(t.row(2), (&[1usize][..], &[4.0][..]));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn triplets(rows: usize, cols: usize) -> impl Strategy<Value = Vec<(usize, usize, f64)>> {
            proptest::collection::vec(
                (0..rows, 0..cols, -10.0f64..10.0),
                0..40,
            )
        }

        proptest! {
            #[test]
            fn dense_agrees_with_naive_accumulation(ts in triplets(7, 5)) {
                let m = CsrMatrix::from_triplets(7, 5, &ts);
                let mut naive = Mat::zeros(7, 5);
                for &(r, c, v) in &ts {
                    naive.set(r, c, naive.get(r, c) + v);
                }
                prop_assert!(m.to_dense().max_abs_diff(&naive) < 1e-12);
                prop_assert!(m.transpose().to_dense().max_abs_diff(&naive.transpose()) < 1e-12);
            }

            #[test]
            fn normalized_rows_sum_to_one_or_zero(ts in triplets(6, 6)) {
                let positive: Vec<(usize, usize, f64)> =
                    ts.iter().map(|&(r, c, v)| (r, c, v.abs() + 0.1)).collect();
                let m = CsrMatrix::from_triplets(6, 6, &positive).row_normalized();
                for sum in m.row_sums() {
                    prop_assert!(sum == 0.0 || (sum - 1.0).abs() < 1e-9);
                }
            }

            #[test]
            fn mul_dense_matches_dense_matmul(ts in triplets(6, 4)) {
                let m = CsrMatrix::from_triplets(6, 4, &ts);
                let dense = Mat::from_vec(4, 3, (0..12).map(|i| i as f64 * 0.5 - 3.0).collect());
                let got = m.mul_dense(&dense);
                let want = m.to_dense().matmul(&dense);
                prop_assert!(got.max_abs_diff(&want) < 1e-12);
            }
        }
    }
}
