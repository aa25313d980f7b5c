//! Compressed sparse row matrices over `C64`.

use std::collections::BTreeMap;

use crate::linalg::{c, CMat, CVec, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl CsrMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![c(1.0, 0.0); n])
    }

    pub fn from_diagonal(d: &[C64]) -> Self {
        let n = d.len();
        let mut t = Vec::with_capacity(n);
        for (i, &v) in d.iter().enumerate() {
            t.push((i, i, v));
        }
        Self::from_triplets(n, n, t)
    }

    /// Builds from (row, col, value) triplets; duplicates are summed and exact zeros dropped.
    pub fn from_triplets(rows: usize, cols: usize, triplets: Vec<(usize, usize, C64)>) -> Self {
        let mut per_row: Vec<BTreeMap<usize, C64>> = vec![BTreeMap::new(); rows];
        for (r, col, v) in triplets {
            assert!(r < rows && col < cols, "triplet ({r},{col}) out of bounds {rows}x{cols}");
            *per_row[r].entry(col).or_insert(c(0.0, 0.0)) += v;
        }
        let mut indptr = Vec::with_capacity(rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in per_row {
            for (col, v) in row {
                if v != c(0.0, 0.0) {
                    indices.push(col);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn from_dense(m: &CMat, drop_tol: f64) -> Self {
        let mut t = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let v = m[(i, j)];
                if v.norm() > drop_tol {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), t)
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.values[k]))
        })
    }

    pub fn get(&self, r: usize, col: usize) -> C64 {
        for k in self.indptr[r]..self.indptr[r + 1] {
            if self.indices[k] == col {
                return self.values[k];
            }
        }
        c(0.0, 0.0)
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.rows, self.cols);
        for (r, col, v) in self.iter() {
            m[(r, col)] += v;
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        let t = self.iter().map(|(r, col, v)| (col, r, v.conj())).collect();
        Self::from_triplets(self.cols, self.rows, t)
    }

    pub fn transpose(&self) -> Self {
        let t = self.iter().map(|(r, col, v)| (col, r, v)).collect();
        Self::from_triplets(self.cols, self.rows, t)
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.axpy(c(1.0, 0.0), other)
    }

    /// `self + a * other`
    pub fn axpy(&self, a: C64, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut t: Vec<(usize, usize, C64)> = self.iter().collect();
        t.extend(other.iter().map(|(r, col, v)| (r, col, a * v)));
        Self::from_triplets(self.rows, self.cols, t)
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut indptr = Vec::with_capacity(self.rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        let mut acc: BTreeMap<usize, C64> = BTreeMap::new();
        for r in 0..self.rows {
            acc.clear();
            for k in self.indptr[r]..self.indptr[r + 1] {
                let mid = self.indices[k];
                let a = self.values[k];
                for kk in other.indptr[mid]..other.indptr[mid + 1] {
                    *acc.entry(other.indices[kk]).or_insert(c(0.0, 0.0)) += a * other.values[kk];
                }
            }
            for (&col, &v) in &acc {
                if v != c(0.0, 0.0) {
                    indices.push(col);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            rows: self.rows,
            cols: other.cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn mul_vec(&self, v: &CVec) -> CVec {
        assert_eq!(self.cols, v.len());
        let mut out = CVec::zeros(self.rows);
        for r in 0..self.rows {
            let mut s = c(0.0, 0.0);
            for k in self.indptr[r]..self.indptr[r + 1] {
                s += self.values[k] * v[self.indices[k]];
            }
            out[r] = s;
        }
        out
    }

    /// `self * m` for a dense right-hand side.
    pub fn mul_dense(&self, m: &CMat) -> CMat {
        assert_eq!(self.cols, m.nrows());
        let mut out = CMat::zeros(self.rows, m.ncols());
        for j in 0..m.ncols() {
            let col = m.column(j);
            let col = col.as_slice();
            let mut target = out.column_mut(j);
            for (r, o) in target.iter_mut().enumerate() {
                let (a, b) = (self.indptr[r], self.indptr[r + 1]);
                *o = self.values[a..b]
                    .iter()
                    .zip(&self.indices[a..b])
                    .map(|(v, &i)| v * col[i])
                    .sum();
            }
        }
        out
    }

    /// `m * self` for a dense left-hand side.
    pub fn rmul_dense(&self, m: &CMat) -> CMat {
        assert_eq!(m.ncols(), self.rows);
        let mut out = CMat::zeros(m.nrows(), self.cols);
        for (r, col, v) in self.iter() {
            for i in 0..m.nrows() {
                out[(i, col)] += m[(i, r)] * v;
            }
        }
        out
    }

    /// Leading principal submatrix (first `rows` rows, first `cols` columns).
    pub fn truncate(&self, rows: usize, cols: usize) -> Self {
        let t = self
            .iter()
            .filter(|&(r, col, _)| r < rows && col < cols)
            .collect();
        Self::from_triplets(rows, cols, t)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.norm()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, random_matrix};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sparse_random(seed: u64, r: usize, col: usize) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = random_matrix(r, col, &mut rng);
        for (k, z) in m.iter_mut().enumerate() {
            if k % 3 == 0 {
                *z = c(0.0, 0.0);
            }
        }
        m
    }

    proptest! {
        #[test]
        fn products_agree_with_dense(seed in 0u64..500, n in 1usize..7, k in 1usize..7, m in 1usize..7) {
            let a = sparse_random(seed, n, k);
            let b = sparse_random(seed + 1, k, m);
            let sa = CsrMatrix::from_dense(&a, 0.0);
            let sb = CsrMatrix::from_dense(&b, 0.0);
            let dense = &a * &b;
            prop_assert!(max_abs(&(sa.matmul(&sb).to_dense() - &dense)) < 1e-12);
            prop_assert!(max_abs(&(sa.mul_dense(&b) - &dense)) < 1e-12);
            prop_assert!(max_abs(&(sb.rmul_dense(&a) - &dense)) < 1e-12);
            prop_assert!(max_abs(&(sa.adjoint().to_dense() - a.adjoint())) == 0.0);
        }
    }

    #[test]
    fn triplet_duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 1, c(1.0, 0.0)), (0, 1, c(2.0, 1.0))]);
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), c(3.0, 1.0));
    }
}
