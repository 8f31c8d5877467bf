//! Compressed-sparse-row operators carrying a name and a declared symmetry.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetryTag {
    General,
    Symmetric,
    Antisymmetric,
    Diagonal,
}

impl SymmetryTag {
    pub fn code(self) -> u8 {
        match self {
            SymmetryTag::General => 0,
            SymmetryTag::Symmetric => 1,
            SymmetryTag::Antisymmetric => 2,
            SymmetryTag::Diagonal => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => SymmetryTag::General,
            1 => SymmetryTag::Symmetric,
            2 => SymmetryTag::Antisymmetric,
            3 => SymmetryTag::Diagonal,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    pub name: String,
    pub symmetry: SymmetryTag,
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseOperator {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// exact zeros dropped. Columns are sorted within each row.
    pub fn from_triplets(
        name: &str,
        symmetry: SymmetryTag,
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        let mut op = SparseOperator {
            name: name.into(),
            symmetry,
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        };
        op.prune(0.0);
        op
    }

    pub fn from_dense(name: &str, symmetry: SymmetryTag, m: &DMatrix<f64>, drop_tol: f64) -> Self {
        let mut triplets = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v.abs() > drop_tol {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(name, symmetry, m.nrows(), m.ncols(), triplets)
    }

    pub fn diagonal_matrix(name: &str, diag: &[f64]) -> Self {
        let n = diag.len();
        let triplets = diag.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(name, SymmetryTag::Diagonal, n, n, triplets)
    }

    /// Removes stored entries with `|v| <= tol`.
    pub fn prune(&mut self, tol: f64) {
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(self.col_idx.len());
        let mut values = Vec::with_capacity(self.values.len());
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.values[k].abs() > tol {
                    col_idx.push(self.col_idx[k]);
                    values.push(self.values[k]);
                }
            }
            row_ptr[r + 1] = col_idx.len();
        }
        self.row_ptr = row_ptr;
        self.col_idx = col_idx;
        self.values = values;
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1])
                .map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let row = &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]];
        match row.binary_search(&c) {
            Ok(k) => self.values[self.row_ptr[r] + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let symmetry = self.symmetry;
        let triplets = self.triplets().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(&self.name, symmetry, self.ncols, self.nrows, triplets)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= factor;
        }
        out.prune(0.0);
        out
    }

    /// `a·self + b·other` with the given name and tag.
    pub fn combine(&self, a: f64, other: &Self, b: f64, name: &str, symmetry: SymmetryTag) -> Self {
        assert_eq!(self.shape(), other.shape());
        let mut triplets: Vec<_> = self.triplets().map(|(r, c, v)| (r, c, a * v)).collect();
        triplets.extend(other.triplets().map(|(r, c, v)| (r, c, b * v)));
        Self::from_triplets(name, symmetry, self.nrows, self.ncols, triplets)
    }

    pub fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.ncols);
        DVector::from_fn(self.nrows, |r, _| {
            (self.row_ptr[r]..self.row_ptr[r + 1])
                .map(|k| self.values[k] * x[self.col_idx[k]])
                .sum()
        })
    }

    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.ncols);
        let mut out = DMatrix::zeros(self.nrows, x.ncols());
        for j in 0..x.ncols() {
            for r in 0..self.nrows {
                let mut acc = 0.0;
                for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                    acc += self.values[k] * x[(self.col_idx[k], j)];
                }
                out[(r, j)] = acc;
            }
        }
        out
    }

    /// Sparse product `self · other` using a dense row accumulator.
    pub fn mul(&self, other: &Self, name: &str) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut acc = vec![0.0f64; other.ncols];
        let mut touched: Vec<usize> = Vec::new();
        let mut mark = vec![false; other.ncols];
        let mut triplets = Vec::new();
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let (mid, a) = (self.col_idx[k], self.values[k]);
                for kk in other.row_ptr[mid]..other.row_ptr[mid + 1] {
                    let c = other.col_idx[kk];
                    if !mark[c] {
                        mark[c] = true;
                        touched.push(c);
                    }
                    acc[c] += a * other.values[kk];
                }
            }
            for &c in &touched {
                triplets.push((r, c, acc[c]));
                acc[c] = 0.0;
                mark[c] = false;
            }
            touched.clear();
        }
        Self::from_triplets(
            name,
            SymmetryTag::General,
            self.nrows,
            other.ncols,
            triplets,
        )
    }

    /// Rows and columns restricted to the given index lists.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (new, &old) in cols.iter().enumerate() {
            col_map[old] = new;
        }
        let mut triplets = Vec::new();
        for (new_r, &r) in rows.iter().enumerate() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = col_map[self.col_idx[k]];
                if c != usize::MAX {
                    triplets.push((new_r, c, self.values[k]));
                }
            }
        }
        Self::from_triplets(
            &self.name,
            SymmetryTag::General,
            rows.len(),
            cols.len(),
            triplets,
        )
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn is_diagonal(&self) -> bool {
        self.triplets().all(|(r, c, _)| r == c)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// `max |self - other|` entrywise.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.combine(1.0, other, -1.0, "diff", SymmetryTag::General)
            .max_abs()
    }

    /// `max |M ∓ Mᵀ|` according to the declared symmetry; zero for general.
    pub fn symmetry_violation(&self) -> f64 {
        let sign = match self.symmetry {
            SymmetryTag::General => return 0.0,
            SymmetryTag::Symmetric => -1.0,
            SymmetryTag::Antisymmetric => 1.0,
            SymmetryTag::Diagonal => {
                return self
                    .triplets()
                    .filter(|(r, c, _)| r != c)
                    .fold(0.0, |acc, (_, _, v)| acc.max(v.abs()))
            }
        };
        self.combine(1.0, &self.transpose(), sign, "sym", SymmetryTag::General)
            .max_abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_and_round_trip() {
        let op = SparseOperator::from_triplets(
            "m",
            SymmetryTag::General,
            3,
            3,
            vec![(0, 1, 1.0), (2, 0, -2.0), (0, 1, 0.5), (1, 1, 0.0)],
        );
        assert_eq!(op.nnz(), 2);
        assert_eq!(op.get(0, 1), 1.5);
        let dense = op.to_dense();
        assert_eq!(
            SparseOperator::from_dense("m", SymmetryTag::General, &dense, 0.0),
            op
        );
    }

    #[test]
    fn products_agree_with_dense() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 2.0, 0.0, -2.0, 0.0]);
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 3.0, 4.0, 0.0]);
        let sa = SparseOperator::from_dense("a", SymmetryTag::Antisymmetric, &a, 0.0);
        let sb = SparseOperator::from_dense("b", SymmetryTag::General, &b, 0.0);
        assert_eq!(sa.mul(&sb, "ab").to_dense(), &a * &b);
        assert_eq!(sa.mul_dense(&b), &a * &b);
        assert_eq!(sa.symmetry_violation(), 0.0);
        let x = DVector::from_column_slice(&[1.0, 2.0, 3.0]);
        assert_eq!(sa.matvec(&x), &a * &x);
        assert_eq!(
            sa.submatrix(&[1, 2], &[2]).to_dense(),
            DMatrix::from_row_slice(2, 1, &[2.0, 0.0])
        );
    }
}
