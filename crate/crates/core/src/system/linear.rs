//! Sparse matrices with a frozen pattern and a direct LU solve.
//!
//! The Newton loop reassembles the same sparsity pattern every iteration, so
//! the matrix separates structure from values: the pattern (and the solver's
//! symbolic analysis) is computed once, and assembly only rewrites the value
//! array. Dirichlet row/column elimination likewise only zeroes values,
//! keeping the factorization's symbolic phase valid for the whole run.

use std::sync::Once;

use faer::linalg::solvers::Solve;
use faer::reborrow::Reborrow;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum LinearError {
    #[error("matrix is singular (no pivot at elimination step {index})")]
    Singular { index: usize },
    #[error("linear solve produced non-finite values (numerically singular matrix)")]
    NonFinite,
    #[error("dimension mismatch: matrix is {n}x{n}, vector has length {len}")]
    Dimension { n: usize, len: usize },
    #[error("sparse factorization failed: {0}")]
    Backend(String),
}

/// Multithreaded factorization makes run-to-run bit-reproducibility a
/// scheduler property; diagnostics series are required to be bit-identical
/// for identical inputs, so the backend is forced sequential once.
fn force_sequential() {
    static ONCE: Once = Once::new();
    ONCE.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

/// Square sparse matrix in compressed-column form with a frozen pattern.
pub struct SparseMatrix<T> {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<T>,
    /// Value positions grouped by row, for row elimination.
    row_ptr: Vec<usize>,
    row_pos: Vec<u32>,
    /// Column of each value slot, aligned with `row_pos` grouping.
    pos_col: Vec<u32>,
    symbolic: SymbolicSparseColMat<usize>,
    lu_symbolic: Option<SymbolicLu<usize>>,
}

impl<T: Real> SparseMatrix<T> {
    /// Freeze a pattern from (row, col) pairs; duplicates collapse.
    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut by_col: Vec<(usize, usize)> =
            pairs.into_iter().map(|(r, c)| (c, r)).collect();
        by_col.sort_unstable();
        by_col.dedup();
        let nnz = by_col.len();
        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx = Vec::with_capacity(nnz);
        for &(c, r) in &by_col {
            assert!(r < n && c < n, "pattern entry ({r}, {c}) out of range");
            col_ptr[c + 1] += 1;
            row_idx.push(r);
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }

        // Row-grouped view of the value slots.
        let mut row_count = vec![0usize; n + 1];
        for &r in &row_idx {
            row_count[r + 1] += 1;
        }
        let mut row_ptr = row_count;
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        let mut cursor = row_ptr.clone();
        let mut row_pos = vec![0u32; nnz];
        let mut pos_col = vec![0u32; nnz];
        for c in 0..n {
            for k in col_ptr[c]..col_ptr[c + 1] {
                let r = row_idx[k];
                row_pos[cursor[r]] = k as u32;
                pos_col[cursor[r]] = c as u32;
                cursor[r] += 1;
            }
        }

        let symbolic = SymbolicSparseColMat::new_checked(
            n,
            n,
            col_ptr.clone(),
            None,
            row_idx.clone(),
        );
        SparseMatrix {
            n,
            col_ptr,
            row_idx,
            vals: vec![T::zero(); nnz],
            row_ptr,
            row_pos,
            pos_col,
            symbolic,
            lu_symbolic: None,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Zero all stored values, keeping the pattern.
    pub fn clear(&mut self) {
        self.vals.fill(T::zero());
    }

    /// Accumulate into an entry that must exist in the pattern.
    #[inline]
    pub fn add(&mut self, row: usize, col: usize, v: T) {
        let lo = self.col_ptr[col];
        let hi = self.col_ptr[col + 1];
        match self.row_idx[lo..hi].binary_search(&row) {
            Ok(k) => self.vals[lo + k] += v,
            Err(_) => panic!("entry ({row}, {col}) not in the frozen pattern"),
        }
    }

    /// Read an entry (zero when absent from the pattern).
    pub fn get(&self, row: usize, col: usize) -> T {
        let lo = self.col_ptr[col];
        let hi = self.col_ptr[col + 1];
        match self.row_idx[lo..hi].binary_search(&row) {
            Ok(k) => self.vals[lo + k],
            Err(_) => T::zero(),
        }
    }

    /// y = A x.
    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![T::zero(); self.n];
        for c in 0..self.n {
            let xc = x[c];
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                y[self.row_idx[k]] += self.vals[k] * xc;
            }
        }
        y
    }

    /// Replace row and column `dof` by the identity, shifting the prescribed
    /// value into the right-hand side: row `dof` becomes x_dof = value, and
    /// every other equation loses its coupling to x_dof.
    pub fn constrain(&mut self, rhs: &mut [T], dof: usize, value: T) {
        // Column sweep first so the shift uses the original coefficients.
        for k in self.col_ptr[dof]..self.col_ptr[dof + 1] {
            let r = self.row_idx[k];
            if r != dof {
                rhs[r] -= self.vals[k] * value;
                self.vals[k] = T::zero();
            }
        }
        for i in self.row_ptr[dof]..self.row_ptr[dof + 1] {
            let k = self.row_pos[i] as usize;
            if self.pos_col[i] as usize != dof {
                self.vals[k] = T::zero();
            }
        }
        let lo = self.col_ptr[dof];
        let hi = self.col_ptr[dof + 1];
        let diag = self.row_idx[lo..hi]
            .binary_search(&dof)
            .expect("constrained DOF must have a diagonal entry in the pattern");
        self.vals[lo + diag] = T::one();
        rhs[dof] = value;
    }

    /// Zero a whole row's values (used to blank residual rows symmetrically).
    pub fn zero_row(&mut self, row: usize) {
        for i in self.row_ptr[row]..self.row_ptr[row + 1] {
            self.vals[self.row_pos[i] as usize] = T::zero();
        }
    }

    /// Direct sparse LU solve with partial pivoting.
    ///
    /// The symbolic analysis is cached on first use and reused for every
    /// later solve with this pattern.
    pub fn solve(&mut self, b: &[T]) -> Result<Vec<T>, LinearError> {
        force_sequential();
        if b.len() != self.n {
            return Err(LinearError::Dimension {
                n: self.n,
                len: b.len(),
            });
        }
        if self.lu_symbolic.is_none() {
            let sym = SymbolicLu::try_new(self.symbolic.rb())
                .map_err(|e| LinearError::Backend(format!("{e:?}")))?;
            self.lu_symbolic = Some(sym);
        }
        let mat = SparseColMatRef::new(self.symbolic.rb(), &self.vals);
        let lu = Lu::try_new_with_symbolic(
            self.lu_symbolic.clone().expect("cached above"),
            mat,
        )
        .map_err(|e| match e {
            LuError::SymbolicSingular { index } => LinearError::Singular { index },
            LuError::Generic(g) => LinearError::Backend(format!("{g:?}")),
        })?;
        let rhs = faer::Mat::<T>::from_fn(self.n, 1, |i, _| b[i]);
        let x = lu.solve(&rhs);
        let out: Vec<T> = (0..self.n).map(|i| x[(i, 0)]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(LinearError::NonFinite);
        }
        Ok(out)
    }
}
