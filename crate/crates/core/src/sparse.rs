//! Compressed sparse row matrices and a sparse direct solver.
//!
//! Factorization is a sparse LU with partial pivoting from `faer`, run
//! sequentially so results do not depend on the thread count.

use std::sync::Once;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{FsiError, Result};

/// Accumulates `(row, col, value)` entries; duplicates are summed.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            entries: Vec::new(),
        }
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n_rows && col < self.n_cols);
        self.entries.push((row, col, value));
    }

    /// Adds `scale * m` with its rows and columns shifted.
    pub fn add_block(&mut self, m: &CsrMatrix, row_offset: usize, col_offset: usize, scale: f64) {
        for r in 0..m.n_rows {
            for k in m.row_ptr[r]..m.row_ptr[r + 1] {
                self.add(
                    r + row_offset,
                    m.col_idx[k] + col_offset,
                    scale * m.values[k],
                );
            }
        }
    }

    /// Adds `scale * mᵀ` with its rows and columns shifted.
    pub fn add_block_transposed(
        &mut self,
        m: &CsrMatrix,
        row_offset: usize,
        col_offset: usize,
        scale: f64,
    ) {
        for r in 0..m.n_rows {
            for k in m.row_ptr[r]..m.row_ptr[r + 1] {
                self.add(
                    m.col_idx[k] + row_offset,
                    r + col_offset,
                    scale * m.values[k],
                );
            }
        }
    }

    pub fn build(mut self) -> CsrMatrix {
        self.entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; self.n_rows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..self.n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        TripletBuilder::new(n_rows, n_cols).build()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .map(|k| self.values[k] * x[self.col_idx[k]])
                    .sum()
            })
            .collect()
    }

    pub fn transpose_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_cols];
        for r in 0..self.n_rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.col_idx[k]] += self.values[k] * x[r];
            }
        }
        y
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.mul_vec(y);
        x.iter().zip(&ay).map(|(a, b)| a * b).sum()
    }

    pub fn quadratic(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut b = TripletBuilder::new(self.n_cols, self.n_rows);
        b.add_block_transposed(self, 0, 0, 1.0);
        b.build()
    }

    /// Entry-wise linear combination `a * self + b * other` (same shape).
    pub fn combine(&self, a: f64, other: &CsrMatrix, b: f64) -> CsrMatrix {
        assert_eq!((self.n_rows, self.n_cols), (other.n_rows, other.n_cols));
        let mut t = TripletBuilder::new(self.n_rows, self.n_cols);
        t.add_block(self, 0, 0, a);
        t.add_block(other, 0, 0, b);
        t.build()
    }

    pub fn max_abs_diff(&self, other: &CsrMatrix) -> f64 {
        let d = self.combine(1.0, other, -1.0);
        d.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_asymmetry(&self) -> f64 {
        self.max_abs_diff(&self.transpose())
    }

    /// Restricts to the given rows and columns (new index = position in list).
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut col_map = vec![usize::MAX; self.n_cols];
        for (i, &c) in cols.iter().enumerate() {
            col_map[c] = i;
        }
        let mut t = TripletBuilder::new(rows.len(), cols.len());
        for (i, &r) in rows.iter().enumerate() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = col_map[self.col_idx[k]];
                if c != usize::MAX {
                    t.add(i, c, self.values[k]);
                }
            }
        }
        t.build()
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let triplets: Vec<Triplet<usize, usize, f64>> = (0..self.n_rows)
            .flat_map(|r| (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, k)))
            .map(|(r, k)| Triplet::new(r, self.col_idx[k], self.values[k]))
            .collect();
        SparseColMat::try_new_from_triplets(self.n_rows, self.n_cols, &triplets)
            .map_err(|e| FsiError::SolverFailure(format!("matrix construction: {e:?}")))
    }
}

static SEQUENTIAL: Once = Once::new();

fn force_sequential() {
    SEQUENTIAL.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

/// Symbolic analysis reusable across matrices with one sparsity pattern.
#[derive(Clone)]
pub struct SymbolicFactor {
    symbolic: SymbolicLu<usize>,
    nnz: usize,
}

impl SymbolicFactor {
    pub fn analyze(a: &CsrMatrix) -> Result<Self> {
        force_sequential();
        let m = a.to_faer()?;
        let symbolic = SymbolicLu::try_new(m.symbolic())
            .map_err(|e| FsiError::SolverFailure(format!("symbolic analysis: {e:?}")))?;
        Ok(Self {
            symbolic,
            nnz: a.nnz(),
        })
    }
}

/// A factorized square matrix.
pub struct DirectSolver {
    matrix: CsrMatrix,
    lu: Lu<usize, f64>,
    tolerance: f64,
}

impl DirectSolver {
    /// Relative residual accepted before a solve is reported as a failure.
    pub const DEFAULT_TOLERANCE: f64 = 1e-9;

    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let symbolic = SymbolicFactor::analyze(a)?;
        Self::factor_with(&symbolic, a)
    }

    pub fn factor_with(symbolic: &SymbolicFactor, a: &CsrMatrix) -> Result<Self> {
        force_sequential();
        if a.n_rows != a.n_cols {
            return Err(FsiError::SolverFailure("matrix is not square".into()));
        }
        if symbolic.nnz != a.nnz() {
            return Err(FsiError::SolverFailure("sparsity pattern changed".into()));
        }
        let m = a.to_faer()?;
        let lu = Lu::try_new_with_symbolic(symbolic.symbolic.clone(), m.as_ref())
            .map_err(|e| FsiError::SolverFailure(format!("numeric factorization: {e:?}")))?;
        Ok(Self {
            matrix: a.clone(),
            lu,
            tolerance: Self::DEFAULT_TOLERANCE,
        })
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Solves `A x = b` and checks the relative residual.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.matrix.n_rows;
        let mut rhs = Mat::<f64>::zeros(n, 1);
        for (i, v) in b.iter().enumerate() {
            rhs[(i, 0)] = *v;
        }
        let sol = self.lu.solve(&rhs);
        let x: Vec<f64> = (0..n).map(|i| sol[(i, 0)]).collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(FsiError::SolverFailure("non-finite solution".into()));
        }
        let r = self.matrix.mul_vec(&x);
        let res = r
            .iter()
            .zip(b)
            .map(|(a, c)| (a - c).powi(2))
            .sum::<f64>()
            .sqrt();
        let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = bn.max(f64::MIN_POSITIVE);
        if bn > 0.0 && res / scale > self.tolerance {
            return Err(FsiError::SolverFailure(format!(
                "relative residual {:e} above tolerance {:e}",
                res / scale,
                self.tolerance
            )));
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed_and_sorted() {
        let mut t = TripletBuilder::new(2, 3);
        t.add(1, 2, 1.0);
        t.add(0, 1, 2.0);
        t.add(1, 2, 0.5);
        t.add(1, 0, -1.0);
        let m = t.build();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(1, 2), 1.5);
        assert_eq!(m.get(0, 0), 0.0);
        assert_eq!(m.mul_vec(&[1.0, 1.0, 2.0]), vec![2.0, 2.0]);
        assert_eq!(m.transpose_mul_vec(&[1.0, 2.0]), vec![-2.0, 2.0, 3.0]);
    }

    #[test]
    fn solves_indefinite_saddle_system() {
        // [[2, 1], [1, 0]] x = [4, 1]
        let mut t = TripletBuilder::new(2, 2);
        t.add(0, 0, 2.0);
        t.add(0, 1, 1.0);
        t.add(1, 0, 1.0);
        t.add(1, 1, 0.0);
        let s = DirectSolver::factor(&t.build()).unwrap();
        let x = s.solve(&[4.0, 1.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut t = TripletBuilder::new(2, 2);
        t.add(0, 0, 1.0);
        t.add(0, 1, 1.0);
        t.add(1, 0, 1.0);
        t.add(1, 1, 1.0);
        let r = DirectSolver::factor(&t.build()).and_then(|s| s.solve(&[1.0, 0.0]));
        assert!(matches!(r, Err(FsiError::SolverFailure(_))));
    }
}
