//! Sparse direct solves for the Newton systems, backed by faer's supernodal LU.
//!
//! The sparsity pattern of a flow Jacobian never changes, so the symbolic
//! factorization is computed once and reused.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};

/// Triplet assembly buffer with a cached symbolic factorization.
#[derive(Default, Clone)]
pub(crate) struct SparseLu {
    triplets: Vec<Triplet<usize, usize, f64>>,
    symbolic: Option<(usize, usize, SymbolicLu<usize>)>,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu").field("entries", &self.triplets.len()).finish()
    }
}

impl SparseLu {
    pub fn clear(&mut self) {
        self.triplets.clear();
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        self.triplets.push(Triplet::new(row, col, value));
    }

    /// Solves `J x = rhs` for the assembled `J` (duplicate entries are summed).
    pub fn solve(&mut self, n: usize, rhs: &[f64]) -> Result<Vec<f64>> {
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &self.triplets)
            .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
        let nnz = mat.compute_nnz();
        let reuse = matches!(&self.symbolic, Some((dim, count, _)) if *dim == n && *count == nnz);
        if !reuse {
            let sym = SymbolicLu::try_new(mat.symbolic()).map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
            self.symbolic = Some((n, nnz, sym));
        }
        let symbolic = self.symbolic.as_ref().map(|s| s.2.clone()).expect("symbolic factorization");
        let lu = Lu::try_new_with_symbolic(symbolic, mat.as_ref()).map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
        let b = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
        let x = lu.solve(&b);
        let out: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolve("singular Jacobian".into()));
        }
        Ok(out)
    }
}
