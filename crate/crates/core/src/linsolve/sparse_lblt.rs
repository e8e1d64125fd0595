//! Supernodal sparse `L B Lᵀ` factorization (Bunch–Kaufman pivoting inside
//! supernodes) with an approximate-minimum-degree ordering, backed by faer.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::perm::PermRef;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, CholeskySymbolicParams, IntranodeLbltRef, SymbolicCholesky, SymmetricOrdering,
};
use faer::{Conj, MatMut, Par, Side};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

pub struct SparseLblt {
    symbolic: SymbolicCholesky<usize>,
    values: Vec<f64>,
    subdiag: Vec<f64>,
    perm_fwd: Vec<usize>,
    perm_inv: Vec<usize>,
    threads: usize,
}

impl std::fmt::Debug for SparseLblt {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLblt").field("n", &self.subdiag.len()).field("factor_len", &self.values.len()).finish()
    }
}

fn par(threads: usize) -> Par {
    if threads > 1 {
        Par::rayon(threads)
    } else {
        Par::Seq
    }
}

impl SparseLblt {
    /// Factorizes a symmetric matrix stored with both triangles.
    pub fn factor(a: &CsrMatrix, threads: usize) -> Result<Self> {
        let n = a.n_rows;
        let m = a.to_faer_symmetric();
        let symbolic = factorize_symbolic_cholesky(
            m.symbolic(),
            Side::Lower,
            SymmetricOrdering::Amd,
            CholeskySymbolicParams::default(),
        )
        .map_err(|e| Error::Internal(format!("symbolic factorization: {e:?}")))?;
        let mut values = vec![0.0; symbolic.len_val()];
        let mut subdiag = vec![0.0; n];
        let mut perm_fwd = vec![0usize; n];
        let mut perm_inv = vec![0usize; n];
        let p = par(threads);
        let mut mem = MemBuffer::new(symbolic.factorize_numeric_intranode_lblt_scratch::<f64>(p, Default::default()));
        symbolic.factorize_numeric_intranode_lblt(
            &mut values,
            &mut subdiag,
            &mut perm_fwd,
            &mut perm_inv,
            m.as_ref(),
            Side::Lower,
            p,
            MemStack::new(&mut mem),
            Default::default(),
        );
        Ok(Self { symbolic, values, subdiag, perm_fwd, perm_inv, threads })
    }

    pub fn dim(&self) -> usize {
        self.subdiag.len()
    }

    /// Number of stored factor entries.
    pub fn factor_len(&self) -> usize {
        self.values.len()
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        let p = par(self.threads);
        let perm = PermRef::new_checked(&self.perm_fwd, &self.perm_inv, n);
        let lblt = IntranodeLbltRef::new(&self.symbolic, &self.values, &self.subdiag, perm);
        let mut mem = MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(1, p));
        let rhs = MatMut::from_column_major_slice_mut(b, n, 1);
        lblt.solve_in_place_with_conj(Conj::No, rhs, p, MemStack::new(&mut mem));
    }
}
