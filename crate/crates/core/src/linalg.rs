//! Small dense helpers over `nalgebra` for Hermitian matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::hilbert::HilbertVector;

/// Singular values below `RANK_TOLERANCE * sigma_max` count as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

pub type CMatrix = DMatrix<Complex64>;

/// `(M + M^*) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut vals: Vec<f64> = hermitian_part(m).symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

/// Eigenpairs of the Hermitian part of `m`, ascending by eigenvalue.
pub fn hermitian_eigen(m: &CMatrix) -> Vec<(f64, HilbertVector)> {
    let eig = hermitian_part(m).symmetric_eigen();
    let mut pairs: Vec<(f64, HilbertVector)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, HilbertVector::from_dvector(eig.eigenvectors.column(i).into_owned())))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs
}

/// `sum_j v_j v_j^*`.
pub fn outer_sum<'a>(dim: usize, vectors: impl IntoIterator<Item = &'a HilbertVector>) -> CMatrix {
    let mut s = CMatrix::zeros(dim, dim);
    for v in vectors {
        let c = v.coords();
        s.gerc(Complex64::new(1.0, 0.0), c, c, Complex64::new(1.0, 0.0));
    }
    s
}

/// Matrix whose columns are the given vectors.
pub fn columns<'a>(dim: usize, vectors: impl IntoIterator<Item = &'a HilbertVector>) -> CMatrix {
    let cols: Vec<_> = vectors.into_iter().map(|v| v.coords().clone()).collect();
    if cols.is_empty() {
        return CMatrix::zeros(dim, 0);
    }
    CMatrix::from_columns(&cols)
}

pub fn apply(m: &CMatrix, v: &HilbertVector) -> HilbertVector {
    HilbertVector::from_dvector(m * v.coords())
}

pub fn trace(m: &CMatrix) -> Complex64 {
    m.trace()
}
