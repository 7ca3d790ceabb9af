//! Small dense helpers shared by the state, circuit and channel code.
//!
//! Everything works on `nalgebra::DMatrix<f64>` with the interleaved quadrature
//! ordering `(q1, p1, q2, p2, ...)` unless a function says otherwise.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Symplectic form for `m` modes in interleaved ordering: block-diagonal copies of `[[0, 1], [-1, 0]]`.
pub fn omega(m: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(2 * m, 2 * m);
    for k in 0..m {
        w[(2 * k, 2 * k + 1)] = 1.0;
        w[(2 * k + 1, 2 * k)] = -1.0;
    }
    w
}

/// Replace `m` by `(m + mᵀ) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn symmetrized(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    symmetrize(&mut out);
    out
}

/// Apply a scalar function to the spectrum of a symmetric matrix.
pub fn sym_fn(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrized(m));
    let vals = eig.eigenvalues.map(f);
    let v = &eig.eigenvectors;
    v * DMatrix::from_diagonal(&vals) * v.transpose()
}

/// Square root of a symmetric positive semidefinite matrix (negative noise clipped to zero).
pub fn sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    sym_fn(m, |x| x.max(0.0).sqrt())
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// `‖S Ω Sᵀ − Ω‖∞` (largest absolute entry).
pub fn symplectic_defect(s: &DMatrix<f64>) -> f64 {
    let m = s.nrows() / 2;
    let w = omega(m);
    max_abs(&(s * &w * s.transpose() - w))
}

/// `‖Sᵀ S − I‖∞`.
pub fn orthogonal_defect(s: &DMatrix<f64>) -> f64 {
    let n = s.nrows();
    max_abs(&(s.transpose() * s - DMatrix::identity(n, n)))
}

/// Quadrature indices `(2k, 2k+1)` of the listed modes, in order.
pub fn quadrature_indices(modes: &[usize]) -> Vec<usize> {
    modes.iter().flat_map(|&k| [2 * k, 2 * k + 1]).collect()
}

pub fn select(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub fn select_vec(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_fn(idx.len(), |i, _| v[idx[i]])
}

/// Direct sum `a ⊕ b`.
pub fn direct_sum(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = (a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(n + m, n + m);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    out.view_mut((n, n), (m, m)).copy_from(b);
    out
}

/// Permutation matrix `P` with `P · x_block = x_interleaved`, where the block
/// ordering is `(q1..qm, p1..pm)`.
pub fn block_to_interleaved(m: usize) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(2 * m, 2 * m);
    for k in 0..m {
        p[(2 * k, k)] = 1.0;
        p[(2 * k + 1, m + k)] = 1.0;
    }
    p
}

/// Re-express a block-ordered `(q..q, p..p)` matrix in interleaved ordering.
pub fn interleave(block: &DMatrix<f64>) -> DMatrix<f64> {
    let p = block_to_interleaved(block.nrows() / 2);
    &p * block * p.transpose()
}

/// Inverse of [`interleave`].
pub fn deinterleave(inter: &DMatrix<f64>) -> DMatrix<f64> {
    let p = block_to_interleaved(inter.nrows() / 2);
    p.transpose() * inter * &p
}

/// Determinant of the 2x2 block starting at `(r, c)`.
pub fn det2_at(m: &DMatrix<f64>, r: usize, c: usize) -> f64 {
    m[(r, c)] * m[(r + 1, c + 1)] - m[(r, c + 1)] * m[(r + 1, c)]
}

/// Cofactor matrix of the 2x2 block starting at `(r, c)` (gradient of its determinant).
pub fn cof2_at(m: &DMatrix<f64>, r: usize, c: usize) -> [[f64; 2]; 2] {
    [
        [m[(r + 1, c + 1)], -m[(r + 1, c)]],
        [-m[(r, c + 1)], m[(r, c)]],
    ]
}

/// Inverse of a symmetric positive definite matrix.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Numerical("matrix is not positive definite".into()))
}

/// Inverse of a general square matrix.
pub fn inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular matrix".into()))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrized(m))
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Frobenius inner product `⟨a, b⟩ = Σ a_ij b_ij`.
pub fn frob_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}
