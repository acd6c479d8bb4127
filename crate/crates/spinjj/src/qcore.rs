//! Dense complex linear algebra and Hilbert-space plumbing shared by every
//! other module: Kronecker products, bosonic ladder operators, exact unitary
//! exponentials of hermitian generators, and partial traces over a
//! multi-factor tensor layout.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use thiserror::Error;

/// Dense complex matrix; all operators in this crate are small (dimension
/// a few tens at most), so dense storage is used throughout.
pub type CMatrix = DMatrix<C64>;
/// Dense complex column vector (ket).
pub type CVector = DVector<C64>;

/// Shorthand complex constructor.
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[derive(Debug, Error, PartialEq)]
pub enum QcoreError {
    #[error("operator is not hermitian (max deviation {dev:.3e} > tol {tol:.3e})")]
    NotHermitian { dev: f64, tol: f64 },
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(n: usize) -> CMatrix {
    CMatrix::zeros(n, n)
}

/// Conjugate transpose.
pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

/// Largest entrywise deviation |M - M†|.
pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let adj = m.adjoint();
    (m - adj).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entrywise deviation |A - B|.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "max_abs_diff shape mismatch");
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Upper bound on the spectral norm via the maximum absolute row sum.
pub fn row_sum_norm(m: &CMatrix) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|z| z.norm()).sum())
        .fold(0.0_f64, f64::max)
}

/// Kronecker product A ⊗ B with the standard block convention
/// (A ⊗ B)[i·p + r, j·q + s] = A[i,j]·B[r,s] for B of shape p×q.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Bosonic annihilation and creation operators (a, a†) on a Fock space
/// truncated at occupation `n_max` (matrix dimension `n_max + 1`), with
/// a[k, k+1] = sqrt(k+1).
pub fn boson_ops(n_max: usize) -> Result<(CMatrix, CMatrix), QcoreError> {
    if n_max < 1 {
        return Err(QcoreError::InvalidArgument(format!(
            "Fock cutoff must be at least 1, got {n_max}"
        )));
    }
    let dim = n_max + 1;
    let mut a = zeros(dim);
    for k in 0..n_max {
        a[(k, k + 1)] = c(((k + 1) as f64).sqrt(), 0.0);
    }
    let adag = a.adjoint();
    Ok((a, adag))
}

/// Hermitian eigendecomposition: returns (eigenvalues, eigenvectors) with
/// eigenvectors as the columns of a unitary matrix, sorted ascending.
pub fn eigh(h: &CMatrix, tol: f64) -> Result<(Vec<f64>, CMatrix), QcoreError> {
    let dev = hermiticity_deviation(h);
    if dev > tol {
        return Err(QcoreError::NotHermitian { dev, tol });
    }
    // Symmetrize first so the decomposition sees an exactly hermitian input.
    let sym = (h + h.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let n = h.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = zeros(n);
    for (out_col, &src_col) in order.iter().enumerate() {
        vecs.set_column(out_col, &eig.eigenvectors.column(src_col));
    }
    Ok((vals, vecs))
}

/// exp(-i H t) for hermitian H, computed through the eigendecomposition so
/// the result is unitary to machine precision. Rejects non-hermitian input
/// (absolute tolerance 1e-10).
pub fn expm_unitary(h: &CMatrix, t: f64) -> Result<CMatrix, QcoreError> {
    let (vals, vecs) = eigh(h, 1e-10)?;
    Ok(evolution_from_eigh(&vals, &vecs, t))
}

/// exp(-i H t) assembled from a precomputed hermitian eigendecomposition;
/// lets callers reuse one factorization across many sample times.
pub fn evolution_from_eigh(vals: &[f64], vecs: &CMatrix, t: f64) -> CMatrix {
    let n = vals.len();
    let mut phased = vecs.clone();
    for (k, &lambda) in vals.iter().enumerate() {
        let phase = (-c(0.0, 1.0) * lambda * t).exp();
        for i in 0..n {
            phased[(i, k)] *= phase;
        }
    }
    phased * vecs.adjoint()
}

/// Tensor-factor layout of a composite Hilbert space. Factor 0 is the
/// leftmost slot of the state ordering: a basis ket with per-factor indices
/// (i_0, i_1, ..) has flat index i_0·(d_1·d_2·..) + i_1·(d_2·..) + ...
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertLayout {
    factor_dims: Vec<usize>,
}

impl HilbertLayout {
    pub fn new(factor_dims: Vec<usize>) -> Result<Self, QcoreError> {
        if factor_dims.is_empty() || factor_dims.iter().any(|&d| d < 2) {
            return Err(QcoreError::InvalidArgument(format!(
                "every tensor factor needs dimension >= 2, got {factor_dims:?}"
            )));
        }
        Ok(Self { factor_dims })
    }

    /// Layout [ensemble-1 (2), junction mode (n_max + 1), ensemble-2 (2)].
    pub fn tri_partite(n_max: usize) -> Result<Self, QcoreError> {
        if n_max < 1 {
            return Err(QcoreError::InvalidArgument(format!(
                "Fock cutoff must be at least 1, got {n_max}"
            )));
        }
        Self::new(vec![2, n_max + 1, 2])
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }

    pub fn n_factors(&self) -> usize {
        self.factor_dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.factor_dims.iter().product()
    }

    /// Embed a single-factor operator as I ⊗ .. ⊗ op ⊗ .. ⊗ I.
    pub fn lift(&self, op: &CMatrix, factor: usize) -> Result<CMatrix, QcoreError> {
        if factor >= self.factor_dims.len() {
            return Err(QcoreError::InvalidArgument(format!(
                "factor index {factor} out of range for {} factors",
                self.factor_dims.len()
            )));
        }
        let d = self.factor_dims[factor];
        if op.nrows() != d || op.ncols() != d {
            return Err(QcoreError::DimensionMismatch {
                context: format!(
                    "operator is {}x{} but factor {factor} has dimension {d}",
                    op.nrows(),
                    op.ncols()
                ),
            });
        }
        let mut out = identity(1);
        for (k, &dk) in self.factor_dims.iter().enumerate() {
            out = if k == factor {
                kron(&out, op)
            } else {
                kron(&out, &identity(dk))
            };
        }
        Ok(out)
    }

    /// Basis ket |i_0, i_1, ..⟩ for the given per-factor indices.
    pub fn basis_ket(&self, indices: &[usize]) -> Result<CVector, QcoreError> {
        if indices.len() != self.factor_dims.len() {
            return Err(QcoreError::DimensionMismatch {
                context: format!(
                    "{} indices given for {} factors",
                    indices.len(),
                    self.factor_dims.len()
                ),
            });
        }
        let mut flat = 0usize;
        for (k, (&i, &d)) in indices.iter().zip(&self.factor_dims).enumerate() {
            if i >= d {
                return Err(QcoreError::InvalidArgument(format!(
                    "index {i} out of range for factor {k} (dimension {d})"
                )));
            }
            flat = flat * d + i;
        }
        let mut ket = CVector::zeros(self.total_dim());
        ket[flat] = c(1.0, 0.0);
        Ok(ket)
    }
}

/// Partial trace of a density operator over every factor NOT listed in
/// `keep`. `keep` must be strictly increasing; the kept factors retain
/// their relative order in the result.
pub fn partial_trace(
    rho: &CMatrix,
    layout: &HilbertLayout,
    keep: &[usize],
) -> Result<CMatrix, QcoreError> {
    let dims = layout.factor_dims();
    let n = dims.len();
    let total = layout.total_dim();
    if rho.nrows() != total || rho.ncols() != total {
        return Err(QcoreError::DimensionMismatch {
            context: format!(
                "density operator is {}x{} but the layout has dimension {total}",
                rho.nrows(),
                rho.ncols()
            ),
        });
    }
    if keep.is_empty() || keep.windows(2).any(|w| w[0] >= w[1]) || keep.iter().any(|&k| k >= n) {
        return Err(QcoreError::InvalidArgument(format!(
            "kept factors must be strictly increasing and in range, got {keep:?}"
        )));
    }
    let traced: Vec<usize> = (0..n).filter(|k| !keep.contains(k)).collect();
    let keep_dim: usize = keep.iter().map(|&k| dims[k]).product();
    let trace_dim: usize = traced.iter().map(|&k| dims[k]).product();

    // Strides of each factor in the flat index.
    let mut strides = vec![1usize; n];
    for k in (0..n - 1).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }

    let flat_index = |kept_multi: usize, traced_multi: usize| -> usize {
        let mut idx = 0;
        let mut rem_k = kept_multi;
        for (pos, &k) in keep.iter().enumerate() {
            let scale: usize = keep[pos + 1..].iter().map(|&j| dims[j]).product();
            idx += (rem_k / scale) * strides[k];
            rem_k %= scale;
        }
        let mut rem_t = traced_multi;
        for (pos, &k) in traced.iter().enumerate() {
            let scale: usize = traced[pos + 1..].iter().map(|&j| dims[j]).product();
            idx += (rem_t / scale) * strides[k];
            rem_t %= scale;
        }
        idx
    };

    let mut out = zeros(keep_dim);
    for i in 0..keep_dim {
        for j in 0..keep_dim {
            let mut acc = c(0.0, 0.0);
            for t in 0..trace_dim {
                acc += rho[(flat_index(i, t), flat_index(j, t))];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Qubit operators. Basis convention: index 0 is the ground state |0⟩ and
// index 1 the excited state |1⟩; sigma_plus = |1⟩⟨0| raises.
// ---------------------------------------------------------------------------

pub fn sigma_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
}

pub fn sigma_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
}

pub fn sigma_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
}

/// Raising operator |1⟩⟨0|.
pub fn sigma_plus() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., 0.), c(1., 0.), c(0., 0.)])
}

/// Lowering operator |0⟩⟨1|.
pub fn sigma_minus() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)])
}

/// Excited-state projector |1⟩⟨1|.
pub fn excited_projector() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., 0.), c(0., 0.), c(1., 0.)])
}

/// Column-stacked vectorization vec(ρ) (column j of ρ occupies entries
/// j·d .. j·d+d-1), matching vec(A X B) = (Bᵀ ⊗ A) vec(X).
pub fn vec_density(rho: &CMatrix) -> CVector {
    CVector::from_column_slice(rho.as_slice())
}

/// Inverse of [`vec_density`] for a d²-entry vector.
pub fn unvec_density(v: &CVector, dim: usize) -> Result<CMatrix, QcoreError> {
    if v.len() != dim * dim {
        return Err(QcoreError::DimensionMismatch {
            context: format!("vector length {} is not {dim}²", v.len()),
        });
    }
    Ok(CMatrix::from_column_slice(dim, dim, v.as_slice()))
}
