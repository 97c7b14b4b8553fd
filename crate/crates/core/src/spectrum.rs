//! Spectral representations of symmetric matrices.
//!
//! Every matrix function in this crate (Ozaki operators, `Σ^{1/2}`,
//! `Σ_X^{-1/2}`) goes through a symmetric eigendecomposition. Targets whose
//! Hessian has a known eigenbasis can skip the decomposition by returning
//! [`HessianSpectrum::RankOneUpdate`].

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigen-structure of a symmetric `p × p` matrix.
#[derive(Debug, Clone)]
pub enum HessianSpectrum {
    /// `V diag(λ) Vᵀ` with orthonormal columns in `eigvecs`.
    Dense {
        eigvals: DVector<f64>,
        eigvecs: DMatrix<f64>,
    },
    /// `orthogonal · I + (along − orthogonal) · u uᵀ` for a unit vector `u`.
    RankOneUpdate {
        direction: DVector<f64>,
        along: f64,
        orthogonal: f64,
    },
}

impl HessianSpectrum {
    /// Decomposes a dense symmetric matrix. Rejects asymmetry above `1e-10` relative.
    pub fn from_symmetric(h: &DMatrix<f64>) -> Result<Self> {
        if !h.is_square() {
            return Err(Error::Matrix(format!(
                "expected a square matrix, got {}x{}",
                h.nrows(),
                h.ncols()
            )));
        }
        if !h.iter().all(|v| v.is_finite()) {
            return Err(Error::Matrix("matrix has non-finite entries".into()));
        }
        let asym = relative_asymmetry(h);
        if asym > 1e-10 {
            return Err(Error::Matrix(format!(
                "matrix is not symmetric (relative asymmetry {asym:e})"
            )));
        }
        let sym = (h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        Ok(HessianSpectrum::Dense {
            eigvals: eig.eigenvalues,
            eigvecs: eig.eigenvectors,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            HessianSpectrum::Dense { eigvals, .. } => eigvals.len(),
            HessianSpectrum::RankOneUpdate { direction, .. } => direction.len(),
        }
    }

    /// Distinct eigenvalue slots. For the rank-one form these are `[along, orthogonal]`.
    pub fn eigenvalues(&self) -> Vec<f64> {
        match self {
            HessianSpectrum::Dense { eigvals, .. } => eigvals.iter().copied().collect(),
            HessianSpectrum::RankOneUpdate {
                along, orthogonal, ..
            } => vec![*along, *orthogonal],
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues()
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Applies the matrix function whose eigenvalues are `coeffs` (aligned with
    /// [`eigenvalues`](Self::eigenvalues)) to `v`.
    pub fn apply_coeffs(&self, coeffs: &[f64], v: &DVector<f64>) -> DVector<f64> {
        match self {
            HessianSpectrum::Dense { eigvecs, .. } => {
                let mut w = eigvecs.tr_mul(v);
                for (wi, c) in w.iter_mut().zip(coeffs) {
                    *wi *= c;
                }
                eigvecs * w
            }
            HessianSpectrum::RankOneUpdate { direction, .. } => {
                let proj = direction.dot(v);
                v * coeffs[1] + direction * ((coeffs[0] - coeffs[1]) * proj)
            }
        }
    }

    /// Applies `g(H)` to `v`.
    pub fn apply_fn(&self, v: &DVector<f64>, g: impl Fn(f64) -> f64) -> DVector<f64> {
        let coeffs: Vec<f64> = self.eigenvalues().into_iter().map(g).collect();
        self.apply_coeffs(&coeffs, v)
    }

    /// Dense reconstruction of the matrix function with eigenvalues `coeffs`.
    pub fn coeffs_to_matrix(&self, coeffs: &[f64]) -> DMatrix<f64> {
        match self {
            HessianSpectrum::Dense { eigvecs, .. } => {
                let mut scaled = eigvecs.clone();
                for (j, c) in coeffs.iter().enumerate() {
                    scaled.column_mut(j).scale_mut(*c);
                }
                &scaled * eigvecs.transpose()
            }
            HessianSpectrum::RankOneUpdate { direction, .. } => {
                let p = direction.len();
                DMatrix::identity(p, p) * coeffs[1]
                    + direction * direction.transpose() * (coeffs[0] - coeffs[1])
            }
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        self.coeffs_to_matrix(&self.eigenvalues())
    }
}

/// `max |H_ij − H_ji| / max(1, max |H_ij|)`.
pub fn relative_asymmetry(h: &DMatrix<f64>) -> f64 {
    let scale = h.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    let mut worst = 0.0_f64;
    for i in 0..h.nrows() {
        for j in (i + 1)..h.ncols() {
            worst = worst.max((h[(i, j)] - h[(j, i)]).abs());
        }
    }
    worst / scale
}

/// Spectral norm of a symmetric matrix (largest absolute eigenvalue).
pub fn symmetric_spectral_norm(h: &DMatrix<f64>) -> f64 {
    let sym = (h + h.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn symmetric_min_eigenvalue(h: &DMatrix<f64>) -> f64 {
    let sym = (h + h.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |acc, v| acc.min(*v))
}
