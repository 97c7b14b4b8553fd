//! Bundled targets.

pub mod incomplete_gamma;
pub mod logistic;
pub mod mixture;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{ConvexityCertificate, TargetModel};
use crate::spectrum::HessianSpectrum;

pub use incomplete_gamma::{ln_upper_incomplete_gamma, upper_incomplete_gamma};
pub use logistic::{LogisticData, LogisticGenConfig, LogisticModel, LogisticTarget};
pub use mixture::GaussianMixtureTarget;

/// `f(x) = ½ (x − c)ᵀ H (x − c)`, i.e. `π = N(c, H⁻¹)`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub hessian: DMatrix<f64>,
    pub center: DVector<f64>,
    spectrum: HessianSpectrum,
}

impl Quadratic {
    pub fn new(hessian: DMatrix<f64>, center: DVector<f64>) -> Result<Self> {
        if hessian.nrows() != center.len() {
            return Err(Error::DimensionMismatch {
                expected: center.len(),
                found: hessian.nrows(),
            });
        }
        let spectrum = HessianSpectrum::from_symmetric(&hessian)?;
        if !(spectrum.min_eigenvalue() > 0.0) {
            return Err(Error::Matrix("quadratic target needs a positive definite H".into()));
        }
        Ok(Self {
            hessian,
            center,
            spectrum,
        })
    }

    pub fn isotropic(p: usize, curvature: f64) -> Self {
        Self::diagonal(&vec![curvature; p])
    }

    pub fn diagonal(curvatures: &[f64]) -> Self {
        let p = curvatures.len();
        Self::new(
            DMatrix::from_diagonal(&DVector::from_column_slice(curvatures)),
            DVector::zeros(p),
        )
        .expect("diagonal curvatures must be positive")
    }

    pub fn certificate(&self) -> ConvexityCertificate {
        ConvexityCertificate::new(self.spectrum.min_eigenvalue(), self.spectrum.max_eigenvalue())
            .and_then(|c| c.with_hessian_lipschitz(0.0))
            .expect("positive definite Hessian")
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        self.spectrum
            .coeffs_to_matrix(&self.spectrum.eigenvalues().iter().map(|l| 1.0 / l).collect::<Vec<_>>())
    }
}

impl TargetModel for Quadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn potential(&self, x: &DVector<f64>) -> f64 {
        let d = x - &self.center;
        0.5 * d.dot(&(&self.hessian * &d))
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.hessian * (x - &self.center)
    }
    fn hessian(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(self.hessian.clone())
    }
    fn structured_hessian(&self, _x: &DVector<f64>) -> Option<HessianSpectrum> {
        Some(self.spectrum.clone())
    }
    fn has_hessian(&self) -> bool {
        true
    }
    fn hessian_is_constant(&self) -> bool {
        true
    }
    fn name(&self) -> String {
        "quadratic".into()
    }
}

/// `ln(1 + e^z)` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `1/(1 + e^{−z})`.
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `e^z/(1 + e^z)²`.
pub(crate) fn logistic_density(z: f64) -> f64 {
    let e = (-z.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}
