//! Model transforms: strong convexification outside a ball and linear
//! preconditioning.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::io::read_matrix_csv;
use crate::model::{ConvexityCertificate, TargetModel};
use crate::samples::SampleSet;
use crate::spectrum::{relative_asymmetry, HessianSpectrum};

/// Local strong-convexity profile `R ↦ m_R`, a lower bound on the smallest
/// Hessian eigenvalue over `B_R(x₀)`.
pub type CurvatureProfile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Parameters of the penalty `(γ/2)(‖x − x₀‖ − R)²·1{‖x − x₀‖ > R}`.
#[derive(Clone)]
pub struct ConvexifySpec {
    pub x0: DVector<f64>,
    pub radius: f64,
    pub gamma: f64,
    pub m_profile: CurvatureProfile,
    /// Curvature of `f` far from `x₀`. `0` when nothing better is known.
    pub m_infinity: f64,
    /// Scale of the fourth-moment bound `∫(‖x − x₀‖ − R)⁴₊ π ≤ p²μ_R²`.
    pub mu_r: f64,
}

impl fmt::Debug for ConvexifySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConvexifySpec")
            .field("x0", &self.x0)
            .field("radius", &self.radius)
            .field("gamma", &self.gamma)
            .field("m_infinity", &self.m_infinity)
            .field("mu_r", &self.mu_r)
            .finish_non_exhaustive()
    }
}

impl ConvexifySpec {
    pub fn new(x0: DVector<f64>, radius: f64, gamma: f64, m_profile: CurvatureProfile) -> Self {
        Self {
            x0,
            radius,
            gamma,
            m_profile,
            m_infinity: 0.0,
            mu_r: 0.0,
        }
    }

    pub fn with_m_infinity(mut self, m_infinity: f64) -> Self {
        self.m_infinity = m_infinity;
        self
    }

    pub fn with_mu_r(mut self, mu_r: f64) -> Self {
        self.mu_r = mu_r;
        self
    }
}

/// `f̄ = f + (γ/2)(r − R)²·1{r > R}` with `r = ‖x − x₀‖`.
#[derive(Debug, Clone)]
pub struct Convexified<M> {
    pub inner: M,
    pub x0: DVector<f64>,
    pub radius: f64,
    pub gamma: f64,
}

impl<M: TargetModel> Convexified<M> {
    /// `(r, u)` when outside the ball.
    fn outside(&self, x: &DVector<f64>) -> Option<(f64, DVector<f64>)> {
        let d = x - &self.x0;
        let r = d.norm();
        (r > self.radius).then(|| (r, d / r))
    }

    fn penalty_hessian(&self, r: f64, u: &DVector<f64>) -> DMatrix<f64> {
        let p = u.len();
        let ratio = self.radius / r;
        (DMatrix::identity(p, p) * (1.0 - ratio) + u * u.transpose() * ratio) * self.gamma
    }
}

impl<M: TargetModel> TargetModel for Convexified<M> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn potential(&self, x: &DVector<f64>) -> f64 {
        let base = self.inner.potential(x);
        match self.outside(x) {
            Some((r, _)) => base + 0.5 * self.gamma * (r - self.radius).powi(2),
            None => base,
        }
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let base = self.inner.gradient(x);
        match self.outside(x) {
            Some((r, u)) => base + u * (self.gamma * (r - self.radius)),
            None => base,
        }
    }

    fn hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let base = self.inner.hessian(x)?;
        Some(match self.outside(x) {
            Some((r, u)) => base + self.penalty_hessian(r, &u),
            None => base,
        })
    }

    fn hessian_vec(&self, x: &DVector<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
        let base = self.inner.hessian_vec(x, v)?;
        Some(match self.outside(x) {
            Some((r, u)) => {
                let ratio = self.radius / r;
                base + (v * (1.0 - ratio) + &u * (ratio * u.dot(v))) * self.gamma
            }
            None => base,
        })
    }

    fn has_hessian(&self) -> bool {
        self.inner.has_hessian()
    }

    fn name(&self) -> String {
        format!("convexified({})", self.inner.name())
    }
}

/// Wraps `model` with the penalty of `spec` and returns the certificate
/// `m̄ = min(m_{2R}, m_∞ + γ/2)`, `M̄ = M + γ`.
pub fn convexify<M: TargetModel>(
    model: M,
    cert: &ConvexityCertificate,
    spec: &ConvexifySpec,
) -> Result<(Convexified<M>, ConvexityCertificate)> {
    if !(spec.gamma > 0.0 && spec.gamma.is_finite()) {
        return Err(Error::domain(format!("gamma must be > 0, got {}", spec.gamma)));
    }
    if !(spec.radius >= 0.0 && spec.radius.is_finite()) {
        return Err(Error::domain(format!("radius must be >= 0, got {}", spec.radius)));
    }
    if spec.x0.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: spec.x0.len(),
        });
    }
    let m2r = (spec.m_profile)(2.0 * spec.radius);
    let barm = m2r.min(spec.m_infinity + 0.5 * spec.gamma);
    let bar_big_m = cert.big_m + spec.gamma;
    let new_cert = ConvexityCertificate::new(barm, bar_big_m)?;
    Ok((
        Convexified {
            inner: model,
            x0: spec.x0.clone(),
            radius: spec.radius,
            gamma: spec.gamma,
        },
        new_cert,
    ))
}

/// `γ p μ_R / 4`, the TV cost of replacing `π` by the convexified density.
pub fn convexified_tv_budget(gamma: f64, p: usize, mu_r: f64) -> Result<f64> {
    if !(gamma >= 0.0 && mu_r >= 0.0) {
        return Err(Error::domain(format!(
            "budget needs gamma >= 0 and mu_R >= 0, got gamma={gamma}, mu_R={mu_r}"
        )));
    }
    Ok(gamma * p as f64 * mu_r / 4.0)
}

/// A symmetric positive-definite matrix `A`.
#[derive(Debug, Clone)]
pub struct Preconditioner {
    matrix: DMatrix<f64>,
}

impl Preconditioner {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Matrix(format!(
                "preconditioner must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if relative_asymmetry(&a) > 1e-12 {
            return Err(Error::Matrix("preconditioner must be symmetric".into()));
        }
        let spectrum = HessianSpectrum::from_symmetric(&a)?;
        if !(spectrum.min_eigenvalue() > 0.0) {
            return Err(Error::Matrix(format!(
                "preconditioner must be positive definite, smallest eigenvalue {}",
                spectrum.min_eigenvalue()
            )));
        }
        Ok(Self { matrix: a })
    }

    pub fn identity(p: usize) -> Self {
        Self {
            matrix: DMatrix::identity(p, p),
        }
    }

    /// `Σ^{−1/2}` for a symmetric positive-definite `Σ`. Eigenvalues below
    /// `1e-10 · λ_max` are treated as singular.
    pub fn inverse_sqrt_of(sigma: &DMatrix<f64>) -> Result<Self> {
        let spectrum = HessianSpectrum::from_symmetric(sigma)?;
        let top = spectrum.max_eigenvalue();
        let low = spectrum.min_eigenvalue();
        if !(top > 0.0) || low < 1e-10 * top {
            return Err(Error::Matrix(format!(
                "matrix is singular or indefinite (eigenvalues in [{low:e}, {top:e}])"
            )));
        }
        let coeffs: Vec<f64> = spectrum.eigenvalues().iter().map(|l| 1.0 / l.sqrt()).collect();
        let m = spectrum.coeffs_to_matrix(&coeffs);
        let sym = (&m + m.transpose()) * 0.5;
        Self::new(sym)
    }

    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::new(read_matrix_csv(path)?)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.matrix * v
    }
}

/// `g(y) = f(Ay)`.
#[derive(Debug, Clone)]
pub struct Preconditioned<M> {
    pub inner: M,
    pub preconditioner: Preconditioner,
}

impl<M: TargetModel> TargetModel for Preconditioned<M> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn potential(&self, y: &DVector<f64>) -> f64 {
        self.inner.potential(&self.preconditioner.apply(y))
    }

    fn gradient(&self, y: &DVector<f64>) -> DVector<f64> {
        self.preconditioner
            .apply(&self.inner.gradient(&self.preconditioner.apply(y)))
    }

    fn hessian(&self, y: &DVector<f64>) -> Option<DMatrix<f64>> {
        let a = self.preconditioner.matrix();
        let h = self.inner.hessian(&(a * y))?;
        let aha = a * h * a;
        Some((&aha + aha.transpose()) * 0.5)
    }

    fn hessian_vec(&self, y: &DVector<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
        let x = self.preconditioner.apply(y);
        let hv = self.inner.hessian_vec(&x, &self.preconditioner.apply(v))?;
        Some(self.preconditioner.apply(&hv))
    }

    fn has_hessian(&self) -> bool {
        self.inner.has_hessian()
    }

    fn hessian_is_constant(&self) -> bool {
        self.inner.hessian_is_constant()
    }

    fn name(&self) -> String {
        format!("preconditioned({})", self.inner.name())
    }
}

/// Wraps `model` as `g(y) = f(Ay)`. The certificate for `g` is the caller's
/// (it is usually known analytically) and is returned unchanged.
pub fn precondition<M: TargetModel>(
    model: M,
    cert_for_g: &ConvexityCertificate,
    a: &Preconditioner,
) -> Result<(Preconditioned<M>, ConvexityCertificate)> {
    if a.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: a.dim(),
        });
    }
    Ok((
        Preconditioned {
            inner: model,
            preconditioner: a.clone(),
        },
        *cert_for_g,
    ))
}

/// Replaces every sample `η` by `Aη`.
pub fn map_back(samples: &SampleSet, a: &Preconditioner) -> Result<SampleSet> {
    if a.dim() != samples.dim() {
        return Err(Error::DimensionMismatch {
            expected: samples.dim(),
            found: a.dim(),
        });
    }
    let mut meta = samples.meta.clone();
    meta.transform = Some("mapped back through preconditioner".into());
    Ok(SampleSet {
        data: &samples.data * a.matrix().transpose(),
        meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{fd_gradient_check, fd_hessian_check};
    use crate::targets::Quadratic;
    use nalgebra::dmatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn flat(m: f64) -> CurvatureProfile {
        Arc::new(move |_| m)
    }

    #[test]
    fn penalty_values() {
        let q = Quadratic::isotropic(2, 1.0);
        let cert = q.certificate();
        let spec = ConvexifySpec::new(DVector::zeros(2), 1.0, 2.0, flat(1.0));
        let (c, new_cert) = convexify(q.clone(), &cert, &spec).unwrap();
        let x = DVector::from_vec(vec![2.0, 0.0]);
        assert!((c.potential(&x) - (q.potential(&x) + 1.0)).abs() < 1e-15);
        let inside = DVector::from_vec(vec![0.3, -0.4]);
        assert_eq!(c.potential(&inside), q.potential(&inside));
        assert_eq!(c.gradient(&inside), q.gradient(&inside));
        assert_eq!(new_cert.m, 1.0);
        assert_eq!(new_cert.big_m, 3.0);
    }

    #[test]
    fn barm_takes_the_minimum() {
        let q = Quadratic::isotropic(3, 1.0);
        let cert = ConvexityCertificate::new(0.0, 1.0).unwrap();
        let spec = ConvexifySpec::new(DVector::zeros(3), 1.0, 0.4, Arc::new(|r: f64| 1.0 / (1.0 + r)));
        let (_, c) = convexify(q.clone(), &cert, &spec).unwrap();
        assert!((c.m - 0.2).abs() < 1e-15);
        let spec = spec.with_m_infinity(0.5);
        let (_, c) = convexify(q, &cert, &spec).unwrap();
        assert!((c.m - 1.0 / 3.0).abs() < 1e-15);
        assert!((c.big_m - 1.4).abs() < 1e-15);
    }

    #[test]
    fn penalty_derivatives_by_finite_differences() {
        let q = Quadratic::diagonal(&[0.5, 1.0, 2.0]);
        let spec = ConvexifySpec::new(DVector::from_vec(vec![0.1, 0.0, -0.2]), 1.0, 3.0, flat(0.5));
        let (c, _) = convexify(q.clone(), &q.certificate(), &spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let dir = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0)).normalize();
            let r = rng.random_range(1.05..3.0);
            let x = &spec.x0 + dir * r;
            assert!(fd_gradient_check(&c, &x, 1e-6).unwrap() < 1e-6);
            assert!(fd_hessian_check(&c, &x, 1e-6).unwrap() < 1e-6);
            let v = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
            let dense = c.hessian(&x).unwrap() * &v;
            assert!((c.hessian_vec(&x, &v).unwrap() - dense).amax() < 1e-13);
            assert!(c.potential(&x) >= q.potential(&x));
        }
    }

    #[test]
    fn gradient_continuous_across_sphere() {
        let q = Quadratic::isotropic(2, 1.0);
        let spec = ConvexifySpec::new(DVector::zeros(2), 1.0, 5.0, flat(1.0));
        let (c, _) = convexify(q.clone(), &q.certificate(), &spec).unwrap();
        let out = DVector::from_vec(vec![1.0 + 1e-9, 0.0]);
        assert!((c.gradient(&out) - q.gradient(&out)).amax() < 1e-8);
    }

    #[test]
    fn convexify_rejects_bad_gamma() {
        let q = Quadratic::isotropic(2, 1.0);
        let spec = ConvexifySpec::new(DVector::zeros(2), 1.0, 0.0, flat(1.0));
        assert!(matches!(convexify(q, &ConvexityCertificate::new(1.0, 1.0).unwrap(), &spec), Err(Error::Domain(_))));
    }

    #[test]
    fn budget_arithmetic() {
        assert!((convexified_tv_budget(0.1, 2, 3.0).unwrap() - 0.15).abs() < 1e-15);
        assert_eq!(convexified_tv_budget(1.0, 5, 0.0).unwrap(), 0.0);
        let (eps, p, mu) = (0.1, 4, 2.5);
        let gamma = 2.0 * eps / (p as f64 * mu);
        assert!((convexified_tv_budget(gamma, p, mu).unwrap() - eps / 2.0).abs() < 1e-15);
    }

    #[test]
    fn preconditioning_whitens_a_quadratic() {
        let d = dmatrix![4.0, 0.0; 0.0, 0.25];
        let q = Quadratic::new(d.clone(), DVector::zeros(2)).unwrap();
        let a = Preconditioner::inverse_sqrt_of(&d).unwrap();
        let cert = ConvexityCertificate::new(1.0, 1.0).unwrap();
        let (g, _) = precondition(q, &cert, &a).unwrap();
        let y = DVector::from_vec(vec![0.7, -1.3]);
        assert!((g.potential(&y) - 0.5 * y.norm_squared()).abs() < 1e-14);
        assert!((g.hessian(&y).unwrap() - DMatrix::identity(2, 2)).amax() < 1e-14);
        assert!(fd_gradient_check(&g, &y, 1e-5).unwrap() < 1e-8);
    }

    #[test]
    fn identity_preconditioner_is_transparent() {
        let q = Quadratic::diagonal(&[1.0, 3.0]);
        let (g, _) = precondition(q.clone(), &q.certificate(), &Preconditioner::identity(2)).unwrap();
        let y = DVector::from_vec(vec![0.2, 0.9]);
        assert_eq!(g.potential(&y), q.potential(&y));
        assert_eq!(g.gradient(&y), q.gradient(&y));
    }

    #[test]
    fn preconditioner_validation() {
        assert!(Preconditioner::new(dmatrix![1.0, 0.5; 0.0, 1.0]).is_err());
        assert!(Preconditioner::new(dmatrix![1.0, 0.0; 0.0, -1.0]).is_err());
        assert!(Preconditioner::inverse_sqrt_of(&dmatrix![1.0, 1.0; 1.0, 1.0]).is_err());
        let q = Quadratic::isotropic(3, 1.0);
        assert!(precondition(q.clone(), &q.certificate(), &Preconditioner::identity(2)).is_err());
    }
}
