//! Target densities `π ∝ exp(−f)`, convexity certificates, finite-difference
//! validators and the gradient-descent mode finder used to centre the
//! sampler's initial distribution.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::{symmetric_spectral_norm, HessianSpectrum};

/// A potential `f` on `R^p` with its gradient and, optionally, its Hessian.
///
/// Implementations must be pure: every method may be called concurrently from
/// several chains.
pub trait TargetModel: Send + Sync {
    fn dim(&self) -> usize;

    fn potential(&self, x: &DVector<f64>) -> f64;

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;

    fn hessian(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }

    /// `∇²f(x) v`. Override when the product is cheaper than forming the Hessian.
    fn hessian_vec(&self, x: &DVector<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
        self.hessian(x).map(|h| h * v)
    }

    /// Eigen-structure of `∇²f(x)` when it is known analytically.
    fn structured_hessian(&self, _x: &DVector<f64>) -> Option<HessianSpectrum> {
        None
    }

    fn has_hessian(&self) -> bool {
        self.hessian(&DVector::zeros(self.dim())).is_some()
    }

    /// `true` when `∇²f` does not depend on `x`, which lets samplers factor it once.
    fn hessian_is_constant(&self) -> bool {
        false
    }

    /// Short tag recorded in sample metadata.
    fn name(&self) -> String {
        "custom".to_string()
    }
}

impl<T: TargetModel + ?Sized> TargetModel for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn potential(&self, x: &DVector<f64>) -> f64 {
        (**self).potential(x)
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (**self).gradient(x)
    }
    fn hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        (**self).hessian(x)
    }
    fn hessian_vec(&self, x: &DVector<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
        (**self).hessian_vec(x, v)
    }
    fn structured_hessian(&self, x: &DVector<f64>) -> Option<HessianSpectrum> {
        (**self).structured_hessian(x)
    }
    fn has_hessian(&self) -> bool {
        (**self).has_hessian()
    }
    fn hessian_is_constant(&self) -> bool {
        (**self).hessian_is_constant()
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

impl<T: TargetModel + ?Sized> TargetModel for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn potential(&self, x: &DVector<f64>) -> f64 {
        (**self).potential(x)
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (**self).gradient(x)
    }
    fn hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        (**self).hessian(x)
    }
    fn hessian_vec(&self, x: &DVector<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
        (**self).hessian_vec(x, v)
    }
    fn structured_hessian(&self, x: &DVector<f64>) -> Option<HessianSpectrum> {
        (**self).structured_hessian(x)
    }
    fn has_hessian(&self) -> bool {
        (**self).has_hessian()
    }
    fn hessian_is_constant(&self) -> bool {
        (**self).hessian_is_constant()
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

type ScalarFn = Box<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
type VectorFn = Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
type MatrixFn = Box<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// A [`TargetModel`] assembled from closures.
pub struct FnModel {
    dim: usize,
    potential: ScalarFn,
    gradient: VectorFn,
    hessian: Option<MatrixFn>,
    name: String,
}

impl FnModel {
    pub fn new(
        dim: usize,
        potential: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            potential: Box::new(potential),
            gradient: Box::new(gradient),
            hessian: None,
            name: "custom".to_string(),
        }
    }

    pub fn with_hessian(
        mut self,
        hessian: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.hessian = Some(Box::new(hessian));
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

impl TargetModel for FnModel {
    fn dim(&self) -> usize {
        self.dim
    }
    fn potential(&self, x: &DVector<f64>) -> f64 {
        (self.potential)(x)
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.gradient)(x)
    }
    fn hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        self.hessian.as_ref().map(|h| h(x))
    }
    fn has_hessian(&self) -> bool {
        self.hessian.is_some()
    }
    fn name(&self) -> String {
        self.name.clone()
    }
}

/// Constants asserting `m`-strong convexity, `M`-Lipschitz gradient and,
/// optionally, an `L_f`-Lipschitz Hessian (spectral norm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexityCertificate {
    pub m: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
    #[serde(rename = "L_f", skip_serializing_if = "Option::is_none", default)]
    pub hessian_lipschitz: Option<f64>,
}

impl ConvexityCertificate {
    pub fn new(m: f64, big_m: f64) -> Result<Self> {
        if !(m.is_finite() && big_m.is_finite()) || m < 0.0 || big_m <= 0.0 || m > big_m {
            return Err(Error::domain(format!(
                "certificate requires 0 <= m <= M with M > 0, got m={m}, M={big_m}"
            )));
        }
        Ok(Self {
            m,
            big_m,
            hessian_lipschitz: None,
        })
    }

    pub fn with_hessian_lipschitz(mut self, lf: f64) -> Result<Self> {
        if !(lf.is_finite() && lf >= 0.0) {
            return Err(Error::domain(format!("L_f must be finite and >= 0, got {lf}")));
        }
        self.hessian_lipschitz = Some(lf);
        Ok(self)
    }

    pub fn condition_number(&self) -> f64 {
        self.big_m / self.m
    }
}

/// Approximate minimiser returned by [`minimize_gd`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationaryPoint {
    pub theta_star: DVector<f64>,
    pub f_star: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

/// Finite-difference step `1e-5 · (1 + ‖x‖∞)`.
pub fn default_fd_step(x: &DVector<f64>) -> f64 {
    1e-5 * (1.0 + x.amax())
}

/// Largest coordinate-wise gap between centred finite differences of the
/// potential and the analytic gradient.
pub fn fd_gradient_check<T: TargetModel + ?Sized>(
    model: &T,
    x: &DVector<f64>,
    step: f64,
) -> Result<f64> {
    check_point(model, x)?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::domain(format!("finite-difference step must be > 0, got {step}")));
    }
    let grad = model.gradient(x);
    let mut worst = 0.0_f64;
    let mut probe = x.clone();
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let up = model.potential(&probe);
        probe[i] = x[i] - step;
        let down = model.potential(&probe);
        probe[i] = x[i];
        if !(up.is_finite() && down.is_finite()) {
            return Err(Error::Evaluation {
                what: "potential",
                coordinate: i,
            });
        }
        let fd = (up - down) / (2.0 * step);
        worst = worst.max((fd - grad[i]).abs());
    }
    Ok(worst)
}

/// Largest entrywise gap between the symmetrised finite-difference Jacobian of
/// the gradient and the analytic Hessian.
pub fn fd_hessian_check<T: TargetModel + ?Sized>(
    model: &T,
    x: &DVector<f64>,
    step: f64,
) -> Result<f64> {
    check_point(model, x)?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::domain(format!("finite-difference step must be > 0, got {step}")));
    }
    let hess = model
        .hessian(x)
        .ok_or_else(|| Error::Capability("model has no Hessian".into()))?;
    let p = x.len();
    let mut jac = DMatrix::zeros(p, p);
    let mut probe = x.clone();
    for i in 0..p {
        probe[i] = x[i] + step;
        let up = model.gradient(&probe);
        probe[i] = x[i] - step;
        let down = model.gradient(&probe);
        probe[i] = x[i];
        if !(up.iter().all(|v| v.is_finite()) && down.iter().all(|v| v.is_finite())) {
            return Err(Error::Evaluation {
                what: "gradient",
                coordinate: i,
            });
        }
        jac.set_column(i, &((up - down) / (2.0 * step)));
    }
    let sym = (&jac + jac.transpose()) * 0.5;
    Ok((sym - hess).amax())
}

fn check_point<T: TargetModel + ?Sized>(model: &T, x: &DVector<f64>) -> Result<()> {
    if x.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: x.len(),
        });
    }
    Ok(())
}

/// Violation tally for one inequality.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct ViolationStats {
    pub count: usize,
    /// Largest amount by which the inequality failed (0 when it never did).
    pub worst_margin: f64,
}

impl ViolationStats {
    fn record(&mut self, excess: f64) {
        if excess > 0.0 {
            self.count += 1;
            self.worst_margin = self.worst_margin.max(excess);
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeReport {
    pub pairs: usize,
    pub half_width: f64,
    pub strong_convexity: ViolationStats,
    pub gradient_lipschitz: ViolationStats,
    pub hessian_lipschitz: Option<ViolationStats>,
}

impl ProbeReport {
    pub fn total_violations(&self) -> usize {
        self.strong_convexity.count
            + self.gradient_lipschitz.count
            + self.hessian_lipschitz.map_or(0, |s| s.count)
    }

    pub fn is_clean(&self) -> bool {
        self.total_violations() == 0
    }
}

const PROBE_SLACK: f64 = 1e-9;

/// Draws `n_pairs` uniform pairs from the cube of half-width `3/√m` around
/// `center` (the origin when `None`; half-width 3 when `m = 0`) and checks
///
/// * `f(θ) − f(θ') − ∇f(θ')ᵀ(θ − θ') ≥ (m/2)‖θ − θ'‖²`
/// * `‖∇f(θ) − ∇f(θ')‖ ≤ M‖θ − θ'‖`
/// * `‖∇²f(θ) − ∇²f(θ')‖ ≤ L_f‖θ − θ'‖` when the certificate carries `L_f`.
///
/// Each comparison tolerates a slack of `1e-9` relative to the magnitude of
/// the quantities involved (plus `1e-9` absolute).
pub fn certificate_probe<T: TargetModel + ?Sized>(
    model: &T,
    cert: &ConvexityCertificate,
    n_pairs: usize,
    seed: u64,
    center: Option<&DVector<f64>>,
) -> Result<ProbeReport> {
    if n_pairs == 0 {
        return Err(Error::domain("certificate_probe needs at least one pair"));
    }
    let p = model.dim();
    let origin = DVector::zeros(p);
    let center = center.unwrap_or(&origin);
    check_point(model, center)?;
    let half_width = if cert.m > 0.0 { 3.0 / cert.m.sqrt() } else { 3.0 };
    let check_hessian = cert.hessian_lipschitz.is_some();
    if check_hessian && !model.has_hessian() {
        return Err(Error::Capability(
            "certificate has L_f but the model has no Hessian".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> DVector<f64> {
        DVector::from_fn(p, |i, _| center[i] + rng.random_range(-half_width..half_width))
    };

    let mut strong = ViolationStats::default();
    let mut lipschitz = ViolationStats::default();
    let mut hessian = ViolationStats::default();
    for _ in 0..n_pairs {
        let a = draw(&mut rng);
        let b = draw(&mut rng);
        let diff = &a - &b;
        let dist = diff.norm();
        let (fa, fb) = (model.potential(&a), model.potential(&b));
        let (ga, gb) = (model.gradient(&a), model.gradient(&b));

        let linear = gb.dot(&diff);
        let lhs = fa - fb - linear;
        let rhs = 0.5 * cert.m * dist * dist;
        let scale = 1.0 + fa.abs() + fb.abs() + linear.abs() + rhs;
        strong.record(rhs - lhs - PROBE_SLACK * scale);

        let gdiff = (&ga - &gb).norm();
        let bound = cert.big_m * dist;
        let scale = 1.0 + ga.norm() + gb.norm() + bound;
        lipschitz.record(gdiff - bound - PROBE_SLACK * scale);

        if let Some(lf) = cert.hessian_lipschitz {
            let (ha, hb) = (model.hessian(&a), model.hessian(&b));
            if let (Some(ha), Some(hb)) = (ha, hb) {
                let hdiff = symmetric_spectral_norm(&(&ha - &hb));
                let bound = lf * dist;
                let scale = 1.0 + ha.amax() + hb.amax() + bound;
                hessian.record(hdiff - bound - PROBE_SLACK * scale);
            }
        }
    }
    Ok(ProbeReport {
        pairs: n_pairs,
        half_width,
        strong_convexity: strong,
        gradient_lipschitz: lipschitz,
        hessian_lipschitz: check_hessian.then_some(hessian),
    })
}

/// Gradient descent `θ ← θ − ∇f(θ)/(2M)` stopped once `‖∇f(θ)‖² ≤ 2·m·tol`,
/// which guarantees `f(θ) − f* ≤ tol` for an `m`-strongly convex `f`.
///
/// The iteration cap is the number of steps after which the linear rate
/// `(1 − m/(2M))^k` alone certifies the stopping condition, using the
/// surrogate `f(θ⁰) − f* ≤ (M/2)‖∇f(θ⁰)‖²/m²`.
pub fn minimize_gd<T: TargetModel + ?Sized>(
    model: &T,
    cert: &ConvexityCertificate,
    x0: &DVector<f64>,
    tol: f64,
) -> Result<StationaryPoint> {
    check_point(model, x0)?;
    if !(cert.m > 0.0) {
        return Err(Error::domain("gradient descent needs m > 0"));
    }
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be > 0, got {tol}")));
    }
    let (m, big_m) = (cert.m, cert.big_m);
    let threshold = 2.0 * m * tol;
    let mut x = x0.clone();
    let mut grad = model.gradient(&x);
    let g0 = grad.norm_squared();
    let cap = gd_iteration_cap(m, big_m, g0, tol);
    let step = 0.5 / big_m;

    let mut iterations = 0usize;
    loop {
        let gn2 = grad.norm_squared();
        if !gn2.is_finite() {
            return Err(Error::Numerical(format!(
                "gradient became non-finite after {iterations} iterations"
            )));
        }
        if gn2 <= threshold {
            return Ok(StationaryPoint {
                f_star: model.potential(&x),
                grad_norm: gn2.sqrt(),
                theta_star: x,
                iterations,
            });
        }
        if iterations >= cap {
            return Err(Error::NonConvergence {
                iterations,
                grad_norm: gn2.sqrt(),
                last: x,
            });
        }
        x.axpy(-step, &grad, 1.0);
        grad = model.gradient(&x);
        iterations += 1;
    }
}

/// Steps after which `‖∇f(θᵏ)‖² ≤ 2·m·tol` is implied by the contraction
/// `‖θᵏ − θ*‖² ≤ 2(f(θ⁰) − f*)/m · (1 − m/(2M))^k` together with
/// `‖∇f‖ ≤ M‖θ − θ*‖`.
fn gd_iteration_cap(m: f64, big_m: f64, grad0_sq: f64, tol: f64) -> usize {
    let gap0 = 0.5 * big_m * grad0_sq / (m * m);
    if gap0 <= 0.0 {
        return 1;
    }
    let target = 2.0 * m * tol / (big_m * big_m);
    let numerator = (2.0 * gap0 / (m * target)).ln();
    let rate = (2.0 * big_m / (2.0 * big_m - m)).ln();
    let k = (numerator / rate).ceil();
    if k.is_finite() && k > 0.0 {
        (k as usize).saturating_add(1)
    } else {
        1
    }
}
