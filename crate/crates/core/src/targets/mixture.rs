//! Equal-weight mixture of `N(a, I)` and `N(−a, I)`:
//! `f(x) = ½‖x − a‖² − ln(1 + e^{−2xᵀa})`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::model::{ConvexityCertificate, TargetModel};
use crate::spectrum::HessianSpectrum;

use super::{logistic_density, sigmoid, softplus};

/// `max_s |d/ds e^s/(1+e^s)²| = 1/(6√3)`.
const LOGISTIC_DENSITY_SLOPE: f64 = 0.096_225_044_864_937_63;

#[derive(Debug, Clone)]
pub struct GaussianMixtureTarget {
    pub a: DVector<f64>,
}

impl GaussianMixtureTarget {
    pub fn new(a: DVector<f64>) -> Result<Self> {
        if a.len() < 2 {
            return Err(Error::domain("mixture needs p >= 2"));
        }
        if !a.iter().all(|v| v.is_finite()) {
            return Err(Error::domain("mixture offset must be finite"));
        }
        Ok(Self { a })
    }

    /// `a = (c, …, c)` with `‖a‖² = a_norm_sq`.
    pub fn with_norm_sq(p: usize, a_norm_sq: f64) -> Result<Self> {
        if !(a_norm_sq >= 0.0) {
            return Err(Error::domain("squared norm must be >= 0"));
        }
        Self::new(DVector::from_element(p, (a_norm_sq / p as f64).sqrt()))
    }

    pub fn norm_sq(&self) -> f64 {
        self.a.norm_squared()
    }

    /// `m = 1 − ‖a‖²`, `M = 1`, and the Hessian-Lipschitz constant
    /// `8 ‖a‖³ / (6√3) = 4‖a‖³/(3√3)`.
    pub fn certificate(&self) -> Result<ConvexityCertificate> {
        let s = self.norm_sq();
        if s >= 1.0 {
            return Err(Error::domain(format!(
                "mixture is log-concave only for |a| < 1, got |a|^2 = {s}"
            )));
        }
        ConvexityCertificate::new(1.0 - s, 1.0)?
            .with_hessian_lipschitz(self.sharp_hessian_lipschitz())
    }

    pub fn sharp_hessian_lipschitz(&self) -> f64 {
        8.0 * LOGISTIC_DENSITY_SLOPE * self.norm_sq().powf(1.5)
    }

    /// `‖a‖³/2`.
    pub fn reference_hessian_lipschitz(&self) -> f64 {
        0.5 * self.norm_sq().powf(1.5)
    }

    /// The mode `c*·a`.
    pub fn theta_star(&self) -> DVector<f64> {
        &self.a * cstar(self.norm_sq())
    }

    /// `Y(Z − a) + (1 − Y)(Z + a)` with `Y ~ Bernoulli(½)`, `Z ~ N(0, I)`.
    pub fn direct_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.a.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
        if rng.random_bool(0.5) {
            z - &self.a
        } else {
            z + &self.a
        }
    }

    pub fn direct_samples<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(n, self.a.len());
        for i in 0..n {
            out.row_mut(i).copy_from(&self.direct_sample(rng).transpose());
        }
        out
    }

    /// Unit vector along `a`; `e₁` when `a = 0`.
    pub fn direction(&self) -> DVector<f64> {
        let n = self.a.norm();
        if n > 0.0 {
            &self.a / n
        } else {
            let mut e = DVector::zeros(self.a.len());
            e[0] = 1.0;
            e
        }
    }

    /// CDF of `uᵀX` for `u = a/‖a‖`: `½Φ(t − ‖a‖) + ½Φ(t + ‖a‖)`.
    pub fn projection_cdf(&self, t: f64) -> f64 {
        let r = self.a.norm();
        0.5 * (normal_cdf(t - r) + normal_cdf(t + r))
    }

    /// Density of `uᵀX`.
    pub fn projection_pdf(&self, t: f64) -> f64 {
        let r = self.a.norm();
        let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        0.5 * (phi(t - r) + phi(t + r))
    }

    pub fn mean(&self) -> DVector<f64> {
        DVector::zeros(self.a.len())
    }

    /// `I + aaᵀ`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let p = self.a.len();
        DMatrix::identity(p, p) + &self.a * self.a.transpose()
    }

    fn weight(&self, x: &DVector<f64>) -> f64 {
        logistic_density(2.0 * x.dot(&self.a))
    }
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Root of `c = 1 − 2/(1 + e^{2c‖a‖²})` on `[−1, 1]`, by bisection to `1e-12`.
pub fn cstar(a_norm_sq: f64) -> f64 {
    let g = |c: f64| c - 1.0 + 2.0 * sigmoid(-2.0 * c * a_norm_sq);
    let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
    if g(lo) >= 0.0 {
        return lo;
    }
    if g(hi) <= 0.0 {
        return hi;
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if g(mid) == 0.0 {
            return mid;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

impl TargetModel for GaussianMixtureTarget {
    fn dim(&self) -> usize {
        self.a.len()
    }

    fn potential(&self, x: &DVector<f64>) -> f64 {
        0.5 * (x - &self.a).norm_squared() - softplus(-2.0 * x.dot(&self.a))
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        x - &self.a + &self.a * (2.0 * sigmoid(-2.0 * x.dot(&self.a)))
    }

    fn hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let p = self.a.len();
        Some(DMatrix::identity(p, p) - &self.a * self.a.transpose() * (4.0 * self.weight(x)))
    }

    fn hessian_vec(&self, x: &DVector<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
        Some(v - &self.a * (4.0 * self.weight(x) * self.a.dot(v)))
    }

    fn structured_hessian(&self, x: &DVector<f64>) -> Option<HessianSpectrum> {
        Some(HessianSpectrum::RankOneUpdate {
            direction: self.direction(),
            along: 1.0 - 4.0 * self.norm_sq() * self.weight(x),
            orthogonal: 1.0,
        })
    }

    fn has_hessian(&self) -> bool {
        true
    }

    fn name(&self) -> String {
        "mixture".into()
    }
}
