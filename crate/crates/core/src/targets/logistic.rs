//! Bayesian logistic regression with the Gaussian prior `N(0, (λΣ_X)⁻¹)`:
//!
//! `f(θ) = YᵀXθ + Σᵢ ln(1 + e^{−θᵀXᵢ}) + (λ/2) θᵀΣ_Xθ`, `Σ_X = XᵀX/n`.
//!
//! Sampling happens in whitened coordinates `θ = Aη` with `A = Σ_X^{−1/2}`,
//! where the potential `g(η) = f(Aη)` is `λ`-strongly convex with
//! `(λ + n/4)`-Lipschitz gradient.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::{ln_binomial, ln_factorial};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::io::{coordinate_header, read_matrix_csv, read_vector_csv, write_matrix_csv};
use crate::model::{minimize_gd, ConvexityCertificate, StationaryPoint, TargetModel};
use crate::spectrum::{symmetric_min_eigenvalue, HessianSpectrum};
use crate::transforms::{convexify, Convexified, ConvexifySpec, Preconditioned, Preconditioner};

use super::incomplete_gamma::ln_upper_incomplete_gamma;
use super::{logistic_density, sigmoid, softplus};

/// `max_s |d/ds e^s/(1+e^s)²|`.
const LOGISTIC_DENSITY_SLOPE: f64 = 0.096_225_044_864_937_63;

/// `3p/π²`.
pub fn default_lambda(p: usize) -> f64 {
    3.0 * p as f64 / (std::f64::consts::PI * std::f64::consts::PI)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticGenConfig {
    pub p: usize,
    pub n: usize,
    /// Defaults to the all-ones vector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_true: Option<DVector<f64>>,
    pub seed: u64,
}

impl LogisticGenConfig {
    pub fn new(p: usize, n: usize, seed: u64) -> Self {
        Self {
            p,
            n,
            theta_true: None,
            seed,
        }
    }

    pub fn theta_true(&self) -> DVector<f64> {
        self.theta_true
            .clone()
            .unwrap_or_else(|| DVector::from_element(self.p, 1.0))
    }
}

/// Features `X` (`n × p`) and labels `Y ∈ {0, 1}ⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticData {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl LogisticData {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                found: y.len(),
            });
        }
        if y.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Parse("labels must be 0 or 1".into()));
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Parse("features must be finite".into()));
        }
        Ok(Self { x, y })
    }

    /// Rademacher features scaled to unit norm; `Yᵢ ~ Bernoulli(r(θ_true, Xᵢ))`
    /// with `r(θ, x) = e^{θᵀx}/(1 + e^{θᵀx})`.
    pub fn generate(config: &LogisticGenConfig) -> Result<Self> {
        let (p, n) = (config.p, config.n);
        if p < 2 || n == 0 {
            return Err(Error::domain(format!("need p >= 2 and n >= 1, got p={p}, n={n}")));
        }
        let theta = config.theta_true();
        if theta.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: theta.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let scale = 1.0 / (p as f64).sqrt();
        let mut x = DMatrix::zeros(n, p);
        let mut y = DVector::zeros(n);
        for i in 0..n {
            for j in 0..p {
                x[(i, j)] = if rng.random_bool(0.5) { scale } else { -scale };
            }
            let t = x.row(i).transpose().dot(&theta);
            y[i] = if rng.random_bool(sigmoid(t)) { 1.0 } else { 0.0 };
        }
        Ok(Self { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// `Σ_X = XᵀX/n`.
    pub fn gram(&self) -> DMatrix<f64> {
        self.x.tr_mul(&self.x) / self.n() as f64
    }

    /// Writes `X` and `Y` as CSV. With a config, also writes a JSON sidecar
    /// next to `x_path`.
    pub fn write(
        &self,
        x_path: impl AsRef<Path>,
        y_path: impl AsRef<Path>,
        config: Option<&LogisticGenConfig>,
    ) -> Result<()> {
        let x_path = x_path.as_ref();
        write_matrix_csv(x_path, &self.x, Some(&coordinate_header(self.p())))?;
        let y = DMatrix::from_column_slice(self.n(), 1, self.y.as_slice());
        write_matrix_csv(y_path, &y, Some(&["y".to_string()]))?;
        if let Some(c) = config {
            std::fs::write(x_path.with_extension("json"), serde_json::to_string_pretty(c)?)?;
        }
        Ok(())
    }

    pub fn read(x_path: impl AsRef<Path>, y_path: impl AsRef<Path>) -> Result<Self> {
        Self::new(read_matrix_csv(x_path)?, read_vector_csv(y_path)?)
    }
}

/// The potential `f` in the original coordinates.
#[derive(Debug, Clone)]
pub struct LogisticTarget {
    pub data: LogisticData,
    pub lambda: f64,
    pub sigma_x: DMatrix<f64>,
    xty: DVector<f64>,
}

impl LogisticTarget {
    pub fn new(data: LogisticData, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::domain(format!("lambda must be > 0, got {lambda}")));
        }
        let sigma_x = data.gram();
        let xty = data.x.tr_mul(&data.y);
        Ok(Self {
            data,
            lambda,
            sigma_x,
            xty,
        })
    }

    fn scores(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.data.x * theta
    }
}

impl TargetModel for LogisticTarget {
    fn dim(&self) -> usize {
        self.data.p()
    }

    fn potential(&self, theta: &DVector<f64>) -> f64 {
        let t = self.scores(theta);
        self.xty.dot(theta)
            + t.iter().map(|&ti| softplus(-ti)).sum::<f64>()
            + 0.5 * self.lambda * theta.dot(&(&self.sigma_x * theta))
    }

    fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        let w = self.scores(theta).map(|ti| sigmoid(-ti));
        &self.xty - self.data.x.tr_mul(&w) + &self.sigma_x * theta * self.lambda
    }

    fn hessian(&self, theta: &DVector<f64>) -> Option<DMatrix<f64>> {
        let w = self.scores(theta).map(logistic_density);
        let mut wx = self.data.x.clone();
        for (i, mut row) in wx.row_iter_mut().enumerate() {
            row *= w[i];
        }
        let h = self.data.x.tr_mul(&wx) + &self.sigma_x * self.lambda;
        Some((&h + h.transpose()) * 0.5)
    }

    fn hessian_vec(&self, theta: &DVector<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
        let t = self.scores(theta);
        let xv = &self.data.x * v;
        let wxv = DVector::from_fn(t.len(), |i, _| logistic_density(t[i]) * xv[i]);
        Some(self.data.x.tr_mul(&wxv) + &self.sigma_x * v * self.lambda)
    }

    fn has_hessian(&self) -> bool {
        true
    }

    fn name(&self) -> String {
        "logistic".into()
    }
}

/// Scalar weight used to lower-bound the Hessian of `g` on a ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LocalCurvatureWeight {
    /// `e^t/(1 + e^t)²`, the logistic density; this is the curvature of
    /// `t ↦ ln(1 + e^{−t})` and yields a valid bound.
    #[default]
    Logistic,
    /// `e^t/(1 + e^{2t})²`.
    Squared,
}

impl LocalCurvatureWeight {
    fn eval(&self, t: f64) -> f64 {
        match self {
            LocalCurvatureWeight::Logistic => logistic_density(t),
            LocalCurvatureWeight::Squared => {
                // e^t/(1+e^{2t})² = e^{−3t}/(1+e^{−2t})² for t ≥ 0.
                let t = t.abs();
                let e = (-2.0 * t).exp();
                (-3.0 * t).exp() / ((1.0 + e) * (1.0 + e))
            }
        }
    }
}

/// Result of the radius search for the convexified logistic target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusChoice {
    #[serde(rename = "R")]
    pub radius: f64,
    pub barm: f64,
    pub gamma: f64,
    pub mu_r: f64,
    pub m_2r: f64,
}

/// The whitened posterior `g`, its certificate and the preconditioner.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    pub target: Preconditioned<LogisticTarget>,
    pub certificate: ConvexityCertificate,
    pub preconditioner: Preconditioner,
    /// Rows `AXᵢ`.
    pub whitened_features: DMatrix<f64>,
    pub lambda: f64,
    pub weight: LocalCurvatureWeight,
}

impl LogisticModel {
    /// Builds `g(η) = f(Aη)` with `A = Σ_X^{−1/2}` and the certificate
    /// `m = λ`, `M = λ + n/4`, `L = 0.1 · n · maxᵢ‖AXᵢ‖`.
    pub fn new(data: LogisticData, lambda: f64) -> Result<Self> {
        let target = LogisticTarget::new(data, lambda)?;
        let preconditioner = Preconditioner::inverse_sqrt_of(&target.sigma_x)?;
        let whitened_features = &target.data.x * preconditioner.matrix();
        let n = target.data.n() as f64;
        let max_norm = whitened_features
            .row_iter()
            .map(|r| r.norm())
            .fold(0.0_f64, f64::max);
        let certificate = ConvexityCertificate::new(lambda, lambda + 0.25 * n)?
            .with_hessian_lipschitz(0.1 * n * max_norm)?;
        Ok(Self {
            target: Preconditioned {
                inner: target,
                preconditioner: preconditioner.clone(),
            },
            certificate,
            preconditioner,
            whitened_features,
            lambda,
            weight: LocalCurvatureWeight::default(),
        })
    }

    pub fn with_weight(mut self, weight: LocalCurvatureWeight) -> Self {
        self.weight = weight;
        self
    }

    pub fn p(&self) -> usize {
        self.whitened_features.ncols()
    }

    pub fn n(&self) -> usize {
        self.whitened_features.nrows()
    }

    /// `max|w′| · n · maxᵢ‖AXᵢ‖`, the constant behind the certificate's
    /// rounded `0.1` factor. Uses `Σᵢ ZᵢZᵢᵀ = nI` for the whitened rows.
    pub fn tight_hessian_lipschitz(&self) -> f64 {
        let max_norm = self
            .whitened_features
            .row_iter()
            .map(|r| r.norm())
            .fold(0.0_f64, f64::max);
        LOGISTIC_DENSITY_SLOPE * self.n() as f64 * max_norm
    }

    /// Mode of `g` by gradient descent from the origin.
    pub fn mode(&self) -> Result<StationaryPoint> {
        minimize_gd(&self.target, &self.certificate, &DVector::zeros(self.p()), 1e-10)
    }

    /// `λ + ν_min(B_R)` with
    /// `B_R = Σᵢ w(|Zᵢᵀη*| + R‖Zᵢ‖) ZᵢZᵢᵀ` and `Zᵢ = AXᵢ`.
    pub fn m_r(&self, eta_star: &DVector<f64>, radius: f64) -> f64 {
        let z = &self.whitened_features;
        let scores = z * eta_star;
        let mut weighted = z.clone();
        for (i, mut row) in weighted.row_iter_mut().enumerate() {
            let t = scores[i].abs() + radius * row.norm();
            row *= self.weight.eval(t);
        }
        let b = z.tr_mul(&weighted);
        self.lambda + symmetric_min_eigenvalue(&b).max(0.0)
    }

    /// Maximises `R ↦ min(m_{2R}, λ + ε/(pμ_R))` over `(0, 10/√λ]` and sets
    /// `γ = 2ε/(pμ_R)`.
    pub fn optimal_radius(&self, eta_star: &DVector<f64>, eps: f64) -> Result<RadiusChoice> {
        if !(eps > 0.0 && eps < 0.5) {
            return Err(Error::domain(format!("eps must lie in (0, 1/2), got {eps}")));
        }
        let p = self.p();
        let pf = p as f64;
        let big_m = self.certificate.big_m;
        let objective = |r: f64| -> Result<f64> {
            let mu = mu_r(p, self.m_r(eta_star, r), big_m, r)?;
            Ok(self.m_r(eta_star, 2.0 * r).min(self.lambda + eps / (pf * mu)))
        };
        let r_max = 10.0 / self.lambda.sqrt();
        let grid = 64;
        let r_min = r_max * 1e-4;
        let points: Vec<f64> = (0..grid)
            .map(|i| r_min * (r_max / r_min).powf(i as f64 / (grid - 1) as f64))
            .collect();
        let mut values = Vec::with_capacity(grid);
        for &r in &points {
            values.push(objective(r)?);
        }
        let best = values
            .iter()
            .enumerate()
            .fold(0, |b, (i, v)| if *v > values[b] { i } else { b });
        let mut lo = points[best.saturating_sub(1)];
        let mut hi = points[(best + 1).min(grid - 1)];
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = hi - ratio * (hi - lo);
        let mut d = lo + ratio * (hi - lo);
        let (mut fc, mut fd) = (objective(c)?, objective(d)?);
        while hi - lo > 1e-3 * lo {
            if fc >= fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - ratio * (hi - lo);
                fc = objective(c)?;
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + ratio * (hi - lo);
                fd = objective(d)?;
            }
        }
        let mut radius = 0.5 * (lo + hi);
        if objective(radius)? < values[best] {
            radius = points[best];
        }
        let mu = mu_r(p, self.m_r(eta_star, radius), big_m, radius)?;
        let m_2r = self.m_r(eta_star, 2.0 * radius);
        let gamma = 2.0 * eps / (pf * mu);
        Ok(RadiusChoice {
            radius,
            barm: m_2r.min(self.lambda + 0.5 * gamma),
            gamma,
            mu_r: mu,
            m_2r,
        })
    }

    /// Convexifies `g` around `η*` with the given radius choice. The far-field
    /// curvature is `λ`, which the prior supplies everywhere.
    pub fn convexified(
        &self,
        eta_star: &DVector<f64>,
        choice: &RadiusChoice,
    ) -> Result<(Convexified<Preconditioned<LogisticTarget>>, ConvexityCertificate)> {
        let this = self.clone();
        let center = eta_star.clone();
        let profile = Arc::new(move |r: f64| this.m_r(&center, r));
        let spec = ConvexifySpec::new(eta_star.clone(), choice.radius, choice.gamma, profile)
            .with_m_infinity(self.lambda)
            .with_mu_r(choice.mu_r);
        convexify(self.target.clone(), &self.certificate, &spec)
    }

    /// Hessian eigenvalues of `g` at `η`, for direct checks of the certificate.
    pub fn hessian_spectrum(&self, eta: &DVector<f64>) -> Result<HessianSpectrum> {
        let h = self
            .target
            .hessian(eta)
            .ok_or_else(|| Error::Capability("logistic Hessian".into()))?;
        HessianSpectrum::from_symmetric(&h)
    }
}

/// `ln ∫ₓ^∞ (t − x)⁴ t^{p−1} e^{−t} dt`.
///
/// Evaluates the binomial expansion `Σⱼ C(4,j)(−x)ʲ Γ(p+4−j, x)` and, when
/// its alternating terms cancel to below `1e-6` of the largest one, switches
/// to the all-positive expansion `e^{−x} Σₖ C(p−1,k) x^{p−1−k} (k+4)!`.
pub fn ln_tail_fourth_moment(p: usize, x: f64) -> Result<f64> {
    if p == 0 || !(x >= 0.0) {
        return Err(Error::domain(format!("need p >= 1 and x >= 0, got p={p}, x={x}")));
    }
    let pf = p as f64;
    if x == 0.0 {
        return Ok(ln_gamma(pf + 4.0));
    }
    let mut logs = [0.0; 5];
    for (j, l) in logs.iter_mut().enumerate() {
        *l = ln_binomial(4, j as u64) + j as f64 * x.ln()
            + ln_upper_incomplete_gamma(pf + 4.0 - j as f64, x)?;
    }
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logs
        .iter()
        .enumerate()
        .map(|(j, l)| if j % 2 == 0 { 1.0 } else { -1.0 } * (l - top).exp())
        .sum();
    if sum > 1e-6 {
        return Ok(top + sum.ln());
    }
    let terms: Vec<f64> = (0..p)
        .map(|k| {
            ln_binomial(p as u64 - 1, k as u64)
                + (p - 1 - k) as f64 * x.ln()
                + ln_factorial(k as u64 + 4)
        })
        .collect();
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = terms.iter().map(|t| (t - top).exp()).sum();
    Ok(-x + top + s.ln())
}

/// `μ_R` from
/// `(pμ_R)² = 2(M/2)^{p/2} / ((m_R R²)^{p+4} Γ(p/2)) · ∫_{m_R R²}^∞ (t − m_R R²)⁴ t^{p−1} e^{−t} dt`.
pub fn mu_r(p: usize, m_r: f64, big_m: f64, radius: f64) -> Result<f64> {
    if !(m_r > 0.0 && radius > 0.0 && big_m > 0.0) {
        return Err(Error::domain(format!(
            "mu_R needs m_R > 0, M > 0 and R > 0, got m_R={m_r}, M={big_m}, R={radius}"
        )));
    }
    let pf = p as f64;
    let x = m_r * radius * radius;
    let ln_sq = 2f64.ln() + 0.5 * pf * (0.5 * big_m).ln() - (pf + 4.0) * x.ln() - ln_gamma(0.5 * pf)
        + ln_tail_fourth_moment(p, x)?;
    let v = (0.5 * ln_sq).exp() / pf;
    if !v.is_finite() {
        return Err(Error::Numerical(format!("mu_R overflows at R={radius}")));
    }
    Ok(v)
}
