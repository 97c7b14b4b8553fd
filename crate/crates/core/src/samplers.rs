//! Update rules and chain drivers.
//!
//! All three rules take the Gaussian innovation `ξ ~ N(0, I_p)` explicitly so
//! that they can be tested against closed forms:
//!
//! * LMC: `x − h∇f(x) + √(2h) ξ`
//! * LMCO: `x − M_h ∇f(x) + Σ_h^{1/2} ξ` with `M_h = (I − e^{−hH})H⁻¹`,
//!   `Σ_h = (I − e^{−2hH})H⁻¹` and `H = ∇²f(x)`
//! * LMCO′: `x + (I − ½hH)(−h∇f(x) + √(2h) ξ)`, one Hessian-vector product per step

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TargetModel;
use crate::planner::{Algorithm, SamplerPlan};
use crate::rng::chain_rng;
use crate::samples::{SampleMeta, SampleSet};
use crate::spectrum::HessianSpectrum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UpdateRule {
    #[serde(rename = "lmc")]
    Lmc,
    #[serde(rename = "lmco")]
    Lmco,
    #[serde(rename = "lmco2")]
    Lmco2,
}

impl UpdateRule {
    pub fn needs_hessian(&self) -> bool {
        !matches!(self, UpdateRule::Lmc)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            UpdateRule::Lmc => "lmc",
            UpdateRule::Lmco => "lmco",
            UpdateRule::Lmco2 => "lmco2",
        }
    }
}

impl std::str::FromStr for UpdateRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lmc" => Ok(UpdateRule::Lmc),
            "lmco" => Ok(UpdateRule::Lmco),
            "lmco2" | "lmco'" | "lmco-prime" => Ok(UpdateRule::Lmco2),
            other => Err(Error::Parse(format!("unknown update rule '{other}'"))),
        }
    }
}

/// `(1 − e^{−tλ})/λ`, continuous at `λ = 0`.
fn phi(t: f64, lambda: f64) -> f64 {
    let x = t * lambda;
    if x.abs() < 1e-4 {
        t * (1.0 - x / 2.0 + x * x / 6.0)
    } else {
        -(-x).exp_m1() / lambda
    }
}

/// `M_h` and `Σ_h^{1/2}` in the eigenbasis of a Hessian.
#[derive(Debug, Clone)]
pub struct OzakiOperators {
    spectrum: HessianSpectrum,
    mean_coeffs: Vec<f64>,
    noise_coeffs: Vec<f64>,
}

impl OzakiOperators {
    pub fn new(spectrum: HessianSpectrum, step: f64) -> Result<Self> {
        let eig = spectrum.eigenvalues();
        if let Some(bad) = eig.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::Matrix(format!(
                "Ozaki operators need a positive definite Hessian, found eigenvalue {bad}"
            )));
        }
        let mean_coeffs: Vec<f64> = eig.iter().map(|&l| phi(step, l)).collect();
        let mut noise_coeffs = Vec::with_capacity(eig.len());
        for &l in &eig {
            let v = phi(2.0 * step, l);
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Numerical(format!(
                    "Ozaki covariance coefficient {v} for eigenvalue {l}"
                )));
            }
            noise_coeffs.push(v.sqrt());
        }
        Ok(Self {
            spectrum,
            mean_coeffs,
            noise_coeffs,
        })
    }

    pub fn from_hessian(h: &DMatrix<f64>, step: f64) -> Result<Self> {
        Self::new(HessianSpectrum::from_symmetric(h)?, step)
    }

    pub fn apply_mean(&self, v: &DVector<f64>) -> DVector<f64> {
        self.spectrum.apply_coeffs(&self.mean_coeffs, v)
    }

    pub fn apply_noise(&self, xi: &DVector<f64>) -> DVector<f64> {
        self.spectrum.apply_coeffs(&self.noise_coeffs, xi)
    }

    pub fn mean_matrix(&self) -> DMatrix<f64> {
        self.spectrum.coeffs_to_matrix(&self.mean_coeffs)
    }

    /// `Σ_h` itself (the square of the noise factor).
    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let sq: Vec<f64> = self.noise_coeffs.iter().map(|c| c * c).collect();
        self.spectrum.coeffs_to_matrix(&sq)
    }

    fn step(&self, x: &DVector<f64>, grad: &DVector<f64>, xi: &DVector<f64>) -> DVector<f64> {
        x - self.apply_mean(grad) + self.apply_noise(xi)
    }
}

fn spectrum_at<T: TargetModel + ?Sized>(model: &T, x: &DVector<f64>) -> Result<HessianSpectrum> {
    if let Some(s) = model.structured_hessian(x) {
        return Ok(s);
    }
    let h = model
        .hessian(x)
        .ok_or_else(|| Error::Capability(format!("model '{}' has no Hessian", model.name())))?;
    HessianSpectrum::from_symmetric(&h)
}

pub fn lmc_step<T: TargetModel + ?Sized>(
    model: &T,
    x: &DVector<f64>,
    step: f64,
    xi: &DVector<f64>,
) -> DVector<f64> {
    let g = model.gradient(x);
    x - g * step + xi * (2.0 * step).sqrt()
}

pub fn lmco_step<T: TargetModel + ?Sized>(
    model: &T,
    x: &DVector<f64>,
    step: f64,
    xi: &DVector<f64>,
) -> Result<DVector<f64>> {
    let ops = OzakiOperators::new(spectrum_at(model, x)?, step)?;
    Ok(ops.step(x, &model.gradient(x), xi))
}

pub fn lmco2_step<T: TargetModel + ?Sized>(
    model: &T,
    x: &DVector<f64>,
    step: f64,
    xi: &DVector<f64>,
) -> Result<DVector<f64>> {
    let w = xi * (2.0 * step).sqrt() - model.gradient(x) * step;
    let hw = model
        .hessian_vec(x, &w)
        .ok_or_else(|| Error::Capability(format!("model '{}' has no Hessian", model.name())))?;
    Ok(x + &w - hw * (0.5 * step))
}

/// Draws from `N(mean, std² I)`.
pub fn init_gaussian(mean: &DVector<f64>, std: f64, rng: &mut ChaCha8Rng) -> DVector<f64> {
    mean + standard_normal(mean.len(), rng) * std
}

fn standard_normal(p: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Initial law of every chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitRule {
    Fixed { point: DVector<f64> },
    Gaussian { mean: DVector<f64>, std: f64 },
    /// `mean + L z` with `z ~ N(0, I)`, i.e. covariance `L Lᵀ`.
    Factor { mean: DVector<f64>, factor: DMatrix<f64> },
}

impl InitRule {
    /// `N(θ*, M⁻¹ I)`, the start the Gaussian-start bounds assume.
    pub fn gaussian_start(theta_star: DVector<f64>, big_m: f64) -> Self {
        InitRule::Gaussian {
            mean: theta_star,
            std: 1.0 / big_m.sqrt(),
        }
    }

    /// `N(mean, cov)` for a symmetric positive semi-definite `cov`.
    pub fn gaussian_cov(mean: DVector<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                found: cov.nrows(),
            });
        }
        let spectrum = HessianSpectrum::from_symmetric(cov)?;
        if spectrum.min_eigenvalue() < -1e-12 * spectrum.max_eigenvalue().abs() {
            return Err(Error::Matrix("covariance must be positive semi-definite".into()));
        }
        let root: Vec<f64> = spectrum.eigenvalues().iter().map(|l| l.max(0.0).sqrt()).collect();
        Ok(InitRule::Factor {
            mean,
            factor: spectrum.coeffs_to_matrix(&root),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            InitRule::Fixed { point } => point.len(),
            InitRule::Gaussian { mean, .. } => mean.len(),
            InitRule::Factor { mean, .. } => mean.len(),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        match self {
            InitRule::Fixed { point } => point.clone(),
            InitRule::Gaussian { mean, std } => init_gaussian(mean, *std, rng),
            InitRule::Factor { mean, factor } => mean + factor * standard_normal(mean.len(), rng),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub rule: UpdateRule,
    pub init: InitRule,
    pub seed: u64,
    /// Worker threads for ensembles. `None` uses the global rayon pool.
    pub threads: Option<usize>,
    /// Permits rules other than LMC on plans computed for a convexified target.
    pub allow_non_lmc_on_convexified: bool,
}

impl RunConfig {
    pub fn new(rule: UpdateRule, init: InitRule, seed: u64) -> Self {
        Self {
            rule,
            init,
            seed,
            threads: None,
            allow_non_lmc_on_convexified: false,
        }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads);
        self
    }
}

fn validate<T: TargetModel + ?Sized>(model: &T, plan: &SamplerPlan, config: &RunConfig) -> Result<()> {
    let p = model.dim();
    if config.init.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: config.init.dim(),
        });
    }
    if !(plan.step > 0.0 && plan.step.is_finite()) {
        return Err(Error::domain(format!("step size must be positive, got {}", plan.step)));
    }
    if plan.algo == Algorithm::LmcConvexified
        && config.rule != UpdateRule::Lmc
        && !config.allow_non_lmc_on_convexified
    {
        return Err(Error::Capability(format!(
            "plan for a convexified target is certified for LMC only, not {}",
            config.rule.as_str()
        )));
    }
    if config.rule.needs_hessian() && !model.has_hessian() {
        return Err(Error::Capability(format!(
            "rule {} needs a Hessian, model '{}' has none",
            config.rule.as_str(),
            model.name()
        )));
    }
    Ok(())
}

/// Runs chain `index` for `plan.iterations` steps, calling `observe(k, x_k)`
/// after every step `k = 1..=K`. Returns `x_K`.
pub fn run_chain_observed<T: TargetModel + ?Sized>(
    model: &T,
    plan: &SamplerPlan,
    config: &RunConfig,
    index: u64,
    mut observe: impl FnMut(u64, &DVector<f64>),
) -> Result<DVector<f64>> {
    validate(model, plan, config)?;
    let mut rng = chain_rng(config.seed, index);
    let p = model.dim();
    let h = plan.step;
    let mut x = config.init.draw(&mut rng);
    let cached = if config.rule == UpdateRule::Lmco && model.hessian_is_constant() {
        Some(OzakiOperators::new(spectrum_at(model, &x)?, h)?)
    } else {
        None
    };
    for k in 1..=plan.iterations {
        let xi = standard_normal(p, &mut rng);
        x = match (config.rule, &cached) {
            (UpdateRule::Lmc, _) => lmc_step(model, &x, h, &xi),
            (UpdateRule::Lmco, Some(ops)) => ops.step(&x, &model.gradient(&x), &xi),
            (UpdateRule::Lmco, None) => lmco_step(model, &x, h, &xi)?,
            (UpdateRule::Lmco2, _) => lmco2_step(model, &x, h, &xi)?,
        };
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence { step: k });
        }
        observe(k, &x);
    }
    Ok(x)
}

pub fn run_chain<T: TargetModel + ?Sized>(
    model: &T,
    plan: &SamplerPlan,
    config: &RunConfig,
    index: u64,
) -> Result<DVector<f64>> {
    run_chain_observed(model, plan, config, index, |_, _| {})
}

/// Runs `n_chains` independent chains and keeps each final state. Chain `i`
/// uses the seed derived from `(config.seed, i)`, so the result does not
/// depend on the thread count.
pub fn run_ensemble<T: TargetModel + ?Sized>(
    model: &T,
    plan: &SamplerPlan,
    n_chains: usize,
    config: &RunConfig,
) -> Result<SampleSet> {
    validate(model, plan, config)?;
    if n_chains == 0 {
        return Err(Error::domain("an ensemble needs at least one chain"));
    }
    let start = Instant::now();
    let work = || -> Vec<Result<DVector<f64>>> {
        (0..n_chains)
            .into_par_iter()
            .map(|i| run_chain(model, plan, config, i as u64))
            .collect()
    };
    let results = match config.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    let p = model.dim();
    let mut data = DMatrix::zeros(n_chains, p);
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(x) => data.row_mut(i).copy_from(&x.transpose()),
            Err(e) => failures.push((i, e)),
        }
    }
    if !failures.is_empty() {
        return Err(Error::Chains(failures));
    }
    let empirical_only = config.rule == UpdateRule::Lmco2;
    let mut plan = plan.clone();
    if empirical_only {
        plan.predicted_tv = f64::NAN;
    }
    Ok(SampleSet {
        data,
        meta: SampleMeta {
            seed: config.seed,
            plan,
            model: model.name(),
            rule: config.rule,
            empirical_only,
            n: n_chains,
            transform: None,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    })
}
