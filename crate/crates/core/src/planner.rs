//! Nonasymptotic total-variation bounds and the run plans derived from them.
//!
//! Every planner returns a [`SamplerPlan`] whose `predicted_tv` is the value of
//! the governing bound at the planned `(T, h)`, and which has been re-checked
//! against the preconditions under which that bound holds.
//!
//! | algorithm | horizon `T` | iterations |
//! |---|---|---|
//! | LMC, Gaussian start | `(4 ln(1/ε) + p ln(M/m)) / (2m)` | `⌈T/h⌉` |
//! | LMC, warm start | `(2 ln(1/ε) + ln χ²) / m` | `⌊T/h⌋ ≥ 2` |
//! | LMC on convexified target | `(4 ln(2/ε) + p ln(M̄/m̄)) / (2m̄)` | `⌈T/h⌉` |
//! | LMCO | `(4 ln(1/ε) + p ln(M/m)) / (2m)` | `⌊T/h⌋` |

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when re-checking closed-form equalities such as
/// `h = 1/(αM)` that hold exactly in real arithmetic.
const REL_TOL: f64 = 1e-12;

/// Serialises `NaN` as `null` and back, since JSON has no NaN.
mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "LMC")]
    Lmc,
    #[serde(rename = "LMC-warm")]
    LmcWarm,
    #[serde(rename = "LMC-convexified")]
    LmcConvexified,
    #[serde(rename = "LMCO")]
    Lmco,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Lmc => "LMC",
            Algorithm::LmcWarm => "LMC-warm",
            Algorithm::LmcConvexified => "LMC-convexified",
            Algorithm::Lmco => "LMCO",
        }
    }
}

/// The constants a plan was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanInputs {
    pub p: usize,
    #[serde(with = "nan_as_null")]
    pub m: f64,
    #[serde(rename = "M", with = "nan_as_null")]
    pub big_m: f64,
    #[serde(rename = "L_f", skip_serializing_if = "Option::is_none", default)]
    pub hessian_lipschitz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub chi2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mu2: Option<f64>,
}

/// Certified run parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerPlan {
    pub algo: Algorithm,
    /// Time horizon in diffusion time units.
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "h")]
    pub step: f64,
    #[serde(rename = "K")]
    pub iterations: u64,
    /// Only set for the Gaussian-start LMC plan.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alpha: Option<f64>,
    #[serde(with = "nan_as_null")]
    pub eps: f64,
    #[serde(with = "nan_as_null")]
    pub predicted_tv: f64,
    pub inputs: PlanInputs,
}

impl SamplerPlan {
    /// A plan with explicit step and iteration count and no guarantee attached.
    /// `predicted_tv` is `NaN`.
    pub fn manual(algo: Algorithm, step: f64, iterations: u64, p: usize) -> Self {
        SamplerPlan {
            algo,
            horizon: step * iterations as f64,
            step,
            iterations,
            alpha: None,
            eps: f64::NAN,
            predicted_tv: f64::NAN,
            inputs: PlanInputs {
                p,
                m: f64::NAN,
                big_m: f64::NAN,
                hessian_lipschitz: None,
                chi2: None,
                mu2: None,
            },
        }
    }

    /// Same step-size, different number of iterations. The guarantee no longer
    /// applies, so `predicted_tv` becomes `NaN`.
    pub fn with_iterations(&self, iterations: u64) -> Self {
        let mut plan = self.clone();
        plan.iterations = iterations;
        plan.horizon = plan.step * iterations as f64;
        plan.predicted_tv = f64::NAN;
        plan
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Bound on the chi-squared divergence and second moment of a warm-start law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarmStartSpec {
    /// Upper bound on `χ²(ν‖π)`.
    pub chi2_bound: f64,
    /// `μ₂ = (M/p) · E_ν‖ϑ − θ*‖²`.
    pub mu2: f64,
}

impl WarmStartSpec {
    pub fn new(chi2_bound: f64, mu2: f64) -> Result<Self> {
        if !(chi2_bound.is_finite() && chi2_bound > 0.0 && mu2.is_finite() && mu2 > 0.0) {
            return Err(Error::domain(format!(
                "warm start needs finite positive chi2 and mu2, got chi2={chi2_bound}, mu2={mu2}"
            )));
        }
        Ok(Self { chi2_bound, mu2 })
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 0.5 {
        Ok(())
    } else {
        Err(Error::domain(format!("eps must lie in (0, 1/2), got {eps}")))
    }
}

fn check_constants(m: f64, big_m: f64) -> Result<()> {
    if m > 0.0 && big_m.is_finite() && m <= big_m {
        Ok(())
    } else {
        Err(Error::domain(format!("need 0 < m <= M, got m={m}, M={big_m}")))
    }
}

fn check_dim(p: usize) -> Result<()> {
    if p >= 2 {
        Ok(())
    } else {
        Err(Error::domain(format!("dimension must be >= 2, got {p}")))
    }
}

fn leq(a: f64, b: f64) -> bool {
    a <= b * (1.0 + REL_TOL)
}

/// `½ exp{(p/4) ln(M/m) − Tm/2}`: TV between `π` and the diffusion at time
/// `T` started from `N(θ*, M⁻¹I)`. Evaluated in log space.
fn gaussian_start_mixing_term(horizon: f64, p: usize, m: f64, big_m: f64) -> f64 {
    0.5 * (0.25 * p as f64 * (big_m / m).ln() - 0.5 * horizon * m).exp()
}

/// `½ √χ² · e^{−tm/2}`.
pub fn mixing_bound(t: f64, m: f64, chi2: f64) -> Result<f64> {
    if !(m > 0.0) {
        return Err(Error::domain(format!("mixing bound needs m > 0, got {m}")));
    }
    if !(t >= 0.0) || !(chi2 >= 0.0) {
        return Err(Error::domain(format!("need t >= 0 and chi2 >= 0, got t={t}, chi2={chi2}")));
    }
    if chi2 == 0.0 {
        return Ok(0.0);
    }
    Ok(0.5 * (0.5 * chi2.ln() - 0.5 * t * m).exp())
}

/// `p M² T h α / (2(2α − 1))` with `T = Kh`: KL divergence between the
/// diffusion and its Euler discretisation from the Gaussian start.
pub fn kl_discretization_bound_gaussian_start(
    iterations: u64,
    step: f64,
    p: usize,
    m: f64,
    big_m: f64,
    alpha: f64,
) -> Result<f64> {
    check_constants(m, big_m)?;
    check_alpha(iterations as f64, step, big_m, alpha)?;
    let horizon = iterations as f64 * step;
    Ok(p as f64 * big_m * big_m * horizon * step * alpha / (2.0 * (2.0 * alpha - 1.0)))
}

fn check_alpha(iterations: f64, step: f64, big_m: f64, alpha: f64) -> Result<()> {
    if !(alpha >= 1.0) {
        return Err(Error::domain(format!("alpha must be >= 1, got {alpha}")));
    }
    if !(step > 0.0) || !leq(step, 1.0 / (alpha * big_m)) {
        return Err(Error::domain(format!(
            "need 0 < h <= 1/(alpha M) = {}, got h={step}",
            1.0 / (alpha * big_m)
        )));
    }
    if !leq(alpha, iterations) {
        return Err(Error::domain(format!(
            "need K >= alpha, got K={iterations}, alpha={alpha}"
        )));
    }
    Ok(())
}

/// TV bound for `K = T/h` LMC steps from `N(θ*, M⁻¹I)`:
/// `½ exp{(p/4) ln(M/m) − Tm/2} + √(p M² T h α / (4(2α − 1)))`.
pub fn tv_bound_lmc(
    horizon: f64,
    step: f64,
    p: usize,
    m: f64,
    big_m: f64,
    alpha: f64,
) -> Result<f64> {
    check_constants(m, big_m)?;
    if !(horizon > 0.0) {
        return Err(Error::domain(format!("horizon must be > 0, got {horizon}")));
    }
    check_alpha(horizon / step, step, big_m, alpha)?;
    let mixing = gaussian_start_mixing_term(horizon, p, m, big_m);
    let disc = (p as f64 * big_m * big_m * horizon * step * alpha / (4.0 * (2.0 * alpha - 1.0))).sqrt();
    Ok(mixing + disc)
}

/// Horizon `T`, lag `α` and step `h` of the Gaussian-start LMC plan, without
/// the `ε < ½` restriction.
fn lmc_schedule(p: usize, m: f64, big_m: f64, eps: f64) -> (f64, f64, f64) {
    let pf = p as f64;
    let horizon = (4.0 * (1.0 / eps).ln() + pf * (big_m / m).ln()) / (2.0 * m);
    let alpha = 0.5 * (1.0 + big_m * pf * horizon / (eps * eps));
    let step = eps * eps * (2.0 * alpha - 1.0) / (big_m * big_m * horizon * pf * alpha);
    (horizon, alpha, step)
}

/// Gaussian-start LMC plan with the lag `α = (1 + MpT/ε²)/2`, which makes
/// both summands of [`tv_bound_lmc`] equal to `ε/2` and `h = 1/(αM)`.
pub fn plan_lmc(p: usize, m: f64, big_m: f64, eps: f64) -> Result<SamplerPlan> {
    check_dim(p)?;
    check_constants(m, big_m)?;
    check_eps(eps)?;
    let (horizon, alpha, step) = lmc_schedule(p, m, big_m, eps);
    let iterations = (horizon / step).ceil() as u64;
    let predicted_tv = tv_bound_lmc(horizon, step, p, m, big_m, alpha)?;
    finish(SamplerPlan {
        algo: Algorithm::Lmc,
        horizon,
        step,
        iterations,
        alpha: Some(alpha),
        eps,
        predicted_tv,
        inputs: PlanInputs {
            p,
            m,
            big_m,
            hessian_lipschitz: None,
            chi2: None,
            mu2: None,
        },
    })
}

/// Warm-start TV bound:
/// `½ exp{(ln χ² − Tm)/2} + √((M³h² E‖ϑ⁰ − θ*‖² + 6pM²Th)/36)`, with
/// `E‖ϑ⁰ − θ*‖² = p μ₂ / M`.
pub fn tv_bound_lmc_warm(
    horizon: f64,
    step: f64,
    p: usize,
    m: f64,
    big_m: f64,
    warm: &WarmStartSpec,
) -> Result<f64> {
    check_constants(m, big_m)?;
    if !(horizon > 0.0 && step > 0.0) || !leq(step, 0.5 / big_m) {
        return Err(Error::domain(format!(
            "warm-start bound needs T > 0 and 0 < h <= 1/(2M), got T={horizon}, h={step}"
        )));
    }
    let pf = p as f64;
    let mixing = mixing_bound(horizon, m, warm.chi2_bound)?;
    let second_moment = pf * warm.mu2 / big_m;
    let kl2 = big_m.powi(3) * step * step * second_moment + 6.0 * pf * big_m * big_m * horizon * step;
    Ok(mixing + (kl2 / 36.0).sqrt())
}

/// LMC plan for an initial law `ν` with known `χ²(ν‖π)` and second moment.
pub fn plan_lmc_warm(
    p: usize,
    m: f64,
    big_m: f64,
    eps: f64,
    warm: &WarmStartSpec,
) -> Result<SamplerPlan> {
    check_dim(p)?;
    check_constants(m, big_m)?;
    check_eps(eps)?;
    let warm = WarmStartSpec::new(warm.chi2_bound, warm.mu2)?;
    let pf = p as f64;
    let horizon = (2.0 * (1.0 / eps).ln() + warm.chi2_bound.ln()) / m;
    if !(horizon > 0.0) {
        return Err(Error::Infeasible(format!(
            "warm-start horizon {horizon} is not positive (chi2 bound too small)"
        )));
    }
    let step = 9.0 * eps * eps / (horizon * big_m * big_m * pf * (6.0 + warm.mu2));
    let iterations = (horizon / step).floor() as u64;
    if iterations < 2 {
        return Err(Error::Infeasible(format!(
            "warm-start plan needs K = [T/h] >= 2, got {iterations}"
        )));
    }
    let predicted_tv = tv_bound_lmc_warm(horizon, step, p, m, big_m, &warm)?;
    finish(SamplerPlan {
        algo: Algorithm::LmcWarm,
        horizon,
        step,
        iterations,
        alpha: None,
        eps,
        predicted_tv,
        inputs: PlanInputs {
            p,
            m,
            big_m,
            hessian_lipschitz: None,
            chi2: Some(warm.chi2_bound),
            mu2: Some(warm.mu2),
        },
    })
}

/// TV bound for LMCO from `N(θ*, M⁻¹I)`:
/// `½ exp{(p/4) ln(M/m) − Tm/2} + √(L_f² T h² p² (0.267 M² h T + 0.375))`.
pub fn tv_bound_lmco(
    horizon: f64,
    step: f64,
    p: usize,
    m: f64,
    big_m: f64,
    hessian_lipschitz: f64,
) -> Result<f64> {
    check_dim(p)?;
    check_constants(m, big_m)?;
    if !(step > 0.0) || !leq(step, 1.0 / (8.0 * big_m)) {
        return Err(Error::domain(format!(
            "LMCO bound needs 0 < h <= 1/(8M), got h={step}"
        )));
    }
    if !leq(4.0 / (3.0 * big_m), horizon) {
        return Err(Error::domain(format!(
            "LMCO bound needs T >= 4/(3M), got T={horizon}"
        )));
    }
    if !(hessian_lipschitz >= 0.0) {
        return Err(Error::domain("L_f must be >= 0"));
    }
    let pf = p as f64;
    let mixing = gaussian_start_mixing_term(horizon, p, m, big_m);
    let disc = (hessian_lipschitz.powi(2)
        * horizon
        * step
        * step
        * pf
        * pf
        * (0.267 * big_m * big_m * step * horizon + 0.375))
        .sqrt();
    Ok(mixing + disc)
}

/// LMCO plan: `h⁻¹ = max{(6 L_f M T p/ε)^{2/3}, 1.25 √T L_f p/ε, 8M}`.
pub fn plan_lmco(
    p: usize,
    m: f64,
    big_m: f64,
    hessian_lipschitz: f64,
    eps: f64,
) -> Result<SamplerPlan> {
    check_dim(p)?;
    check_constants(m, big_m)?;
    check_eps(eps)?;
    if !(hessian_lipschitz >= 0.0 && hessian_lipschitz.is_finite()) {
        return Err(Error::domain(format!("L_f must be finite and >= 0, got {hessian_lipschitz}")));
    }
    let pf = p as f64;
    let lf = hessian_lipschitz;
    let horizon = (4.0 * (1.0 / eps).ln() + pf * (big_m / m).ln()) / (2.0 * m);
    let inv_step = (6.0 * lf * big_m * horizon * pf / eps)
        .powf(2.0 / 3.0)
        .max(1.25 * horizon.sqrt() * lf * pf / eps)
        .max(8.0 * big_m);
    let step = 1.0 / inv_step;
    let iterations = (horizon / step).floor() as u64;
    let predicted_tv = tv_bound_lmco(horizon, step, p, m, big_m, lf)?;
    finish(SamplerPlan {
        algo: Algorithm::Lmco,
        horizon,
        step,
        iterations,
        alpha: None,
        eps,
        predicted_tv,
        inputs: PlanInputs {
            p,
            m,
            big_m,
            hessian_lipschitz: Some(lf),
            chi2: None,
            mu2: None,
        },
    })
}

/// LMC plan for the convexified potential `f̄` with constants `(m̄, M̄)`.
///
/// The sampling error against `π̄` is held to `ε/2`; the remaining `ε/2` is
/// the approximation budget `‖π̄ − π‖_TV` that the choice of `γ` must cover
/// (see [`crate::transforms::convexified_tv_budget`]). `predicted_tv` reports
/// the sampling bound plus that reserved `ε/2`.
pub fn plan_convexified(p: usize, barm: f64, bar_big_m: f64, eps: f64) -> Result<SamplerPlan> {
    check_dim(p)?;
    check_constants(barm, bar_big_m)?;
    check_eps(eps)?;
    let pf = p as f64;
    let horizon = (4.0 * (2.0 / eps).ln() + pf * (bar_big_m / barm).ln()) / (2.0 * barm);
    let step = eps * eps / (4.0 * bar_big_m * bar_big_m * horizon * pf);
    let iterations = (horizon / step).ceil() as u64;
    let sampling = tv_bound_lmc(iterations as f64 * step, step, p, barm, bar_big_m, 1.0)?;
    finish(SamplerPlan {
        algo: Algorithm::LmcConvexified,
        horizon,
        step,
        iterations,
        alpha: None,
        eps,
        predicted_tv: sampling + 0.5 * eps,
        inputs: PlanInputs {
            p,
            m: barm,
            big_m: bar_big_m,
            hessian_lipschitz: None,
            chi2: None,
            mu2: None,
        },
    })
}

fn finish(plan: SamplerPlan) -> Result<SamplerPlan> {
    if !(plan.horizon.is_finite() && plan.step.is_finite() && plan.step > 0.0) {
        return Err(Error::Numerical(format!(
            "planner produced non-finite values: T={}, h={}",
            plan.horizon, plan.step
        )));
    }
    if !leq(plan.predicted_tv, plan.eps) {
        return Err(Error::Infeasible(format!(
            "predicted TV {} exceeds eps {}",
            plan.predicted_tv, plan.eps
        )));
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn mixing_bound_values() {
        assert!(close(mixing_bound(0.0, 1.0, 4.0).unwrap(), 1.0, 1e-15));
        let t = 2.0 * 10f64.ln();
        assert!(close(mixing_bound(t, 1.0, 1.0).unwrap(), 0.05, 1e-14));
        // chi2 = (M/m)^{p/2} with p = 4, M/m = 2 and t·m = 4.
        let v = mixing_bound(4.0, 1.0, 2f64.powi(2)).unwrap();
        assert!(close(v, (-2f64).exp(), 1e-14));
        assert!(mixing_bound(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn kl_bound_values() {
        let kl = kl_discretization_bound_gaussian_start(10, 0.1, 2, 1.0, 1.0, 1.0).unwrap();
        assert!(close(kl, 0.1, 1e-14));
        // α/(2α−1) → ½ as α grows: at α=K=10⁶ the coefficient is ~½ of the α=1 value.
        let big = kl_discretization_bound_gaussian_start(1_000_000, 1e-6, 2, 1.0, 1.0, 1e6).unwrap();
        let unit = kl_discretization_bound_gaussian_start(1_000_000, 1e-6, 2, 1.0, 1.0, 1.0).unwrap();
        assert!(close(big / unit, 0.5, 1e-6));
        // h → 0 at fixed T = Kh.
        let small = kl_discretization_bound_gaussian_start(100_000, 1e-5, 2, 1.0, 1.0, 1.0).unwrap();
        assert!(small < 1e-4);
        assert!(kl_discretization_bound_gaussian_start(10, 0.6, 2, 1.0, 1.0, 2.0).is_err());
        assert!(kl_discretization_bound_gaussian_start(1, 0.1, 2, 1.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn tv_lmc_well_conditioned_first_term() {
        let eps: f64 = 0.05;
        let t = 2.0 * (1.0 / eps).ln();
        let h = 1e-3;
        let v = tv_bound_lmc(t, h, 5, 1.0, 1.0, 1.0).unwrap();
        let disc = (5.0 * t * h / 4.0).sqrt();
        assert!(close(v - disc, eps / 2.0, 1e-12));
    }

    #[test]
    fn tv_lmc_doubling_step() {
        let (t, p) = (10.0, 3);
        let a = tv_bound_lmc(t, 1e-3, p, 1.0, 1.0, 1.0).unwrap();
        let b = tv_bound_lmc(t, 2e-3, p, 1.0, 1.0, 1.0).unwrap();
        let mix = gaussian_start_mixing_term(t, p, 1.0, 1.0);
        assert!(close((b - mix) / (a - mix), 2f64.sqrt(), 1e-12));
    }

    #[test]
    fn lmc_schedule_by_hand() {
        // p=2, m=M=1, ε=½: T = 2 ln 2, α = (1 + 8T)/2, h = ε²(2α−1)/(Tpα).
        let (t, alpha, h) = lmc_schedule(2, 1.0, 1.0, 0.5);
        assert!(close(t, 2.0 * 2f64.ln(), 1e-15));
        assert!(close(alpha, 6.045_177_444_479_562, 1e-12));
        assert!(close(h, 0.165_421_116_118, 1e-9));
        assert_eq!((t / h).ceil() as u64, 9);
        // ε = ½ is outside the open range the bound allows.
        assert!(plan_lmc(2, 1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn plan_lmc_mixture_p8() {
        let plan = plan_lmc(8, 0.5, 1.0, 0.1).unwrap();
        assert!((plan.iterations as f64 / 87e3 - 1.0).abs() < 0.02, "{}", plan.iterations);
        assert!(leq(plan.step, 1.0 / (plan.alpha.unwrap() * 1.0)));
        assert!(plan.predicted_tv <= 0.1 * (1.0 + 1e-12));
        // Both summands of the bound sit at ε/2.
        let mix = gaussian_start_mixing_term(plan.horizon, 8, 0.5, 1.0);
        assert!(close(mix, 0.05, 1e-12));
    }

    #[test]
    fn plan_lmc_rejects_bad_eps() {
        for eps in [0.0, 0.5, 0.6, -0.1] {
            assert!(matches!(plan_lmc(8, 0.5, 1.0, eps), Err(Error::Domain(_))));
        }
        assert!(plan_lmc(1, 0.5, 1.0, 0.1).is_err());
        assert!(plan_lmc(4, 2.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn warm_plan_by_hand() {
        let warm = WarmStartSpec::new(1.0, 1.0).unwrap();
        let plan = plan_lmc_warm(2, 1.0, 1.0, 0.1, &warm).unwrap();
        assert!(close(plan.horizon, 2.0 * 10f64.ln(), 1e-14));
        let h = 0.09 / (plan.horizon * 2.0 * 7.0);
        assert!(close(plan.step, h, 1e-14));
        assert!(close(plan.step, 1.396e-3, 1e-3));
        assert_eq!(plan.iterations, 3298);
        assert!(plan.predicted_tv <= 0.1);
    }

    #[test]
    fn warm_plan_scalings() {
        let warm = WarmStartSpec::new(1.0, 1.0).unwrap();
        let a = plan_lmc_warm(4, 1.0, 1.0, 0.1, &warm).unwrap();
        let b = plan_lmc_warm(8, 1.0, 1.0, 0.1, &warm).unwrap();
        assert!(close(a.horizon, b.horizon, 1e-15));
        assert!(close(a.step / b.step, 2.0, 1e-14));

        let e2 = WarmStartSpec::new(2f64.exp(), 1.0).unwrap();
        let m = 0.5;
        let base = plan_lmc_warm(4, m, 1.0, 0.1, &warm).unwrap();
        let more = plan_lmc_warm(4, m, 1.0, 0.1, &e2).unwrap();
        assert!(close(more.horizon - base.horizon, 2.0 / m, 1e-12));
    }

    #[test]
    fn warm_plan_infeasible_when_too_short() {
        // χ² tiny enough that T ≤ 0.
        let warm = WarmStartSpec::new(1e-4, 1.0).unwrap();
        assert!(matches!(
            plan_lmc_warm(2, 1.0, 1.0, 0.4, &warm),
            Err(Error::Infeasible(_))
        ));
        assert!(WarmStartSpec::new(f64::INFINITY, 1.0).is_err());
    }

    #[test]
    fn lmco_plan_mixture_p8() {
        let lf = 0.5 * 0.5f64.powf(1.5);
        let plan = plan_lmco(8, 0.5, 1.0, lf, 0.1).unwrap();
        assert!(close(plan.horizon, 14.755_5, 1e-5));
        assert!(close(1.0 / plan.step, 116.2, 1e-3));
        assert!((plan.iterations as i64 - 1715).abs() <= 1, "{}", plan.iterations);
        let disc = plan.predicted_tv - gaussian_start_mixing_term(plan.horizon, 8, 0.5, 1.0);
        assert!(disc <= 0.05);
    }

    #[test]
    fn lmco_gaussian_target_only_mixing() {
        let plan = plan_lmco(3, 0.5, 2.0, 0.0, 0.1).unwrap();
        assert!(close(plan.step, 1.0 / 16.0, 1e-15));
        assert_eq!(plan.iterations, (16.0 * plan.horizon).floor() as u64);
        let mix = gaussian_start_mixing_term(plan.horizon, 3, 0.5, 2.0);
        assert!(close(plan.predicted_tv, mix, 1e-15));
    }

    #[test]
    fn lmco_first_branch_power_law() {
        let (p, m, big_m, lf) = (4, 1.0_f64, 1.0_f64, 5.0_f64);
        let branch = |eps: f64| {
            let t = (4.0 * (1.0 / eps).ln() + p as f64 * (big_m / m).ln()) / (2.0 * m);
            (6.0 * lf * big_m * t * p as f64 / eps).powf(2.0 / 3.0) / t.powf(2.0 / 3.0)
        };
        assert!(close(branch(0.01 / 8.0) / branch(0.01), 4.0, 1e-12));
    }

    #[test]
    fn convexified_plan_by_hand() {
        // m̄ = M̄ = 1, p = 2, ε = 0.2: T = 2 ln 10, h = ε²/(8T), K = ⌈8T²/ε²⌉.
        let plan = plan_convexified(2, 1.0, 1.0, 0.2).unwrap();
        let t = 2.0 * 10f64.ln();
        assert!(close(plan.horizon, t, 1e-14));
        assert!(close(plan.step, 0.04 / (8.0 * t), 1e-14));
        assert_eq!(plan.iterations, 4242);
        assert!(plan.predicted_tv <= 0.2 * (1.0 + 1e-12));
    }

    #[test]
    fn convexified_scalings() {
        let a = plan_convexified(3, 0.5, 2.0, 0.2).unwrap();
        let b = plan_convexified(3, 0.5, 2.0, 0.1).unwrap();
        let shift = 4.0 * 2f64.ln() / (2.0 * 0.5);
        assert!(close(b.horizon - a.horizon, shift, 1e-12));
        assert!(close(a.step / b.step, 4.0 * b.horizon / a.horizon, 1e-12));

        let c = plan_convexified(3, 0.5, 4.0, 0.2).unwrap();
        // Doubling M̄ quarters h at equal T; T itself moves through ln(M̄/m̄).
        assert!(close(a.step / c.step, 4.0 * c.horizon / a.horizon, 1e-12));
    }

    #[test]
    fn plan_json_field_names() {
        let plan = plan_lmc(8, 0.5, 1.0, 0.1).unwrap();
        let v: serde_json::Value = serde_json::from_str(&plan.to_json().unwrap()).unwrap();
        for key in ["algo", "T", "h", "K", "alpha", "eps", "predicted_tv", "inputs"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["algo"], "LMC");
        let back: SamplerPlan = serde_json::from_value(v).unwrap();
        assert_eq!(back, plan);

        let manual = SamplerPlan::manual(Algorithm::Lmco, 0.01, 10, 2);
        let back: SamplerPlan = serde_json::from_str(&manual.to_json().unwrap()).unwrap();
        assert!(back.predicted_tv.is_nan() && back.eps.is_nan());
        assert_eq!(back.iterations, 10);
    }
}
