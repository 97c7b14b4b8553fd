//! End-to-end pipelines shared by the command-line tool and the test suites.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{marginal_distances, MarginalSummaryDistances};
use crate::error::{Error, Result};
use crate::planner::{plan_convexified, plan_lmc, plan_lmco, SamplerPlan};
use crate::samplers::{run_ensemble, InitRule, RunConfig, UpdateRule};
use crate::samples::SampleSet;
use crate::targets::logistic::{default_lambda, LogisticData, LogisticGenConfig, LogisticModel, RadiusChoice};
use crate::targets::GaussianMixtureTarget;
use crate::transforms::map_back;

/// Which Hessian-Lipschitz constant the mixture LMCO plans use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MixtureLipschitz {
    /// `‖a‖³/2`.
    #[default]
    Reference,
    /// `4‖a‖³/(3√3)`, valid for every `a`.
    Sharp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub p: usize,
    pub algo: String,
    #[serde(rename = "K")]
    pub iterations: u64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub h: f64,
}

/// Iteration counts of LMC and LMCO on the mixture with `‖a‖² = ½`
/// (`m = ½`, `M = 1`) for each dimension in `p_list`.
pub fn table1(p_list: &[usize], eps: f64, lipschitz: MixtureLipschitz) -> Result<Vec<Table1Row>> {
    let mut rows = Vec::with_capacity(2 * p_list.len());
    for &p in p_list {
        let target = GaussianMixtureTarget::with_norm_sq(p, 0.5)?;
        let lf = match lipschitz {
            MixtureLipschitz::Reference => target.reference_hessian_lipschitz(),
            MixtureLipschitz::Sharp => target.sharp_hessian_lipschitz(),
        };
        for plan in [plan_lmc(p, 0.5, 1.0, eps)?, plan_lmco(p, 0.5, 1.0, lf, eps)?] {
            rows.push(Table1Row {
                p,
                algo: plan.algo.as_str().to_string(),
                iterations: plan.iterations,
                horizon: plan.horizon,
                h: plan.step,
            });
        }
    }
    Ok(rows)
}

/// Iteration counts with and without convexification for one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KkTrial {
    pub seed: u64,
    pub lambda: f64,
    #[serde(rename = "K")]
    pub k: u64,
    #[serde(rename = "K_prime")]
    pub k_prime: u64,
    pub radius: RadiusChoice,
}

/// Generates a dataset, then plans LMC for the whitened posterior
/// (`m = λ`, `M = λ + n/4`) and for its convexified version.
pub fn logistic_kk_trial(p: usize, n: usize, eps: f64, seed: u64) -> Result<KkTrial> {
    let data = LogisticData::generate(&LogisticGenConfig::new(p, n, seed))?;
    let lambda = default_lambda(p);
    let model = LogisticModel::new(data, lambda)?;
    let cert = model.certificate;
    let k = plan_lmc(p, cert.m, cert.big_m, eps)?.iterations;
    let eta_star = model.mode()?.theta_star;
    let radius = model.optimal_radius(&eta_star, eps)?;
    let (_, bar) = model.convexified(&eta_star, &radius)?;
    let k_prime = plan_convexified(p, bar.m, bar.big_m, eps)?.iterations;
    Ok(KkTrial {
        seed,
        lambda,
        k,
        k_prime,
        radius,
    })
}

/// Mean `(K, K′)` over `trials` datasets seeded `seed, seed+1, …`.
pub fn logistic_kk(p: usize, n: usize, eps: f64, trials: usize, seed: u64) -> Result<(Vec<KkTrial>, f64, f64)> {
    if trials == 0 {
        return Err(Error::domain("need at least one trial"));
    }
    let mut out = Vec::with_capacity(trials);
    for t in 0..trials {
        out.push(logistic_kk_trial(p, n, eps, seed.wrapping_add(t as u64))?);
    }
    let mean_k = out.iter().map(|t| t.k as f64).sum::<f64>() / trials as f64;
    let mean_kp = out.iter().map(|t| t.k_prime as f64).sum::<f64>() / trials as f64;
    Ok((out, mean_k, mean_kp))
}

/// Step-size schedule for the LMC arm of [`lmco2_compare`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ComparePlan {
    /// Both samplers use the LMCO plan.
    #[default]
    Shared,
    /// LMC uses its own certified Gaussian-start plan.
    Certified,
}

#[derive(Debug, Clone)]
pub struct Lmco2Comparison {
    pub lmc_plan: SamplerPlan,
    pub lmco2_plan: SamplerPlan,
    pub lmc: SampleSet,
    pub lmco2: SampleSet,
    pub distances: MarginalSummaryDistances,
}

#[derive(Debug, Clone)]
pub struct Lmco2CompareConfig {
    pub p: usize,
    pub n: usize,
    pub eps: f64,
    pub n_mc: usize,
    pub seed: u64,
    pub threads: Option<usize>,
    pub plan: ComparePlan,
}

/// Samples the logistic posterior with LMC and LMCO′ from `N(η*, M⁻¹I)`,
/// maps both sample sets back to `θ = Aη` and compares their marginals.
/// The two arms use independent random streams.
pub fn lmco2_compare(cfg: &Lmco2CompareConfig) -> Result<Lmco2Comparison> {
    let data = LogisticData::generate(&LogisticGenConfig::new(cfg.p, cfg.n, cfg.seed))?;
    let model = LogisticModel::new(data, default_lambda(cfg.p))?;
    let cert = model.certificate;
    let lf = cert.hessian_lipschitz.unwrap_or(0.0);
    let lmco2_plan = plan_lmco(cfg.p, cert.m, cert.big_m, lf, cfg.eps)?;
    let lmc_plan = match cfg.plan {
        ComparePlan::Shared => lmco2_plan.clone(),
        ComparePlan::Certified => plan_lmc(cfg.p, cert.m, cert.big_m, cfg.eps)?,
    };
    let eta_star: DVector<f64> = model.mode()?.theta_star;
    let init = InitRule::gaussian_start(eta_star, cert.big_m);
    let run = |rule: UpdateRule, plan: &SamplerPlan, seed: u64| -> Result<SampleSet> {
        let mut config = RunConfig::new(rule, init.clone(), seed);
        config.threads = cfg.threads;
        let eta = run_ensemble(&model.target, plan, cfg.n_mc, &config)?;
        map_back(&eta, &model.preconditioner)
    };
    let lmc = run(UpdateRule::Lmc, &lmc_plan, cfg.seed)?;
    let lmco2 = run(UpdateRule::Lmco2, &lmco2_plan, crate::rng::splitmix64(cfg.seed ^ 0x5eed))?;
    let distances = marginal_distances(&lmc.data, &lmco2.data)?;
    Ok(Lmco2Comparison {
        lmc_plan,
        lmco2_plan,
        lmc,
        lmco2,
        distances,
    })
}
