//! `lmc sample --config run.json`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use lmc_core::io::{coordinate_header, write_matrix_csv};
use lmc_core::rng::chain_seed;
use lmc_core::samples::sidecar_path;
use lmc_core::targets::logistic::default_lambda;
use lmc_core::{
    map_back, plan_convexified, plan_lmc, plan_lmco, run_ensemble, GaussianMixtureTarget, InitRule,
    LogisticData, LogisticGenConfig, LogisticModel, RunConfig, SampleSet, SamplerPlan,
    UpdateRule,
};

use crate::{effective_seed, CliResult, Failure};

fn half() -> f64 {
    0.5
}

fn default_eps() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LipschitzChoice {
    #[default]
    Sharp,
    Reference,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generate {
    pub p: usize,
    pub n: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_true: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetSpec {
    /// Two-component mixture with `a = (c, …, c)`, `‖a‖² = a_norm_sq`.
    Mixture {
        p: usize,
        #[serde(default = "half")]
        a_norm_sq: f64,
        #[serde(default)]
        lipschitz: LipschitzChoice,
    },
    /// Exact draws from the same mixture.
    DirectMixture {
        p: usize,
        #[serde(default = "half")]
        a_norm_sq: f64,
    },
    /// Bayesian logistic regression, from CSV files or generated.
    Logistic {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        y: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        generate: Option<Generate>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<f64>,
        #[serde(default)]
        convexify: bool,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub target: TargetSpec,
    /// Required except for `direct-mixture`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algo: Option<UpdateRule>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub output: PathBuf,
    /// Replaces the planned iteration count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<u64>,
    /// Replaces the planned step size. The run then carries no TV guarantee.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

pub fn load(path: &Path) -> CliResult<SampleConfig> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn apply_overrides(plan: SamplerPlan, cfg: &SampleConfig) -> SamplerPlan {
    let k = cfg.iterations.unwrap_or(plan.iterations);
    match cfg.step {
        Some(h) => SamplerPlan::manual(plan.algo, h, k, plan.inputs.p),
        None if cfg.iterations.is_some() => plan.with_iterations(k),
        None => plan,
    }
}

fn write_with_config(set: &SampleSet, path: &Path, config: &Value) -> CliResult<()> {
    set.write(path)?;
    let mut meta = serde_json::to_value(&set.meta)?;
    meta["config"] = config.clone();
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

pub fn run(config_path: &Path, seed_flag: Option<u64>, threads: Option<usize>) -> CliResult<()> {
    let mut cfg = load(config_path)?;
    cfg.seed = effective_seed(seed_flag.unwrap_or(cfg.seed))?;
    if cfg.n == 0 {
        return Err(Failure::usage("N must be at least 1"));
    }
    let base = config_path.parent().unwrap_or(Path::new("."));
    let output = resolve(base, &cfg.output);
    let recorded = serde_json::to_value(&cfg)?;
    let rule = || {
        cfg.algo
            .ok_or_else(|| Failure::usage("'algo' is required for this target"))
    };
    let with_threads = |mut rc: RunConfig| {
        rc.threads = threads;
        rc
    };

    match &cfg.target {
        TargetSpec::DirectMixture { p, a_norm_sq } => {
            let target = GaussianMixtureTarget::with_norm_sq(*p, *a_norm_sq)?;
            let start = Instant::now();
            let mut rng = ChaCha8Rng::seed_from_u64(chain_seed(cfg.seed, 0));
            let data = target.direct_samples(cfg.n, &mut rng);
            write_matrix_csv(&output, &data, Some(&coordinate_header(*p)))?;
            let meta = json!({
                "seed": cfg.seed,
                "model": "direct mixture",
                "N": cfg.n,
                "wall_time_s": start.elapsed().as_secs_f64(),
                "config": recorded,
            });
            std::fs::write(sidecar_path(&output), serde_json::to_string_pretty(&meta)?)?;
        }
        TargetSpec::Mixture {
            p,
            a_norm_sq,
            lipschitz,
        } => {
            let rule = rule()?;
            let target = GaussianMixtureTarget::with_norm_sq(*p, *a_norm_sq)?;
            let cert = target.certificate()?;
            let plan = match rule {
                UpdateRule::Lmc => plan_lmc(*p, cert.m, cert.big_m, cfg.eps),
                UpdateRule::Lmco | UpdateRule::Lmco2 => {
                    let lf = match lipschitz {
                        LipschitzChoice::Sharp => target.sharp_hessian_lipschitz(),
                        LipschitzChoice::Reference => target.reference_hessian_lipschitz(),
                    };
                    plan_lmco(*p, cert.m, cert.big_m, lf, cfg.eps)
                }
            }
            .map_err(Failure::plan)?;
            let plan = apply_overrides(plan, &cfg);
            let init = InitRule::gaussian_start(target.theta_star(), cert.big_m);
            let rc = with_threads(RunConfig::new(rule, init, cfg.seed));
            let set = run_ensemble(&target, &plan, cfg.n, &rc)?;
            write_with_config(&set, &output, &recorded)?;
        }
        TargetSpec::Logistic {
            x,
            y,
            generate,
            lambda,
            convexify,
        } => {
            let rule = rule()?;
            let data = match (x, y, generate) {
                (Some(x), Some(y), None) => LogisticData::read(resolve(base, x), resolve(base, y))?,
                (None, None, Some(g)) => {
                    let mut gen = LogisticGenConfig::new(g.p, g.n, g.seed);
                    gen.theta_true = g.theta_true.clone().map(DVector::from_vec);
                    LogisticData::generate(&gen)?
                }
                _ => {
                    return Err(Failure::usage(
                        "logistic target needs either 'x' and 'y' files or a 'generate' block",
                    ))
                }
            };
            let p = data.p();
            let model = LogisticModel::new(data, lambda.unwrap_or_else(|| default_lambda(p)))?;
            let eta_star = model.mode()?.theta_star;
            let cert = model.certificate;
            let set = if *convexify {
                if rule != UpdateRule::Lmc {
                    return Err(Failure::usage(
                        "convexified targets are certified for algo 'lmc' only",
                    ));
                }
                let choice = model.optimal_radius(&eta_star, cfg.eps)?;
                let (bar, bar_cert) = model.convexified(&eta_star, &choice)?;
                let plan = plan_convexified(p, bar_cert.m, bar_cert.big_m, cfg.eps).map_err(Failure::plan)?;
                let plan = apply_overrides(plan, &cfg);
                let init = InitRule::gaussian_start(eta_star.clone(), bar_cert.big_m);
                run_ensemble(&bar, &plan, cfg.n, &with_threads(RunConfig::new(rule, init, cfg.seed)))?
            } else {
                let plan = match rule {
                    UpdateRule::Lmc => plan_lmc(p, cert.m, cert.big_m, cfg.eps),
                    _ => plan_lmco(p, cert.m, cert.big_m, cert.hessian_lipschitz.unwrap_or(0.0), cfg.eps),
                }
                .map_err(Failure::plan)?;
                let plan = apply_overrides(plan, &cfg);
                let init = InitRule::gaussian_start(eta_star.clone(), cert.big_m);
                run_ensemble(
                    &model.target,
                    &plan,
                    cfg.n,
                    &with_threads(RunConfig::new(rule, init, cfg.seed)),
                )?
            };
            let theta = map_back(&set, &model.preconditioner)?;
            write_with_config(&theta, &output, &recorded)?;
        }
    }
    Ok(())
}
