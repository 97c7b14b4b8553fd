//! Langevin Monte Carlo samplers for log-concave densities, with step-size and
//! horizon planners that certify a total-variation accuracy.
//!
//! A run has three pieces: a [`TargetModel`] exposing `f`, `∇f` and optionally
//! `∇²f`; a [`ConvexityCertificate`] `(m, M, L_f)`; and a [`SamplerPlan`] from
//! one of the planners. [`run_ensemble`] then draws independent chains.
//!
//! ```
//! use lmc_core::{plan_lmc, targets::Quadratic, ConvexityCertificate, run_ensemble, RunConfig, UpdateRule, InitRule};
//! use nalgebra::DVector;
//!
//! let target = Quadratic::isotropic(2, 1.0);
//! let cert = ConvexityCertificate::new(1.0, 1.0).unwrap();
//! let plan = plan_lmc(2, cert.m, cert.big_m, 0.2).unwrap();
//! let config = RunConfig::new(UpdateRule::Lmc, InitRule::gaussian_start(DVector::zeros(2), cert.big_m), 7);
//! let samples = run_ensemble(&target, &plan.with_iterations(50), 16, &config).unwrap();
//! assert_eq!(samples.len(), 16);
//! ```

pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod io;
pub mod model;
pub mod planner;
pub mod rng;
pub mod samplers;
pub mod samples;
pub mod spectrum;
pub mod targets;
pub mod transforms;

pub use error::{Error, Result};
pub use model::{
    certificate_probe, fd_gradient_check, fd_hessian_check, minimize_gd, ConvexityCertificate,
    FnModel, ProbeReport, StationaryPoint, TargetModel,
};
pub use planner::{
    kl_discretization_bound_gaussian_start, mixing_bound, plan_convexified, plan_lmc, plan_lmc_warm,
    plan_lmco, tv_bound_lmc, tv_bound_lmc_warm, tv_bound_lmco, Algorithm, PlanInputs, SamplerPlan,
    WarmStartSpec,
};
pub use samplers::{
    init_gaussian, lmc_step, lmco2_step, lmco_step, run_chain, run_ensemble, InitRule,
    OzakiOperators, RunConfig, UpdateRule,
};
pub use samples::SampleSet;
pub use spectrum::HessianSpectrum;
pub use targets::{GaussianMixtureTarget, LogisticData, LogisticGenConfig, LogisticModel, Quadratic};
pub use transforms::{
    convexified_tv_budget, convexify, map_back, precondition, Convexified, ConvexifySpec,
    Preconditioned, Preconditioner,
};
