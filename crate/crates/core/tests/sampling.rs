use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lmc_core::diagnostics::{ks_distance, moment_check, project};
use lmc_core::{
    lmc_step, lmco2_step, lmco_step, map_back, precondition, run_chain, run_ensemble, Algorithm,
    GaussianMixtureTarget, InitRule, OzakiOperators, Preconditioner, Quadratic, RunConfig,
    SampleSet, SamplerPlan, TargetModel, UpdateRule,
};

fn zeros(p: usize) -> InitRule {
    InitRule::Fixed {
        point: DVector::zeros(p),
    }
}

#[test]
fn direct_mixture_sampler_passes_ks_and_moments() {
    let t = GaussianMixtureTarget::with_norm_sq(3, 0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let data = t.direct_samples(2500, &mut rng);
    let proj = project(&data, &t.direction()).unwrap();
    assert!(ks_distance(&proj, |x| t.projection_cdf(x)) <= 0.04);
    let report = moment_check(&data, &t.mean(), &t.covariance()).unwrap();
    assert!(report.pass, "{report:?}");

    let shifted = data.map(|v| v + 0.3);
    let bad = moment_check(&shifted, &t.mean(), &t.covariance()).unwrap();
    assert!(!bad.pass);
    assert_eq!(bad.mean_flags, vec![0, 1, 2]);
}

#[test]
fn single_chain_ensemble_equals_run_chain() {
    let t = GaussianMixtureTarget::with_norm_sq(2, 0.5).unwrap();
    let plan = SamplerPlan::manual(Algorithm::Lmc, 0.05, 100, 2);
    for rule in [UpdateRule::Lmc, UpdateRule::Lmco, UpdateRule::Lmco2] {
        let cfg = RunConfig::new(rule, InitRule::gaussian_start(t.theta_star(), 1.0), 12);
        let set = run_ensemble(&t, &plan, 1, &cfg).unwrap();
        let x = run_chain(&t, &plan, &cfg, 0).unwrap();
        assert_eq!(set.row(0), x);
    }
}

#[test]
fn results_independent_of_thread_count_and_repeatable() {
    let t = GaussianMixtureTarget::with_norm_sq(4, 0.5).unwrap();
    let plan = SamplerPlan::manual(Algorithm::Lmco, 0.05, 50, 4);
    let base = RunConfig::new(UpdateRule::Lmco, zeros(4), 99);
    let one = run_ensemble(&t, &plan, 64, &base.clone().with_threads(1)).unwrap();
    let four = run_ensemble(&t, &plan, 64, &base.clone().with_threads(4)).unwrap();
    let again = run_ensemble(&t, &plan, 64, &base).unwrap();
    assert_eq!(one.data, four.data);
    assert_eq!(one.data, again.data);
    let other = run_ensemble(&t, &plan, 64, &RunConfig::new(UpdateRule::Lmco, zeros(4), 100)).unwrap();
    assert_ne!(one.data, other.data);
}

#[test]
fn lmc_on_a_gaussian_matches_the_discrete_stationary_law() {
    // x ← (1 − h c)x + √(2h)ξ has variance 2h/(1 − (1 − hc)²).
    let (c, h) = (2.0, 0.2);
    let t = Quadratic::isotropic(2, c);
    let plan = SamplerPlan::manual(Algorithm::Lmc, h, 150, 2);
    let set = run_ensemble(&t, &plan, 5000, &RunConfig::new(UpdateRule::Lmc, zeros(2), 1)).unwrap();
    let q: f64 = 1.0 - h * c;
    let var = 2.0 * h / (1.0 - q * q);
    let report = moment_check(&set.data, &DVector::zeros(2), &(DMatrix::identity(2, 2) * var)).unwrap();
    assert!(report.pass, "{report:?}");
    let wrong = moment_check(&set.data, &DVector::zeros(2), &(DMatrix::identity(2, 2) / c)).unwrap();
    assert!(!wrong.pass);
}

#[test]
fn lmco_is_exact_on_gaussians_for_large_steps() {
    let t = Quadratic::diagonal(&[4.0, 0.25, 1.0]);
    let plan = SamplerPlan::manual(Algorithm::Lmco, 1.5, 40, 3);
    let cfg = RunConfig::new(UpdateRule::Lmco, InitRule::gaussian_start(DVector::from_element(3, 2.0), 1.0), 3);
    let set = run_ensemble(&t, &plan, 5000, &cfg).unwrap();
    let report = moment_check(&set.data, &DVector::zeros(3), &t.covariance()).unwrap();
    assert!(report.pass, "{report:?}");
}

/// One-step deterministic drift of each rule on a non-quadratic target.
fn drift(t: &GaussianMixtureTarget, rule: UpdateRule, x: &DVector<f64>, h: f64) -> DVector<f64> {
    let zero = DVector::zeros(x.len());
    match rule {
        UpdateRule::Lmc => lmc_step(t, x, h, &zero),
        UpdateRule::Lmco => lmco_step(t, x, h, &zero).unwrap(),
        UpdateRule::Lmco2 => lmco2_step(t, x, h, &zero).unwrap(),
    }
}

fn order_of(errors: &[f64]) -> f64 {
    let n = errors.len();
    (errors[n - 2] / errors[n - 1]).log2()
}

#[test]
fn lmco2_approximates_lmco_to_third_order() {
    let t = GaussianMixtureTarget::with_norm_sq(3, 0.6).unwrap();
    let x = DVector::from_vec(vec![0.4, -0.7, 1.1]);
    let errs: Vec<f64> = [0.08, 0.04, 0.02, 0.01]
        .iter()
        .map(|&h| (drift(&t, UpdateRule::Lmco, &x, h) - drift(&t, UpdateRule::Lmco2, &x, h)).norm())
        .collect();
    let k = order_of(&errs);
    assert!((k - 3.0).abs() < 0.15, "order {k}, errors {errs:?}");

    let lmc: Vec<f64> = [0.08, 0.04, 0.02, 0.01]
        .iter()
        .map(|&h| (drift(&t, UpdateRule::Lmco, &x, h) - drift(&t, UpdateRule::Lmc, &x, h)).norm())
        .collect();
    let k = order_of(&lmc);
    assert!((k - 2.0).abs() < 0.15, "order {k}, errors {lmc:?}");
}

#[test]
fn lmco2_noise_operator_matches_ozaki_to_leading_order() {
    let h_mat = DMatrix::from_row_slice(2, 2, &[1.5, 0.4, 0.4, 0.7]);
    let t = Quadratic::new(h_mat.clone(), DVector::zeros(2)).unwrap();
    let x = DVector::zeros(2);
    let xi = DVector::from_vec(vec![0.3, -1.2]);
    let errs: Vec<f64> = [0.04, 0.02, 0.01, 0.005]
        .iter()
        .map(|&h| {
            let ops = OzakiOperators::from_hessian(&h_mat, h).unwrap();
            (lmco2_step(&t, &x, h, &xi).unwrap() - ops.apply_noise(&xi)).norm()
        })
        .collect();
    let k = order_of(&errs);
    assert!((k - 2.5).abs() < 0.15, "order {k}, errors {errs:?}");
}

#[test]
fn preconditioned_sampling_maps_back_to_the_original_law() {
    let h = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 0.5]);
    let target = Quadratic::new(h.clone(), DVector::from_vec(vec![1.0, -1.0])).unwrap();
    let a = Preconditioner::inverse_sqrt_of(&h).unwrap();
    let cert = lmc_core::ConvexityCertificate::new(1.0, 1.0).unwrap();
    let (g, _) = precondition(target.clone(), &cert, &a).unwrap();
    let y_center = a.matrix().clone().try_inverse().unwrap() * &target.center;
    assert!(g.gradient(&y_center).amax() < 1e-12);
    let plan = SamplerPlan::manual(Algorithm::Lmco, 0.7, 30, 2);
    let set = run_ensemble(&g, &plan, 4000, &RunConfig::new(UpdateRule::Lmco, zeros(2), 17)).unwrap();
    let back = map_back(&set, &a).unwrap();
    assert!(back.meta.transform.is_some());
    let report = moment_check(&back.data, &target.center, &target.covariance()).unwrap();
    assert!(report.pass, "{report:?}");
}

#[test]
fn sample_files_round_trip() {
    let t = GaussianMixtureTarget::with_norm_sq(2, 0.5).unwrap();
    let plan = SamplerPlan::manual(Algorithm::Lmc, 0.1, 20, 2);
    let set = run_ensemble(&t, &plan, 10, &RunConfig::new(UpdateRule::Lmc, zeros(2), 5)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    set.write(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("x1,x2"));
    let back = SampleSet::read(&path).unwrap();
    assert_eq!(back.data, set.data);
    assert_eq!(back.meta.seed, 5);
    assert_eq!(back.meta.plan.to_json().unwrap(), set.meta.plan.to_json().unwrap());
}
