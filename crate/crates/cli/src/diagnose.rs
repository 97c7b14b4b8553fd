//! `lmc diagnose`: hard checks exit nonzero, the rest is reported.

use std::path::PathBuf;

use clap::ValueEnum;
use nalgebra::DVector;
use serde_json::{json, Value};

use lmc_core::diagnostics::{
    dkw_slack, ks_distance, ks_two_sample, marginal_distances, moment_check, project,
    write_histogram_csv,
};
use lmc_core::io::read_matrix_csv;
use lmc_core::targets::mixture::normal_cdf;
use lmc_core::GaussianMixtureTarget;

use crate::{CliResult, Failure};

#[derive(Clone, Copy, ValueEnum)]
pub enum AnalyticTarget {
    Mixture,
}

#[derive(clap::Args)]
pub struct Args {
    /// Sample CSV, one row per draw.
    #[arg(long)]
    samples: PathBuf,
    /// Reference sample CSV for two-sample comparisons.
    #[arg(long, conflicts_with = "target")]
    reference: Option<PathBuf>,
    /// Analytic target to test against.
    #[arg(long, value_enum, required_unless_present = "reference")]
    target: Option<AnalyticTarget>,
    #[arg(long, default_value_t = 0.5)]
    a_norm_sq: f64,
    /// Projection direction, normalised before use (default `a/‖a‖`).
    #[arg(long, value_delimiter = ',')]
    direction: Option<Vec<f64>>,
    /// TV accuracy the samples were planned for; the KS threshold is this
    /// plus the DKW slack.
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    /// Failure probability of the DKW slack.
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Hard bound on every marginal summary distance (reference mode).
    #[arg(long)]
    max_distance: Option<f64>,
    /// Histogram of the projection with the analytic density.
    #[arg(long)]
    histogram: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    bins: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read(path: &PathBuf) -> CliResult<nalgebra::DMatrix<f64>> {
    read_matrix_csv(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

pub fn run(args: &Args) -> CliResult<()> {
    let data = read(&args.samples)?;
    let (n, p) = (data.nrows(), data.ncols());
    if n == 0 {
        return Err(Failure::usage(format!("{} has no rows", args.samples.display())));
    }
    let mut checks = serde_json::Map::new();
    let mut pass = true;

    if let Some(reference) = &args.reference {
        let other = read(reference)?;
        let d = marginal_distances(&data, &other)?;
        let ks: Vec<f64> = (0..p)
            .map(|j| {
                let a: Vec<f64> = data.column(j).iter().copied().collect();
                let b: Vec<f64> = other.column(j).iter().copied().collect();
                ks_two_sample(&a, &b)
            })
            .collect();
        let hard = args.max_distance.map(|t| d.max() <= t);
        if hard == Some(false) {
            pass = false;
        }
        checks.insert(
            "marginal".into(),
            json!({"distances": d, "threshold": args.max_distance, "pass": hard}),
        );
        checks.insert("ks_two_sample".into(), json!(ks));
    }

    if let Some(AnalyticTarget::Mixture) = args.target {
        let target = GaussianMixtureTarget::with_norm_sq(p, args.a_norm_sq)?;
        let v = match &args.direction {
            Some(d) if d.len() == p => {
                let v = DVector::from_vec(d.clone());
                let norm = v.norm();
                if !(norm > 0.0) {
                    return Err(Failure::usage("direction must be nonzero"));
                }
                v / norm
            }
            Some(d) => {
                return Err(Failure::usage(format!(
                    "direction has {} entries, samples have {p} columns",
                    d.len()
                )))
            }
            None => target.direction(),
        };
        // vᵀX is an equal mixture of N(±vᵀa, 1).
        let c = v.dot(&target.a);
        let cdf = |t: f64| 0.5 * normal_cdf(t - c) + 0.5 * normal_cdf(t + c);
        let pdf = |t: f64| {
            let g = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
            0.5 * g(t - c) + 0.5 * g(t + c)
        };
        let proj = project(&data, &v)?;
        let ks = ks_distance(&proj, cdf);
        let threshold = args.eps + dkw_slack(n, args.delta);
        pass &= ks <= threshold;
        checks.insert(
            "ks".into(),
            json!({"statistic": ks, "threshold": threshold, "pass": ks <= threshold}),
        );
        let moments: Value = if n >= 30 {
            serde_json::to_value(moment_check(&data, &target.mean(), &target.covariance())?)?
        } else {
            Value::Null
        };
        checks.insert("moments".into(), moments);
        if let Some(path) = &args.histogram {
            let lo = proj.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = proj.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let range = if hi > lo { (lo, hi) } else { (lo - 1.0, lo + 1.0) };
            write_histogram_csv(path, &proj, args.bins, range, Some(&pdf))?;
        }
    }

    let report = json!({
        "samples": args.samples,
        "N": n,
        "p": p,
        "checks": checks,
        "pass": pass,
    });
    let text = serde_json::to_string_pretty(&report)?;
    match &args.out {
        Some(path) => std::fs::write(path, &text)?,
        None => crate::emit(&text)?,
    }
    if pass {
        Ok(())
    } else {
        Err(Failure::check("a hard check failed"))
    }
}
