//! `lmc`: plan, run and check Langevin Monte Carlo experiments.
//!
//! Exit codes: 0 success, 1 failed check, 2 usage or parse error,
//! 3 infeasible plan, 4 chain divergence.

mod diagnose;
mod sample;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use lmc_core::experiments::{
    lmco2_compare, logistic_kk, table1, ComparePlan, Lmco2CompareConfig, MixtureLipschitz,
};
use lmc_core::{plan_convexified, plan_lmc, plan_lmc_warm, plan_lmco, Error, WarmStartSpec};

#[derive(Parser)]
#[command(name = "lmc", version, about = "Certified Langevin Monte Carlo sampling")]
struct Cli {
    /// Worker threads for chain ensembles (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlanAlgo {
    Lmc,
    LmcWarm,
    LmcConvexified,
    Lmco,
}

#[derive(Subcommand)]
enum Command {
    /// Print a step-size and iteration plan as JSON.
    Plan {
        #[arg(long, value_enum)]
        algo: PlanAlgo,
        #[arg(long)]
        p: usize,
        /// Strong-convexity constant (the convexified one for lmc-convexified).
        #[arg(long)]
        m: f64,
        /// Gradient-Lipschitz constant.
        #[arg(long = "M")]
        big_m: f64,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        /// Hessian-Lipschitz constant (lmco).
        #[arg(long = "Lf")]
        lf: Option<f64>,
        /// Chi-square bound of the warm start (lmc-warm).
        #[arg(long)]
        chi2: Option<f64>,
        /// Second-moment constant of the warm start (lmc-warm).
        #[arg(long)]
        mu2: Option<f64>,
    },
    /// Run the experiment described by a JSON config.
    Sample {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed; `CL_SEED` overrides both.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Planner iteration counts for the Gaussian mixture, as CSV.
    Table1 {
        #[arg(long, value_delimiter = ',', default_value = "8,12,16,20,30,40,60")]
        p_list: Vec<usize>,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        /// Use the Hessian-Lipschitz constant valid for every offset.
        #[arg(long)]
        sharp_lf: bool,
    },
    /// Iteration counts with and without convexification for logistic posteriors.
    LogisticKk {
        #[arg(long)]
        p: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a sample file against an analytic target or a reference file.
    Diagnose(diagnose::Args),
    /// Compare LMC with LMCO′ on a generated logistic posterior.
    Lmco2Compare {
        #[arg(long, default_value_t = 2)]
        p: usize,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 100)]
        n_mc: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Give LMC its own certified plan instead of sharing the LMCO one.
        #[arg(long)]
        certified_lmc: bool,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

/// An error with its exit code.
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn check(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    pub fn plan(e: Error) -> Self {
        Self {
            code: 3,
            message: e.to_string(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Infeasible(_) => 3,
            Error::Divergence { .. } => 4,
            Error::Chains(list) if list.iter().any(|(_, e)| matches!(e, Error::Divergence { .. })) => 4,
            Error::Parse(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => 2,
            Error::DimensionMismatch { .. } => 2,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e).into()
    }
}

pub type CliResult<T> = Result<T, Failure>;

/// `CL_SEED` when set, otherwise `fallback`.
pub fn effective_seed(fallback: u64) -> CliResult<u64> {
    match std::env::var("CL_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::usage(format!("CL_SEED must be an unsigned integer, got '{v}'"))),
        Err(_) => Ok(fallback),
    }
}

/// Prints `text` and a newline; a closed pipe ends output quietly.
pub fn emit(text: &str) -> CliResult<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn write_or_print(out: Option<&PathBuf>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => emit(text)?,
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Plan {
            algo,
            p,
            m,
            big_m,
            eps,
            lf,
            chi2,
            mu2,
        } => {
            let plan = match algo {
                PlanAlgo::Lmc => plan_lmc(p, m, big_m, eps),
                PlanAlgo::LmcConvexified => plan_convexified(p, m, big_m, eps),
                PlanAlgo::Lmco => {
                    let lf = lf.ok_or_else(|| Failure::usage("--Lf is required for --algo lmco"))?;
                    plan_lmco(p, m, big_m, lf, eps)
                }
                PlanAlgo::LmcWarm => {
                    let (chi2, mu2) = chi2
                        .zip(mu2)
                        .ok_or_else(|| Failure::usage("--chi2 and --mu2 are required for --algo lmc-warm"))?;
                    let warm = WarmStartSpec::new(chi2, mu2).map_err(Failure::plan)?;
                    plan_lmc_warm(p, m, big_m, eps, &warm)
                }
            }
            .map_err(Failure::plan)?;
            emit(&plan.to_json()?)?;
        }
        Command::Sample { config, seed } => sample::run(&config, seed, cli.threads)?,
        Command::Table1 {
            p_list,
            eps,
            sharp_lf,
        } => {
            let lipschitz = if sharp_lf {
                MixtureLipschitz::Sharp
            } else {
                MixtureLipschitz::Reference
            };
            let rows = table1(&p_list, eps, lipschitz).map_err(Failure::plan)?;
            let mut csv = String::from("p,algo,K,T,h");
            for r in rows {
                csv.push_str(&format!("\n{},{},{},{},{}", r.p, r.algo, r.iterations, r.horizon, r.h));
            }
            emit(&csv)?;
        }
        Command::LogisticKk {
            p,
            n,
            eps,
            trials,
            seed,
            out,
        } => {
            let seed = effective_seed(seed)?;
            let (list, mean_k, mean_kp) = logistic_kk(p, n, eps, trials, seed)?;
            let report = json!({
                "config": {"p": p, "n": n, "eps": eps, "trials": trials, "seed": seed},
                "trials": list,
                "mean_K": mean_k,
                "mean_K_prime": mean_kp,
            });
            write_or_print(out.as_ref(), &serde_json::to_string_pretty(&report)?)?;
        }
        Command::Diagnose(args) => diagnose::run(&args)?,
        Command::Lmco2Compare {
            p,
            n,
            eps,
            n_mc,
            seed,
            certified_lmc,
            out_dir,
        } => {
            let cfg = Lmco2CompareConfig {
                p,
                n,
                eps,
                n_mc,
                seed: effective_seed(seed)?,
                threads: cli.threads,
                plan: if certified_lmc {
                    ComparePlan::Certified
                } else {
                    ComparePlan::Shared
                },
            };
            let out = lmco2_compare(&cfg)?;
            let report = json!({
                "config": {"p": p, "n": n, "eps": eps, "n_mc": n_mc, "seed": cfg.seed, "plan": cfg.plan},
                "lmc_plan": out.lmc_plan,
                "lmco2_plan": out.lmco2_plan,
                "distances": out.distances,
            });
            let text = serde_json::to_string_pretty(&report)?;
            if let Some(dir) = out_dir {
                std::fs::create_dir_all(&dir)?;
                out.lmc.write(dir.join("lmc.csv"))?;
                out.lmco2.write(dir.join("lmco2.csv"))?;
                std::fs::write(dir.join("report.json"), &text)?;
            }
            emit(&text)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("lmc: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
