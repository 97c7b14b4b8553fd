//! Checks of sampler output against known laws and against each other.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `data · v` for a unit vector `v`.
pub fn project(data: &DMatrix<f64>, v: &DVector<f64>) -> Result<Vec<f64>> {
    if v.len() != data.ncols() {
        return Err(Error::DimensionMismatch {
            expected: data.ncols(),
            found: v.len(),
        });
    }
    if (v.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::domain(format!(
            "projection direction must have unit norm, got {}",
            v.norm()
        )));
    }
    Ok((data * v).iter().copied().collect())
}

/// Kolmogorov–Smirnov distance `sup_t |F_N(t) − F(t)|`.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sample.len() as f64;
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i as f64 + 1.0) / n - f).abs().max((f - i as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0_f64);
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// DKW half-width: `P(sup|F_N − F| > slack) ≤ δ`.
pub fn dkw_slack(n: usize, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

/// Quantile of sorted data by linear interpolation between order statistics.
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = prob.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalSummaryDistances {
    pub d_mean: f64,
    pub d_median: f64,
    #[serde(rename = "d_Q1")]
    pub d_q1: f64,
    #[serde(rename = "d_Q3")]
    pub d_q3: f64,
}

impl MarginalSummaryDistances {
    pub fn max(&self) -> f64 {
        self.d_mean.max(self.d_median).max(self.d_q1).max(self.d_q3)
    }
}

struct Marginals {
    mean: Vec<f64>,
    q1: Vec<f64>,
    median: Vec<f64>,
    q3: Vec<f64>,
}

fn marginals(data: &DMatrix<f64>) -> Marginals {
    let p = data.ncols();
    let mut out = Marginals {
        mean: Vec::with_capacity(p),
        q1: Vec::with_capacity(p),
        median: Vec::with_capacity(p),
        q3: Vec::with_capacity(p),
    };
    for col in data.column_iter() {
        let mut v: Vec<f64> = col.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        out.mean.push(v.iter().sum::<f64>() / v.len() as f64);
        out.q1.push(quantile_sorted(&v, 0.25));
        out.median.push(quantile_sorted(&v, 0.5));
        out.q3.push(quantile_sorted(&v, 0.75));
    }
    out
}

fn l1_per_coordinate(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// `(1/p)‖s(A) − s(B)‖₁` for the coordinate-wise mean, median and quartiles.
pub fn marginal_distances(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<MarginalSummaryDistances> {
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.ncols(),
            found: b.ncols(),
        });
    }
    if a.nrows() == 0 || b.nrows() == 0 {
        return Err(Error::domain("marginal distances need non-empty samples"));
    }
    let (ma, mb) = (marginals(a), marginals(b));
    Ok(MarginalSummaryDistances {
        d_mean: l1_per_coordinate(&ma.mean, &mb.mean),
        d_median: l1_per_coordinate(&ma.median, &mb.median),
        d_q1: l1_per_coordinate(&ma.q1, &mb.q1),
        d_q3: l1_per_coordinate(&ma.q3, &mb.q3),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub n: usize,
    /// Coordinates whose mean is off by more than 4 standard errors.
    pub mean_flags: Vec<usize>,
    /// Entries `(j, k)`, `j ≤ k`, whose covariance is off by more than 4 standard errors.
    pub cov_flags: Vec<(usize, usize)>,
    pub max_mean_z: f64,
    pub max_cov_z: f64,
    pub pass: bool,
}

/// Compares empirical first and second moments with `(mean_true, cov_true)`.
/// Mean errors are scaled by `√(Σᵢᵢ/N)`; covariance entries, computed about
/// the true mean, by the empirical standard error of the centred products.
pub fn moment_check(
    data: &DMatrix<f64>,
    mean_true: &DVector<f64>,
    cov_true: &DMatrix<f64>,
) -> Result<MomentReport> {
    let (n, p) = (data.nrows(), data.ncols());
    if n < 30 {
        return Err(Error::domain(format!("moment check needs N >= 30, got {n}")));
    }
    if mean_true.len() != p || cov_true.nrows() != p || cov_true.ncols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: mean_true.len(),
        });
    }
    let nf = n as f64;
    let centred = DMatrix::from_fn(n, p, |i, j| data[(i, j)] - mean_true[j]);
    let mut mean_flags = Vec::new();
    let mut max_mean_z = 0.0_f64;
    for j in 0..p {
        let m = centred.column(j).sum() / nf;
        let z = m.abs() / (cov_true[(j, j)] / nf).sqrt();
        max_mean_z = max_mean_z.max(z);
        if z > 4.0 {
            mean_flags.push(j);
        }
    }
    let mut cov_flags = Vec::new();
    let mut max_cov_z = 0.0_f64;
    for j in 0..p {
        for k in j..p {
            let prods: Vec<f64> = (0..n).map(|i| centred[(i, j)] * centred[(i, k)]).collect();
            let m = prods.iter().sum::<f64>() / nf;
            let var = prods.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (nf - 1.0);
            let z = (m - cov_true[(j, k)]).abs() / (var / nf).sqrt();
            max_cov_z = max_cov_z.max(z);
            if z > 4.0 {
                cov_flags.push((j, k));
            }
        }
    }
    let pass = mean_flags.is_empty() && cov_flags.is_empty();
    Ok(MomentReport {
        n,
        mean_flags,
        cov_flags,
        max_mean_z,
        max_cov_z,
        pass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub mean_sq_dist: f64,
    pub standard_error: f64,
    pub bound: f64,
    /// `bound − (mean + 3·SE)`; positive when the check passes.
    pub margin: f64,
    pub pass: bool,
}

/// Checks `E‖ϑ − θ*‖² ≤ (M/m)·init_msd + 2Mp/m²` with the empirical mean
/// inflated by three standard errors.
pub fn energy_bound_check(
    data: &DMatrix<f64>,
    theta_star: &DVector<f64>,
    m: f64,
    big_m: f64,
    init_msd: f64,
) -> Result<EnergyReport> {
    let (n, p) = (data.nrows(), data.ncols());
    if theta_star.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: theta_star.len(),
        });
    }
    if n < 2 || !(m > 0.0) {
        return Err(Error::domain("energy check needs N >= 2 and m > 0"));
    }
    let d: Vec<f64> = data
        .row_iter()
        .map(|r| (r.transpose() - theta_star).norm_squared())
        .collect();
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let se = (var / nf).sqrt();
    let bound = big_m / m * init_msd + 2.0 * big_m * p as f64 / (m * m);
    let margin = bound - (mean + 3.0 * se);
    Ok(EnergyReport {
        mean_sq_dist: mean,
        standard_error: se,
        bound,
        margin,
        pass: margin >= 0.0,
    })
}

/// Writes `bin_left,bin_right,count,analytic_density_at_midpoint` rows.
pub fn write_histogram_csv(
    path: impl AsRef<Path>,
    sample: &[f64],
    bins: usize,
    range: (f64, f64),
    density: Option<&dyn Fn(f64) -> f64>,
) -> Result<()> {
    if bins == 0 || !(range.1 > range.0) {
        return Err(Error::domain("histogram needs bins >= 1 and a non-empty range"));
    }
    let width = (range.1 - range.0) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &x in sample {
        if x >= range.0 && x <= range.1 {
            let b = (((x - range.0) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["bin_left", "bin_right", "count", "analytic_density_at_midpoint"])?;
    for (b, c) in counts.iter().enumerate() {
        let left = range.0 + b as f64 * width;
        let right = left + width;
        let dens = density.map_or(String::new(), |f| format!("{:e}", f(0.5 * (left + right))));
        w.write_record([format!("{left:e}"), format!("{right:e}"), c.to_string(), dens])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::mixture::normal_cdf;
    use nalgebra::dmatrix;

    #[test]
    fn projection_basics() {
        let d = dmatrix![1.0, 2.0; 3.0, 4.0];
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        assert_eq!(project(&d, &e1).unwrap(), vec![1.0, 3.0]);
        assert!(project(&d, &DVector::from_vec(vec![1.0, 1.0])).is_err());
    }

    #[test]
    fn ks_on_stratified_grid() {
        // Logistic CDF with closed-form inverse.
        let cdf = |x: f64| 1.0 / (1.0 + (-x).exp());
        let n = 200;
        let sample: Vec<f64> = (0..n)
            .map(|i| {
                let u = (i as f64 + 0.5) / n as f64;
                (u / (1.0 - u)).ln()
            })
            .collect();
        assert!((ks_distance(&sample, cdf) - 0.5 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn ks_invariant_under_monotone_map() {
        let sample: Vec<f64> = (0..50).map(|i| ((i * 37) % 50) as f64 / 10.0 - 2.0).collect();
        let a = ks_distance(&sample, normal_cdf);
        let mapped: Vec<f64> = sample.iter().map(|x| x.exp()).collect();
        let b = ks_distance(&mapped, |y: f64| normal_cdf(y.ln()));
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn two_sample_ks_self_is_zero() {
        let s: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        assert_eq!(ks_two_sample(&s, &s), 0.0);
        let shifted: Vec<f64> = s.iter().map(|v| v + 10.0).collect();
        assert_eq!(ks_two_sample(&s, &shifted), 1.0);
    }

    #[test]
    fn dkw_values() {
        assert!((dkw_slack(1000, 0.05) - 0.042_946).abs() < 1e-5);
        assert!((dkw_slack(2500, 0.05) - 0.027_162).abs() < 1e-5);
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
        assert_eq!(quantile_sorted(&v, 0.25), 1.75);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
    }

    #[test]
    fn marginal_distance_properties() {
        let a = DMatrix::from_fn(31, 3, |i, j| ((i * 7 + j * 3) % 11) as f64);
        let zero = marginal_distances(&a, &a).unwrap();
        assert_eq!(zero.max(), 0.0);
        let b = a.map(|v| v + 0.3);
        let d = marginal_distances(&a, &b).unwrap();
        for v in [d.d_mean, d.d_median, d.d_q1, d.d_q3] {
            assert!((v - 0.3).abs() < 1e-12);
        }
        assert_eq!(d, marginal_distances(&b, &a).unwrap());
        let c = a.map(|v| v * 1.5 - 1.0);
        let ab = marginal_distances(&a, &b).unwrap().d_mean;
        let bc = marginal_distances(&b, &c).unwrap().d_mean;
        let ac = marginal_distances(&a, &c).unwrap().d_mean;
        assert!(ac <= ab + bc + 1e-12);
    }

    #[test]
    fn moment_check_flags_shift() {
        let n = 400;
        // Deterministic ±1 design: mean 0, covariance I.
        let d = DMatrix::from_fn(n, 2, |i, j| if (i >> j) & 1 == 0 { 1.0 } else { -1.0 });
        let ok = moment_check(&d, &DVector::zeros(2), &DMatrix::identity(2, 2)).unwrap();
        assert!(ok.mean_flags.is_empty());
        let shifted = d.map(|v| v + 0.5);
        let bad = moment_check(&shifted, &DVector::zeros(2), &DMatrix::identity(2, 2)).unwrap();
        assert_eq!(bad.mean_flags, vec![0, 1]);
        assert!(!bad.pass);
        assert!(moment_check(&d.rows(0, 10).into_owned(), &DVector::zeros(2), &DMatrix::identity(2, 2)).is_err());
    }

    #[test]
    fn energy_bound_cases() {
        let theta = DVector::zeros(8);
        let far = DMatrix::from_fn(10, 8, |i, _| if i % 2 == 0 { 100.0 } else { -100.0 } / 8f64.sqrt());
        let r = energy_bound_check(&far, &theta, 0.5, 1.0, 8.0).unwrap();
        assert_eq!(r.bound, 80.0);
        assert!(!r.pass);
        let near = DMatrix::from_fn(10, 8, |i, j| ((i + j) % 3) as f64 - 1.0);
        let ok = energy_bound_check(&near, &theta, 0.5, 1.0, 8.0).unwrap();
        assert!(ok.pass);
        let q = energy_bound_check(&near, &theta, 2.0, 2.0, 3.0).unwrap();
        assert_eq!(q.bound, 3.0 + 8.0);
    }

    #[test]
    fn histogram_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        let s = [0.1, 0.2, 0.9, 1.5];
        write_histogram_csv(&path, &s, 2, (0.0, 1.0), Some(&|_| 1.0)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].contains(",2,"));
        assert!(lines[2].contains(",1,"));
    }
}
