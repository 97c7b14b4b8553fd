#![allow(dead_code)]

use quadrature::double_exponential;

/// `∫_a^b f` by double-exponential quadrature, `|err| ≤ tol`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    double_exponential::integrate(f, a, b, tol).integral
}

/// `∫_a^∞ f` via `t = a + u/(1 − u)` on unit-length pieces of `u`, so the
/// quadrature sees a finite interval with a smooth endpoint at `u = 1`.
pub fn integrate_tail(f: impl Fn(f64) -> f64, a: f64, tol: f64) -> f64 {
    let g = |u: f64| {
        if u >= 1.0 {
            return 0.0;
        }
        let w = 1.0 - u;
        f(a + u / w) / (w * w)
    };
    let knots = [0.0, 0.5, 0.75, 0.875, 0.95, 0.99, 1.0];
    knots
        .windows(2)
        .map(|k| integrate(&g, k[0], k[1], tol))
        .sum()
}

/// `Γ(s, x)` by quadrature of `t^{s−1} e^{−t}` over `[x, ∞)`, with the
/// integrand scaled by `e^{x}` so the tolerance is relative.
pub fn gamma_upper_quadrature(s: f64, x: f64) -> f64 {
    let peak = (s - 1.0).max(x).max(1.0);
    let log_scale = (s - 1.0) * peak.ln() - peak;
    let f = |t: f64| {
        if t <= 0.0 {
            return 0.0;
        }
        ((s - 1.0) * t.ln() - t - log_scale).exp()
    };
    let body = if x < 1.0 && s < 1.0 {
        // t = u^{1/s} removes the t^{s−1} singularity on the head [x, 1].
        let head = |u: f64| (-u.powf(1.0 / s) - log_scale).exp() / s;
        integrate(head, x.powf(s), 1.0, 1e-15) + integrate_tail(f, 1.0, 1e-15)
    } else {
        integrate_tail(f, x, 1e-15)
    };
    body * log_scale.exp()
}

/// `ln ∫_x^∞ (t − x)⁴ t^{p−1} e^{−t} dt` by quadrature.
pub fn ln_tail_fourth_moment_quadrature(p: usize, x: f64) -> f64 {
    let pf = p as f64;
    let peak = (pf + 3.0).max(x);
    let log_scale = (pf - 1.0) * peak.ln() + 4.0 * (peak - x).max(1.0).ln() - peak;
    let f = |t: f64| {
        if t <= x {
            return 0.0;
        }
        (4.0 * (t - x).ln() + (pf - 1.0) * t.ln() - t - log_scale).exp()
    };
    integrate_tail(f, x, 1e-15).ln() + log_scale
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
