//! Brute-force reference values, computed without the adaptive quadrature.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

/// Exp-sinh nodes `x = exp((π/2) sinh t)` with weights on a uniform `t` grid.
fn exp_sinh_grid(n: usize, t_lo: f64, t_hi: f64) -> Vec<(f64, f64)> {
    let h = (t_hi - t_lo) / (n - 1) as f64;
    (0..n)
        .map(|k| {
            let t = t_lo + k as f64 * h;
            let x = (FRAC_PI_2 * t.sinh()).exp();
            (x, h * FRAC_PI_2 * t.cosh() * x)
        })
        .collect()
}

/// `φ_β(a)` by a fixed 2000×2000 tensor rule over `(u, ξ)` with
/// `ξ ↦ a cosh² ξ`.
pub fn phi_tensor(a: f64, beta: f64) -> f64 {
    let p = 0.5 * (beta + 2.0);
    let us = exp_sinh_grid(2000, -4.5, 4.0);
    let xis: Vec<(f64, f64)> = exp_sinh_grid(2000, -4.5, 4.0)
        .into_iter()
        .filter(|&(x, _)| x < 300.0)
        .map(|(x, w)| {
            let c = x.cosh();
            (a * c * c, w * x * x.sinh() * c)
        })
        .collect();
    let mut total = 0.0;
    for &(u, wu) in &us {
        let outer = u.powf(0.5 * (beta - 1.0)) * (-u).exp() * wu;
        if outer == 0.0 {
            continue;
        }
        let inner: f64 = xis.iter().map(|&(ac2, wx)| wx * (u + ac2).powf(-p)).sum();
        total += outer * inner;
    }
    let gamma_p = bdre_core::specfun::gamma_fn(p);
    gamma_p * (-a).exp() * a.powf(-0.5 * beta) / (SQRT_2 * PI) * total
}

/// `K_ν(x) = ∫₀^∞ e^{−x cosh t} cosh(νt) dt` by the trapezoid rule.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    let h = 1e-3;
    (0..20_000)
        .map(|k| {
            let t = k as f64 * h;
            let w = if k == 0 { 0.5 } else { 1.0 };
            w * h * (-x * t.cosh()).exp() * (nu * t).cosh()
        })
        .sum()
}

/// `E[exp(−c/G)]` for `G ~ Gamma(ν, 1)`: `2 c^{ν/2} K_ν(2√c)/Γ(ν)`.
pub fn mean_exp_inverse_gamma(nu: f64, c: f64) -> f64 {
    2.0 * c.powf(0.5 * nu) * bessel_k(nu, 2.0 * c.sqrt()) / bdre_core::specfun::gamma_fn(nu)
}
