use bdre_core::quad::{integrate, integrate_to_infinity, QuadratureConfig};
use bdre_core::specfun::{
    integral_a_psi, laplace_y, mean_inverse_gamma, phi_beta, psi, psi_closed_form, Extended,
    GammaLaw, GammaReading,
};
use bdre_core::{extinction_probability, ModelParams};

fn q() -> QuadratureConfig {
    QuadratureConfig::default()
}

/// Exp-sinh nodes `x = exp((π/2) sinh t)` on a uniform `t` grid.
fn exp_sinh_grid(n: usize, t_lo: f64, t_hi: f64) -> Vec<(f64, f64)> {
    let h = (t_hi - t_lo) / (n - 1) as f64;
    (0..n)
        .map(|k| {
            let t = t_lo + k as f64 * h;
            let x = (std::f64::consts::FRAC_PI_2 * t.sinh()).exp();
            let w = h * std::f64::consts::FRAC_PI_2 * t.cosh() * x;
            (x, w)
        })
        .collect()
}

/// Brute-force 2000×2000 tensor rule for φ_β.
fn phi_tensor(a: f64, beta: f64) -> f64 {
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
    let pref = libm::tgamma(p) * (-a).exp() * a.powf(-0.5 * beta)
        / (std::f64::consts::SQRT_2 * std::f64::consts::PI);
    pref * total
}

#[test]
fn psi_quadrature_matches_closed_form() {
    for &a in &[0.1, 0.5, 1.0, 2.0, 5.0, 10.0] {
        let quad = psi(a, &q()).unwrap();
        let closed = psi_closed_form(a);
        assert!((quad - closed).abs() <= 1e-8 * closed, "a={a}: {quad} vs {closed}");
    }
    assert!((psi(1.0, &q()).unwrap() - 0.146_762_6).abs() < 1e-7);
    assert!((psi(2.0, &q()).unwrap() - 0.026_995_5).abs() < 1e-7);
}

#[test]
fn integral_of_a_psi() {
    let v = integral_a_psi(&q()).unwrap();
    assert!((v - 0.398_942_3).abs() < 1e-6);
    let closed = integrate_to_infinity(|a| a * psi_closed_form(a), 0.0, &q()).unwrap().value;
    assert!((v - closed).abs() < 1e-8);
    assert!((closed - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
    let tail = integrate_to_infinity(|a| a * psi(a, &q()).unwrap(), 20.0, &q()).unwrap().value;
    assert!(tail < 1e-8 && tail > 0.0);
}

#[test]
fn phi_beta_matches_tensor_oracle() {
    for &a in &[0.5, 1.0, 3.0] {
        for &beta in &[0.5, 1.0, 2.0] {
            let adaptive = phi_beta(a, beta, &q()).unwrap();
            let oracle = phi_tensor(a, beta);
            assert!(
                (adaptive - oracle).abs() <= 1e-6 * oracle.max(1e-3),
                "a={a} beta={beta}: {adaptive} vs {oracle}"
            );
        }
    }
}

#[test]
fn phi_beta_golden_and_shape() {
    // high-precision reference computed once with an arbitrary-precision library
    let v = phi_beta(1.0, 1.0, &q()).unwrap();
    assert!((v - 0.099_116_661_733_501_38).abs() < 1e-10, "{v}");
    let v = phi_beta(0.5, 0.5, &q()).unwrap();
    assert!((v - 2.102_907_275_894_121).abs() < 1e-9, "{v}");
    let mut prev = f64::INFINITY;
    for &a in &[10.0, 20.0, 40.0] {
        let v = phi_beta(a, 1.0, &q()).unwrap();
        assert!(v > 0.0 && v < prev);
        prev = v;
    }
    assert!(prev < 1e-15);
    for k in -3..4 {
        for &beta in &[0.25, 1.5, 4.0] {
            let v = phi_beta(2f64.powi(k), beta, &q()).unwrap();
            assert!(v.is_finite() && v > 0.0);
        }
    }
    assert!(phi_beta(0.0, 1.0, &q()).is_err());
    assert!(phi_beta(1.0, -1.0, &q()).is_err());
}

#[test]
fn mean_inverse_gamma_matches_density_quadrature() {
    for &nu in &[1.5, 2.0, 3.0, 10.0] {
        let law = GammaLaw::new(nu).unwrap();
        let direct = integrate_to_infinity(|x| law.density(x) / x, 0.0, &q()).unwrap().value;
        let closed = mean_inverse_gamma(nu).unwrap().finite().unwrap();
        assert!((direct - closed).abs() < 1e-8, "nu={nu}: {direct} vs {closed}");
    }
    // ν = 1: the truncated integral keeps growing like ln(1/ε)
    let law = GammaLaw::new(1.0).unwrap();
    let trunc = |eps: f64| {
        integrate(|x| law.density(x) / x, eps, 50.0, &q()).unwrap().value
    };
    let (a, b, c) = (trunc(1e-3), trunc(1e-6), trunc(1e-9));
    assert!(b - a > 6.0 && c - b > 6.0);
    assert_eq!(mean_inverse_gamma(1.0).unwrap(), Extended::Infinite);
}

#[test]
fn gamma_density_normalized() {
    for &nu in &[0.5, 1.0, 2.5, 7.0] {
        let law = GammaLaw::new(nu).unwrap();
        let total = integrate_to_infinity(|x| law.density(x), 0.0, &q()).unwrap().value;
        assert!((total - 1.0).abs() < 1e-9, "nu={nu}: {total}");
        assert!((law.cdf(50.0 + 10.0 * nu) - 1.0).abs() < 1e-12);
    }
}

/// `K_1(x) = ∫₀^∞ e^{−x cosh t} cosh t dt` by a plain trapezoid sum.
fn bessel_k1(x: f64) -> f64 {
    let h = 1e-3;
    (0..20_000)
        .map(|k| {
            let t = k as f64 * h;
            let w = if k == 0 { 0.5 } else { 1.0 };
            w * h * (-x * t.cosh()).exp() * t.cosh()
        })
        .sum()
}

#[test]
fn laplace_limit_selects_the_inverse_gamma_reading() {
    let p = ModelParams::STANDARD;
    let ext = extinction_probability(1.0, &p).unwrap();
    let inv = laplace_y(1e6, 1.0, &p, GammaReading::InverseGamma, &q()).unwrap();
    assert!((inv - ext).abs() < 1e-4);
    let printed = laplace_y(1e6, 1.0, &p, GammaReading::AsPrinted, &q()).unwrap();
    assert!((printed - ext).abs() > 0.1);

    // β = 1: E[exp(−1/G)] with G ~ Exp(1) equals 2K₁(2)
    let p1 = ModelParams::new(0.5, 1.0, 1.0, 1.0).unwrap();
    let oracle = 2.0 * bessel_k1(2.0);
    assert!((oracle - 0.279_731_76).abs() < 1e-7);
    let printed = laplace_y(f64::INFINITY, 1.0, &p1, GammaReading::AsPrinted, &q()).unwrap();
    assert!((printed - oracle).abs() < 1e-8, "{printed} vs {oracle}");
    let ext1 = extinction_probability(1.0, &p1).unwrap();
    assert!((ext1 - 0.5).abs() < 1e-15);
    let inv1 = laplace_y(f64::INFINITY, 1.0, &p1, GammaReading::InverseGamma, &q()).unwrap();
    assert!((inv1 - ext1).abs() < 1e-10);
}
