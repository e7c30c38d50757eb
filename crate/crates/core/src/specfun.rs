//! Special functions and constants of the survival asymptotics and of the
//! limit `Y = lim Z_t e^{−S_t}`.

#[allow(unused_imports)]
use num_traits::Float;
use core::cell::Cell;
use core::f64::consts::{LN_2, PI, SQRT_2};


use crate::model::{classify_regime, ModelParams, Regime};
use crate::quad::{integrate_to_infinity, InfiniteDomainMap, QuadratureConfig};
use crate::{Error, Result};

/// `1/√(2π)`: the value of `∫₀^∞ a ψ(a) da`.
pub const INTEGRAL_A_PSI: f64 = 0.398_942_280_401_432_7;

/// A nonnegative quantity that may diverge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended {
    Finite(f64),
    Infinite,
}

impl Extended {
    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Extended::Infinite)
    }

    /// Multiplies by a finite positive scalar.
    pub fn scale(self, c: f64) -> Self {
        match self {
            Extended::Finite(v) => Extended::Finite(c * v),
            Extended::Infinite => Extended::Infinite,
        }
    }
}

impl core::fmt::Display for Extended {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Extended::Finite(v) => write!(f, "{v}"),
            Extended::Infinite => f.write_str("inf"),
        }
    }
}

#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

#[inline]
pub fn gamma_fn(x: f64) -> f64 {
    libm::tgamma(x)
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_continued_fraction(a, x)
    }
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 − P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_series(a, x)
    } else {
        gamma_continued_fraction(a, x)
    }
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..10_000 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_continued_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Gamma law with shape `ν` and unit scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaLaw {
    shape: f64,
    ln_norm: f64,
}

impl GammaLaw {
    pub fn new(shape: f64) -> Result<Self> {
        if !(shape > 0.0) || !shape.is_finite() {
            return Err(Error::InvalidParameter("gamma shape must be positive"));
        }
        Ok(GammaLaw {
            shape,
            ln_norm: ln_gamma(shape),
        })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn density(&self, x: f64) -> f64 {
        if !(x > 0.0) || x.is_infinite() {
            return 0.0;
        }
        ((self.shape - 1.0) * x.ln() - x - self.ln_norm).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        gamma_p(self.shape, x)
    }

    pub fn mean(&self) -> f64 {
        self.shape
    }
}

/// Collects the first error raised inside a quadrature integrand.
struct ErrorSlot(Cell<Option<Error>>);

impl ErrorSlot {
    fn new() -> Self {
        ErrorSlot(Cell::new(None))
    }

    fn unwrap_or_record(&self, r: Result<f64>) -> f64 {
        match r {
            Ok(v) => v,
            Err(e) => {
                let prev = self.0.take();
                self.0.set(Some(prev.unwrap_or(e)));
                0.0
            }
        }
    }

    fn check(self) -> Result<()> {
        match self.0.into_inner() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

/// `ψ(a) = (√2/π) a^{−1/2} ∫₀^∞ exp(−a cosh² y) cosh y dy` by quadrature.
pub fn psi(a: f64, q: &QuadratureConfig) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::InvalidParameter("psi needs a > 0"));
    }
    let inner = integrate_to_infinity(
        |y| {
            let c = y.cosh();
            if !c.is_finite() {
                return 0.0;
            }
            (-a * c * c + c.ln()).exp()
        },
        0.0,
        q,
    )?;
    Ok(SQRT_2 / PI / a.sqrt() * inner.value)
}

/// Closed form of [`psi`]: the substitution `u = sinh y` gives
/// `∫₀^∞ e^{−a(1+u²)} du = e^{−a} √(π/a)/2`, so `ψ(a) = e^{−a}/(√(2π) a)`.
pub fn psi_closed_form(a: f64) -> f64 {
    (-a).exp() / ((2.0 * PI).sqrt() * a)
}

/// `∫₀^∞ a ψ(a) da` with `ψ` evaluated by quadrature at every node.
pub fn integral_a_psi(q: &QuadratureConfig) -> Result<f64> {
    let inner_q = QuadratureConfig {
        rel_tol: (q.rel_tol * 0.1).max(1e-14),
        ..*q
    };
    let slot = ErrorSlot::new();
    let r = integrate_to_infinity(|a| a * slot.unwrap_or_record(psi(a, &inner_q)), 0.0, q)?;
    slot.check()?;
    Ok(r.value)
}

#[inline]
fn ln_cosh(x: f64) -> f64 {
    x + (-2.0 * x).exp().ln_1p() - LN_2
}

/// `ln(sinh x cosh x) = ln(sinh(2x)/2)`, accurate for large `x`.
#[inline]
fn ln_sinh_cosh(x: f64) -> f64 {
    if x < 10.0 {
        ((2.0 * x).sinh() * 0.5).ln()
    } else {
        2.0 * x - 2.0 * LN_2 + (-(-4.0 * x).exp()).ln_1p()
    }
}

/// `φ_β(a)`: the double integral over `(ξ, u) ∈ (0, ∞)²` of
///
/// ```text
/// Γ((β+2)/2) e^{−a} a^{−β/2} u^{(β−1)/2} e^{−u} ξ sinh ξ cosh ξ
///   / (√2 π (u + a cosh² ξ)^{(β+2)/2})
/// ```
///
/// by iterated adaptive quadrature with the tan map in both variables. The
/// `ξ` integrand only decays like `ξ e^{−βξ}`, which the exponential map turns
/// into an endpoint singularity when `β < 1`.
pub fn phi_beta(a: f64, beta: f64, q: &QuadratureConfig) -> Result<f64> {
    if !(a > 0.0 && beta > 0.0) || !a.is_finite() || !beta.is_finite() {
        return Err(Error::InvalidParameter("phi_beta needs a > 0 and beta > 0"));
    }
    let power = 0.5 * (beta + 2.0);
    let inner_q = QuadratureConfig {
        abs_tol: q.abs_tol * 1e-3,
        infinite_domain_map: InfiniteDomainMap::TanSubstitution,
        ..*q
    };
    let outer_q = q.with_map(InfiniteDomainMap::TanSubstitution);
    let ln_a = a.ln();
    let slot = ErrorSlot::new();
    let xi_integral = |u: f64| -> Result<f64> {
        integrate_to_infinity(
            |xi| {
                if xi <= 0.0 {
                    return 0.0;
                }
                let lc2 = 2.0 * ln_cosh(xi);
                let ln_den = lc2 + (a + u * (-lc2).exp()).ln();
                (xi.ln() + ln_sinh_cosh(xi) - power * ln_den).exp()
            },
            0.0,
            &inner_q,
        )
        .map(|r| r.value)
    };
    let r = integrate_to_infinity(
        |u| {
            if u <= 0.0 {
                return 0.0;
            }
            let w = (0.5 * (beta - 1.0) * u.ln() - u).exp();
            if w == 0.0 {
                return 0.0;
            }
            w * slot.unwrap_or_record(xi_integral(u))
        },
        0.0,
        &outer_q,
    )?;
    slot.check()?;
    let ln_pref = ln_gamma(power) - a - 0.5 * beta * ln_a - (SQRT_2 * PI).ln();
    Ok(ln_pref.exp() * r.value)
}

/// `E[1/G_ν] = Γ(ν−1)/Γ(ν) = 1/(ν − 1)` for `ν > 1`, infinite for `ν ≤ 1`.
pub fn mean_inverse_gamma(nu: f64) -> Result<Extended> {
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::InvalidParameter("gamma shape must be positive"));
    }
    if nu <= 1.0 {
        Ok(Extended::Infinite)
    } else {
        Ok(Extended::Finite(1.0 / (nu - 1.0)))
    }
}

/// How the gamma variable enters the law of `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GammaReading {
    /// `B = (σ_b²/σ_e²) G_β`.
    AsPrinted,
    /// `B = σ_b² / (σ_e² G_β)`, consistent with the extinction probability.
    InverseGamma,
}

impl GammaReading {
    pub fn name(self) -> &'static str {
        match self {
            GammaReading::AsPrinted => "as-printed",
            GammaReading::InverseGamma => "inverse-gamma",
        }
    }
}

/// `E^z[exp(−λY)] = E[exp(−z/(B + 1/λ))]` by quadrature against the
/// `Gamma(β)` density. `λ = 0` gives 1; `λ = ∞` is allowed.
pub fn laplace_y(
    lambda: f64,
    z: f64,
    params: &ModelParams,
    reading: GammaReading,
    q: &QuadratureConfig,
) -> Result<f64> {
    if !(params.alpha > 0.0 && params.sigma_e > 0.0 && params.sigma_b > 0.0) {
        return Err(Error::InvalidParameter(
            "laplace_Y needs alpha, sigma_e, sigma_b > 0",
        ));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter("lambda must be nonnegative"));
    }
    if !(z >= 0.0) || !z.is_finite() {
        return Err(Error::InvalidParameter("z must be finite and nonnegative"));
    }
    if lambda == 0.0 || z == 0.0 {
        return Ok(1.0);
    }
    let law = GammaLaw::new(params.beta())?;
    let ratio = params.var_b() / params.var_e();
    let inv_lambda = 1.0 / lambda;
    let r = integrate_to_infinity(
        |g| {
            let b = match reading {
                GammaReading::AsPrinted => ratio * g,
                GammaReading::InverseGamma => ratio / g,
            };
            let denom = b + inv_lambda;
            let e = if denom == 0.0 { 0.0 } else { (-z / denom).exp() };
            e * law.density(g)
        },
        0.0,
        q,
    )?;
    Ok(r.value.clamp(0.0, 1.0))
}

/// CDF of `∫₀^∞ exp(−αs − σ_e W_s) ds` under either reading:
/// `2/(σ_e² G_β)` (inverse gamma) or `(2/σ_e²) G_β` (as printed).
pub fn dufresne_cdf(x: f64, params: &ModelParams, reading: GammaReading) -> f64 {
    if !(x > 0.0) {
        return 0.0;
    }
    let beta = params.beta();
    let ve = params.var_e();
    match reading {
        GammaReading::InverseGamma => gamma_q(beta, 2.0 / (ve * x)),
        GammaReading::AsPrinted => gamma_p(beta, 0.5 * ve * x),
    }
}

/// Limit constant of `P^z(Z_t > 0 | Z_∞ = 0)` after removing the decay:
///
/// * intermediate: `(2zσ_e/σ_b²) ∫₀^∞ a ψ(a) da`
/// * strong: `(zσ_e²/σ_b²) E[1/G_ν]` with `ν = 2(α/σ_e² − 1)`
/// * weak: not computable (involves a function this model does not define).
pub fn theorem1_constant(
    params: &ModelParams,
    regime: Regime,
    z: f64,
    q: &QuadratureConfig,
) -> Result<Extended> {
    params.require_supercritical_positive()?;
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::InvalidParameter("z must be positive"));
    }
    if classify_regime(params)? != regime {
        return Err(Error::InvalidParameter("regime does not match the parameters"));
    }
    let (se, vb) = (params.sigma_e, params.var_b());
    match regime {
        Regime::IntermediateSupercritical => {
            Ok(Extended::Finite(2.0 * z * se / vb * integral_a_psi(q)?))
        }
        Regime::StronglySupercritical => {
            let nu = 2.0 * (params.alpha / params.var_e() - 1.0);
            Ok(mean_inverse_gamma(nu)?.scale(z * params.var_e() / vb))
        }
        Regime::WeaklySupercritical => Err(Error::NotComputable(
            "weakly supercritical constant depends on an undefined function",
        )),
        _ => Err(Error::InvalidParameter("regime must be supercritical")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn psi_values() {
        assert!((psi(1.0, &q()).unwrap() - 0.146_762_663_173_739_6).abs() < 1e-12);
        assert!((psi(2.0, &q()).unwrap() - 0.026_995_483_256_594_03).abs() < 1e-12);
        assert!((psi_closed_form(1.0) - 0.146_762_663_173_739_6).abs() < 1e-15);
        assert!(psi(0.0, &q()).is_err());
        assert!(psi(-1.0, &q()).is_err());
        let mut prev = f64::INFINITY;
        for k in 1..40 {
            let v = psi(k as f64, &q()).unwrap();
            assert!(v < prev && v > 0.0);
            prev = v;
        }
    }

    #[test]
    fn incomplete_gamma_known_values() {
        // P(1, x) = 1 − e^{−x}
        for &x in &[0.1, 1.0, 3.0, 20.0] {
            assert!((gamma_p(1.0, x) - (1.0 - (-x).exp())).abs() < 1e-14);
        }
        // P(2, x) = 1 − (1 + x) e^{−x}
        for &x in &[0.5, 2.0, 7.0] {
            assert!((gamma_p(2.0, x) - (1.0 - (1.0 + x) * (-x).exp())).abs() < 1e-14);
            assert!((gamma_q(2.0, x) - (1.0 + x) * (-x).exp()).abs() < 1e-14);
        }
        // P(1/2, x) = erf(√x)
        assert!((gamma_p(0.5, 2.0) - libm::erf(2f64.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn mean_inverse_gamma_values() {
        assert_eq!(mean_inverse_gamma(2.0).unwrap(), Extended::Finite(1.0));
        assert_eq!(mean_inverse_gamma(3.0).unwrap(), Extended::Finite(0.5));
        assert_eq!(mean_inverse_gamma(1.0).unwrap(), Extended::Infinite);
        assert_eq!(mean_inverse_gamma(0.4).unwrap(), Extended::Infinite);
        assert!(mean_inverse_gamma(0.0).is_err());
    }

    #[test]
    fn laplace_y_conventions() {
        let p = ModelParams::STANDARD;
        for reading in [GammaReading::AsPrinted, GammaReading::InverseGamma] {
            assert_eq!(laplace_y(0.0, 1.0, &p, reading, &q()).unwrap(), 1.0);
            let mut prev = 1.0;
            for &l in &[0.1, 0.5, 1.0, 2.0, 10.0, 1e3, f64::INFINITY] {
                let v = laplace_y(l, 1.0, &p, reading, &q()).unwrap();
                assert!(v <= prev + 1e-14);
                prev = v;
            }
        }
        let inf = laplace_y(f64::INFINITY, 1.0, &p, GammaReading::InverseGamma, &q()).unwrap();
        assert!((inf - 0.25).abs() < 1e-10);
    }

    #[test]
    fn theorem1_constants() {
        let qq = q();
        let p = ModelParams::STANDARD;
        let c = theorem1_constant(&p, Regime::IntermediateSupercritical, 1.0, &qq).unwrap();
        assert!((c.finite().unwrap() - 2.0 * INTEGRAL_A_PSI).abs() < 1e-9);
        let strong = p.with_alpha(2.0);
        let c = theorem1_constant(&strong, Regime::StronglySupercritical, 1.0, &qq).unwrap();
        assert!((c.finite().unwrap() - 1.0).abs() < 1e-15);
        let weak = p.with_alpha(0.5);
        assert!(matches!(
            theorem1_constant(&weak, Regime::WeaklySupercritical, 1.0, &qq),
            Err(Error::NotComputable(_))
        ));
        let borderline = p.with_alpha(1.4);
        assert!(theorem1_constant(&borderline, Regime::StronglySupercritical, 1.0, &qq)
            .unwrap()
            .is_infinite());
        assert!(theorem1_constant(&p, Regime::StronglySupercritical, 1.0, &qq).is_err());
    }

    #[test]
    fn dufresne_readings_differ() {
        let p = ModelParams::STANDARD;
        for &x in &[0.2, 1.0, 5.0] {
            let a = dufresne_cdf(x, &p, GammaReading::InverseGamma);
            let b = dufresne_cdf(x, &p, GammaReading::AsPrinted);
            assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
            assert!((a - b).abs() > 1e-3);
        }
    }
}
