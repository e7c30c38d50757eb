//! Model parameters, regime classification, scale functions and the
//! closed-form extinction probability.


#[allow(unused_imports)]
use num_traits::Float;
use crate::{Error, Result};

/// Parameters of the BDRE.
///
/// `alpha` is the drift of the associated Brownian motion `S` (per unit
/// time), `sigma_e` its infinitesimal standard deviation, `sigma_b` the
/// branching standard deviation and `z0` the initial mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub alpha: f64,
    pub sigma_e: f64,
    pub sigma_b: f64,
    pub z0: f64,
}

impl ModelParams {
    /// `(α, σ_e, σ_b, z) = (1, 1, 1, 1)`.
    pub const STANDARD: ModelParams = ModelParams {
        alpha: 1.0,
        sigma_e: 1.0,
        sigma_b: 1.0,
        z0: 1.0,
    };

    pub fn new(alpha: f64, sigma_e: f64, sigma_b: f64, z0: f64) -> Result<Self> {
        let p = ModelParams {
            alpha,
            sigma_e,
            sigma_b,
            z0,
        };
        p.validate()?;
        Ok(p)
    }

    /// Checks finiteness, signs and the standing assumption `σ_b + z > 0`.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite()
            && self.sigma_e.is_finite()
            && self.sigma_b.is_finite()
            && self.z0.is_finite())
        {
            return Err(Error::InvalidParameter("parameters must be finite"));
        }
        if self.sigma_e < 0.0 || self.sigma_b < 0.0 {
            return Err(Error::InvalidParameter("sigma_e and sigma_b must be nonnegative"));
        }
        if self.z0 < 0.0 {
            return Err(Error::InvalidParameter("z0 must be nonnegative"));
        }
        if self.sigma_b + self.z0 <= 0.0 {
            return Err(Error::InvalidParameter("sigma_b + z0 must be positive"));
        }
        Ok(())
    }

    /// Requires `α, σ_e, σ_b ∈ (0, ∞)`, the setting of the survival asymptotics.
    pub fn require_supercritical_positive(&self) -> Result<()> {
        self.validate()?;
        if !(self.alpha > 0.0 && self.sigma_e > 0.0 && self.sigma_b > 0.0) {
            return Err(Error::InvalidParameter(
                "alpha, sigma_e and sigma_b must all be positive",
            ));
        }
        Ok(())
    }

    /// `β = 2α/σ_e²`. Infinite or NaN when `σ_e = 0`.
    #[inline]
    pub fn beta(&self) -> f64 {
        2.0 * self.alpha / (self.sigma_e * self.sigma_e)
    }

    #[inline]
    pub fn var_e(&self) -> f64 {
        self.sigma_e * self.sigma_e
    }

    #[inline]
    pub fn var_b(&self) -> f64 {
        self.sigma_b * self.sigma_b
    }

    pub fn with_alpha(self, alpha: f64) -> Self {
        ModelParams { alpha, ..self }
    }

    pub fn with_z0(self, z0: f64) -> Self {
        ModelParams { z0, ..self }
    }

    /// The same model with criticality parameter `-α`.
    pub fn negated(self) -> Self {
        self.with_alpha(-self.alpha)
    }
}

/// Criticality class of the BDRE, determined by `α` against `0` and `±σ_e²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    StronglySupercritical,
    IntermediateSupercritical,
    WeaklySupercritical,
    Critical,
    WeaklySubcritical,
    IntermediateSubcritical,
    StronglySubcritical,
}

impl Regime {
    pub fn is_supercritical(self) -> bool {
        matches!(
            self,
            Regime::StronglySupercritical
                | Regime::IntermediateSupercritical
                | Regime::WeaklySupercritical
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::StronglySupercritical => "strongly-supercritical",
            Regime::IntermediateSupercritical => "intermediate-supercritical",
            Regime::WeaklySupercritical => "weakly-supercritical",
            Regime::Critical => "critical",
            Regime::WeaklySubcritical => "weakly-subcritical",
            Regime::IntermediateSubcritical => "intermediate-subcritical",
            Regime::StronglySubcritical => "strongly-subcritical",
        }
    }

    /// Power `p` of the `t^p` prefactor in the decay of `P(Z_t > 0 | Z_∞ = 0)`.
    /// Only defined for the supercritical labels.
    pub fn polynomial_power(self) -> Option<f64> {
        match self {
            Regime::WeaklySupercritical => Some(-1.5),
            Regime::IntermediateSupercritical => Some(-0.5),
            Regime::StronglySupercritical => Some(0.0),
            _ => None,
        }
    }

    /// Exponential decay rate of `P(Z_t > 0 | Z_∞ = 0)` for the supercritical
    /// labels: `α²/(2σ_e²)`, `σ_e²/2` and `α − σ_e²/2` respectively.
    pub fn decay_rate(self, params: &ModelParams) -> Option<f64> {
        let (a, v) = (params.alpha, params.var_e());
        match self {
            Regime::WeaklySupercritical => Some(a * a / (2.0 * v)),
            Regime::IntermediateSupercritical => Some(v / 2.0),
            Regime::StronglySupercritical => Some(a - v / 2.0),
            _ => None,
        }
    }
}

impl core::fmt::Display for Regime {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Classifies the BDRE by exact comparison of `α` with `−σ_e²`, `0`, `σ_e²`.
pub fn classify_regime(params: &ModelParams) -> Result<Regime> {
    if !(params.sigma_e > 0.0) || !params.alpha.is_finite() || !params.sigma_e.is_finite() {
        return Err(Error::InvalidParameter(
            "regime classification needs sigma_e > 0",
        ));
    }
    let a = params.alpha;
    let v = params.var_e();
    Ok(if a > v {
        Regime::StronglySupercritical
    } else if a == v {
        Regime::IntermediateSupercritical
    } else if a > 0.0 {
        Regime::WeaklySupercritical
    } else if a == 0.0 {
        Regime::Critical
    } else if a > -v {
        Regime::WeaklySubcritical
    } else if a == -v {
        Regime::IntermediateSubcritical
    } else {
        Regime::StronglySubcritical
    })
}

/// Scale function of `Z`: `U(z) = (σ_e² z + σ_b²)^(−2α/σ_e²)`.
pub fn scale_u(z: f64, params: &ModelParams) -> Result<f64> {
    if !(params.sigma_e > 0.0) {
        return Err(Error::InvalidParameter("scale_U needs sigma_e > 0"));
    }
    if !(z >= 0.0) {
        return Err(Error::InvalidParameter("scale_U needs z >= 0"));
    }
    let base = params.var_e() * z + params.var_b();
    if base == 0.0 {
        return Err(Error::InvalidParameter("scale_U(0) is undefined when sigma_b = 0"));
    }
    Ok(base.powf(-params.beta()))
}

/// Scale function of `S`: `V(s) = exp(−2αs/σ_e²)`.
pub fn scale_v(s: f64, params: &ModelParams) -> Result<f64> {
    if !(params.sigma_e > 0.0) {
        return Err(Error::InvalidParameter("scale_V needs sigma_e > 0"));
    }
    Ok((-params.beta() * s).exp())
}

fn check_extinction_params(z: f64, params: &ModelParams) -> Result<()> {
    if !(params.alpha > 0.0) {
        return Err(Error::InvalidParameter(
            "closed-form extinction probability needs alpha > 0",
        ));
    }
    if !(params.sigma_e > 0.0 && params.sigma_b > 0.0) {
        return Err(Error::InvalidParameter(
            "closed-form extinction probability needs sigma_e, sigma_b > 0",
        ));
    }
    if !(z >= 0.0) {
        return Err(Error::InvalidParameter("z must be nonnegative"));
    }
    Ok(())
}

/// `β · log(1 + σ_e² z/σ_b²)`, so that `U(z)/U(0) = exp(−log_ratio)`.
#[inline]
pub(crate) fn log_scale_ratio(z: f64, params: &ModelParams) -> f64 {
    params.beta() * (params.var_e() * z / params.var_b()).ln_1p()
}

/// `P^z(Z_∞ = 0) = U(z)/U(0) = (1 + σ_e² z/σ_b²)^(−β)` for `α > 0`.
pub fn extinction_probability(z: f64, params: &ModelParams) -> Result<f64> {
    check_extinction_params(z, params)?;
    Ok((-log_scale_ratio(z, params)).exp())
}

/// `1 − U(z)/U(0)`, evaluated without cancellation for small `z`.
pub fn survival_probability(z: f64, params: &ModelParams) -> Result<f64> {
    check_extinction_params(z, params)?;
    Ok(-(-log_scale_ratio(z, params)).exp_m1())
}
