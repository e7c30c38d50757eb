//! Drift coefficients of the BDRE and of its Doob h-transforms.
//!
//! `drift_z` is the full infinitesimal drift of the population coordinate
//! (the coefficient of `f_z` in the generator, i.e. with the drift of `dS`
//! already substituted into the `Z dS` term); `drift_s` is the drift of the
//! environment coordinate. The diffusion part is the same for every variant:
//! `σ_e Z dW_e + σ_b √Z dW_b` for `Z` and `σ_e dW_e` for `S`.


#[allow(unused_imports)]
use num_traits::Float;
use crate::model::{log_scale_ratio, ModelParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftPair {
    pub drift_z: f64,
    pub drift_s: f64,
}

/// `((α + σ_e²/2) z, α)`.
#[inline]
pub fn drift_unconditioned(z: f64, params: &ModelParams) -> DriftPair {
    DriftPair {
        drift_z: (params.alpha + 0.5 * params.var_e()) * z,
        drift_s: params.alpha,
    }
}

/// `σ_e² z / (σ_e² z + σ_b²)`, the share of the quadratic variation of `Z`
/// that is environmental.
#[inline]
fn environmental_share(z: f64, params: &ModelParams) -> f64 {
    let ez = params.var_e() * z;
    ez / (ez + params.var_b())
}

/// Drift with the conditioning-on-extinction correction multiplied by
/// `weight` (1 for the conditioned process, 0 for the plain BDRE).
#[inline]
pub(crate) fn extinction_drift_weighted(z: f64, params: &ModelParams, weight: f64) -> DriftPair {
    let a = params.alpha;
    let share = environmental_share(z, params);
    DriftPair {
        drift_z: (0.5 * params.var_e() + a - weight * 2.0 * a) * z,
        drift_s: a - weight * 2.0 * a * share,
    }
}

fn check_extinction(z: f64, params: &ModelParams) -> Result<()> {
    if !(params.alpha > 0.0) {
        return Err(Error::InvalidParameter("conditioning on extinction needs alpha > 0"));
    }
    if !(params.sigma_e > 0.0) {
        return Err(Error::InvalidParameter("conditioning on extinction needs sigma_e > 0"));
    }
    if !(z >= 0.0) || params.sigma_b + z <= 0.0 {
        return Err(Error::InvalidParameter("state must satisfy z >= 0 and sigma_b + z > 0"));
    }
    Ok(())
}

/// Drifts of the BDRE conditioned on `{Z_∞ = 0}`:
///
/// ```text
/// dŽ = (σ_e²/2 − 2α σ_b²/(σ_e²Ž + σ_b²)) Ž dt + Ž dŠ + √(σ_b² Ž) dW_b
/// dŠ = (α − 2α σ_e²Ž/(σ_e²Ž + σ_b²)) dt + σ_e dW_e
/// ```
///
/// so that `drift_z = (σ_e²/2 − α) z` and `drift_s` moves from `α` (near 0)
/// to `−α` (large `z`).
pub fn drift_conditioned_extinction(z: f64, params: &ModelParams) -> Result<DriftPair> {
    check_extinction(z, params)?;
    Ok(extinction_drift_weighted(z, params, 1.0))
}

/// `U(z)/(U(0) − U(z))` computed as `e^{−L}/(1 − e^{−L})` with
/// `L = β log1p(σ_e² z/σ_b²)`, stable for small `z`.
#[inline]
pub(crate) fn survival_odds_inverse(z: f64, params: &ModelParams) -> f64 {
    let l = log_scale_ratio(z, params);
    (-l).exp() / -(-l).exp_m1()
}

#[inline]
pub(crate) fn survival_drift_weighted(z: f64, params: &ModelParams, weight: f64) -> DriftPair {
    let a = params.alpha;
    let r = weight * survival_odds_inverse(z, params);
    DriftPair {
        drift_z: (0.5 * params.var_e() + a + 2.0 * a * r) * z,
        drift_s: a + 2.0 * a * environmental_share(z, params) * r,
    }
}

/// Drifts of the BDRE conditioned on `{Z_∞ > 0}`:
///
/// ```text
/// dẐ = (σ_e²/2 + 2α σ_b²/(σ_e²Ẑ + σ_b²) · R(Ẑ)) Ẑ dt + Ẑ dŜ + √(σ_b² Ẑ) dW_b
/// dŜ = (α + 2α σ_e²Ẑ/(σ_e²Ẑ + σ_b²) · R(Ẑ)) dt + σ_e dW_e
/// ```
///
/// with `R = U/(U(0) − U)`. `drift_s` decreases from `α + σ_e²` at `0⁺` to
/// `α` at infinity, and `drift_z → σ_b²` as `z → 0⁺`.
pub fn drift_conditioned_survival(z: f64, params: &ModelParams) -> Result<DriftPair> {
    if !(params.alpha > 0.0 && params.sigma_e > 0.0 && params.sigma_b > 0.0) {
        return Err(Error::InvalidParameter(
            "conditioning on survival needs alpha, sigma_e, sigma_b > 0",
        ));
    }
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::InvalidParameter(
            "conditioning on survival needs a finite state z > 0",
        ));
    }
    Ok(survival_drift_weighted(z, params, 1.0))
}

/// Drifts of the BDRE conditioned on `{S_∞ = −∞}` (h-transform by `V`):
/// the correction `σ_e² ∂_s log V = −2α` turns the pair into the BDRE with
/// criticality `−α`.
pub fn drift_conditioned_env_descent(z: f64, params: &ModelParams) -> Result<DriftPair> {
    if !(params.alpha > 0.0 && params.sigma_e > 0.0) {
        return Err(Error::InvalidParameter(
            "conditioning on S_inf = -inf needs alpha, sigma_e > 0",
        ));
    }
    let base = drift_unconditioned(z, params);
    let grad_log_v = -params.beta();
    let ve = params.var_e();
    // covariance rows (z, s) of the diffusion matrix against ∇log V = (0, −β)
    Ok(DriftPair {
        drift_z: base.drift_z + ve * z * grad_log_v,
        drift_s: base.drift_s + ve * grad_log_v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_params() -> ModelParams {
        ModelParams::STANDARD
    }

    #[test]
    fn extinction_limits() {
        let p = std_params();
        let near0 = drift_conditioned_extinction(1e-12, &p).unwrap();
        assert!((near0.drift_s - 1.0).abs() < 1e-11);
        let far = drift_conditioned_extinction(1e12, &p).unwrap();
        assert!((far.drift_s + 1.0).abs() < 1e-11);
        let mid = drift_conditioned_extinction(p.var_b() / p.var_e(), &p).unwrap();
        assert!(mid.drift_s.abs() < 1e-15);
        // one-dimensional form: (σ_e²/2 − α) z
        let d = drift_conditioned_extinction(2.5, &p).unwrap();
        assert!((d.drift_z - (0.5 - 1.0) * 2.5).abs() < 1e-15);
    }

    #[test]
    fn extinction_without_branching_noise_has_negated_drift() {
        let p = ModelParams::new(0.8, 1.2, 0.0, 1.0).unwrap();
        for &z in &[1e-9, 0.3, 1.0, 50.0] {
            let d = drift_conditioned_extinction(z, &p).unwrap();
            assert!((d.drift_s + 0.8).abs() < 1e-14);
        }
        assert!(drift_conditioned_extinction(0.0, &p).is_err());
    }

    #[test]
    fn extinction_rejects_nonpositive_alpha() {
        assert!(drift_conditioned_extinction(1.0, &std_params().with_alpha(0.0)).is_err());
        assert!(drift_conditioned_extinction(1.0, &std_params().with_alpha(-1.0)).is_err());
    }

    #[test]
    fn survival_correction_at_one() {
        // R(1) = 0.25/0.75
        let p = std_params();
        assert!((survival_odds_inverse(1.0, &p) - 1.0 / 3.0).abs() < 1e-15);
        let d = drift_conditioned_survival(1.0, &p).unwrap();
        assert!((d.drift_s - (1.0 + 2.0 * 0.5 / 3.0)).abs() < 1e-15);
        assert!((d.drift_z - (0.5 + 1.0 + 2.0 / 3.0)).abs() < 1e-15);
    }

    /// Series oracle: with `x = σ_e² z/σ_b²`, `R ≈ 1/(βx) + (β+1)/(2β) + O(x)`
    /// and the environmental share is `x/(1+x)`, so
    /// `drift_s → α + 2α/β = α + σ_e²`.
    #[test]
    fn survival_limit_near_zero_matches_series() {
        for &(a, se, sb) in &[(1.0, 1.0, 1.0), (0.5, 1.0, 1.0), (2.0, 0.7, 1.3), (0.1, 2.0, 0.5)] {
            let p = ModelParams::new(a, se, sb, 1.0).unwrap();
            let beta = p.beta();
            let x = 1e-7;
            let z = x * p.var_b() / p.var_e();
            let series_r = 1.0 / (beta * x) + (beta + 1.0) / (2.0 * beta);
            let r = survival_odds_inverse(z, &p);
            assert!((r - series_r).abs() / series_r < 1e-6, "{r} vs {series_r}");
            let d = drift_conditioned_survival(z, &p).unwrap();
            assert!((d.drift_s - (a + se * se)).abs() < 1e-5 * (a + se * se));
            assert!((d.drift_z - sb * sb).abs() < 1e-5 * sb * sb);
            // far field, where R ≈ (σ_e² z/σ_b²)^{−β} is negligible
            if beta >= 0.5 {
                let far = drift_conditioned_survival(1e30, &p).unwrap();
                assert!(far.drift_s >= a && far.drift_s - a < 1e-6);
            }
        }
    }

    #[test]
    fn survival_drift_is_monotone_and_bounded() {
        let p = ModelParams::new(1.3, 0.9, 1.1, 1.0).unwrap();
        let upper = p.alpha + p.var_e();
        let mut prev = f64::INFINITY;
        for k in -60..60 {
            let z = 10f64.powf(k as f64 / 8.0);
            let d = drift_conditioned_survival(z, &p).unwrap();
            assert!(d.drift_s.is_finite() && d.drift_z.is_finite());
            assert!(d.drift_s >= p.alpha && d.drift_s < upper, "z={z} drift_s={}", d.drift_s);
            assert!(d.drift_s <= prev);
            prev = d.drift_s;
        }
        assert!(drift_conditioned_survival(0.0, &p).is_err());
    }

    #[test]
    fn zeroed_corrections_reduce_to_unconditioned() {
        let p = ModelParams::new(0.6, 1.4, 0.8, 1.0).unwrap();
        for &z in &[1e-3, 0.5, 3.0, 100.0] {
            let plain = drift_unconditioned(z, &p);
            assert_eq!(extinction_drift_weighted(z, &p, 0.0), plain);
            let s = survival_drift_weighted(z, &p, 0.0);
            assert!((s.drift_z - plain.drift_z).abs() < 1e-15 * plain.drift_z.abs().max(1.0));
            assert_eq!(s.drift_s, plain.drift_s);
        }
    }

    #[test]
    fn env_descent_is_negated_bdre() {
        let p = ModelParams::new(0.9, 1.1, 0.7, 1.0).unwrap();
        for &z in &[0.0, 0.4, 7.0] {
            let d = drift_conditioned_env_descent(z, &p).unwrap();
            let neg = drift_unconditioned(z, &p.negated());
            assert!((d.drift_z - neg.drift_z).abs() < 1e-14);
            assert!((d.drift_s - neg.drift_s).abs() < 1e-14);
        }
    }
}
