//! Exact quenched sampling from the environment alone.
//!
//! Given the environment path `S`, the quenched Laplace transform is
//!
//! ```text
//! E[exp(−λ Z_t e^{−S_t}) | S] = exp(−z / (I_t + 1/λ)),   I_t = (σ_b²/2) ∫₀ᵗ e^{−S_u} du.
//! ```
//!
//! Writing `z/(I + 1/λ) = (z/I)(1 − 1/(1 + λI))` identifies the law of
//! `Z_t e^{−S_t}` as compound Poisson: `N ~ Poisson(z/I_t)` jumps, each
//! exponential with mean `I_t`. Letting `λ → ∞` gives
//! `P(Z_t = 0 | S) = exp(−z/I_t)`.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};

use crate::model::ModelParams;
use crate::rng::RngStream;
use crate::sde::{grid_index, SchemeConfig};
use crate::{Error, Result};

/// Environment realization on a uniform grid with the running integral
/// `I_t = (σ_b²/2) ∫₀ᵗ e^{−S_u} du` (trapezoid rule on the same grid).
#[derive(Debug, Clone, PartialEq)]
pub struct EnvPath {
    pub times: Vec<f64>,
    pub s_values: Vec<f64>,
    pub i_values: Vec<f64>,
    pub dt: f64,
    pub sigma_b: f64,
}

impl EnvPath {
    pub fn index_of(&self, t: f64) -> Result<usize> {
        grid_index(t, self.dt, self.times.len().saturating_sub(1))
    }

    /// Builds an environment from given `S` samples on a grid of step `dt`.
    pub fn from_s_values(s_values: Vec<f64>, dt: f64, sigma_b: f64) -> Result<Self> {
        if s_values.is_empty() || s_values[0] != 0.0 {
            return Err(Error::InvalidParameter("environment must start at S_0 = 0"));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter("dt must be positive"));
        }
        let factor = 0.5 * sigma_b * sigma_b;
        let mut i_values = Vec::with_capacity(s_values.len());
        let mut acc = 0.0;
        i_values.push(0.0);
        for w in s_values.windows(2) {
            acc += factor * dt * 0.5 * ((-w[0]).exp() + (-w[1]).exp());
            i_values.push(acc);
        }
        let times = (0..s_values.len()).map(|k| k as f64 * dt).collect();
        Ok(EnvPath {
            times,
            s_values,
            i_values,
            dt,
            sigma_b,
        })
    }
}

/// Streaming environment: exact Gaussian increments for `S` and the
/// trapezoid running integral of `factor · e^{−S}`.
#[derive(Debug, Clone)]
pub struct EnvStepper<R> {
    rng: R,
    h: f64,
    drift_step: f64,
    sd_step: f64,
    factor_h: f64,
    noise_sign: f64,
    k: usize,
    s: f64,
    integral: f64,
    prev_exp: f64,
}

impl<R: Rng> EnvStepper<R> {
    /// `factor` multiplies the integral: `σ_b²/2` for `I_t`, `1` for the raw
    /// exponential functional.
    pub fn new(alpha: f64, sigma_e: f64, factor: f64, h: f64, rng: R) -> Self {
        EnvStepper {
            rng,
            h,
            drift_step: alpha * h,
            sd_step: sigma_e * h.sqrt(),
            factor_h: factor * h,
            noise_sign: 1.0,
            k: 0,
            s: 0.0,
            integral: 0.0,
            prev_exp: 1.0,
        }
    }

    /// Flips the sign of every Gaussian increment (antithetic environment).
    pub fn antithetic(mut self) -> Self {
        self.noise_sign = -self.noise_sign;
        self
    }

    #[inline]
    pub fn time(&self) -> f64 {
        self.k as f64 * self.h
    }

    #[inline]
    pub fn s(&self) -> f64 {
        self.s
    }

    #[inline]
    pub fn integral(&self) -> f64 {
        self.integral
    }

    #[inline]
    pub fn step(&mut self) {
        let n: f64 = StandardNormal.sample(&mut self.rng);
        self.s += self.drift_step + self.noise_sign * self.sd_step * n;
        let e = (-self.s).exp();
        self.integral += self.factor_h * 0.5 * (self.prev_exp + e);
        self.prev_exp = e;
        self.k += 1;
    }
}

fn check_env_params(params: &ModelParams, cfg: &SchemeConfig) -> Result<()> {
    cfg.validate()?;
    if !(params.sigma_e > 0.0) || !params.alpha.is_finite() {
        return Err(Error::InvalidParameter("environment simulation needs sigma_e > 0"));
    }
    Ok(())
}

/// Samples `S` on the grid of `cfg` together with `I_t`.
pub fn simulate_environment(
    params: &ModelParams,
    cfg: &SchemeConfig,
    rng: RngStream,
) -> Result<EnvPath> {
    check_env_params(params, cfg)?;
    let steps = cfg.steps();
    let h = cfg.step_size();
    let mut st = EnvStepper::new(
        params.alpha,
        params.sigma_e,
        0.5 * params.var_b(),
        h,
        rng.environment(),
    );
    let mut times = Vec::with_capacity(steps + 1);
    let mut s_values = Vec::with_capacity(steps + 1);
    let mut i_values = Vec::with_capacity(steps + 1);
    times.push(0.0);
    s_values.push(0.0);
    i_values.push(0.0);
    for _ in 0..steps {
        st.step();
        times.push(st.time());
        s_values.push(st.s());
        i_values.push(st.integral());
    }
    Ok(EnvPath {
        times,
        s_values,
        i_values,
        dt: h,
        sigma_b: params.sigma_b,
    })
}

/// `exp(−z/I)` with the conventions `c/0 = ∞` for `c > 0` and `e^{−∞} = 0`.
#[inline]
pub fn extinct_given_integral(z: f64, integral: f64) -> f64 {
    if z == 0.0 {
        1.0
    } else if integral == 0.0 {
        0.0
    } else {
        (-z / integral).exp()
    }
}

/// `1 − exp(−z/I)`, without cancellation for small `z/I`.
#[inline]
pub fn survive_given_integral(z: f64, integral: f64) -> f64 {
    if z == 0.0 {
        0.0
    } else if integral == 0.0 {
        1.0
    } else {
        -(-z / integral).exp_m1()
    }
}

/// `P(Z_t = 0 | S)` for the environment `env` started from `z`.
pub fn quenched_extinct_by(env: &EnvPath, t: f64, z: f64) -> Result<f64> {
    if !(env.sigma_b > 0.0) {
        return Err(Error::InvalidParameter("quenched extinction needs sigma_b > 0"));
    }
    if !(z >= 0.0) {
        return Err(Error::InvalidParameter("z must be nonnegative"));
    }
    let k = env.index_of(t)?;
    Ok(extinct_given_integral(z, env.i_values[k]))
}

/// Draws `Z_t e^{−S_t}` given `I_t`: a `Gamma(N, I_t)` variable with
/// `N ~ Poisson(z/I_t)` (zero when `N = 0`). At `I_t = 0` it returns `z`.
pub fn sample_scaled_given_integral<R: Rng + ?Sized>(z: f64, integral: f64, rng: &mut R) -> f64 {
    if z == 0.0 {
        return 0.0;
    }
    if integral == 0.0 {
        return z;
    }
    let mean = z / integral;
    let jumps = match Poisson::new(mean) {
        Ok(d) => d.sample(rng),
        Err(_) => return z, // mean beyond the sampler's range: I is negligible
    };
    if jumps == 0.0 {
        return 0.0;
    }
    match Gamma::new(jumps, integral) {
        Ok(g) => g.sample(rng),
        Err(_) => 0.0,
    }
}

/// Exact draw of `Z_t` from the quenched law given `env`.
pub fn sample_z_given_env<R: Rng + ?Sized>(env: &EnvPath, t: f64, z: f64, rng: &mut R) -> Result<f64> {
    if !(env.sigma_b > 0.0) {
        return Err(Error::InvalidParameter("quenched sampling needs sigma_b > 0"));
    }
    if !(z >= 0.0) {
        return Err(Error::InvalidParameter("z must be nonnegative"));
    }
    let k = env.index_of(t)?;
    let y = sample_scaled_given_integral(z, env.i_values[k], rng);
    Ok(y * env.s_values[k].exp())
}

/// A truncated sample of `∫₀^∞ exp(−αs − σ_e W_s) ds`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DufresneSample {
    /// `∫₀^T e^{−S̃_s} ds` by the trapezoid rule.
    pub truncated: f64,
    /// `E[∫_T^∞ e^{−S̃_s} ds | S̃_T] = e^{−S̃_T} / (α − σ_e²/2)`; infinite
    /// when `α ≤ σ_e²/2`.
    pub tail_mean: f64,
}

/// Samples the exponential functional of drifted Brownian motion truncated
/// at `cfg.horizon`.
pub fn dufresne_functional(
    params: &ModelParams,
    cfg: &SchemeConfig,
    rng: RngStream,
) -> Result<DufresneSample> {
    if !(params.alpha > 0.0) {
        return Err(Error::InvalidParameter(
            "the exponential functional diverges unless alpha > 0",
        ));
    }
    check_env_params(params, cfg)?;
    let mut st = EnvStepper::new(params.alpha, params.sigma_e, 1.0, cfg.step_size(), rng.environment());
    for _ in 0..cfg.steps() {
        st.step();
    }
    let margin = params.alpha - 0.5 * params.var_e();
    let tail_mean = if margin > 0.0 {
        (-st.s()).exp() / margin
    } else {
        f64::INFINITY
    };
    Ok(DufresneSample {
        truncated: st.integral(),
        tail_mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn frozen_environment_extinction() {
        // S ≡ 0, σ_b = 1 ⇒ I_t = t/2; I_2 = 1 ⇒ e^{−1}
        let env = EnvPath::from_s_values(vec![0.0; 201], 0.01, 1.0).unwrap();
        let p = quenched_extinct_by(&env, 2.0, 1.0).unwrap();
        assert!((p - (-1.0f64).exp()).abs() < 1e-12);
        // Feller diffusion dZ = √Z dW: P(Z_t = 0) = exp(−2z/t)
        let q = quenched_extinct_by(&env, 1.0, 1.0).unwrap();
        assert!((q - (-2.0f64).exp()).abs() < 1e-12);
        assert_eq!(quenched_extinct_by(&env, 1.0, 0.0).unwrap(), 1.0);
        assert_eq!(quenched_extinct_by(&env, 0.0, 1.0).unwrap(), 0.0);
        assert!(quenched_extinct_by(&env, 1.005, 1.0).is_err());
    }

    #[test]
    fn environment_invariants() {
        let p = ModelParams::STANDARD;
        let cfg = SchemeConfig::new(0.01, 5.0).unwrap();
        let env = simulate_environment(&p, &cfg, RngStream::new(3, 1)).unwrap();
        assert_eq!(env.s_values[0], 0.0);
        assert_eq!(env.i_values[0], 0.0);
        assert!(env.i_values.windows(2).all(|w| w[1] >= w[0]));
        let mut last = 0.0;
        for k in 0..env.times.len() {
            let q = quenched_extinct_by(&env, env.times[k], 1.0).unwrap();
            assert!(q >= last);
            last = q;
        }
    }

    #[test]
    fn antithetic_environment_is_mirrored_when_driftless() {
        let mut a = EnvStepper::new(0.0, 1.3, 1.0, 0.01, RngStream::new(1, 0).environment());
        let mut b =
            EnvStepper::new(0.0, 1.3, 1.0, 0.01, RngStream::new(1, 0).environment()).antithetic();
        for _ in 0..500 {
            a.step();
            b.step();
            assert_eq!(a.s(), -b.s());
        }
    }

    #[test]
    fn trapezoid_is_second_order() {
        // deterministic smooth environment S_t = sin t on [0, 2]
        let exact = {
            // high-resolution Simpson reference
            let n = 200_000;
            let h = 2.0 / n as f64;
            let f = |t: f64| (-(t.sin())).exp();
            let mut acc = f(0.0) + f(2.0);
            for k in 1..n {
                acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
            }
            0.5 * acc * h / 3.0
        };
        let err = |dt: f64| {
            let n = (2.0 / dt).round() as usize;
            let s = (0..=n).map(|k| (k as f64 * dt).sin()).collect();
            let env = EnvPath::from_s_values(s, dt, 1.0).unwrap();
            (env.i_values[n] - exact).abs()
        };
        let ratio = err(0.02) / err(0.01);
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn scaled_sampler_degenerate_cases() {
        let mut rng = RngStream::new(1, 0).branching();
        assert_eq!(sample_scaled_given_integral(0.0, 0.7, &mut rng), 0.0);
        assert_eq!(sample_scaled_given_integral(2.0, 0.0, &mut rng), 2.0);
        let env = EnvPath::from_s_values(vec![0.0; 11], 0.1, 1.0).unwrap();
        for _ in 0..100 {
            assert_eq!(sample_z_given_env(&env, 1.0, 0.0, &mut rng).unwrap(), 0.0);
        }
        assert_eq!(sample_z_given_env(&env, 0.0, 1.5, &mut rng).unwrap(), 1.5);
    }

    #[test]
    fn dufresne_requires_positive_alpha() {
        let cfg = SchemeConfig::new(0.01, 10.0).unwrap();
        let p = ModelParams::STANDARD.with_alpha(0.0);
        assert!(dufresne_functional(&p, &cfg, RngStream::new(1, 0)).is_err());
        let d = dufresne_functional(&ModelParams::STANDARD, &cfg, RngStream::new(1, 0)).unwrap();
        assert!(d.truncated > 0.0 && d.tail_mean > 0.0);
    }
}
