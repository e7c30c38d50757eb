//! Monte Carlo estimators built on the core simulators.
//!
//! Every estimator takes a `seed` and derives a labelled sub-seed from it,
//! so two routes run with the same seed still use independent noise.
//! Replication `i` draws from `RngStream::new(sub_seed, i)`.

use std::fmt;
use std::str::FromStr;

use bdre_core::bpre::{BpreSimulator, OffspringModel};
use bdre_core::env::{
    extinct_given_integral, sample_scaled_given_integral, survive_given_integral,
};
use bdre_core::sde::{Flow, Simulator};
use bdre_core::specfun::{dufresne_cdf, laplace_y, GammaReading};
use bdre_core::stats::{ks_one_sample, ks_two_sample, KsResult, MCEstimate};
use bdre_core::quad::QuadratureConfig;
use bdre_core::{
    classify_regime, dufresne_functional, extinction_probability, scale_u, scale_v, Dynamics,
    EnvStepper, Error, ModelParams, QuenchedVariant, Regime, Result, RngStream, SchemeConfig,
};

use crate::parallel::{derive_seed, parallel_collect, parallel_moments};

/// Paths are declared surviving once `Z` reaches a level from which the
/// extinction probability is below this mass.
pub const ESCAPE_MASS: f64 = 1e-6;

/// Smallest sample size accepted by the KS-based tests.
pub const MIN_KS_SAMPLES: u64 = 1000;

/// Level `K` with `U(K)/U(0) = mass`, for `α > 0`.
pub fn escape_level(params: &ModelParams, mass: f64) -> Option<f64> {
    if !(params.alpha > 0.0 && params.sigma_e > 0.0 && mass > 0.0 && mass < 1.0) {
        return None;
    }
    let k = params.var_b() / params.var_e() * (mass.powf(-1.0 / params.beta()) - 1.0);
    k.is_finite().then_some(k)
}

macro_rules! named_enum {
    ($name:ident { $($variant:ident => $label:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn name(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> std::result::Result<Self, String> {
                $name::ALL
                    .iter()
                    .copied()
                    .find(|v| v.name() == s)
                    .ok_or_else(|| format!("unknown {}: {s}", stringify!($name)))
            }
        }
    };
}

named_enum!(ExtinctionMethod {
    Pathwise => "pathwise",
    RaoBlackwell => "rao-blackwell",
    ClosedForm => "closed-form",
});

named_enum!(SurvivalRoute {
    HTransformSim => "h-transform",
    NegatedAlphaSim => "negated-alpha",
    Reweighting => "reweighting",
    ReweightingRaoBlackwell => "reweighting-rb",
    EnvironmentRaoBlackwell => "environment-rb",
});

named_enum!(Functional {
    UOfZ => "U_of_Z",
    VOfS => "V_of_S",
    ZOverExpS => "Z_over_expS",
});

// ---------------------------------------------------------------------------
// extinction

/// `P^z(Z_horizon = 0)`.
pub fn estimate_extinction(
    params: &ModelParams,
    method: ExtinctionMethod,
    n: u64,
    horizon: f64,
    cfg: &SchemeConfig,
    seed: u64,
) -> Result<MCEstimate> {
    params.validate()?;
    if !(params.sigma_b > 0.0) {
        return Err(Error::InvalidParameter("extinction needs sigma_b > 0"));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive"));
    }
    if method == ExtinctionMethod::ClosedForm {
        return Ok(MCEstimate::degenerate(
            extinction_probability(params.z0, params)?,
            n,
            method.name(),
        ));
    }
    if params.z0 == 0.0 {
        return Ok(MCEstimate::degenerate(1.0, n, method.name()));
    }
    let c = cfg.with_horizon(horizon);
    c.validate()?;
    let sub = derive_seed(seed, method.name());
    let z = params.z0;
    let m = match method {
        ExtinctionMethod::Pathwise => {
            let sim = Simulator::new(*params, c, Dynamics::Bdre)?;
            let escape = escape_level(params, ESCAPE_MASS).unwrap_or(f64::INFINITY);
            parallel_moments(n, 1, |i, out| {
                let rng = RngStream::new(sub, i);
                let mut extinct = false;
                sim.run(&mut rng.environment(), &mut rng.branching(), 1, |_, st| {
                    if st.absorbed {
                        extinct = true;
                        Flow::Stop
                    } else if st.z >= escape {
                        Flow::Stop
                    } else {
                        Flow::Continue
                    }
                })?;
                out[0] = if extinct { 1.0 } else { 0.0 };
                Ok(())
            })?
        }
        ExtinctionMethod::RaoBlackwell => {
            // antithetic pairs: `n` environments give `⌈n/2⌉` pair averages
            let (h, steps) = (c.step_size(), c.steps());
            let factor = 0.5 * params.var_b();
            parallel_moments(n.div_ceil(2), 1, |i, out| {
                let rng = RngStream::new(sub, i);
                let mut a = EnvStepper::new(params.alpha, params.sigma_e, factor, h, rng.environment());
                let mut b = EnvStepper::new(params.alpha, params.sigma_e, factor, h, rng.environment())
                    .antithetic();
                for _ in 0..steps {
                    a.step();
                    b.step();
                }
                out[0] = 0.5
                    * (extinct_given_integral(z, a.integral()) + extinct_given_integral(z, b.integral()));
                Ok(())
            })?
        }
        ExtinctionMethod::ClosedForm => unreachable!(),
    };
    m[0].estimate(method.name())
}

// ---------------------------------------------------------------------------
// conditioned survival

fn checkpoint_indices(cfg: &SchemeConfig, times: &[f64]) -> Result<Vec<usize>> {
    let idx = times
        .iter()
        .map(|&t| cfg.index_of(t))
        .collect::<Result<Vec<_>>>()?;
    if idx.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("checkpoints must be nondecreasing"));
    }
    Ok(idx)
}

fn grid_for(cfg: &SchemeConfig, times: &[f64]) -> Result<(SchemeConfig, Vec<usize>)> {
    let t_max = times.iter().copied().fold(0.0, f64::max);
    if times.is_empty() || times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(Error::InvalidParameter("times must be finite and nonnegative"));
    }
    let c = cfg.with_horizon(if t_max > 0.0 { t_max } else { cfg.dt });
    c.validate()?;
    let idx = checkpoint_indices(&c, times)?;
    Ok((c, idx))
}

/// `P^z(Z_t > 0 | Z_∞ = 0)` at a single time.
pub fn estimate_conditioned_survival(
    params: &ModelParams,
    t: f64,
    route: SurvivalRoute,
    n: u64,
    cfg: &SchemeConfig,
    seed: u64,
) -> Result<MCEstimate> {
    Ok(conditioned_survival_curve(params, &[t], route, n, cfg, seed)?.remove(0))
}

/// `P^z(Z_t > 0 | Z_∞ = 0)` at every `t` in `times` (nondecreasing), all
/// from one ensemble.
pub fn conditioned_survival_curve(
    params: &ModelParams,
    times: &[f64],
    route: SurvivalRoute,
    n: u64,
    cfg: &SchemeConfig,
    seed: u64,
) -> Result<Vec<MCEstimate>> {
    params.require_supercritical_positive()?;
    if !(params.sigma_b > 0.0) {
        return Err(Error::InvalidParameter("conditioned survival needs sigma_b > 0"));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive"));
    }
    let (c, idx) = grid_for(cfg, times)?;
    let k = idx.len();
    let z = params.z0;
    if z == 0.0 {
        return Ok(vec![MCEstimate::degenerate(0.0, n, route.name()); k]);
    }
    let sub = derive_seed(seed, route.name());
    let u0 = scale_u(z, params)?;
    let moments = match route {
        SurvivalRoute::HTransformSim | SurvivalRoute::NegatedAlphaSim | SurvivalRoute::Reweighting => {
            let (p, dynamics) = match route {
                SurvivalRoute::HTransformSim => (
                    *params,
                    Dynamics::Quenched(QuenchedVariant::ConditionedExtinction),
                ),
                SurvivalRoute::NegatedAlphaSim => (
                    params.negated(),
                    Dynamics::Quenched(QuenchedVariant::Unconditioned),
                ),
                _ => (*params, Dynamics::Bdre),
            };
            let weighted = route == SurvivalRoute::Reweighting;
            let sim = Simulator::new(p, c, dynamics)?;
            parallel_moments(n, k, |i, out| {
                out.fill(0.0);
                let rng = RngStream::new(sub, i);
                let mut next = 0;
                let mut failure = None;
                sim.run(&mut rng.environment(), &mut rng.branching(), 1, |step, st| {
                    if st.absorbed {
                        return Flow::Stop;
                    }
                    while next < k && idx[next] == step {
                        out[next] = if weighted {
                            match scale_u(st.z, params) {
                                Ok(u) => u / u0,
                                Err(e) => {
                                    failure = Some(e);
                                    return Flow::Stop;
                                }
                            }
                        } else {
                            1.0
                        };
                        next += 1;
                    }
                    if next == k {
                        Flow::Stop
                    } else {
                        Flow::Continue
                    }
                })?;
                failure.map_or(Ok(()), Err)
            })?
        }
        SurvivalRoute::ReweightingRaoBlackwell | SurvivalRoute::EnvironmentRaoBlackwell => {
            let rb = route == SurvivalRoute::EnvironmentRaoBlackwell;
            let alpha = if rb { -params.alpha } else { params.alpha };
            let (h, steps) = (c.step_size(), c.steps());
            let factor = 0.5 * params.var_b();
            parallel_moments(n, k, |i, out| {
                let rng = RngStream::new(sub, i);
                let mut branch = rng.branching();
                let mut env = EnvStepper::new(alpha, params.sigma_e, factor, h, rng.environment());
                let mut next = 0;
                for step in 0..=steps {
                    while next < k && idx[next] == step {
                        out[next] = if rb {
                            survive_given_integral(z, env.integral())
                        } else {
                            let y = sample_scaled_given_integral(z, env.integral(), &mut branch);
                            if y > 0.0 {
                                scale_u(y * env.s().exp(), params)? / u0
                            } else {
                                0.0
                            }
                        };
                        next += 1;
                    }
                    if next == k {
                        break;
                    }
                    env.step();
                }
                Ok(())
            })?
        }
    };
    moments.iter().map(|m| m.estimate(route.name())).collect()
}

// ---------------------------------------------------------------------------
// decay rates

/// One time point of a survival curve.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePoint {
    pub t: f64,
    pub estimate: MCEstimate,
    /// False when the point was refused (zero or relative error > 20%).
    pub used: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub regime: Regime,
    pub exponential_rate: f64,
    pub polynomial_power: f64,
    pub intercept: f64,
    pub fit_rmse: f64,
    pub t_window: (f64, f64),
    pub points: Vec<RatePoint>,
}

impl RateFit {
    /// `t^{−p} e^{rate·t} p̂(t)` at the given point, with its std error.
    pub fn level_at(&self, t: f64, rate: f64) -> Option<MCEstimate> {
        let pt = self.points.iter().find(|p| p.t == t)?;
        let scale = (rate * t).exp() * t.powf(-self.polynomial_power);
        Some(MCEstimate {
            mean: pt.estimate.mean * scale,
            std_error: pt.estimate.std_error * scale,
            n: pt.estimate.n,
            method_tag: pt.estimate.method_tag.clone(),
        })
    }
}

pub const MAX_RELATIVE_ERROR: f64 = 0.2;

/// Least-squares fit of `log p̂(t) − p·log t = c − rate·t`, with `p` fixed by
/// the regime.
pub fn fit_decay_rate(
    params: &ModelParams,
    t_grid: &[f64],
    n_per_t: u64,
    route: SurvivalRoute,
    cfg: &SchemeConfig,
    seed: u64,
) -> Result<RateFit> {
    let regime = classify_regime(params)?;
    let power = regime
        .polynomial_power()
        .ok_or(Error::InvalidParameter("decay rates need a supercritical regime"))?;
    let estimates = conditioned_survival_curve(params, t_grid, route, n_per_t, cfg, seed)?;
    let points: Vec<RatePoint> = t_grid
        .iter()
        .zip(estimates)
        .map(|(&t, estimate)| {
            let used = t > 0.0
                && estimate.mean > 0.0
                && estimate.std_error <= MAX_RELATIVE_ERROR * estimate.mean;
            RatePoint { t, estimate, used }
        })
        .collect();
    fit_points(regime, power, points)
}

fn fit_points(regime: Regime, power: f64, points: Vec<RatePoint>) -> Result<RateFit> {
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.used)
        .map(|p| (p.t, p.estimate.mean.ln() - power * p.t.ln()))
        .collect();
    if xy.len() < 4 {
        return Err(Error::InsufficientData("rate fit needs at least 4 resolvable time points"));
    }
    let m = xy.len() as f64;
    let (mx, my) = xy.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x / m, b + y / m));
    let sxx: f64 = xy.iter().map(|&(x, _)| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xy.iter().map(|&(x, y)| (x - mx) * (y - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData("rate fit needs distinct time points"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rmse = (xy
        .iter()
        .map(|&(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    let lo = xy.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = xy.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    Ok(RateFit {
        regime,
        exponential_rate: -slope,
        polynomial_power: power,
        intercept,
        fit_rmse: rmse,
        t_window: (lo, hi),
        points,
    })
}

// ---------------------------------------------------------------------------
// martingales

/// Ensemble means of the three functionals at each checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleTable {
    pub checkpoints: Vec<f64>,
    pub dt: f64,
    pub u_of_z: Vec<MCEstimate>,
    pub v_of_s: Vec<MCEstimate>,
    pub z_over_exp_s: Vec<MCEstimate>,
}

impl MartingaleTable {
    pub fn get(&self, f: Functional) -> &[MCEstimate] {
        match f {
            Functional::UOfZ => &self.u_of_z,
            Functional::VOfS => &self.v_of_s,
            Functional::ZOverExpS => &self.z_over_exp_s,
        }
    }
}

/// Value of the functional at the starting point `(z, 0)`.
pub fn functional_start(params: &ModelParams, f: Functional) -> Result<f64> {
    match f {
        Functional::UOfZ => scale_u(params.z0, params),
        Functional::VOfS => scale_v(0.0, params),
        Functional::ZOverExpS => Ok(params.z0),
    }
}

/// Runs one ensemble of BDRE paths and records all three functionals.
/// With `draws_per_step = 2` each step sums two normals, which couples the
/// ensemble to one run with half the step on the same seed.
pub fn martingale_ensemble(
    params: &ModelParams,
    checkpoints: &[f64],
    n: u64,
    cfg: &SchemeConfig,
    seed: u64,
    draws_per_step: u32,
) -> Result<MartingaleTable> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive"));
    }
    let (c, idx) = grid_for(cfg, checkpoints)?;
    let k = idx.len();
    let sim = Simulator::new(*params, c, Dynamics::Bdre)?;
    let sub = derive_seed(seed, "martingale");
    let m = parallel_moments(n, 3 * k, |i, out| {
        let rng = RngStream::new(sub, i);
        let mut next = 0;
        let mut failure = None;
        sim.run(&mut rng.environment(), &mut rng.branching(), draws_per_step, |step, st| {
            while next < k && idx[next] == step {
                match (scale_u(st.z, params), scale_v(st.s, params)) {
                    (Ok(u), Ok(v)) => {
                        out[next] = u;
                        out[k + next] = v;
                        out[2 * k + next] = st.z * (-st.s).exp();
                    }
                    (Err(e), _) | (_, Err(e)) => {
                        failure = Some(e);
                        return Flow::Stop;
                    }
                }
                next += 1;
            }
            if next == k {
                Flow::Stop
            } else {
                Flow::Continue
            }
        })?;
        failure.map_or(Ok(()), Err)
    })?;
    let est = |j: usize, f: Functional| m[j].estimate(f.name());
    Ok(MartingaleTable {
        checkpoints: checkpoints.to_vec(),
        dt: c.step_size(),
        u_of_z: (0..k).map(|j| est(j, Functional::UOfZ)).collect::<Result<_>>()?,
        v_of_s: (0..k).map(|j| est(k + j, Functional::VOfS)).collect::<Result<_>>()?,
        z_over_exp_s: (0..k)
            .map(|j| est(2 * k + j, Functional::ZOverExpS))
            .collect::<Result<_>>()?,
    })
}

/// Ensemble means of one functional at each checkpoint.
pub fn martingale_test(
    params: &ModelParams,
    functional: Functional,
    checkpoints: &[f64],
    n: u64,
    cfg: &SchemeConfig,
    seed: u64,
) -> Result<Vec<MCEstimate>> {
    Ok(martingale_ensemble(params, checkpoints, n, cfg, seed, 1)?
        .get(functional)
        .to_vec())
}

/// The ensemble at `cfg.dt` and the coupled ensemble at `cfg.dt / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub coarse: MartingaleTable,
    pub fine: MartingaleTable,
}

pub fn martingale_refinement(
    params: &ModelParams,
    checkpoints: &[f64],
    n: u64,
    cfg: &SchemeConfig,
    seed: u64,
) -> Result<Refinement> {
    let coarse = martingale_ensemble(params, checkpoints, n, cfg, seed, 2)?;
    let fine = martingale_ensemble(params, checkpoints, n, &cfg.with_dt(0.5 * cfg.dt), seed, 1)?;
    Ok(Refinement { coarse, fine })
}

// ---------------------------------------------------------------------------
// Laplace transform of the limit

#[derive(Debug, Clone, PartialEq)]
pub struct LaplacePoint {
    pub lambda: f64,
    pub empirical: MCEstimate,
    pub quadrature: f64,
}

/// `E[exp(−λ Z_t e^{−S_t})]` averaged over environments through the
/// quenched transform `exp(−z/(I_t + 1/λ))`, against the quadrature of the
/// limit law.
pub fn laplace_limit_test(
    params: &ModelParams,
    lambda_grid: &[f64],
    t_large: f64,
    n: u64,
    cfg: &SchemeConfig,
    q: &QuadratureConfig,
    seed: u64,
) -> Result<Vec<LaplacePoint>> {
    params.require_supercritical_positive()?;
    if lambda_grid.iter().any(|l| !(*l >= 0.0)) {
        return Err(Error::InvalidParameter("lambda must be nonnegative"));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive"));
    }
    let c = cfg.with_horizon(t_large);
    c.validate()?;
    let (h, steps, z) = (c.step_size(), c.steps(), params.z0);
    let sub = derive_seed(seed, "laplace");
    let m = parallel_moments(n, lambda_grid.len(), |i, out| {
        let rng = RngStream::new(sub, i);
        let mut env = EnvStepper::new(params.alpha, params.sigma_e, 0.5 * params.var_b(), h, rng.environment());
        for _ in 0..steps {
            env.step();
        }
        let integral = env.integral();
        for (o, &lambda) in out.iter_mut().zip(lambda_grid) {
            *o = if lambda == 0.0 || z == 0.0 {
                1.0
            } else {
                extinct_given_integral(z, integral + 1.0 / lambda)
            };
        }
        Ok(())
    })?;
    lambda_grid
        .iter()
        .zip(&m)
        .map(|(&lambda, mo)| {
            Ok(LaplacePoint {
                lambda,
                empirical: mo.estimate("quenched-transform")?,
                quadrature: laplace_y(lambda, z, params, GammaReading::InverseGamma, q)?,
            })
        })
        .collect()
}

/// Draws of `Z_t e^{−S_t}` from the exact quenched sampler.
pub fn sample_scaled_population(
    params: &ModelParams,
    t: f64,
    n: u64,
    cfg: &SchemeConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    let c = cfg.with_horizon(t);
    c.validate()?;
    let (h, steps) = (c.step_size(), c.steps());
    let sub = derive_seed(seed, "scaled-population");
    parallel_collect(n, |i| {
        let rng = RngStream::new(sub, i);
        let mut env = EnvStepper::new(params.alpha, params.sigma_e, 0.5 * params.var_b(), h, rng.environment());
        for _ in 0..steps {
            env.step();
        }
        Ok(sample_scaled_given_integral(params.z0, env.integral(), &mut rng.branching()))
    })
}

// ---------------------------------------------------------------------------
// distributional tests

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub t: f64,
    pub n: u64,
    /// `Ž_t` against `Z_t^{(−α)}`.
    pub matched: KsResult,
    /// `Ž_t` against `Z_t^{(+α)}`.
    pub negative_control: KsResult,
    /// `Z_t` conditioned on `S_∞ = −∞` against `Z_t^{(−α)}`.
    pub env_descent_z: KsResult,
    /// Same pair, `S_t` marginal.
    pub env_descent_s: KsResult,
}

fn terminal_samples(
    params: ModelParams,
    cfg: SchemeConfig,
    dynamics: Dynamics,
    n: u64,
    seed: u64,
    label: &str,
) -> Result<Vec<(f64, f64)>> {
    let sim = Simulator::new(params, cfg, dynamics)?;
    let sub = derive_seed(seed, label);
    parallel_collect(n, |i| {
        let rng = RngStream::new(sub, i);
        let mut last = (params.z0, 0.0);
        sim.run(&mut rng.environment(), &mut rng.branching(), 1, |_, st| {
            last = (st.z, st.s);
            Flow::Continue
        })?;
        Ok(last)
    })
}

pub fn conditioned_law_equivalence_test(
    params: &ModelParams,
    t: f64,
    n: u64,
    cfg: &SchemeConfig,
    seed: u64,
) -> Result<EquivalenceReport> {
    params.require_supercritical_positive()?;
    if n < MIN_KS_SAMPLES {
        return Err(Error::InvalidParameter("KS tests need at least 1000 samples per side"));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter("t must be finite and nonnegative"));
    }
    let draw = |p: ModelParams, d: Dynamics, label: &str| -> Result<Vec<(f64, f64)>> {
        if t == 0.0 {
            Ok(vec![(p.z0, 0.0); n as usize])
        } else {
            terminal_samples(p, cfg.with_horizon(t), d, n, seed, label)
        }
    };
    let zs = |v: &[(f64, f64)]| v.iter().map(|x| x.0).collect::<Vec<_>>();
    let ss = |v: &[(f64, f64)]| v.iter().map(|x| x.1).collect::<Vec<_>>();
    let vee = draw(*params, Dynamics::ConditionedExtinction, "vee")?;
    let neg = draw(params.negated(), Dynamics::Quenched(QuenchedVariant::Unconditioned), "negated")?;
    let pos = draw(*params, Dynamics::Bdre, "positive")?;
    let desc = draw(*params, Dynamics::EnvDescent, "env-descent")?;
    let neg2 = draw(params.negated(), Dynamics::Bdre, "negated-2d")?;
    Ok(EquivalenceReport {
        t,
        n,
        matched: ks_two_sample(&zs(&vee), &zs(&neg))?,
        negative_control: ks_two_sample(&zs(&vee), &zs(&pos))?,
        env_descent_z: ks_two_sample(&zs(&desc), &zs(&neg2))?,
        env_descent_s: ks_two_sample(&ss(&desc), &ss(&neg2))?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DufresneReport {
    pub n: u64,
    pub horizon: f64,
    pub inverse_gamma: KsResult,
    pub as_printed: KsResult,
    pub mean: MCEstimate,
}

/// KS of truncated exponential-functional samples against both readings
/// of the gamma identity.
pub fn dufresne_selection_test(
    params: &ModelParams,
    n: u64,
    cfg: &SchemeConfig,
    seed: u64,
) -> Result<DufresneReport> {
    if n < MIN_KS_SAMPLES {
        return Err(Error::InvalidParameter("KS tests need at least 1000 samples"));
    }
    let sub = derive_seed(seed, "dufresne");
    let samples = parallel_collect(n, |i| {
        Ok(dufresne_functional(params, cfg, RngStream::new(sub, i))?.truncated)
    })?;
    Ok(DufresneReport {
        n,
        horizon: cfg.horizon,
        inverse_gamma: ks_one_sample(&samples, |x| {
            dufresne_cdf(x, params, GammaReading::InverseGamma)
        })?,
        as_printed: ks_one_sample(&samples, |x| dufresne_cdf(x, params, GammaReading::AsPrinted))?,
        mean: MCEstimate::from_samples(&samples, "truncated-functional")?,
    })
}

// ---------------------------------------------------------------------------
// discrete bridge

/// Extinction frequency of the discrete process at scaling level `level`
/// with the matched linear-fractional offspring law.
pub fn bridge_extinction(
    level: u32,
    reps: u64,
    params: &ModelParams,
    horizon: f64,
    seed: u64,
) -> Result<MCEstimate> {
    let sim = BpreSimulator::new(level, OffspringModel::matched(params), *params, horizon)?;
    if reps == 0 {
        return Err(Error::InvalidParameter("reps must be positive"));
    }
    let escape = escape_level(params, ESCAPE_MASS).unwrap_or(f64::INFINITY);
    let sub = derive_seed(seed, "bridge");
    let m = parallel_moments(reps, 1, |i, out| {
        let rng = RngStream::new(sub, i);
        let mut extinct = false;
        sim.run(&mut rng.environment(), &mut rng.branching(), |st| {
            if st.count == 0 {
                extinct = true;
                Flow::Stop
            } else if st.z >= escape {
                Flow::Stop
            } else {
                Flow::Continue
            }
        })?;
        out[0] = if extinct { 1.0 } else { 0.0 };
        Ok(())
    })?;
    m[0].estimate(format!("bpre-n{level}"))
}
