//! Euler–Maruyama simulation of the BDRE and its conditioned variants.
//!
//! All two-dimensional variants share the environment increment between the
//! coordinates:
//!
//! ```text
//! ΔS = drift_s Δt + σ_e ΔW_e
//! ΔZ = drift_z Δt + σ_e Z⁺ ΔW_e + σ_b √Z⁺ ΔW_b
//! ```
//!
//! which for the plain BDRE is `ΔZ = ½σ_e² Z Δt + Z ΔS + σ_b √Z⁺ ΔW_b`.
//! The one-dimensional quenched variants use the same `Z` update and record
//! the accumulated environment noise `σ_e W_e` in place of `S`.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::drift::{
    drift_conditioned_env_descent, extinction_drift_weighted, survival_drift_weighted, DriftPair,
};
use crate::model::{scale_u, scale_v, ModelParams};
use crate::rng::RngStream;
use crate::{Error, Result};

/// Maximum number of step halvings for the survival-conditioned guard.
pub const MAX_HALVINGS: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// `Z⁺ = max(Z, 0)` inside drift and diffusion; post-step clamp at 0.
    EulerFullTruncation,
    /// Post-step reflection `Z ← |Z|`.
    EulerReflect,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::EulerFullTruncation => "euler-full-truncation",
            Scheme::EulerReflect => "euler-reflect",
        }
    }
}

/// Time discretization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub dt: f64,
    pub horizon: f64,
    pub scheme: Scheme,
    /// With `σ_b > 0`, `Z` is declared absorbed once at or below this level.
    pub absorption_threshold: f64,
    /// Keep every `stride`-th grid point in emitted paths (the last point is
    /// always kept).
    pub stride: usize,
}

impl SchemeConfig {
    pub fn new(dt: f64, horizon: f64) -> Result<Self> {
        let cfg = SchemeConfig {
            dt,
            horizon,
            scheme: Scheme::EulerFullTruncation,
            absorption_threshold: 0.0,
            stride: 1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter("dt must be positive"));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidParameter("horizon must be positive"));
        }
        if self.dt > self.horizon {
            return Err(Error::InvalidParameter("dt must not exceed the horizon"));
        }
        if !(self.absorption_threshold >= 0.0) {
            return Err(Error::InvalidParameter("absorption threshold must be >= 0"));
        }
        if self.stride == 0 {
            return Err(Error::InvalidParameter("stride must be at least 1"));
        }
        Ok(())
    }

    /// Number of steps; the effective step `horizon / steps` never exceeds `dt`.
    pub fn steps(&self) -> usize {
        let n = (self.horizon / self.dt * (1.0 - 1e-12)).ceil();
        (n as usize).max(1)
    }

    pub fn step_size(&self) -> f64 {
        self.horizon / self.steps() as f64
    }

    pub fn with_horizon(self, horizon: f64) -> Self {
        SchemeConfig { horizon, ..self }
    }

    pub fn with_dt(self, dt: f64) -> Self {
        SchemeConfig { dt, ..self }
    }

    /// Grid index of time `t`, if `t` lies on the grid.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        grid_index(t, self.step_size(), self.steps())
    }
}

pub(crate) fn grid_index(t: f64, h: f64, steps: usize) -> Result<usize> {
    if !(t >= 0.0) {
        return Err(Error::OffGrid(t));
    }
    let k = (t / h).round();
    if (k * h - t).abs() > 1e-9 * t.max(1.0) || k as usize > steps {
        return Err(Error::OffGrid(t));
    }
    Ok(k as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuenchedVariant {
    /// `dZ = (α + σ_e²/2) Z dt + σ_e Z dW_e + σ_b √Z dW_b`
    Unconditioned,
    /// `dŽ = (σ_e²/2 − α) Ž dt + …`
    ConditionedExtinction,
    /// `dẐ = (σ_e²/2 + α + 2α U/(U(0) − U)) Ẑ dt + …`
    ConditionedSurvival,
}

/// Which SDE is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dynamics {
    Bdre,
    ConditionedExtinction,
    ConditionedSurvival,
    /// Conditioned on `{S_∞ = −∞}`.
    EnvDescent,
    Quenched(QuenchedVariant),
}

/// Provenance of a [`Path`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelTag {
    Sde(Dynamics),
    DiscreteBpre { scaling: u32 },
}

impl ModelTag {
    pub fn name(&self) -> &'static str {
        match self {
            ModelTag::Sde(Dynamics::Bdre) => "bdre",
            ModelTag::Sde(Dynamics::ConditionedExtinction) => "conditioned-extinction",
            ModelTag::Sde(Dynamics::ConditionedSurvival) => "conditioned-survival",
            ModelTag::Sde(Dynamics::EnvDescent) => "conditioned-env-descent",
            ModelTag::Sde(Dynamics::Quenched(QuenchedVariant::Unconditioned)) => "quenched",
            ModelTag::Sde(Dynamics::Quenched(QuenchedVariant::ConditionedExtinction)) => {
                "quenched-conditioned-extinction"
            }
            ModelTag::Sde(Dynamics::Quenched(QuenchedVariant::ConditionedSurvival)) => {
                "quenched-conditioned-survival"
            }
            ModelTag::DiscreteBpre { .. } => "discrete-bpre",
        }
    }
}

/// One realization on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub times: Vec<f64>,
    pub z_values: Vec<f64>,
    pub s_values: Vec<f64>,
    /// First grid time with `Z = 0`.
    pub absorbed_at: Option<f64>,
    pub model_tag: ModelTag,
}

impl Path {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_z(&self) -> f64 {
        *self.z_values.last().unwrap_or(&0.0)
    }
}

/// State handed to observers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub t: f64,
    pub z: f64,
    pub s: f64,
    pub absorbed: bool,
}

/// Observer verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

/// A validated (model, discretization) pair that can produce any number
/// of paths.
#[derive(Debug, Clone, Copy)]
pub struct Simulator {
    params: ModelParams,
    cfg: SchemeConfig,
    dynamics: Dynamics,
    steps: usize,
    h: f64,
}

impl Simulator {
    pub fn new(params: ModelParams, cfg: SchemeConfig, dynamics: Dynamics) -> Result<Self> {
        params.validate()?;
        cfg.validate()?;
        let needs_positive_alpha = !matches!(
            dynamics,
            Dynamics::Bdre | Dynamics::Quenched(QuenchedVariant::Unconditioned)
        );
        if needs_positive_alpha && !(params.alpha > 0.0 && params.sigma_e > 0.0) {
            return Err(Error::InvalidParameter(
                "conditioned dynamics need alpha > 0 and sigma_e > 0",
            ));
        }
        if matches!(
            dynamics,
            Dynamics::ConditionedSurvival | Dynamics::Quenched(QuenchedVariant::ConditionedSurvival)
        ) {
            if !(params.sigma_b > 0.0) {
                return Err(Error::InvalidParameter(
                    "conditioning on survival needs sigma_b > 0",
                ));
            }
            if !(params.z0 > 0.0) {
                return Err(Error::InvalidParameter(
                    "conditioning on survival needs z0 > 0",
                ));
            }
        }
        let steps = cfg.steps();
        Ok(Simulator {
            params,
            cfg,
            dynamics,
            steps,
            h: cfg.horizon / steps as f64,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step_size(&self) -> f64 {
        self.h
    }

    fn is_survival(&self) -> bool {
        matches!(
            self.dynamics,
            Dynamics::ConditionedSurvival | Dynamics::Quenched(QuenchedVariant::ConditionedSurvival)
        )
    }

    fn is_quenched(&self) -> bool {
        matches!(self.dynamics, Dynamics::Quenched(_))
    }

    #[inline]
    fn drift_at(&self, z: f64) -> DriftPair {
        let p = &self.params;
        match self.dynamics {
            Dynamics::Bdre | Dynamics::Quenched(QuenchedVariant::Unconditioned) => {
                crate::drift::drift_unconditioned(z, p)
            }
            Dynamics::ConditionedExtinction
            | Dynamics::Quenched(QuenchedVariant::ConditionedExtinction) => {
                if z == 0.0 && p.sigma_b == 0.0 {
                    // limit of the environmental share as z → 0⁺
                    DriftPair {
                        drift_z: 0.0,
                        drift_s: -p.alpha,
                    }
                } else {
                    extinction_drift_weighted(z, p, 1.0)
                }
            }
            Dynamics::ConditionedSurvival
            | Dynamics::Quenched(QuenchedVariant::ConditionedSurvival) => {
                survival_drift_weighted(z, p, 1.0)
            }
            Dynamics::EnvDescent => match drift_conditioned_env_descent(z, p) {
                Ok(d) => d,
                Err(_) => unreachable!("validated in Simulator::new"),
            },
        }
    }

    /// Proposes one Euler step from `(z, s)` with step `h` and Brownian
    /// increments `(dw_e, dw_b)`. Returns the raw `(z, s)` proposal.
    #[inline]
    fn propose(&self, z: f64, s: f64, h: f64, dw_e: f64, dw_b: f64) -> (f64, f64) {
        let p = &self.params;
        let zp = z.max(0.0);
        let d = self.drift_at(zp);
        let s_new = if self.is_quenched() {
            s + p.sigma_e * dw_e
        } else {
            s + d.drift_s * h + p.sigma_e * dw_e
        };
        let z_new = z + d.drift_z * h + p.sigma_e * zp * dw_e + p.sigma_b * zp.sqrt() * dw_b;
        (z_new, s_new)
    }

    /// Integrates one path, calling `observe(k, state)` at every grid index
    /// `k = 0..=steps`. Each step consumes `draws_per_step` standard normals
    /// from each generator and sums them, so that a run with step `h` and
    /// `draws_per_step = 2` is coupled to a run with step `h/2` on the same
    /// generators.
    pub fn run<E, B, F>(
        &self,
        env_rng: &mut E,
        branch_rng: &mut B,
        draws_per_step: u32,
        mut observe: F,
    ) -> Result<()>
    where
        E: Rng + ?Sized,
        B: Rng + ?Sized,
        F: FnMut(usize, &State) -> Flow,
    {
        let p = self.params;
        let m = draws_per_step.max(1);
        let h = self.h;
        let sub_sd = (h / m as f64).sqrt();
        let survival = self.is_survival();
        let absorbing = p.sigma_b > 0.0;

        let mut state = State {
            t: 0.0,
            z: p.z0,
            s: 0.0,
            absorbed: p.z0 == 0.0 || (absorbing && p.z0 <= self.cfg.absorption_threshold),
        };
        if state.absorbed {
            state.z = 0.0;
        }
        if observe(0, &state) == Flow::Stop {
            return Ok(());
        }

        for k in 1..=self.steps {
            let mut dw_e = 0.0;
            let mut dw_b = 0.0;
            for _ in 0..m {
                let ne: f64 = StandardNormal.sample(env_rng);
                let nb: f64 = StandardNormal.sample(branch_rng);
                dw_e += ne;
                dw_b += nb;
            }
            dw_e *= sub_sd;
            dw_b *= sub_sd;
            let t_prev = state.t;
            state.t = k as f64 * h;

            if survival {
                let (z, s) =
                    self.guarded_step(state.z, state.s, h, dw_e, dw_b, t_prev, env_rng, branch_rng)?;
                state.z = z;
                state.s = s;
            } else {
                let (mut z, s) = self.propose(state.z, state.s, h, dw_e, dw_b);
                state.s = s;
                if state.absorbed {
                    z = 0.0;
                } else {
                    z = match self.cfg.scheme {
                        Scheme::EulerFullTruncation => z.max(0.0),
                        Scheme::EulerReflect => z.abs(),
                    };
                    if z == 0.0 || (absorbing && z <= self.cfg.absorption_threshold) {
                        z = 0.0;
                        state.absorbed = true;
                    }
                }
                state.z = z;
            }
            if observe(k, &state) == Flow::Stop {
                break;
            }
        }
        Ok(())
    }

    /// Survival-conditioned step: a proposal with `Z ≤ 0` is discarded and
    /// the interval is covered by two half steps with fresh noise.
    #[allow(clippy::too_many_arguments)]
    fn guarded_step<E, B>(
        &self,
        z: f64,
        s: f64,
        h: f64,
        dw_e: f64,
        dw_b: f64,
        t: f64,
        env_rng: &mut E,
        branch_rng: &mut B,
    ) -> Result<(f64, f64)>
    where
        E: Rng + ?Sized,
        B: Rng + ?Sized,
    {
        let (zn, sn) = self.propose(z, s, h, dw_e, dw_b);
        if zn > 0.0 {
            return Ok((zn, sn));
        }
        self.halved(z, s, h * 0.5, 1, t, env_rng, branch_rng)
    }

    #[allow(clippy::too_many_arguments)]
    fn halved<E, B>(
        &self,
        z: f64,
        s: f64,
        h: f64,
        depth: u32,
        t: f64,
        env_rng: &mut E,
        branch_rng: &mut B,
    ) -> Result<(f64, f64)>
    where
        E: Rng + ?Sized,
        B: Rng + ?Sized,
    {
        if depth > MAX_HALVINGS {
            return Err(Error::StepHalvingExhausted {
                halvings: MAX_HALVINGS,
                time: t,
            });
        }
        let sd = h.sqrt();
        let (mut z, mut s) = (z, s);
        for _ in 0..2 {
            let ne: f64 = StandardNormal.sample(env_rng);
            let nb: f64 = StandardNormal.sample(branch_rng);
            let (zn, sn) = self.propose(z, s, h, sd * ne, sd * nb);
            let (zn, sn) = if zn > 0.0 {
                (zn, sn)
            } else {
                self.halved(z, s, h * 0.5, depth + 1, t, env_rng, branch_rng)?
            };
            z = zn;
            s = sn;
        }
        Ok((z, s))
    }

    /// Integrates and records a [`Path`] (every `stride`-th point and the end).
    pub fn path<E, B>(&self, env_rng: &mut E, branch_rng: &mut B) -> Result<Path>
    where
        E: Rng + ?Sized,
        B: Rng + ?Sized,
    {
        let stride = self.cfg.stride;
        let cap = self.steps / stride + 2;
        let mut path = Path {
            times: Vec::with_capacity(cap),
            z_values: Vec::with_capacity(cap),
            s_values: Vec::with_capacity(cap),
            absorbed_at: None,
            model_tag: ModelTag::Sde(self.dynamics),
        };
        let last = self.steps;
        self.run(env_rng, branch_rng, 1, |k, st| {
            if st.absorbed && path.absorbed_at.is_none() {
                path.absorbed_at = Some(st.t);
            }
            if k % stride == 0 || k == last {
                path.times.push(st.t);
                path.z_values.push(st.z);
                path.s_values.push(st.s);
            }
            Flow::Continue
        })?;
        Ok(path)
    }

    pub fn path_from_stream(&self, rng: RngStream) -> Result<Path> {
        self.path(&mut rng.environment(), &mut rng.branching())
    }
}

/// Plain BDRE.
pub fn simulate_bdre(params: &ModelParams, cfg: &SchemeConfig, rng: RngStream) -> Result<Path> {
    Simulator::new(*params, *cfg, Dynamics::Bdre)?.path_from_stream(rng)
}

/// BDRE conditioned on extinction, two-dimensional form.
pub fn simulate_conditioned_extinction(
    params: &ModelParams,
    cfg: &SchemeConfig,
    rng: RngStream,
) -> Result<Path> {
    Simulator::new(*params, *cfg, Dynamics::ConditionedExtinction)?.path_from_stream(rng)
}

/// BDRE conditioned on survival, two-dimensional form. Steps that would
/// leave `(0, ∞)` are refined by halving.
pub fn simulate_conditioned_survival(
    params: &ModelParams,
    cfg: &SchemeConfig,
    rng: RngStream,
) -> Result<Path> {
    Simulator::new(*params, *cfg, Dynamics::ConditionedSurvival)?.path_from_stream(rng)
}

/// One-dimensional quenched form. `params.alpha` is taken with its sign, so
/// the BDRE with criticality `−α` is `simulate_quenched(&p.negated(), …)`.
/// `s_values` hold the accumulated environment noise `σ_e W_e`.
pub fn simulate_quenched(
    params: &ModelParams,
    cfg: &SchemeConfig,
    rng: RngStream,
    variant: QuenchedVariant,
) -> Result<Path> {
    Simulator::new(*params, *cfg, Dynamics::Quenched(variant))?.path_from_stream(rng)
}

/// Pointwise `U(Z_t)`, `V(S_t)` and `Z_t e^{−S_t}` along a path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathFunctionals {
    pub times: Vec<f64>,
    pub u_of_z: Vec<f64>,
    pub v_of_s: Vec<f64>,
    pub z_over_exp_s: Vec<f64>,
}

pub fn path_functionals(path: &Path, params: &ModelParams) -> Result<PathFunctionals> {
    let u_of_z = path
        .z_values
        .iter()
        .map(|&z| scale_u(z, params))
        .collect::<Result<Vec<_>>>()?;
    let v_of_s = path
        .s_values
        .iter()
        .map(|&s| scale_v(s, params))
        .collect::<Result<Vec<_>>>()?;
    let z_over_exp_s = path
        .z_values
        .iter()
        .zip(&path.s_values)
        .map(|(&z, &s)| z * (-s).exp())
        .collect();
    Ok(PathFunctionals {
        times: path.times.clone(),
        u_of_z,
        v_of_s,
        z_over_exp_s,
    })
}
