//! Discrete branching process in an i.i.d. random environment, rescaled
//! towards the diffusion.
//!
//! At level `n`, generation `k` has a mean offspring number `m_k = e^{ξ_k}`
//! with `ξ_k ~ N(α/n, σ_e²/n)`. Given `m`, offspring are linear fractional:
//! zero with probability `a`, otherwise `1 + Geometric` with `P(j) ∝ q^j`.
//! Matching the mean gives `1 − a = m(1 − q)`; at `m = 1` the offspring
//! variance is `2q/(1 − q)`, so `q = σ_b²/(2 + σ_b²)` recovers `σ_b²`.
//! A generation update is `B ~ Binomial(Z, 1 − a)` parents with offspring
//! followed by a negative binomial `NB(B, 1 − q)` for the extra children,
//! drawn as `Poisson(Gamma(B, q/(1 − q)))`.
//!
//! The rescaled process is `(Z_{⌊tn⌋}/n, Σ_{k<⌊tn⌋} ξ_k)`.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson, StandardNormal};

use crate::model::ModelParams;
use crate::rng::RngStream;
use crate::sde::{Flow, ModelTag, Path};
use crate::{Error, Result};

/// Largest population handled exactly (integers stay exact in `f64`).
pub const MAX_POPULATION: u64 = 1 << 53;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OffspringModel {
    /// Linear-fractional law with fixed tail parameter `q ∈ [0, 1)`. Means
    /// above `1/(1 − q)` use `a = 0` and `q = 1 − 1/m`.
    LinearFractional { q: f64 },
    /// Geometric law on `{0, 1, …}` with mean `m`: `P(j) = m^j/(1+m)^{j+1}`.
    /// Its variance at `m = 1` is 2, so it matches the diffusion only when
    /// `σ_b² = 2`.
    Geometric,
}

impl OffspringModel {
    /// Linear-fractional law whose variance at mean 1 equals `σ_b²`.
    pub fn matched(params: &ModelParams) -> Self {
        let v = params.var_b();
        OffspringModel::LinearFractional { q: v / (2.0 + v) }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            OffspringModel::LinearFractional { q } => {
                if !(0.0..1.0).contains(&q) {
                    return Err(Error::InvalidParameter(
                        "offspring tail parameter must lie in [0, 1) for finite variance",
                    ));
                }
                Ok(())
            }
            OffspringModel::Geometric => Ok(()),
        }
    }

    /// `(P(no offspring), q)` for the given mean.
    fn law(&self, mean: f64) -> (f64, f64) {
        match *self {
            OffspringModel::LinearFractional { q } => {
                let p_pos = mean * (1.0 - q);
                if p_pos > 1.0 {
                    // no room left in the atom at zero: stretch the tail instead
                    return (0.0, 1.0 - 1.0 / mean);
                }
                (1.0 - p_pos, q)
            }
            OffspringModel::Geometric => {
                let q = mean / (1.0 + mean);
                (1.0 - q, q)
            }
        }
    }

    /// Offspring variance at mean `m`.
    pub fn variance(&self, mean: f64) -> f64 {
        let (a, q) = self.law(mean);
        let second = (1.0 - a) * (1.0 + q) / ((1.0 - q) * (1.0 - q));
        second - mean * mean
    }
}

/// Generation-by-generation simulator at scaling level `n`.
#[derive(Debug, Clone, Copy)]
pub struct BpreSimulator {
    n: u32,
    offspring: OffspringModel,
    params: ModelParams,
    generations: usize,
}

/// Rescaled state handed to observers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpreState {
    pub generation: usize,
    pub t: f64,
    pub count: u64,
    pub z: f64,
    pub s: f64,
}

impl BpreSimulator {
    pub fn new(n: u32, offspring: OffspringModel, params: ModelParams, horizon: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("scaling level must be at least 1"));
        }
        params.validate()?;
        offspring.validate()?;
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidParameter("horizon must be finite and nonnegative"));
        }
        let generations = (horizon * n as f64 + 1e-9).floor() as usize;
        Ok(BpreSimulator {
            n,
            offspring,
            params,
            generations,
        })
    }

    pub fn generations(&self) -> usize {
        self.generations
    }

    pub fn initial_count(&self) -> u64 {
        (self.params.z0 * self.n as f64).round() as u64
    }

    /// Runs one realization, calling `observe` at every generation.
    pub fn run<E, B, F>(&self, env_rng: &mut E, branch_rng: &mut B, mut observe: F) -> Result<()>
    where
        E: Rng + ?Sized,
        B: Rng + ?Sized,
        F: FnMut(&BpreState) -> Flow,
    {
        let nf = self.n as f64;
        let mu = self.params.alpha / nf;
        let sd = self.params.sigma_e / nf.sqrt();
        let mut count = self.initial_count();
        let mut s = 0.0;
        for k in 0..=self.generations {
            let state = BpreState {
                generation: k,
                t: k as f64 / nf,
                count,
                z: count as f64 / nf,
                s,
            };
            if observe(&state) == Flow::Stop || k == self.generations {
                break;
            }
            let g: f64 = StandardNormal.sample(env_rng);
            let xi = mu + sd * g;
            s += xi;
            if count > 0 {
                count = self.next_generation(count, xi.exp(), branch_rng)?;
            }
        }
        Ok(())
    }

    fn next_generation<B: Rng + ?Sized>(&self, count: u64, mean: f64, rng: &mut B) -> Result<u64> {
        let (a, q) = self.offspring.law(mean);
        let parents = Binomial::new(count, (1.0 - a).clamp(0.0, 1.0))
            .map_err(|_| Error::InvalidParameter("binomial parameters"))?
            .sample(rng);
        if parents == 0 || q == 0.0 {
            return Ok(parents);
        }
        let rate = Gamma::new(parents as f64, q / (1.0 - q))
            .map_err(|_| Error::InvalidParameter("gamma parameters"))?
            .sample(rng);
        let extra = if rate > 0.0 {
            Poisson::new(rate)
                .map_err(|_| Error::NotComputable("poisson rate out of range"))?
                .sample(rng)
        } else {
            0.0
        };
        let total = parents as f64 + extra;
        if total >= MAX_POPULATION as f64 {
            return Err(Error::NotComputable("population exceeds exact integer range"));
        }
        Ok(total as u64)
    }
}

/// Rescaled path `(Z_{⌊tn⌋}/n, S_{⌊tn⌋})` on the grid `k/n`, stored every
/// `stride` generations (the last generation is always kept).
pub fn simulate_discrete_bpre(
    n: u32,
    offspring: &OffspringModel,
    params: &ModelParams,
    horizon: f64,
    rng: RngStream,
    stride: usize,
) -> Result<Path> {
    let sim = BpreSimulator::new(n, *offspring, *params, horizon)?;
    let stride = stride.max(1);
    let last = sim.generations();
    let mut path = Path {
        times: Vec::new(),
        z_values: Vec::new(),
        s_values: Vec::new(),
        absorbed_at: None,
        model_tag: ModelTag::DiscreteBpre { scaling: n },
    };
    let (mut env, mut branch) = (rng.environment(), rng.branching());
    sim.run(&mut env, &mut branch, |st| {
        if st.count == 0 && path.absorbed_at.is_none() {
            path.absorbed_at = Some(st.t);
        }
        if st.generation % stride == 0 || st.generation == last {
            path.times.push(st.t);
            path.z_values.push(st.z);
            path.s_values.push(st.s);
        }
        Flow::Continue
    })?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matched_variance_at_unit_mean() {
        for &sb in &[0.5, 1.0, 2.0] {
            let p = ModelParams::STANDARD;
            let p = ModelParams { sigma_b: sb, ..p };
            let v = OffspringModel::matched(&p).variance(1.0);
            assert!((v - sb * sb).abs() < 1e-12);
        }
        assert!((OffspringModel::Geometric.variance(1.0) - 2.0).abs() < 1e-12);
        // geometric variance m(1+m)
        assert!((OffspringModel::Geometric.variance(3.0) - 12.0).abs() < 1e-9);
        // past the linear-fractional range the mean is still matched
        let lf = OffspringModel::LinearFractional { q: 0.5 };
        let (a, q) = lf.law(2.5);
        assert_eq!(a, 0.0);
        assert!(((1.0 - a) / (1.0 - q) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_infinite_variance() {
        let bad = OffspringModel::LinearFractional { q: 1.0 };
        assert!(BpreSimulator::new(10, bad, ModelParams::STANDARD, 1.0).is_err());
        assert!(BpreSimulator::new(0, OffspringModel::Geometric, ModelParams::STANDARD, 1.0).is_err());
    }

    #[test]
    fn zero_start_stays_zero() {
        let p = ModelParams::STANDARD.with_z0(0.0);
        let path = simulate_discrete_bpre(50, &OffspringModel::matched(&p), &p, 2.0, RngStream::new(1, 0), 1).unwrap();
        assert!(path.z_values.iter().all(|&z| z == 0.0));
        assert_eq!(path.absorbed_at, Some(0.0));
        assert_eq!(path.len(), 101);
    }

    #[test]
    fn deterministic_and_strided() {
        let p = ModelParams::STANDARD;
        let off = OffspringModel::matched(&p);
        let a = simulate_discrete_bpre(100, &off, &p, 1.0, RngStream::new(5, 3), 10).unwrap();
        let b = simulate_discrete_bpre(100, &off, &p, 1.0, RngStream::new(5, 3), 10).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 11);
        assert_eq!(a.z_values[0], 1.0);
    }

    #[test]
    fn conditional_mean_follows_environment() {
        // E[Z_k/n | ξ] = z Π m_j = z e^{S_k}; average Z e^{−S} over runs
        let p = ModelParams::STANDARD;
        let off = OffspringModel::matched(&p);
        let reps = 4000;
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for i in 0..reps {
            let path = simulate_discrete_bpre(100, &off, &p, 0.5, RngStream::new(9, i), 1000).unwrap();
            let k = path.len() - 1;
            let x = path.z_values[k] * (-path.s_values[k]).exp();
            acc += x;
            acc2 += x * x;
        }
        let m = acc / reps as f64;
        let se = ((acc2 / reps as f64 - m * m) / reps as f64).sqrt();
        assert!((m - 1.0).abs() < 4.0 * se, "mean {m} se {se}");
    }
}
