//! Branching diffusions in random environment (BDRE).
//!
//! The model is the coupled system
//!
//! ```text
//! dZ = ½σ_e² Z dt + Z dS + √(σ_b² Z) dW_b
//! dS = α dt + σ_e dW_e
//! ```
//!
//! started from `Z_0 = z`, `S_0 = 0`. This crate holds everything that does
//! not need an operating system: parameters and regimes, scale functions and
//! closed-form probabilities, the generator, drift coefficients of the
//! conditioned diffusions, Euler-type path simulation, exact quenched
//! sampling given an environment, adaptive quadrature for the special
//! functions, a discrete branching process for the scaling limit, and the
//! small amount of statistics the experiments need.
//!
//! The crate is `no_std` with `alloc`; enable the `std` feature to link
//! against the standard library's math instead of `libm`.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

extern crate alloc;

pub mod bpre;
pub mod drift;
pub mod env;
mod error;
pub mod generator;
pub mod model;
pub mod quad;
pub mod rng;
pub mod sde;
pub mod specfun;
pub mod stats;

pub use drift::{
    drift_conditioned_env_descent, drift_conditioned_extinction, drift_conditioned_survival,
    drift_unconditioned, DriftPair,
};
pub use env::{
    dufresne_functional, quenched_extinct_by, sample_z_given_env, simulate_environment,
    DufresneSample, EnvPath, EnvStepper,
};
pub use error::{Error, Result};
pub use generator::{generator_apply, Derivatives, Smooth};
pub use model::{
    classify_regime, extinction_probability, scale_u, scale_v, survival_probability,
    ModelParams, Regime,
};
pub use rng::RngStream;
pub use sde::{
    path_functionals, simulate_bdre, simulate_conditioned_extinction,
    simulate_conditioned_survival, simulate_quenched, Dynamics, ModelTag, Path, PathFunctionals,
    QuenchedVariant, Scheme, SchemeConfig,
};
pub use specfun::Extended;
pub use stats::MCEstimate;
