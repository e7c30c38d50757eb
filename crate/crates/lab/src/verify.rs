//! The verification checklist run by `bdre-lab verify`.
//!
//! Each check produces result records; a check fails when any record with a
//! `pass` flag has it false. Records without a flag are informational.
//! Wall-clock timings are kept out of the records so the CSV is a pure
//! function of (preset, seed).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use bdre_core::bpre::{simulate_discrete_bpre, OffspringModel};
use bdre_core::generator::{generator_terms, ScaleU, ScaleV};
use bdre_core::quad::QuadratureConfig;
use bdre_core::specfun::{
    integral_a_psi, laplace_y, phi_beta, psi, psi_closed_form, theorem1_constant, GammaReading,
};
use bdre_core::stats::MCEstimate;
use bdre_core::{
    classify_regime, drift_conditioned_env_descent, drift_conditioned_extinction,
    drift_conditioned_survival, drift_unconditioned, extinction_probability, generator_apply,
    path_functionals, sample_z_given_env, scale_u, simulate_bdre,
    simulate_conditioned_extinction, simulate_conditioned_survival, simulate_environment,
    simulate_quenched, survival_probability, ModelParams, QuenchedVariant, Regime, RngStream,
    SchemeConfig, Smooth,
};
use sha2::{Digest, Sha256};

use crate::config::hex;
use crate::error::{LabError, LabResult};
use crate::estimators::{
    bridge_extinction, conditioned_law_equivalence_test, conditioned_survival_curve,
    dufresne_selection_test, estimate_extinction, fit_decay_rate, functional_start,
    laplace_limit_test, martingale_refinement, ExtinctionMethod, Functional, SurvivalRoute,
};
use crate::oracles::{mean_exp_inverse_gamma, phi_tensor};
use crate::parallel::{derive_seed, parallel_collect, parallel_moments};
use crate::records::{write_results, Format, RecordSink, ResultRecord};

/// Operations whose statements come straight from the model's theory; the
/// standard preset must exercise each of them.
pub const ANCHORED_OPS: &[&str] = &[
    "classify_regime",
    "drift_conditioned_extinction",
    "estimate_conditioned_survival",
    "generator_apply",
    "path_functionals",
    "sample_z_given_env",
    "simulate_bdre",
    "simulate_conditioned_extinction",
    "simulate_discrete_bpre",
    "simulate_environment",
    "simulate_quenched",
    "write_results",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Standard,
    Quick,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Standard => "standard",
            Preset::Quick => "quick",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "standard" => Some(Preset::Standard),
            "quick" => Some(Preset::Quick),
            _ => None,
        }
    }

    pub fn sizes(self) -> Sizes {
        match self {
            Preset::Standard => Sizes {
                harmonic_states: 10_000,
                harmonic_params: 100,
                extinction_n: 100_000,
                extinction_horizon: 30.0,
                rb_dt: 0.01,
                pathwise_dt: 1e-3,
                martingale_n: 100_000,
                martingale_dt: 1e-3,
                equivalence_n: 10_000,
                equivalence_dt: 1e-3,
                rate_n: 1_000_000,
                rate_dt: 0.01,
                rate_grid: (4..=12).map(f64::from).collect(),
                level_t: 12.0,
                laplace_n: 100_000,
                laplace_t: 20.0,
                laplace_dt: 0.01,
                dufresne_n: 100_000,
                dufresne_horizon: 40.0,
                dufresne_dt: 0.01,
                bridge_level: 1000,
                bridge_reps: 10_000,
                bridge_horizon: 30.0,
                triangle_n: 100_000,
                triangle_dt: 1e-3,
                path_n: 20_000,
                path_dt: 1e-3,
            },
            Preset::Quick => Sizes {
                harmonic_states: 200,
                harmonic_params: 10,
                extinction_n: 2_000,
                extinction_horizon: 10.0,
                rb_dt: 0.02,
                pathwise_dt: 0.01,
                martingale_n: 2_000,
                martingale_dt: 0.01,
                equivalence_n: 1_000,
                equivalence_dt: 0.01,
                rate_n: 20_000,
                rate_dt: 0.05,
                rate_grid: vec![1.0, 2.0, 3.0, 4.0, 5.0],
                level_t: 5.0,
                laplace_n: 2_000,
                laplace_t: 10.0,
                laplace_dt: 0.05,
                dufresne_n: 2_000,
                dufresne_horizon: 20.0,
                dufresne_dt: 0.05,
                bridge_level: 100,
                bridge_reps: 500,
                bridge_horizon: 10.0,
                triangle_n: 2_000,
                triangle_dt: 0.01,
                path_n: 1_000,
                path_dt: 0.01,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sizes {
    pub harmonic_states: usize,
    pub harmonic_params: usize,
    pub extinction_n: u64,
    pub extinction_horizon: f64,
    pub rb_dt: f64,
    pub pathwise_dt: f64,
    pub martingale_n: u64,
    pub martingale_dt: f64,
    pub equivalence_n: u64,
    pub equivalence_dt: f64,
    pub rate_n: u64,
    pub rate_dt: f64,
    pub rate_grid: Vec<f64>,
    pub level_t: f64,
    pub laplace_n: u64,
    pub laplace_t: f64,
    pub laplace_dt: f64,
    pub dufresne_n: u64,
    pub dufresne_horizon: f64,
    pub dufresne_dt: f64,
    pub bridge_level: u32,
    pub bridge_reps: u64,
    pub bridge_horizon: f64,
    pub triangle_n: u64,
    pub triangle_dt: f64,
    pub path_n: u64,
    pub path_dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timing {
    pub label: String,
    pub elapsed: Duration,
    pub budget: Option<Duration>,
}

impl Timing {
    pub fn within_budget(&self) -> bool {
        self.budget.is_none_or(|b| self.elapsed <= b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// `"1"`..`"9"` for the acceptance checklist, `"S1"`.. for supplements.
    pub id: &'static str,
    pub title: &'static str,
    pub records: Vec<ResultRecord>,
    pub operations: &'static [&'static str],
    pub timings: Vec<Timing>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.pass != Some(false))
    }

    pub fn failures(&self) -> impl Iterator<Item = &ResultRecord> {
        self.records.iter().filter(|r| r.pass == Some(false))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub preset: Preset,
    pub seed: u64,
    pub config_hash: String,
    pub outcomes: Vec<Outcome>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(Outcome::passed)
    }

    pub fn records(&self) -> Vec<ResultRecord> {
        self.outcomes.iter().flat_map(|o| o.records.iter().cloned()).collect()
    }

    pub fn outcome(&self, id: &str) -> Option<&Outcome> {
        self.outcomes.iter().find(|o| o.id == id)
    }

    pub fn operations(&self) -> Vec<&'static str> {
        let mut ops: Vec<&str> = self
            .outcomes
            .iter()
            .flat_map(|o| o.operations.iter().copied())
            .collect();
        ops.sort_unstable();
        ops.dedup();
        ops
    }

    pub fn summary_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<4} {:<52} {:>6} {:>6}", "id", "check", "result", "failed");
        for o in &self.outcomes {
            let failed = o.failures().count();
            let _ = writeln!(
                s,
                "{:<4} {:<52} {:>6} {:>6}",
                o.id,
                o.title,
                if o.passed() { "PASS" } else { "FAIL" },
                failed
            );
            for r in o.failures() {
                let _ = writeln!(
                    s,
                    "       {} = {}{}",
                    r.quantity,
                    r.value,
                    r.theoretical.map(|t| format!(" (reference {t})")).unwrap_or_default()
                );
            }
        }
        let _ = writeln!(
            s,
            "overall: {}",
            if self.passed() { "PASS" } else { "FAIL" }
        );
        s
    }

    /// Sidecar log: timings and budgets, kept out of the CSV.
    pub fn timing_log(&self) -> String {
        let mut s = String::new();
        let stamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let _ = writeln!(s, "# verify preset={} seed={} unix_time={stamp}", self.preset.name(), self.seed);
        for o in &self.outcomes {
            for t in &o.timings {
                let _ = writeln!(
                    s,
                    "{} {} elapsed={:.3}s budget={}",
                    o.id,
                    t.label,
                    t.elapsed.as_secs_f64(),
                    t.budget.map_or("none".to_string(), |b| format!("{}s", b.as_secs())),
                );
            }
        }
        s
    }
}

/// Writes `verify.csv`, `verify.jsonl` and the timing sidecar `verify.log`.
pub fn write_outputs(report: &VerifyReport, dir: &Path) -> LabResult<Vec<PathBuf>> {
    let records = report.records();
    let csv = write_results(&records, dir, "verify", Format::Csv)?;
    let jsonl = write_results(&records, dir, "verify", Format::JsonLines)?;
    let log = dir.join("verify.log");
    std::fs::write(&log, report.timing_log()).map_err(|e| LabError::io(&log, e))?;
    Ok(vec![csv, jsonl, log])
}

struct Ctx {
    sizes: Sizes,
    seed: u64,
    hash: String,
    q: QuadratureConfig,
}

impl Ctx {
    fn sink(&self) -> RecordSink {
        RecordSink::new(self.seed, self.hash.clone())
    }

    fn seed(&self, label: &str) -> u64 {
        derive_seed(self.seed, label)
    }
}

fn timed<T>(label: &str, budget: Option<u64>, timings: &mut Vec<Timing>, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    timings.push(Timing {
        label: label.into(),
        elapsed: start.elapsed(),
        budget: budget.map(Duration::from_secs),
    });
    out
}

fn cfg(dt: f64, horizon: f64) -> LabResult<SchemeConfig> {
    Ok(SchemeConfig::new(dt, horizon)?)
}

fn agree(sink: &mut RecordSink, quantity: String, a: &MCEstimate, b: &MCEstimate, k: f64) {
    let z = a.z_score_against(b);
    sink.value(quantity, z).theory(k, "z-bound").check(z <= k);
}

fn verify_hash(preset: Preset, seed: u64) -> String {
    let mut h = Sha256::new();
    h.update(format!("verify preset={} seed={seed} sizes={:?}", preset.name(), preset.sizes()).as_bytes());
    hex(&h.finalize())
}

type Check = fn(&Ctx) -> LabResult<Vec<Outcome>>;

/// Every check in run order.
const CHECKS: &[(&str, Check)] = &[
    ("1", check_harmonicity),
    ("2", check_extinction),
    ("3", check_martingales),
    ("4", check_equivalence),
    ("5", check_rates),
    ("6", check_special_functions),
    ("7", check_laplace),
    ("8", check_dufresne),
    ("9", check_bridge),
    ("S1", check_survival_triangle),
    ("S2", check_path_level),
    ("S3", check_closed_forms),
];

/// Runs the checks whose ids are in `only` (all when empty).
pub fn run_verify(preset: Preset, seed: u64, only: &[&str]) -> LabResult<VerifyReport> {
    let ctx = Ctx {
        sizes: preset.sizes(),
        seed,
        hash: verify_hash(preset, seed),
        q: QuadratureConfig::default(),
    };
    let mut outcomes = Vec::new();
    for (id, check) in CHECKS {
        if only.is_empty() || only.contains(id) {
            outcomes.extend(check(&ctx)?);
        }
    }
    Ok(VerifyReport {
        preset,
        seed,
        config_hash: ctx.hash,
        outcomes,
    })
}

fn halton(mut i: u64, b: u64) -> f64 {
    let (mut f, mut r) = (1.0, 0.0);
    while i > 0 {
        f /= b as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

fn check_harmonicity(ctx: &Ctx) -> LabResult<Vec<Outcome>> {
    let mut sink = ctx.sink();
    let mut timings = Vec::new();
    let (states, sets) = (ctx.sizes.harmonic_states as u64, ctx.sizes.harmonic_params as u64);
    let (worst_u, worst_v) = timed("harmonicity", Some(1), &mut timings, || -> LabResult<(f64, f64)> {
        let mut worst = [0.0f64; 2];
        for j in 1..=sets {
            let p = ModelParams::new(
                -1.0 + 2.0 * halton(j, 5),
                0.5 + 1.5 * halton(j, 7),
                0.3 + 1.7 * halton(j, 11),
                1.0,
            )?;
            for k in 1..=states {
                let z = 100.0 * halton(k, 2);
                let s = -10.0 + 20.0 * halton(k, 3);
                for (w, f) in worst.iter_mut().zip([&ScaleU(p) as &dyn Smooth, &ScaleV(p)]) {
                    let d = f.derivatives(z, s);
                    let scale = generator_terms(&d, z, &p)
                        .iter()
                        .fold(d.f.abs(), |m, t| m.max(t.abs()))
                        .max(f64::MIN_POSITIVE);
                    *w = w.max(generator_apply(f, z, s, &p).abs() / scale);
                }
            }
        }
        Ok((worst[0], worst[1]))
    })?;
    let n = states * sets;
    let r = sink.value("c1.generator_U.max_relative", worst_u);
    r.n = Some(n);
    r.theory(1e-8, "tolerance").check(worst_u <= 1e-8);
    let r = sink.value("c1.generator_V.max_relative", worst_v);
    r.n = Some(n);
    r.theory(1e-8, "tolerance").check(worst_v <= 1e-8);
    Ok(vec![Outcome {
        id: "1",
        title: "scale functions are harmonic",
        records: sink.records,
        operations: &["generator_apply"],
        timings,
    }])
}

fn check_extinction(ctx: &Ctx) -> LabResult<Vec<Outcome>> {
    let sz = &ctx.sizes;
    let p = ModelParams::STANDARD;
    let mut sink = ctx.sink();
    let mut timings = Vec::new();
    let seed = ctx.seed("c2");
    let exact = extinction_probability(p.z0, &p)?;
    let (n, horizon) = (sz.extinction_n, sz.extinction_horizon);
    let (rb_cfg, pw_cfg) = (cfg(sz.rb_dt, 1.0)?, cfg(sz.pathwise_dt, 1.0)?);
    let closed = estimate_extinction(&p, ExtinctionMethod::ClosedForm, n, horizon, &rb_cfg, seed)?;
    let rb = timed("rao-blackwell", Some(10), &mut timings, || {
        estimate_extinction(&p, ExtinctionMethod::RaoBlackwell, n, horizon, &rb_cfg, seed)
    })?;
    let pw = timed("pathwise", Some(300), &mut timings, || {
        estimate_extinction(&p, ExtinctionMethod::Pathwise, n, horizon, &pw_cfg, seed)
    })?;
    for e in [&closed, &rb, &pw] {
        sink.estimate(format!("c2.extinction.{}", e.method_tag), e)
            .theory(exact, "closed-form");
    }
    agree(&mut sink, "c2.agreement.closed-form_vs_rao-blackwell".into(), &closed, &rb, 3.0);
    agree(&mut sink, "c2.agreement.closed-form_vs_pathwise".into(), &closed, &pw, 3.0);
    agree(&mut sink, "c2.agreement.rao-blackwell_vs_pathwise".into(), &rb, &pw, 3.0);
    let ratio = pw.std_error / rb.std_error;
    sink.value("c2.std_error_ratio.pathwise_over_rao-blackwell", ratio)
        .theory(2.0, "lower-bound")
        .check(ratio >= 2.0);
    Ok(vec![Outcome {
        id: "2",
        title: "extinction probability by three routes",
        records: sink.records,
        operations: &["estimate_extinction"],
        timings,
    }])
}

fn check_martingales(ctx: &Ctx) -> LabResult<Vec<Outcome>> {
    let sz = &ctx.sizes;
    let p = ModelParams::STANDARD;
    let mut sink = ctx.sink();
    let mut timings = Vec::new();
    let checkpoints = [0.5, 1.0, 2.0];
    let c = cfg(sz.martingale_dt, 2.0)?;
    let r = timed("martingales", Some(300), &mut timings, || {
        martingale_refinement(&p, &checkpoints, sz.martingale_n, &c, ctx.seed("c3"))
    })?;
    for &f in Functional::ALL {
        let start = functional_start(&p, f)?;
        for (j, &t) in checkpoints.iter().enumerate() {
            let (c, fi) = (&r.coarse.get(f)[j], &r.fine.get(f)[j]);
            sink.estimate(format!("c3.{f}.mean@{t}"), c)
                .theory(start, "initial-value")
                .check(c.within(start, 3.0));
            sink.estimate(format!("c3.{f}.mean_half_dt@{t}"), fi).theory(start, "initial-value");
            let shift = (c.mean - fi.mean).abs();
            let bound = c.combined_std_error(fi);
            sink.value(format!("c3.{f}.refinement_shift@{t}"), shift)
                .theory(bound, "combined-std-error")
                .check(shift < bound);
        }
    }
    Ok(vec![Outcome {
        id: "3",
        title: "martingale means with step refinement",
        records: sink.records,
        operations: &["martingale_test"],
        timings,
    }])
}

fn check_equivalence(ctx: &Ctx) -> LabResult<Vec<Outcome>> {
    let sz = &ctx.sizes;
    let p = ModelParams::STANDARD;
    let mut timings = Vec::new();
    let c = cfg(sz.equivalence_dt, 1.0)?;
    let r = timed("equivalence", Some(120), &mut timings, || {
        conditioned_law_equivalence_test(&p, 1.0, sz.equivalence_n, &c, ctx.seed("c4"))
    })?;
    let n = sz.equivalence_n;
    let mut sink = ctx.sink();
    sink.ks("c4.ks.conditioned_vs_negated", &r.matched, n)
        .theory(r.matched.p_value, "ks-asymptotic")
        .check(!r.matched.rejects(0.01));
    sink.ks("c4.ks.conditioned_vs_positive", &r.negative_control, n)
        .check(r.negative_control.rejects(0.01));
    let mut extra = ctx.sink();
    extra
        .ks("s4.ks.env_descent_vs_negated.Z", &r.env_descent_z, n)
        .check(!r.env_descent_z.rejects(0.01));
    extra
        .ks("s4.ks.env_descent_vs_negated.S", &r.env_descent_s, n)
        .check(!r.env_descent_s.rejects(0.01));
    Ok(vec![
        Outcome {
            id: "4",
            title: "extinction-conditioned law equals the -alpha law",
            records: sink.records,
            operations: &["conditioned_law_equivalence_test", "simulate_quenched"],
            timings,
        },
        Outcome {
            id: "S4",
            title: "descending-environment conditioning equals -alpha",
            records: extra.records,
            operations: &["conditioned_law_equivalence_test"],
            timings: Vec::new(),
        },
    ])
}

fn check_rates(ctx: &Ctx) -> LabResult<Vec<Outcome>> {
    let sz = &ctx.sizes;
    let mut sink = ctx.sink();
    let mut timings = Vec::new();
    let c = cfg(sz.rate_dt, 1.0)?;
    for (label, alpha) in [("weak", 0.5), ("intermediate", 1.0), ("strong", 2.0)] {
        let p = ModelParams::STANDARD.with_alpha(alpha);
        let regime = classify_regime(&p)?;
        let expected = regime.decay_rate(&p).expect("supercritical");
        let fit = timed(label, Some(200), &mut timings, || {
            fit_decay_rate(&p, &sz.rate_grid, sz.rate_n, SurvivalRoute::EnvironmentRaoBlackwell, &c, ctx.seed(label))
        })?;
        for pt in &fit.points {
            sink.estimate(format!("c5.{label}.p@{}", pt.t), &pt.estimate);
        }
        let rel = (fit.exponential_rate - expected).abs() / expected;
        sink.value(format!("c5.{label}.rate"), fit.exponential_rate)
            .theory(expected, "asymptotic-rate")
            .check(rel <= 0.10);
        sink.value(format!("c5.{label}.polynomial_power"), fit.polynomial_power);
        sink.value(format!("c5.{label}.fit_rmse"), fit.fit_rmse);
        if regime == Regime::StronglySupercritical {
            let constant = theorem1_constant(&p, regime, p.z0, &ctx.q)?
                .finite()
                .ok_or(LabError::config("strong constant is infinite at this preset"))?;
            let level = fit
                .level_at(sz.level_t, expected)
                .ok_or(LabError::config("level time missing from the rate grid"))?;
            sink.estimate(format!("c5.{label}.level@{}", sz.level_t), &level)
                .theory(constant, "asymptotic-constant")
                .check((level.mean - constant).abs() <= 0.15 * constant);
            // same limit with the gamma moment read as for the inverse-gamma law
            let nu = 2.0 * (p.alpha / p.var_e() - 1.0);
            let alt = p.z0 * p.var_e() / p.var_b() * nu;
            sink.value(format!("c5.{label}.level_relative_to_inverse_gamma_constant"), level.mean / alt)
                .theory(1.0, "derived-inverse-gamma");
        }
    }
    Ok(vec![Outcome {
        id: "5",
        title: "decay rates of conditioned survival",
        records: sink.records,
        operations: &["fit_decay_rate", "estimate_conditioned_survival", "classify_regime"],
        timings,
    }])
}

fn check_special_functions(ctx: &Ctx) -> LabResult<Vec<Outcome>> {
    let mut sink = ctx.sink();
    let mut timings = Vec::new();
    let q = &ctx.q;
    timed("special-functions", Some(60), &mut timings, || -> LabResult<()> {
        for a in [0.1, 0.5, 1.0, 2.0, 5.0, 10.0] {
            let v = psi(a, q)?;
            let closed = psi_closed_form(a);
            sink.value(format!("c6.psi@{a}"), v)
                .theory(closed, "closed-form")
                .check((v - closed).abs() <= 1e-8);
        }
        let v = integral_a_psi(q)?;
        sink.value("c6.integral_a_psi", v)
            .theory(0.398_942_3, "closed-form")
            .check((v - 0.398_942_3).abs() <= 1e-6);
        for a in [0.5, 1.0, 3.0] {
            for beta in [0.5, 1.0, 2.0] {
                let v = phi_beta(a, beta, q)?;
                let oracle = phi_tensor(a, beta);
                sink.value(format!("c6.phi[beta={beta}]@{a}"), v)
                    .theory(oracle, "tensor-oracle")
                    .check((v - oracle).abs() <= 1e-6 * oracle.max(1e-3));
            }
        }
        Ok(())
    })?;
    Ok(vec![Outcome {
        id: "6",
        title: "special functions against independent oracles",
        records: sink.records,
        operations: &["psi", "phi_beta", "integral_a_psi"],
        timings,
    }])
}

fn check_laplace(ctx: &Ctx) -> LabResult<Vec<Outcome>> {
    let sz = &ctx.sizes;
    let p = ModelParams::STANDARD;
    let q = &ctx.q;
    let mut sink = ctx.sink();
    let mut timings = Vec::new();
    let lambdas = [0.5, 1.0, 2.0, 10.0, f64::INFINITY];
    let c = cfg(sz.laplace_dt, 1.0)?;
    let pts = timed("laplace", Some(300), &mut timings, || {
        laplace_limit_test(&p, &lambdas, sz.laplace_t, sz.laplace_n, &c, q, ctx.seed("c7"))
    })?;
    for pt in &pts {
        let r = sink.estimate(format!("c7.laplace@{}", pt.lambda), &pt.empirical);
        r.theory(pt.quadrature, "quadrature");
        if pt.lambda.is_finite() {
            r.check(pt.empirical.within(pt.quadrature, 3.0));
        }
    }
    let ext = extinction_probability(p.z0, &p)?;
    for lambda in [1e6, f64::INFINITY] {
        let v = laplace_y(lambda, p.z0, &p, GammaReading::InverseGamma, q)?;
        sink.value(format!("c7.limit.inverse-gamma@{lambda}"), v)
            .theory(ext, "closed-form")
            .check((v - ext).abs() <= 1e-4);
    }
    let printed = laplace_y(f64::INFINITY, p.z0, &p, GammaReading::AsPrinted, q)?;
    let beta = p.beta();
    let oracle = mean_exp_inverse_gamma(beta, p.z0 * p.var_e() / p.var_b());
    sink.value("c7.limit.as-printed@inf", printed)
        .theory(ext, "closed-form")
        .check((printed - ext).abs() > 1e-4);
    sink.value("c7.limit.as-printed_oracle@inf", printed)
        .theory(oracle, "bessel-oracle")
        .check((printed - oracle).abs() <= 1e-8);
    // at β = 1 the as-printed limit is 2K₁(2) ≈ 0.2797 instead of 1/2
    let p1 = ModelParams::new(0.5, 1.0, 1.0, 1.0)?;
    let printed1 = laplace_y(f64::INFINITY, 1.0, &p1, GammaReading::AsPrinted, q)?;
    let oracle1 = mean_exp_inverse_gamma(1.0, 1.0);
    sink.value("c7.negative_control.beta1.as-printed@inf", printed1)
        .theory(oracle1, "bessel-oracle")
        .check((printed1 - oracle1).abs() <= 1e-8 && (printed1 - 0.2799).abs() < 1e-3);
    let ext1 = extinction_probability(1.0, &p1)?;
    sink.value("c7.negative_control.beta1.extinction", ext1)
        .theory(0.5, "closed-form")
        .check((printed1 - ext1).abs() > 1e-4);
    Ok(vec![Outcome {
        id: "7",
        title: "Laplace transform of the rescaled limit",
        records: sink.records,
        operations: &["laplace_limit_test", "laplace_y"],
        timings,
    }])
}

fn check_dufresne(ctx: &Ctx) -> LabResult<Vec<Outcome>> {
    let sz = &ctx.sizes;
    let p = ModelParams::STANDARD;
    let mut sink = ctx.sink();
    let mut timings = Vec::new();
    let c = cfg(sz.dufresne_dt, sz.dufresne_horizon)?;
    let r = timed("dufresne", Some(120), &mut timings, || {
        dufresne_selection_test(&p, sz.dufresne_n, &c, ctx.seed("c8"))
    })?;
    sink.ks("c8.ks.inverse-gamma", &r.inverse_gamma, r.n)
        .check(!r.inverse_gamma.rejects(0.01));
    sink.ks("c8.ks.as-printed", &r.as_printed, r.n)
        .check(r.as_printed.rejects(0.01));
    // E[2/(σ_e² G_β)] = 2/(σ_e²(β − 1))
    let mean = 2.0 / (p.var_e() * (p.beta() - 1.0));
    sink.estimate("c8.mean", &r.mean).theory(mean, "closed-form");
    Ok(vec![Outcome {
        id: "8",
        title: "exponential functional selects the inverse-gamma law",
        records: sink.records,
        operations: &["dufresne_functional"],
        timings,
    }])
}

fn check_bridge(ctx: &Ctx) -> LabResult<Vec<Outcome>> {
    let sz = &ctx.sizes;
    let p = ModelParams::STANDARD;
    let mut sink = ctx.sink();
    let mut timings = Vec::new();
    let e = timed("bridge", Some(300), &mut timings, || {
        bridge_extinction(sz.bridge_level, sz.bridge_reps, &p, sz.bridge_horizon, ctx.seed("c9"))
    })?;
    let exact = extinction_probability(p.z0, &p)?;
    sink.estimate(format!("c9.bpre_extinction@n={}", sz.bridge_level), &e)
        .theory(exact, "closed-form")
        .check(e.within(exact, 3.0));
    Ok(vec![Outcome {
        id: "9",
        title: "discrete process matches the diffusion",
        records: sink.records,
        operations: &["simulate_discrete_bpre"],
        timings,
    }])
}

fn check_survival_triangle(ctx: &Ctx) -> LabResult<Vec<Outcome>> {
    let sz = &ctx.sizes;
    let p = ModelParams::STANDARD;
    let mut sink = ctx.sink();
    let mut timings = Vec::new();
    let times = [0.5, 1.0, 2.0];
    let c = cfg(sz.triangle_dt, 2.0)?;
    let seed = ctx.seed("s1");
    let mut curves = Vec::new();
    for &route in SurvivalRoute::ALL {
        let curve = timed(route.name(), None, &mut timings, || {
            conditioned_survival_curve(&p, &times, route, sz.triangle_n, &c, seed)
        })?;
        for (t, e) in times.iter().zip(&curve) {
            sink.estimate(format!("s1.{route}.p@{t}"), e);
        }
        curves.push((route, curve));
    }
    let get = |r: SurvivalRoute| &curves.iter().find(|(x, _)| *x == r).expect("all routes").1;
    let (h, n, w) = (
        get(SurvivalRoute::HTransformSim),
        get(SurvivalRoute::NegatedAlphaSim),
        get(SurvivalRoute::Reweighting),
    );
    agree(&mut sink, "s1.agreement.h-transform_vs_negated-alpha@1".into(), &h[1], &n[1], 3.0);
    agree(&mut sink, "s1.agreement.h-transform_vs_reweighting@1".into(), &h[1], &w[1], 3.0);
    for (j, t) in times.iter().enumerate() {
        agree(&mut sink, format!("s1.agreement.reweighting_vs_negated-alpha@{t}"), &w[j], &n[j], 3.0);
    }
    Ok(vec![Outcome {
        id: "S1",
        title: "conditioned survival by three routes",
        records: sink.records,
        operations: &["estimate_conditioned_survival", "simulate_quenched"],
        timings,
    }])
}

/// Path-returning simulators checked against exact moments.
fn check_path_level(ctx: &Ctx) -> LabResult<Vec<Outcome>> {
    let sz = &ctx.sizes;
    let p = ModelParams::STANDARD;
    let mut sink = ctx.sink();
    let mut timings = Vec::new();
    let t = 1.0;
    let c = cfg(sz.path_dt, t)?;
    let n = sz.path_n;
    let start = Instant::now();

    let seed = ctx.seed("s2.bdre");
    let m = parallel_moments(n, 2, |i, out| {
        let path = simulate_bdre(&p, &c, RngStream::new(seed, i))?;
        let f = path_functionals(&path, &p)?;
        out[0] = *f.z_over_exp_s.last().expect("nonempty path");
        out[1] = *f.u_of_z.last().expect("nonempty path");
        Ok(())
    })?;
    let w = m[0].estimate("simulate_bdre")?;
    sink.estimate("s2.bdre.Z/exp(S)@1", &w).theory(p.z0, "initial-value").check(w.within(p.z0, 3.0));
    let u = m[1].estimate("simulate_bdre")?;
    let u0 = scale_u(p.z0, &p)?;
    sink.estimate("s2.bdre.U(Z)@1", &u).theory(u0, "initial-value").check(u.within(u0, 3.0));

    let reference = conditioned_survival_curve(&p, &[t], SurvivalRoute::EnvironmentRaoBlackwell, 5 * n, &c, ctx.seed("s2.reference"))?.remove(0);
    sink.estimate("s2.reference.environment-rb.p@1", &reference);
    let seed = ctx.seed("s2.vee");
    let alive = parallel_moments(n, 1, |i, out| {
        let path = simulate_conditioned_extinction(&p, &c, RngStream::new(seed, i))?;
        out[0] = if path.final_z() > 0.0 { 1.0 } else { 0.0 };
        Ok(())
    })?[0]
        .estimate("simulate_conditioned_extinction")?;
    agree(&mut sink, "s2.agreement.conditioned-extinction_vs_environment-rb@1".into(), &alive, &reference, 3.0);
    let seed = ctx.seed("s2.quenched");
    let alive_q = parallel_moments(n, 1, |i, out| {
        let path = simulate_quenched(&p.negated(), &c, RngStream::new(seed, i), QuenchedVariant::Unconditioned)?;
        out[0] = if path.final_z() > 0.0 { 1.0 } else { 0.0 };
        Ok(())
    })?[0]
        .estimate("simulate_quenched")?;
    agree(&mut sink, "s2.agreement.quenched-negated_vs_environment-rb@1".into(), &alive_q, &reference, 3.0);

    // annealed mean E[Z_t] = z e^{(α + σ_e²/2) t} through the exact quenched law
    let seed = ctx.seed("s2.env");
    let annealed = parallel_moments(n, 1, |i, out| {
        let stream = RngStream::new(seed, i);
        let env = simulate_environment(&p, &c, stream)?;
        out[0] = sample_z_given_env(&env, t, p.z0, &mut stream.branching())?;
        Ok(())
    })?[0]
        .estimate("sample_z_given_env")?;
    let target = p.z0 * ((p.alpha + 0.5 * p.var_e()) * t).exp();
    sink.estimate("s2.annealed_mean@1", &annealed)
        .theory(target, "closed-form")
        .check(annealed.within(target, 3.0));

    let seed = ctx.seed("s2.bpre");
    let offspring = OffspringModel::matched(&p);
    let level = sz.bridge_level;
    let bpre = parallel_moments((n / 10).max(100), 1, |i, out| {
        let path = simulate_discrete_bpre(level, &offspring, &p, t, RngStream::new(seed, i), level as usize)?;
        let k = path.len() - 1;
        out[0] = path.z_values[k] * (-path.s_values[k]).exp();
        Ok(())
    })?[0]
        .estimate("simulate_discrete_bpre")?;
    sink.estimate("s2.bpre.Z/exp(S)@1", &bpre)
        .theory(p.z0, "initial-value")
        .check(bpre.within(p.z0, 3.0));

    let seed = ctx.seed("s2.survival");
    let positive = parallel_collect((n / 10).max(100), |i| {
        let path = simulate_conditioned_survival(&p, &c, RngStream::new(seed, i))?;
        Ok(path.absorbed_at.is_none() && path.z_values.iter().all(|&z| z > 0.0))
    })?;
    let bad = positive.iter().filter(|&&ok| !ok).count();
    sink.value("s2.survival_conditioned.absorbed_paths", bad as f64)
        .theory(0.0, "exact")
        .check(bad == 0)
        .n = Some(positive.len() as u64);

    timings.push(Timing {
        label: "path-level".into(),
        elapsed: start.elapsed(),
        budget: None,
    });
    Ok(vec![Outcome {
        id: "S2",
        title: "path simulators against exact moments",
        records: sink.records,
        operations: &[
            "simulate_bdre",
            "path_functionals",
            "simulate_conditioned_extinction",
            "simulate_quenched",
            "simulate_environment",
            "sample_z_given_env",
            "simulate_discrete_bpre",
            "simulate_conditioned_survival",
        ],
        timings,
    }])
}

fn check_closed_forms(ctx: &Ctx) -> LabResult<Vec<Outcome>> {
    let mut sink = ctx.sink();
    let p = ModelParams::STANDARD;
    let cases = [
        (0.5, Regime::WeaklySupercritical),
        (1.0, Regime::IntermediateSupercritical),
        (2.0, Regime::StronglySupercritical),
        (0.0, Regime::Critical),
        (-0.5, Regime::WeaklySubcritical),
        (-1.0, Regime::IntermediateSubcritical),
        (-2.0, Regime::StronglySubcritical),
    ];
    for (alpha, regime) in cases {
        let got = classify_regime(&p.with_alpha(alpha))?;
        sink.value(format!("s3.regime@alpha={alpha}.{}", regime.name()), if got == regime { 1.0 } else { 0.0 })
            .theory(1.0, "exact")
            .check(got == regime);
    }
    let u = scale_u(1.0, &p)?;
    sink.value("s3.U(1)", u).theory(0.25, "closed-form").check((u - 0.25).abs() < 1e-15);
    let s = survival_probability(1.0, &p)?;
    sink.value("s3.survival(1)", s).theory(0.75, "closed-form").check((s - 0.75).abs() < 1e-15);

    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
    for z in [0.5, 2.0, 10.0] {
        let d = drift_conditioned_extinction(z, &p)?;
        let expect = (0.5 * p.var_e() - p.alpha) * z;
        sink.value(format!("s3.drift_conditioned_extinction.z@{z}"), d.drift_z)
            .theory(expect, "closed-form")
            .check(close(d.drift_z, expect));
        let e = drift_conditioned_env_descent(z, &p)?;
        let neg = drift_unconditioned(z, &p.negated());
        sink.value(format!("s3.drift_env_descent.z@{z}"), e.drift_z)
            .theory(neg.drift_z, "closed-form")
            .check(close(e.drift_z, neg.drift_z) && close(e.drift_s, neg.drift_s));
    }
    let d = drift_conditioned_extinction(1e-12, &p)?;
    sink.value("s3.drift_conditioned_extinction.s@0", d.drift_s)
        .theory(p.alpha, "closed-form")
        .check((d.drift_s - p.alpha).abs() < 1e-9);
    let d = drift_conditioned_extinction(1e12, &p)?;
    sink.value("s3.drift_conditioned_extinction.s@inf", d.drift_s)
        .theory(-p.alpha, "closed-form")
        .check((d.drift_s + p.alpha).abs() < 1e-9);
    let d = drift_conditioned_survival(1e-9, &p)?;
    let limit = p.alpha + p.var_e();
    sink.value("s3.drift_conditioned_survival.s@0", d.drift_s)
        .theory(limit, "derived-limit")
        .check((d.drift_s - limit).abs() < 1e-6);
    Ok(vec![Outcome {
        id: "S3",
        title: "regimes, scale functions and drifts",
        records: sink.records,
        operations: &["classify_regime", "drift_conditioned_extinction"],
        timings: Vec::new(),
    }])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_preset_runs_and_covers_operations() {
        let r = run_verify(Preset::Quick, 11, &[]).unwrap();
        let ops = r.operations();
        for op in ANCHORED_OPS.iter().filter(|&&op| op != "write_results") {
            assert!(ops.contains(op), "{op} not exercised");
        }
        assert!(r.outcome("1").unwrap().passed());
        assert!(r.outcome("6").unwrap().passed());
        assert!(r.outcome("S3").unwrap().passed());
        assert!(r.records().iter().all(|x| x.seed == 11 && x.config_hash == r.config_hash));
    }

    #[test]
    fn checks_can_be_selected() {
        let r = run_verify(Preset::Quick, 1, &["S3"]).unwrap();
        assert_eq!(r.outcomes.len(), 1);
        assert_ne!(verify_hash(Preset::Quick, 1), verify_hash(Preset::Quick, 2));
        assert_ne!(verify_hash(Preset::Quick, 1), verify_hash(Preset::Standard, 1));
    }
}
