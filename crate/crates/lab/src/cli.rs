//! Command-line front end. Exit codes: 0 success, 1 verification failure,
//! 2 configuration / usage / I/O error, 3 numerical failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use bdre_core::bpre::{simulate_discrete_bpre, OffspringModel};
use bdre_core::quad::QuadratureConfig;
use bdre_core::sde::Simulator;
use bdre_core::specfun::{
    integral_a_psi, laplace_y, phi_beta, psi, psi_closed_form, theorem1_constant, GammaReading,
};
use bdre_core::{
    classify_regime, extinction_probability, Dynamics, ModelParams, QuenchedVariant, RngStream,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{LabError, LabResult};
use crate::estimators::{
    bridge_extinction, conditioned_law_equivalence_test, conditioned_survival_curve,
    dufresne_selection_test, estimate_extinction, fit_decay_rate, functional_start,
    laplace_limit_test, martingale_ensemble, ExtinctionMethod, Functional, SurvivalRoute,
};
use crate::parallel::derive_seed;
use crate::records::{gnuplot_script, write_csv, write_results, Format, RecordSink, ResultRecord};
use crate::verify::{run_verify, write_outputs, Preset};

#[derive(Debug, Parser)]
#[command(name = "bdre-lab", version, about = "Experiments for branching diffusions in random environment")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// Config file in `section.key = value` form.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set model.alpha=2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Jsonl,
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PathModel {
    Bdre,
    ConditionedExtinction,
    ConditionedSurvival,
    EnvDescent,
    Quenched,
    QuenchedNegated,
    QuenchedConditionedExtinction,
    QuenchedConditionedSurvival,
    Bpre,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write sample paths as `path,t,z,s` rows.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_enum, default_value = "bdre")]
        model: PathModel,
        /// Number of paths.
        #[arg(long, default_value_t = 10)]
        paths: u64,
    },
    /// Run the experiment named by `experiment.kind`.
    Estimate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutputFormat,
    },
    /// Decay-rate fits with a gnuplot script for the survival curves.
    Rates {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Fit the three supercritical presets alpha = 0.5, 1, 2 instead of
        /// the configured alpha.
        #[arg(long)]
        all_regimes: bool,
    },
    /// Tabulate special functions as records on stdout.
    Specfun {
        #[arg(long)]
        psi: bool,
        #[arg(long)]
        phi: bool,
        /// Survival-decay constant for the configured model.
        #[arg(long)]
        constant: bool,
        /// Laplace transform of the limit under both gamma readings.
        #[arg(long)]
        laplace: bool,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        a: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        lambda: Vec<f64>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run the verification checklist; exits 1 if any check fails.
    Verify {
        #[arg(long, default_value = "standard")]
        preset: String,
        /// Seed (default 2024; the environment variable BDRE_LAB_SEED wins
        /// over the default but not over this flag).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Restrict to these check ids, e.g. `--only 2,S1`.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
    },
    /// Extinction frequency of the discrete process at several scaling levels.
    Bridge {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_delimiter = ',', default_value = "10,100,1000")]
        levels: Vec<u32>,
    },
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return 2;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load(args: &ConfigArgs) -> LabResult<ExperimentConfig> {
    let mut c = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => {
            let mut c = ExperimentConfig::default();
            c.apply_env()?;
            c
        }
    };
    for kv in &args.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| LabError::config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        c.set(k.trim(), v.trim()).map_err(LabError::Config)?;
    }
    if let Some(out) = &args.out {
        c.output_dir = out.clone();
    }
    c.validate()?;
    Ok(c)
}

fn dispatch(cmd: Command) -> LabResult<i32> {
    match cmd {
        Command::Simulate { cfg, model, paths } => simulate(&load(&cfg)?, model, paths),
        Command::Estimate { cfg, format } => estimate(&load(&cfg)?, format),
        Command::Rates { cfg, all_regimes } => rates(&load(&cfg)?, all_regimes),
        Command::Specfun {
            psi,
            phi,
            constant,
            laplace,
            a,
            beta,
            lambda,
            cfg,
        } => specfun(&load(&cfg)?, SpecfunRequest { psi, phi, constant, laplace, a, beta, lambda }),
        Command::Verify {
            preset,
            seed,
            out,
            only,
        } => verify(&preset, seed, &out, &only),
        Command::Bridge { cfg, levels } => bridge(&load(&cfg)?, &levels),
    }
}

fn save(c: &ExperimentConfig, stem: &str, records: &[ResultRecord], format: OutputFormat) -> LabResult<()> {
    let formats: &[Format] = match format {
        OutputFormat::Csv => &[Format::Csv],
        OutputFormat::Jsonl => &[Format::JsonLines],
        OutputFormat::Both => &[Format::Csv, Format::JsonLines],
    };
    for &f in formats {
        let path = write_results(records, &c.output_dir, stem, f)?;
        println!("wrote {}", path.display());
    }
    c.save(&c.output_dir.join(format!("{stem}.conf")))?;
    Ok(())
}

fn simulate(c: &ExperimentConfig, model: PathModel, paths: u64) -> LabResult<i32> {
    let p = c.model;
    let seed = derive_seed(c.seed, "simulate");
    std::fs::create_dir_all(&c.output_dir).map_err(|e| LabError::io(&c.output_dir, e))?;
    let path = c.output_dir.join("paths.csv");
    let file = std::fs::File::create(&path).map_err(|e| LabError::io(&path, e))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(std::io::BufWriter::new(file));
    w.write_record(["path", "t", "z", "s"])?;
    let dynamics = match model {
        PathModel::Bdre => Some((p, Dynamics::Bdre)),
        PathModel::ConditionedExtinction => Some((p, Dynamics::ConditionedExtinction)),
        PathModel::ConditionedSurvival => Some((p, Dynamics::ConditionedSurvival)),
        PathModel::EnvDescent => Some((p, Dynamics::EnvDescent)),
        PathModel::Quenched => Some((p, Dynamics::Quenched(QuenchedVariant::Unconditioned))),
        PathModel::QuenchedNegated => {
            Some((p.negated(), Dynamics::Quenched(QuenchedVariant::Unconditioned)))
        }
        PathModel::QuenchedConditionedExtinction => {
            Some((p, Dynamics::Quenched(QuenchedVariant::ConditionedExtinction)))
        }
        PathModel::QuenchedConditionedSurvival => {
            Some((p, Dynamics::Quenched(QuenchedVariant::ConditionedSurvival)))
        }
        PathModel::Bpre => None,
    };
    let sim = dynamics
        .map(|(params, d)| Simulator::new(params, c.scheme, d))
        .transpose()?;
    let offspring = OffspringModel::matched(&p);
    for i in 0..paths {
        let stream = RngStream::new(seed, i);
        let path = match &sim {
            Some(s) => s.path_from_stream(stream)?,
            None => simulate_discrete_bpre(c.level, &offspring, &p, c.scheme.horizon, stream, c.scheme.stride)?,
        };
        for k in 0..path.len() {
            w.write_record([
                i.to_string(),
                path.times[k].to_string(),
                path.z_values[k].to_string(),
                path.s_values[k].to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| LabError::io(&path, e))?;
    println!("wrote {}", path.display());
    Ok(0)
}

fn parse_all<T>(names: &[String], default: &[T]) -> LabResult<Vec<T>>
where
    T: std::str::FromStr<Err = String> + Copy,
{
    if names.is_empty() {
        return Ok(default.to_vec());
    }
    names.iter().map(|s| s.parse().map_err(LabError::Config)).collect()
}

fn estimate(c: &ExperimentConfig, format: OutputFormat) -> LabResult<i32> {
    let p = c.model;
    let hash = c.hash();
    let mut sink = RecordSink::new(c.seed, hash);
    let (n, seed) = (c.n, c.seed);
    match c.experiment {
        Experiment::Extinction => {
            let exact = (p.alpha > 0.0).then(|| extinction_probability(p.z0, &p)).transpose()?;
            for m in parse_all(&c.routes, &[ExtinctionMethod::RaoBlackwell])? {
                let e = estimate_extinction(&p, m, n, c.scheme.horizon, &c.scheme, seed)?;
                let r = sink.estimate(format!("extinction.{m}"), &e);
                if let Some(x) = exact {
                    r.theory(x, "closed-form");
                }
            }
        }
        Experiment::ConditionedSurvival => {
            for route in parse_all(&c.routes, SurvivalRoute::ALL)? {
                let curve = conditioned_survival_curve(&p, &c.t_grid, route, n, &c.scheme, seed)?;
                for (t, e) in c.t_grid.iter().zip(&curve) {
                    sink.estimate(format!("survival.{route}.p@{t}"), e);
                }
            }
        }
        Experiment::Rates => return rates(c, false),
        Experiment::Martingale => {
            let table = martingale_ensemble(&p, &c.t_grid, n, &c.scheme, seed, 1)?;
            for f in parse_all(&c.routes, Functional::ALL)? {
                let start = functional_start(&p, f)?;
                for (t, e) in c.t_grid.iter().zip(table.get(f)) {
                    sink.estimate(format!("martingale.{f}.mean@{t}"), e)
                        .theory(start, "initial-value")
                        .check(e.within(start, 3.0));
                }
            }
        }
        Experiment::Laplace => {
            let pts = laplace_limit_test(&p, &c.lambda_grid, c.t(), n, &c.scheme, &c.quadrature, seed)?;
            for pt in pts {
                sink.estimate(format!("laplace@{}", pt.lambda), &pt.empirical)
                    .theory(pt.quadrature, "quadrature")
                    .check(pt.empirical.within(pt.quadrature, 3.0));
            }
        }
        Experiment::Equivalence => {
            let r = conditioned_law_equivalence_test(&p, c.t(), n, &c.scheme, seed)?;
            sink.ks("equivalence.conditioned_vs_negated", &r.matched, n)
                .check(!r.matched.rejects(0.01));
            sink.ks("equivalence.conditioned_vs_positive", &r.negative_control, n);
            sink.ks("equivalence.env_descent_vs_negated.Z", &r.env_descent_z, n)
                .check(!r.env_descent_z.rejects(0.01));
            sink.ks("equivalence.env_descent_vs_negated.S", &r.env_descent_s, n)
                .check(!r.env_descent_s.rejects(0.01));
        }
        Experiment::Dufresne => {
            let r = dufresne_selection_test(&p, n, &c.scheme, seed)?;
            sink.ks("dufresne.inverse-gamma", &r.inverse_gamma, n);
            sink.ks("dufresne.as-printed", &r.as_printed, n);
            sink.estimate("dufresne.mean", &r.mean);
        }
        Experiment::Bridge => return bridge(c, &[c.level]),
    }
    save(c, c.experiment.name(), &sink.records, format)?;
    Ok(0)
}

fn rates(c: &ExperimentConfig, all_regimes: bool) -> LabResult<i32> {
    let mut sink = RecordSink::new(c.seed, c.hash());
    let alphas = if all_regimes { vec![0.5, 1.0, 2.0] } else { vec![c.model.alpha] };
    let routes = parse_all(&c.routes, &[SurvivalRoute::EnvironmentRaoBlackwell])?;
    let mut prefixes = Vec::new();
    for alpha in alphas {
        let p = c.model.with_alpha(alpha);
        let regime = classify_regime(&p)?;
        for &route in &routes {
            let fit = fit_decay_rate(&p, &c.t_grid, c.n, route, &c.scheme, c.seed)?;
            let prefix = format!("rates.alpha={alpha}.{route}");
            for pt in &fit.points {
                sink.estimate(format!("{prefix}.p@{}", pt.t), &pt.estimate);
            }
            let r = sink.value(format!("{prefix}.rate"), fit.exponential_rate);
            if let Some(x) = regime.decay_rate(&p) {
                r.theory(x, "asymptotic-rate");
            }
            sink.value(format!("{prefix}.polynomial_power"), fit.polynomial_power);
            sink.value(format!("{prefix}.fit_rmse"), fit.fit_rmse);
            prefixes.push(prefix);
        }
    }
    save(c, "rates", &sink.records, OutputFormat::Csv)?;
    let gp = c.output_dir.join("rates.gp");
    std::fs::write(&gp, gnuplot_script("rates.csv", &prefixes)).map_err(|e| LabError::io(&gp, e))?;
    println!("wrote {}", gp.display());
    Ok(0)
}

struct SpecfunRequest {
    psi: bool,
    phi: bool,
    constant: bool,
    laplace: bool,
    a: Vec<f64>,
    beta: f64,
    lambda: Vec<f64>,
}

fn specfun(c: &ExperimentConfig, req: SpecfunRequest) -> LabResult<i32> {
    let q: &QuadratureConfig = &c.quadrature;
    let p: &ModelParams = &c.model;
    let mut sink = RecordSink::new(c.seed, c.hash());
    let nothing = !(req.psi || req.phi || req.constant || req.laplace);
    if req.psi || nothing {
        for &a in &req.a {
            sink.value(format!("psi@{a}"), psi(a, q)?)
                .theory(psi_closed_form(a), "closed-form");
        }
        sink.value("integral_a_psi", integral_a_psi(q)?)
            .theory(bdre_core::specfun::INTEGRAL_A_PSI, "closed-form");
    }
    if req.phi {
        for &a in &req.a {
            sink.value(format!("phi[beta={}]@{a}", req.beta), phi_beta(a, req.beta, q)?);
        }
    }
    if req.constant {
        let regime = classify_regime(p)?;
        match theorem1_constant(p, regime, p.z0, q) {
            Ok(v) => {
                sink.value(format!("constant.{regime}"), v.finite().unwrap_or(f64::INFINITY));
            }
            Err(bdre_core::Error::NotComputable(why)) => {
                eprintln!("note: {regime}: {why}");
            }
            Err(e) => return Err(e.into()),
        }
    }
    if req.laplace {
        for &lambda in &req.lambda {
            for reading in [GammaReading::InverseGamma, GammaReading::AsPrinted] {
                sink.value(
                    format!("laplace.{}@{lambda}", reading.name()),
                    laplace_y(lambda, p.z0, p, reading, q)?,
                );
            }
        }
    }
    let stdout = std::io::stdout();
    write_csv(&sink.records, stdout.lock())?;
    Ok(0)
}

fn verify(preset: &str, seed: Option<u64>, out: &Path, only: &[String]) -> LabResult<i32> {
    let preset = Preset::parse(preset)
        .ok_or_else(|| LabError::config(format!("unknown preset `{preset}` (standard, quick)")))?;
    let seed = match seed {
        Some(s) => s,
        None => {
            let mut c = ExperimentConfig::default();
            c.apply_env()?;
            c.seed
        }
    };
    let only: Vec<&str> = only.iter().map(String::as_str).collect();
    let report = run_verify(preset, seed, &only)?;
    for path in write_outputs(&report, out)? {
        println!("wrote {}", path.display());
    }
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(report.summary_table().as_bytes());
    Ok(if report.passed() { 0 } else { 1 })
}

fn bridge(c: &ExperimentConfig, levels: &[u32]) -> LabResult<i32> {
    let p = c.model;
    let mut sink = RecordSink::new(c.seed, c.hash());
    let exact = (p.alpha > 0.0).then(|| extinction_probability(p.z0, &p)).transpose()?;
    for &level in levels {
        let e = bridge_extinction(level, c.n, &p, c.scheme.horizon, c.seed)?;
        let r = sink.estimate(format!("bridge.extinction@n={level}"), &e);
        if let Some(x) = exact {
            r.theory(x, "closed-form").check(e.within(x, 3.0));
        }
    }
    save(c, "bridge", &sink.records, OutputFormat::Csv)?;
    Ok(0)
}
