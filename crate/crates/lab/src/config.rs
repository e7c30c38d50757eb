//! Experiment configuration in a flat `section.key = value` text format.
//!
//! ```text
//! # comments and blank lines are ignored
//! model.alpha = 1
//! model.sigma_e = 1
//! experiment.kind = extinction
//! experiment.t_grid = 4, 6, 8, 10, 12
//! ```
//!
//! Keys that are absent keep their defaults (see [`ExperimentConfig::default`]).
//! Floats are written in Rust's shortest round-trip form, so
//! `parse(render(c)) == c`.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bdre_core::quad::{InfiniteDomainMap, QuadratureConfig};
use bdre_core::{ModelParams, Scheme, SchemeConfig};
use sha2::{Digest, Sha256};

use crate::error::{LabError, LabResult};

pub const SEED_ENV_VAR: &str = "BDRE_LAB_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    Extinction,
    ConditionedSurvival,
    Rates,
    Martingale,
    Laplace,
    Equivalence,
    Dufresne,
    Bridge,
}

impl Experiment {
    pub const ALL: &'static [Experiment] = &[
        Experiment::Extinction,
        Experiment::ConditionedSurvival,
        Experiment::Rates,
        Experiment::Martingale,
        Experiment::Laplace,
        Experiment::Equivalence,
        Experiment::Dufresne,
        Experiment::Bridge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Extinction => "extinction",
            Experiment::ConditionedSurvival => "conditioned-survival",
            Experiment::Rates => "rates",
            Experiment::Martingale => "martingale",
            Experiment::Laplace => "laplace",
            Experiment::Equivalence => "equivalence",
            Experiment::Dufresne => "dufresne",
            Experiment::Bridge => "bridge",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Experiment::ALL
            .iter()
            .copied()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown experiment: {s}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelParams,
    pub scheme: SchemeConfig,
    pub quadrature: QuadratureConfig,
    pub experiment: Experiment,
    /// Replications (paths, environments or discrete runs).
    pub n: u64,
    pub seed: u64,
    /// Evaluation times; the first entry doubles as the single time `t`.
    pub t_grid: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    /// Method, route or functional names, depending on the experiment.
    /// Empty selects the experiment's default.
    pub routes: Vec<String>,
    /// Scaling level of the discrete process.
    pub level: u32,
    pub output_dir: PathBuf,
    /// Worker threads; `None` uses every available core. Not hashed.
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    /// The standard parameter set `(α, σ_e, σ_b, z) = (1, 1, 1, 1)`,
    /// `dt = 10⁻³` on horizon 30, default quadrature, extinction by
    /// Rao-Blackwellization with `n = 10⁵`, seed 2024, `t_grid = [1]`,
    /// `lambda_grid = [0.5, 1, 2, 10]`, level 1000, output in `results/`.
    fn default() -> Self {
        ExperimentConfig {
            model: ModelParams::STANDARD,
            scheme: SchemeConfig {
                dt: 1e-3,
                horizon: 30.0,
                scheme: Scheme::EulerFullTruncation,
                absorption_threshold: 0.0,
                stride: 1,
            },
            quadrature: QuadratureConfig::default(),
            experiment: Experiment::Extinction,
            n: 100_000,
            seed: 2024,
            t_grid: vec![1.0],
            lambda_grid: vec![0.5, 1.0, 2.0, 10.0],
            routes: Vec::new(),
            level: 1000,
            output_dir: PathBuf::from("results"),
            threads: None,
        }
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(", ")
}

fn map_name(m: InfiniteDomainMap) -> &'static str {
    match m {
        InfiniteDomainMap::ExpSubstitution => "exp",
        InfiniteDomainMap::TanSubstitution => "tan",
    }
}

impl ExperimentConfig {
    /// Lines that define the experiment; everything but the output
    /// directory and thread count.
    fn semantic_lines(&self) -> Vec<(&'static str, String)> {
        let (m, s, q) = (&self.model, &self.scheme, &self.quadrature);
        vec![
            ("model.alpha", m.alpha.to_string()),
            ("model.sigma_e", m.sigma_e.to_string()),
            ("model.sigma_b", m.sigma_b.to_string()),
            ("model.z0", m.z0.to_string()),
            ("scheme.dt", s.dt.to_string()),
            ("scheme.horizon", s.horizon.to_string()),
            ("scheme.kind", s.scheme.name().to_string()),
            ("scheme.absorption_threshold", s.absorption_threshold.to_string()),
            ("scheme.stride", s.stride.to_string()),
            ("quadrature.rel_tol", q.rel_tol.to_string()),
            ("quadrature.abs_tol", q.abs_tol.to_string()),
            ("quadrature.max_subdivisions", q.max_subdivisions.to_string()),
            ("quadrature.infinite_map", map_name(q.infinite_domain_map).to_string()),
            ("experiment.kind", self.experiment.name().to_string()),
            ("experiment.n", self.n.to_string()),
            ("experiment.seed", self.seed.to_string()),
            ("experiment.t_grid", join(&self.t_grid)),
            ("experiment.lambda_grid", join(&self.lambda_grid)),
            ("experiment.routes", self.routes.join(", ")),
            ("experiment.level", self.level.to_string()),
        ]
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.semantic_lines() {
            let _ = writeln!(out, "{k} = {v}");
        }
        let _ = writeln!(out, "output.dir = {}", self.output_dir.display());
        if let Some(t) = self.threads {
            let _ = writeln!(out, "run.threads = {t}");
        }
        out
    }

    /// Hex SHA-256 of the semantic lines.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.semantic_lines() {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        hex(&h.finalize())
    }

    pub fn parse(text: &str) -> LabResult<Self> {
        let mut c = ExperimentConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| LabError::config(format!("line {}: expected `key = value`", lineno + 1)))?;
            c.set(key.trim(), value.trim())
                .map_err(|e| LabError::config(format!("line {}: {e}", lineno + 1)))?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("{key}: cannot parse `{v}`"))
        }
        fn list(key: &str, v: &str) -> Result<Vec<f64>, String> {
            if v.is_empty() {
                return Ok(Vec::new());
            }
            v.split(',').map(|x| num(key, x.trim())).collect()
        }
        match key {
            "model.alpha" => self.model.alpha = num(key, value)?,
            "model.sigma_e" => self.model.sigma_e = num(key, value)?,
            "model.sigma_b" => self.model.sigma_b = num(key, value)?,
            "model.z0" => self.model.z0 = num(key, value)?,
            "scheme.dt" => self.scheme.dt = num(key, value)?,
            "scheme.horizon" => self.scheme.horizon = num(key, value)?,
            "scheme.kind" => {
                self.scheme.scheme = [Scheme::EulerFullTruncation, Scheme::EulerReflect]
                    .into_iter()
                    .find(|s| s.name() == value)
                    .ok_or_else(|| format!("{key}: unknown scheme `{value}`"))?
            }
            "scheme.absorption_threshold" => self.scheme.absorption_threshold = num(key, value)?,
            "scheme.stride" => self.scheme.stride = num(key, value)?,
            "quadrature.rel_tol" => self.quadrature.rel_tol = num(key, value)?,
            "quadrature.abs_tol" => self.quadrature.abs_tol = num(key, value)?,
            "quadrature.max_subdivisions" => self.quadrature.max_subdivisions = num(key, value)?,
            "quadrature.infinite_map" => {
                self.quadrature.infinite_domain_map = match value {
                    "exp" => InfiniteDomainMap::ExpSubstitution,
                    "tan" => InfiniteDomainMap::TanSubstitution,
                    _ => return Err(format!("{key}: expected exp or tan")),
                }
            }
            "experiment.kind" => self.experiment = value.parse()?,
            "experiment.n" => self.n = num(key, value)?,
            "experiment.seed" => self.seed = num(key, value)?,
            "experiment.t_grid" => self.t_grid = list(key, value)?,
            "experiment.lambda_grid" => self.lambda_grid = list(key, value)?,
            "experiment.routes" => {
                self.routes = value
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            }
            "experiment.level" => self.level = num(key, value)?,
            "output.dir" => self.output_dir = PathBuf::from(value),
            "run.threads" => self.threads = Some(num(key, value)?),
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> LabResult<()> {
        self.model.validate()?;
        self.scheme.validate()?;
        self.quadrature.validate()?;
        if self.n == 0 {
            return Err(LabError::config("experiment.n must be positive"));
        }
        if self.t_grid.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(LabError::config("experiment.t_grid must hold finite nonnegative times"));
        }
        if self.lambda_grid.iter().any(|l| !(*l >= 0.0)) {
            return Err(LabError::config("experiment.lambda_grid must be nonnegative"));
        }
        if self.threads == Some(0) {
            return Err(LabError::config("run.threads must be at least 1"));
        }
        Ok(())
    }

    /// Reads a config file and applies the seed override from the
    /// environment.
    pub fn load(path: &Path) -> LabResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        let mut c = Self::parse(&text)?;
        c.apply_env()?;
        Ok(c)
    }

    pub fn apply_env(&mut self) -> LabResult<()> {
        if let Ok(v) = std::env::var(SEED_ENV_VAR) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| LabError::config(format!("{SEED_ENV_VAR}: cannot parse `{v}`")))?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> LabResult<()> {
        std::fs::write(path, self.render()).map_err(|e| LabError::io(path, e))
    }

    /// First entry of `t_grid`, or the scheme horizon when the grid is empty.
    pub fn t(&self) -> f64 {
        self.t_grid.first().copied().unwrap_or(self.scheme.horizon)
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::parse(&c.render()).unwrap(), c);
    }

    #[test]
    fn awkward_floats_round_trip() {
        let mut c = ExperimentConfig::default();
        c.model.alpha = 0.1 + 0.2;
        c.model.sigma_e = 1.0 / 3.0;
        c.lambda_grid = vec![f64::INFINITY, 1e-300, 5e-324];
        c.t_grid = vec![];
        c.routes = vec!["h-transform".into(), "reweighting".into()];
        c.threads = Some(3);
        let back = ExperimentConfig::parse(&c.render()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn comments_and_unknown_keys() {
        let c = ExperimentConfig::parse("# x\n\nmodel.alpha = 2\n").unwrap();
        assert_eq!(c.model.alpha, 2.0);
        assert!(ExperimentConfig::parse("model.gamma = 1").is_err());
        assert!(ExperimentConfig::parse("model.alpha 1").is_err());
        assert!(ExperimentConfig::parse("model.sigma_e = -1").is_err());
        assert!(ExperimentConfig::parse("experiment.kind = nope").is_err());
    }

    #[test]
    fn hash_ignores_output_and_threads() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.output_dir = PathBuf::from("/tmp/elsewhere");
        b.threads = Some(7);
        assert_eq!(a.hash(), b.hash());
        b.model.z0 = 1.5;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
