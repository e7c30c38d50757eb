//! Monte Carlo summaries and Kolmogorov–Smirnov tests.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::string::String;
use alloc::vec::Vec;


use crate::{Error, Result};

/// Point estimate with its standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct MCEstimate {
    pub mean: f64,
    /// Sample standard deviation over `√n`.
    pub std_error: f64,
    pub n: u64,
    pub method_tag: String,
}

impl MCEstimate {
    pub fn from_samples(samples: &[f64], method_tag: impl Into<String>) -> Result<Self> {
        let mut acc = Moments::default();
        for &x in samples {
            acc.push(x);
        }
        acc.estimate(method_tag)
    }

    /// An exact value reported in estimate form (`std_error = 0`).
    pub fn degenerate(value: f64, n: u64, method_tag: impl Into<String>) -> Self {
        MCEstimate {
            mean: value,
            std_error: 0.0,
            n: n.max(1),
            method_tag: method_tag.into(),
        }
    }

    /// `mean ± k·std_error`.
    pub fn interval(&self, k: f64) -> (f64, f64) {
        (self.mean - k * self.std_error, self.mean + k * self.std_error)
    }

    /// Distance to `value` in units of the standard error. A zero standard
    /// error gives 0 on exact agreement and infinity otherwise.
    pub fn z_score(&self, value: f64) -> f64 {
        let d = (self.mean - value).abs();
        if d == 0.0 {
            0.0
        } else if self.std_error == 0.0 {
            f64::INFINITY
        } else {
            d / self.std_error
        }
    }

    pub fn within(&self, value: f64, k: f64) -> bool {
        self.z_score(value) <= k
    }

    /// `√(se₁² + se₂²)`.
    pub fn combined_std_error(&self, other: &MCEstimate) -> f64 {
        self.std_error.hypot(other.std_error)
    }

    /// Difference of means in units of the combined standard error.
    pub fn z_score_against(&self, other: &MCEstimate) -> f64 {
        let d = (self.mean - other.mean).abs();
        let se = self.combined_std_error(other);
        if d == 0.0 {
            0.0
        } else if se == 0.0 {
            f64::INFINITY
        } else {
            d / se
        }
    }

    pub fn agrees_with(&self, other: &MCEstimate, k: f64) -> bool {
        self.z_score_against(other) <= k
    }
}

/// Streaming mean and variance (Welford), mergeable in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64 * other.n as f64 / n as f64);
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance (0 for fewer than two samples).
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn estimate(&self, method_tag: impl Into<String>) -> Result<MCEstimate> {
        if self.n == 0 {
            return Err(Error::InsufficientData("no samples"));
        }
        Ok(MCEstimate {
            mean: self.mean,
            std_error: (self.variance() / self.n as f64).sqrt(),
            n: self.n,
            method_tag: method_tag.into(),
        })
    }
}

/// Kolmogorov–Smirnov test outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    /// `n` for one sample, `nm/(n+m)` for two.
    pub effective_n: f64,
}

impl KsResult {
    pub fn rejects(&self, level: f64) -> bool {
        self.statistic > ks_critical_value(level, self.effective_n)
    }
}

/// Asymptotic Kolmogorov tail `Q(x) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²x²}`.
pub fn kolmogorov_q(x: f64) -> f64 {
    if !(x > 0.0) {
        return 1.0;
    }
    if x < 0.2 {
        // series alternates slowly here; the tail is 1 to double precision
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        sum += sign * term;
        if term < 1e-18 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic critical value `√(−ln(level/2)/2) / √n_eff`.
pub fn ks_critical_value(level: f64, effective_n: f64) -> f64 {
    (-(0.5 * level).ln() * 0.5).sqrt() / effective_n.sqrt()
}

fn sorted(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidParameter("samples must not contain NaN"));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// One-sample test against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("KS needs at least one sample"));
    }
    let v = sorted(samples)?;
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < v.len() {
        // step over ties so the empirical CDF jumps once per distinct value
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[i] {
            j += 1;
        }
        let f = cdf(v[i]);
        d = d.max(f - i as f64 / n).max((j + 1) as f64 / n - f);
        i = j + 1;
    }
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_q(n.sqrt() * d),
        effective_n: n,
    })
}

/// Two-sample test; ties across and within samples are handled by advancing
/// both empirical CDFs past each distinct value before comparing.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData("KS needs two nonempty samples"));
    }
    let (x, y) = (sorted(a)?, sorted(b)?);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] == v {
            i += 1;
        }
        while j < y.len() && y[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = n * m / (n + m);
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_q(ne.sqrt() * d),
        effective_n: ne,
    })
}
