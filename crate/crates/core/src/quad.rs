//! Globally adaptive 15-point Gauss–Kronrod quadrature.
//!
//! Half-infinite ranges are mapped onto `(0, 1)` before subdivision, either
//! by `x = a − ln(1 − u)` or by `x = a + tan(πu/2)`.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::collections::BinaryHeap;
use core::cmp::Ordering;


use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InfiniteDomainMap {
    /// `x = −ln(1 − u)`, `dx = du/(1 − u)`; suited to exponential decay.
    ExpSubstitution,
    /// `x = tan(πu/2)`, `dx = (π/2) sec²(πu/2) du`; suited to slow decay.
    TanSubstitution,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    pub infinite_domain_map: InfiniteDomainMap,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            rel_tol: 1e-12,
            abs_tol: 1e-15,
            max_subdivisions: 2000,
            infinite_domain_map: InfiniteDomainMap::ExpSubstitution,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidParameter("quadrature tolerances must be positive"));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::InvalidParameter("max_subdivisions must be positive"));
        }
        Ok(())
    }

    pub fn with_map(self, map: InfiniteDomainMap) -> Self {
        QuadratureConfig {
            infinite_domain_map: map,
            ..self
        }
    }

    pub fn with_rel_tol(self, rel_tol: f64) -> Self {
        QuadratureConfig { rel_tol, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
}

// Kronrod abscissae on [0, 1] (symmetric), with Kronrod and Gauss weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kronrod += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    (value, error)
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// `∫_a^b f(x) dx` on a finite interval.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, q: &QuadratureConfig) -> Result<QuadResult> {
    q.validate()?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidParameter("integration bounds must be finite"));
    }
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            subdivisions: 0,
        });
    }
    let (value, error) = gk15(&mut f, a, b);
    let mut total = value;
    let mut total_err = error;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let mut subdivisions = 1;
    while total_err > q.abs_tol.max(q.rel_tol * total.abs()) {
        if !total.is_finite() || !total_err.is_finite() {
            return Err(Error::QuadratureBudget {
                subdivisions,
                estimate: total,
                error: total_err,
            });
        }
        if subdivisions >= q.max_subdivisions {
            return Err(Error::QuadratureBudget {
                subdivisions,
                estimate: total,
                error: total_err,
            });
        }
        let seg = match heap.pop() {
            Some(s) => s,
            None => break,
        };
        let mid = 0.5 * (seg.a + seg.b);
        if !(mid > seg.a && mid < seg.b) {
            // interval cannot be split further in floating point
            heap.push(seg);
            return Err(Error::QuadratureBudget {
                subdivisions,
                estimate: total,
                error: total_err,
            });
        }
        let (v1, e1) = gk15(&mut f, seg.a, mid);
        let (v2, e2) = gk15(&mut f, mid, seg.b);
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.error;
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            error: e2,
        });
        subdivisions += 1;
    }
    // re-sum to shed accumulated rounding from the running updates
    let value = heap.iter().map(|s| s.value).sum();
    let error = heap.iter().map(|s| s.error).sum();
    Ok(QuadResult {
        value,
        error,
        subdivisions,
    })
}

/// `∫_a^∞ f(x) dx` through the configured infinite-domain map.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    q: &QuadratureConfig,
) -> Result<QuadResult> {
    match q.infinite_domain_map {
        InfiniteDomainMap::ExpSubstitution => integrate(
            |u| {
                let x = a - (-u).ln_1p();
                if !x.is_finite() {
                    return 0.0;
                }
                let v = f(x) / (1.0 - u);
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            },
            0.0,
            1.0,
            q,
        ),
        InfiniteDomainMap::TanSubstitution => integrate(
            |u| {
                let theta = core::f64::consts::FRAC_PI_2 * u;
                let c = theta.cos();
                let x = a + theta.tan();
                if !x.is_finite() || c == 0.0 {
                    return 0.0;
                }
                let v = f(x) * core::f64::consts::FRAC_PI_2 / (c * c);
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            },
            0.0,
            1.0,
            q,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x| x * x * x - 2.0 * x, 0.0, 2.0, &QuadratureConfig::default()).unwrap();
        assert!((r.value - 0.0).abs() < 1e-14);
        let r = integrate(|x| x.powi(5), -1.0, 3.0, &QuadratureConfig::default()).unwrap();
        assert!((r.value - (729.0 - 1.0) / 6.0).abs() < 1e-11);
    }

    #[test]
    fn endpoint_singularity() {
        // ∫₀¹ x^{−1/2} dx = 2
        let q = QuadratureConfig {
            rel_tol: 1e-10,
            ..QuadratureConfig::default()
        };
        let r = integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0, &q).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn infinite_maps() {
        let q = QuadratureConfig::default();
        let r = integrate_to_infinity(|x| (-x).exp(), 0.0, &q).unwrap();
        assert!((r.value - 1.0).abs() < 1e-13);
        let qt = q.with_map(InfiniteDomainMap::TanSubstitution);
        let r = integrate_to_infinity(|x| 1.0 / (1.0 + x * x), 0.0, &qt).unwrap();
        assert!((r.value - core::f64::consts::FRAC_PI_2).abs() < 1e-12);
        let r = integrate_to_infinity(|x| (-x * x).exp(), 1.0, &qt).unwrap();
        assert!((r.value - 0.139_402_792_640_331_0).abs() < 1e-12);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let q = QuadratureConfig {
            max_subdivisions: 3,
            ..QuadratureConfig::default()
        };
        let r = integrate(|x| (1.0 / x).sin(), 1e-6, 1.0, &q);
        assert!(matches!(r, Err(Error::QuadratureBudget { .. })));
        let bad = QuadratureConfig {
            rel_tol: 0.0,
            ..QuadratureConfig::default()
        };
        assert!(integrate(|x| x, 0.0, 1.0, &bad).is_err());
    }
}
