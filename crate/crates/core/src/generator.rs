//! The generator of `(Z, S)`:
//!
//! ```text
//! G f = (α + σ_e²/2) z f_z + α f_s + ½(σ_e² z² + σ_b² z) f_zz + ½σ_e² f_ss + σ_e² z f_zs
//! ```
//!
//! Derivatives are supplied by the caller through [`Smooth`].


#[allow(unused_imports)]
use num_traits::Float;
use crate::model::ModelParams;

/// Value and first/second partial derivatives of a function of `(z, s)`
/// at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Derivatives {
    pub f: f64,
    pub f_z: f64,
    pub f_s: f64,
    pub f_zz: f64,
    pub f_ss: f64,
    pub f_zs: f64,
}

/// A twice differentiable function of `(z, s)`.
pub trait Smooth {
    fn derivatives(&self, z: f64, s: f64) -> Derivatives;
}

impl<F: Fn(f64, f64) -> Derivatives> Smooth for F {
    fn derivatives(&self, z: f64, s: f64) -> Derivatives {
        self(z, s)
    }
}

/// Applies the generator to already-evaluated derivatives at state `z`.
#[inline]
pub fn generator_from_derivatives(d: &Derivatives, z: f64, params: &ModelParams) -> f64 {
    let (a, ve, vb) = (params.alpha, params.var_e(), params.var_b());
    (a + 0.5 * ve) * z * d.f_z
        + a * d.f_s
        + 0.5 * (ve * z * z + vb * z) * d.f_zz
        + 0.5 * ve * d.f_ss
        + ve * z * d.f_zs
}

/// `G f (z, s)`.
pub fn generator_apply<F: Smooth + ?Sized>(f: &F, z: f64, s: f64, params: &ModelParams) -> f64 {
    generator_from_derivatives(&f.derivatives(z, s), z, params)
}

/// The individual terms of `G f`, useful for scaling harmonicity tolerances.
pub fn generator_terms(d: &Derivatives, z: f64, params: &ModelParams) -> [f64; 5] {
    let (a, ve, vb) = (params.alpha, params.var_e(), params.var_b());
    [
        (a + 0.5 * ve) * z * d.f_z,
        a * d.f_s,
        0.5 * (ve * z * z + vb * z) * d.f_zz,
        0.5 * ve * d.f_ss,
        ve * z * d.f_zs,
    ]
}

/// `U(z) = (σ_e² z + σ_b²)^(−β)` with analytic derivatives.
#[derive(Debug, Clone, Copy)]
pub struct ScaleU(pub ModelParams);

impl Smooth for ScaleU {
    fn derivatives(&self, z: f64, _s: f64) -> Derivatives {
        let p = &self.0;
        let ve = p.var_e();
        let beta = p.beta();
        let base = ve * z + p.var_b();
        let u = base.powf(-beta);
        Derivatives {
            f: u,
            f_z: -beta * ve * u / base,
            f_zz: beta * (beta + 1.0) * ve * ve * u / (base * base),
            ..Derivatives::default()
        }
    }
}

/// `V(s) = exp(−β s)` with analytic derivatives.
#[derive(Debug, Clone, Copy)]
pub struct ScaleV(pub ModelParams);

impl Smooth for ScaleV {
    fn derivatives(&self, _z: f64, s: f64) -> Derivatives {
        let beta = self.0.beta();
        let v = (-beta * s).exp();
        Derivatives {
            f: v,
            f_s: -beta * v,
            f_ss: beta * beta * v,
            ..Derivatives::default()
        }
    }
}

/// Central finite-difference derivatives of a plain function. Intended for
/// cross-checking analytic derivatives in tests.
pub struct FiniteDifference<F> {
    pub f: F,
    pub h: f64,
}

impl<F: Fn(f64, f64) -> f64> Smooth for FiniteDifference<F> {
    fn derivatives(&self, z: f64, s: f64) -> Derivatives {
        let (f, h) = (&self.f, self.h);
        let c = f(z, s);
        let zp = f(z + h, s);
        let zm = f(z - h, s);
        let sp = f(z, s + h);
        let sm = f(z, s - h);
        let h2 = h * h;
        Derivatives {
            f: c,
            f_z: (zp - zm) / (2.0 * h),
            f_s: (sp - sm) / (2.0 * h),
            f_zz: (zp - 2.0 * c + zm) / h2,
            f_ss: (sp - 2.0 * c + sm) / h2,
            f_zs: (f(z + h, s + h) - f(z + h, s - h) - f(z - h, s + h) + f(z - h, s - h))
                / (4.0 * h2),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(a: f64, se: f64, sb: f64) -> ModelParams {
        ModelParams::new(a, se, sb, 1.0).unwrap()
    }

    #[test]
    fn constants_are_harmonic() {
        let one = |_: f64, _: f64| Derivatives {
            f: 1.0,
            ..Derivatives::default()
        };
        assert_eq!(generator_apply(&one, 3.0, -1.0, &params(1.0, 1.0, 1.0)), 0.0);
    }

    #[test]
    fn scale_functions_are_harmonic_at_standard_point() {
        let p = params(1.0, 1.0, 1.0);
        assert!(generator_apply(&ScaleU(p), 1.0, 0.0, &p).abs() < 1e-16);
        assert!(generator_apply(&ScaleV(p), 1.0, 0.5, &p).abs() < 1e-16);
    }

    #[test]
    fn generator_of_z_is_expectation_drift() {
        // G z = (α + σ_e²/2) z
        let p = params(0.7, 1.3, 0.4);
        let id = |z: f64, _s: f64| Derivatives {
            f: z,
            f_z: 1.0,
            ..Derivatives::default()
        };
        let g = generator_apply(&id, 2.0, 0.0, &p);
        assert!((g - (0.7 + 0.5 * 1.69) * 2.0).abs() < 1e-14);
    }

    #[test]
    fn finite_difference_matches_analytic_on_mixed_function() {
        // f = z² e^{s/2} + sin(z s)
        let p = params(0.4, 0.9, 1.1);
        let analytic = |z: f64, s: f64| {
            let e = (0.5 * s).exp();
            let (sn, cs) = (z * s).sin_cos();
            Derivatives {
                f: z * z * e + sn,
                f_z: 2.0 * z * e + s * cs,
                f_s: 0.5 * z * z * e + z * cs,
                f_zz: 2.0 * e - s * s * sn,
                f_ss: 0.25 * z * z * e - z * z * sn,
                f_zs: z * e + cs - z * s * sn,
            }
        };
        let fd = FiniteDifference {
            f: |z: f64, s: f64| z * z * (0.5 * s).exp() + (z * s).sin(),
            h: 1e-5,
        };
        for &(z, s) in &[(0.5, 0.2), (2.0, -1.0), (1.3, 0.9)] {
            let ga = generator_apply(&analytic, z, s, &p);
            let gf = generator_apply(&fd, z, s, &p);
            assert!((ga - gf).abs() <= 1e-4 * ga.abs().max(1.0), "{ga} vs {gf}");
        }
    }

    proptest! {
        #[test]
        fn u_and_v_harmonic(
            a in -3.0f64..3.0,
            se in 0.1f64..3.0,
            sb in 0.1f64..3.0,
            z in 0.0f64..100.0,
            s in -10.0f64..10.0,
        ) {
            let p = params(a, se, sb);
            for f in [&ScaleU(p) as &dyn Smooth, &ScaleV(p)] {
                let d = f.derivatives(z, s);
                let scale = generator_terms(&d, z, &p).iter().fold(0.0f64, |m, t| m.max(t.abs()));
                prop_assume!(scale.is_finite());
                let g = generator_from_derivatives(&d, z, &p);
                prop_assert!(g.abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE) + 1e-300);
            }
        }

        #[test]
        fn analytic_u_matches_finite_differences(
            a in 0.1f64..2.0,
            se in 0.3f64..2.0,
            sb in 0.3f64..2.0,
            z in 0.1f64..10.0,
        ) {
            let p = params(a, se, sb);
            let d = ScaleU(p).derivatives(z, 0.0);
            let fd = FiniteDifference {
                f: move |z: f64, _s: f64| (se * se * z + sb * sb).powf(-p.beta()),
                h: 1e-4,
            }.derivatives(z, 0.0);
            prop_assert!((d.f_z - fd.f_z).abs() <= 1e-4 * d.f_z.abs());
            prop_assert!((d.f_zz - fd.f_zz).abs() <= 1e-4 * d.f_zz.abs().max(1e-6));
        }
    }
}
