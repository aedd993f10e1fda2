//! Globally adaptive Gauss–Kronrod (7/15) integration.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_intervals: 4000,
        }
    }
}

impl QuadratureOptions {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        kron += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kron;
    let mut resasc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = kron * half;
    resasc *= half.abs();
    let mut error = ((kron - gauss) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    // Floor at the rounding level of the segment itself.
    let floor = 50.0 * f64::EPSILON * value.abs();
    Segment {
        a,
        b,
        value,
        error: error.max(floor),
    }
}

/// Integrates `f` over the finite interval `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, opts: QuadratureOptions) -> Result<Estimate> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("integrate", "interval endpoints must be finite"));
    }
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let mut segments: Vec<Segment> = Vec::with_capacity(64);
    segments.push(kronrod(&mut f, a, b));
    let mut evaluations = 15;
    loop {
        let (value, error) = segments.iter().fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
        let target = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= target {
            return Ok(Estimate {
                value,
                error,
                evaluations,
            });
        }
        if !value.is_finite() {
            return Err(Error::non_convergence(
                "integrate",
                "integrand produced a non-finite value",
            ));
        }
        if segments.len() >= opts.max_intervals {
            return Err(Error::non_convergence(
                "integrate",
                format!("error estimate {error:e} above tolerance {target:e} after {evaluations} evaluations"),
            ));
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            return Err(Error::non_convergence(
                "integrate",
                "interval can no longer be bisected",
            ));
        }
        segments.push(kronrod(&mut f, seg.a, mid));
        segments.push(kronrod(&mut f, mid, seg.b));
        evaluations += 30;
    }
}

/// Integrates `f` over `[a, ∞)` through the map `x = a + scale·t/(1−t)`.
///
/// `scale` should be of the order of the region where the integrand carries
/// its mass; it only affects efficiency.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    scale: f64,
    opts: QuadratureOptions,
) -> Result<Estimate> {
    if !(scale > 0.0) {
        return Err(Error::domain("integrate_to_infinity", "scale must be positive"));
    }
    integrate(
        |t| {
            let one_minus = 1.0 - t;
            let x = a + scale * t / one_minus;
            let jac = scale / (one_minus * one_minus);
            let v = f(x);
            if v == 0.0 {
                0.0
            } else {
                v * jac
            }
        },
        0.0,
        1.0,
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let est = integrate(|x| x.powi(5) - 2.0 * x, 0.0, 2.0, QuadratureOptions::default()).unwrap();
        assert!((est.value - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
    }

    #[test]
    fn oscillatory_and_peaked_integrands() {
        let est = integrate(|x| x.sin(), 0.0, PI, QuadratureOptions::default()).unwrap();
        assert!((est.value - 2.0).abs() < 1e-12);
        let est = integrate(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, QuadratureOptions::default()).unwrap();
        assert!((est.value - 2.0 * 100.0 * (100.0_f64).atan()).abs() < 1e-9);
    }

    #[test]
    fn semi_infinite_exponential_moments() {
        let est = integrate_to_infinity(|x| x * x * (-x).exp(), 0.0, 1.0, QuadratureOptions::default()).unwrap();
        assert!((est.value - 2.0).abs() < 1e-11);
        let est = integrate_to_infinity(|x| (-x).exp() / x, 1.0, 1.0, QuadratureOptions::default()).unwrap();
        assert!((est.value - 0.219_383_934_395_520_27).abs() < 1e-12);
    }

    #[test]
    fn reports_non_convergence() {
        let opts = QuadratureOptions {
            max_intervals: 5,
            ..QuadratureOptions::default()
        };
        let err = integrate(|x| (1.0 / x).sin(), 1e-8, 1.0, opts).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }));
    }
}
