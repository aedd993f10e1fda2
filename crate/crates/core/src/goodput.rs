//! Goodput and outage with imperfect CQI: estimation error plus feedback
//! delay. The scheduler ranks users on estimated powers, which are
//! exponential with mean 1 − σw²; transmission succeeds when the actual
//! power clears a threshold.
//!
//! Order-b building blocks, with X the maximum of b estimated powers,
//! ϖ = α_w·α and ϑ = α_w·sqrt(a):
//!
//! * `i2(a, b)` = E[Q1(ϖ√X, ϑ)]            (fixed rate, threshold a)
//! * `i4(a, b)` = E[Q1(ϖ√X, ϑ√X)]          (variable rate, backoff a)
//! * `i3(a, b)` = E[Q1(ϖ√X, ϑ√X)·log2(1 + ρaX)]

use alloc::format;
use core::f64::consts::LN_2;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::analytic::{max_exponential_density, minimum_best_m, quad_opts, EvalPath, ScheduledCqiLaw};
use crate::channel::{ImpairmentParams, SystemConfig};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_to_infinity};
use crate::specfun::{self, marcum_q1_unchecked};
use crate::summation::{alternating_binomial_sum, harmonic, trusted_total};

const Q1_TOL: f64 = 1e-15;

/// Threshold- and impairment-dependent constants shared by the closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralArgs {
    /// α_w·α
    pub varpi: f64,
    /// α_w·sqrt(a)
    pub vartheta: f64,
    /// Mean estimated power 1 − σw².
    pub scale: f64,
}

/// Per-index constants of the alternating sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermArgs {
    pub zeta: f64,
    pub phi: f64,
    pub psi: f64,
    pub varsigma: f64,
}

impl IntegralArgs {
    pub fn new(a: f64, imp: &ImpairmentParams) -> Result<Self> {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::domain("IntegralArgs", format!("a = {a} must be nonnegative")));
        }
        let aw = imp.alpha_w();
        Ok(Self {
            varpi: aw * imp.delay_corr(),
            vartheta: aw * a.sqrt(),
            scale: imp.estimate_power(),
        })
    }

    pub fn term(&self, l: usize) -> TermArgs {
        let w2 = self.varpi * self.varpi;
        let t2 = self.vartheta * self.vartheta;
        let zeta = 2.0 * (l + 1) as f64 / self.scale;
        let phi = w2 + t2 + zeta;
        let psi = w2 - t2 + zeta;
        // φ² − 4ϖ²ϑ² = (φ − 2ϖϑ)(φ + 2ϖϑ), both factors positive since ζ > 0.
        let wt = 2.0 * self.varpi * self.vartheta;
        let varsigma = ((phi - wt) * (phi + wt)).sqrt();
        TermArgs {
            zeta,
            phi,
            psi,
            varsigma,
        }
    }

    /// Argument 4ϖ²ϑ²/φ² of the hypergeometric functions; always in [0, 1).
    pub fn hypergeometric_arg(&self, l: usize) -> f64 {
        let t = self.term(l);
        let r = 2.0 * self.varpi * self.vartheta / t.phi;
        r * r
    }
}

fn check_order(function: &'static str, b: usize) -> Result<()> {
    if b == 0 {
        Err(Error::domain(function, "b must be at least 1"))
    } else {
        Ok(())
    }
}

fn check_backoff(function: &'static str, a: f64) -> Result<()> {
    if (0.0..=1.0).contains(&a) {
        Ok(())
    } else {
        Err(Error::domain(function, format!("backoff {a} must lie in [0, 1]")))
    }
}

/// E[g(X)] for X the maximum of `b` exponentials with mean `scale`.
fn order_expectation(b: usize, scale: f64, g: impl Fn(f64) -> f64) -> Result<f64> {
    let f = |x: f64| {
        let d = max_exponential_density(x, b, scale);
        if d == 0.0 {
            0.0
        } else {
            g(x) * d
        }
    };
    let split = scale * ((b as f64).ln() + 3.0);
    let head = integrate(f, 0.0, split, quad_opts())?;
    let tail = integrate_to_infinity(f, split, scale, quad_opts())?;
    Ok(head.value + tail.value)
}

/// Success probability of a fixed-rate transmission with threshold `a` to the
/// best of `b` users.
pub fn i2(a: f64, b: usize, imp: &ImpairmentParams) -> Result<f64> {
    check_order("i2", b)?;
    let args = IntegralArgs::new(a, imp)?;
    let w2 = args.varpi * args.varpi;
    let t2 = args.vartheta * args.vartheta;
    let head = (-t2 / 2.0).exp();
    let acc = alternating_binomial_sum(b, |l| {
        let z = args.term(l).zeta;
        let tail = (-z * t2 / (2.0 * (w2 + z))).exp() * -(-w2 * t2 / (2.0 * (w2 + z))).exp_m1();
        (head + tail) / z
    });
    if let Some(total) = trusted_total(&acc, 8.0 * f64::EPSILON) {
        return Ok((2.0 * b as f64 / args.scale * total).clamp(0.0, 1.0));
    }
    i2_quadrature(a, b, imp)
}

pub fn i2_quadrature(a: f64, b: usize, imp: &ImpairmentParams) -> Result<f64> {
    check_order("i2", b)?;
    let args = IntegralArgs::new(a, imp)?;
    order_expectation(b, args.scale, |x| {
        marcum_q1_unchecked(args.varpi * x.sqrt(), args.vartheta, Q1_TOL)
    })
}

/// Success probability of a variable-rate transmission with backoff `a`.
pub fn i4(a: f64, b: usize, imp: &ImpairmentParams) -> Result<f64> {
    check_order("i4", b)?;
    let args = IntegralArgs::new(a, imp)?;
    let acc = alternating_binomial_sum(b, |l| {
        let t = args.term(l);
        (1.0 + t.psi / t.varsigma) / t.zeta
    });
    if let Some(total) = trusted_total(&acc, 16.0 * f64::EPSILON) {
        return Ok((b as f64 / args.scale * total).clamp(0.0, 1.0));
    }
    i4_quadrature(a, b, imp)
}

pub fn i4_quadrature(a: f64, b: usize, imp: &ImpairmentParams) -> Result<f64> {
    check_order("i4", b)?;
    let args = IntegralArgs::new(a, imp)?;
    order_expectation(b, args.scale, |x| {
        let r = x.sqrt();
        marcum_q1_unchecked(args.varpi * r, args.vartheta * r, Q1_TOL)
    })
}

/// Variable-rate goodput of the best of `b` users, by adaptive quadrature.
pub fn i3_quadrature(a: f64, b: usize, imp: &ImpairmentParams, snr: f64) -> Result<f64> {
    check_order("i3_quadrature", b)?;
    check_backoff("i3_quadrature", a)?;
    if a == 0.0 {
        return Ok(0.0);
    }
    let args = IntegralArgs::new(a, imp)?;
    order_expectation(b, args.scale, |x| {
        let r = x.sqrt();
        marcum_q1_unchecked(args.varpi * r, args.vartheta * r, Q1_TOL) * (snr * a * x).ln_1p() / LN_2
    })
}

/// Upper bound on `i3_quadrature` from log2(1 + y) ≤ y/ln2, tight at low SNR.
pub fn i3_upper_bound(a: f64, b: usize, imp: &ImpairmentParams, snr: f64) -> Result<f64> {
    check_order("i3_upper_bound", b)?;
    check_backoff("i3_upper_bound", a)?;
    if a == 0.0 {
        return Ok(0.0);
    }
    let args = IntegralArgs::new(a, imp)?;
    let w2 = args.varpi * args.varpi;
    let t2 = args.vartheta * args.vartheta;
    let mut failure = None;
    let acc = alternating_binomial_sum(b, |l| {
        let t = args.term(l);
        let u = args.hypergeometric_arg(l);
        let mut f = |p: f64, q: f64, r: f64| match specfun::gauss_2f1(p, q, r, u) {
            Ok(v) => v,
            Err(e) => {
                failure = Some(e);
                f64::NAN
            }
        };
        let inner = w2 / t.phi * f(1.0, 1.5, 2.0) - f(0.5, 1.0, 1.0)
            + 2.0 * t.zeta / t.phi * (w2 / t.phi * f(1.5, 2.0, 2.0) - 0.5 * f(1.0, 1.5, 1.0));
        (1.0 + t2 / t.phi * inner) / (t.zeta * t.zeta)
    });
    if let Some(e) = failure {
        return Err(e);
    }
    if let Some(total) = trusted_total(&acc, 64.0 * f64::EPSILON) {
        return Ok(4.0 * snr * a * b as f64 / (args.scale * LN_2) * total);
    }
    i3_linearized_quadrature(a, b, imp, snr)
}

/// Quadrature of the integrand the upper bound evaluates in closed form.
pub fn i3_linearized_quadrature(a: f64, b: usize, imp: &ImpairmentParams, snr: f64) -> Result<f64> {
    check_order("i3_upper_bound", b)?;
    let args = IntegralArgs::new(a, imp)?;
    order_expectation(b, args.scale, |x| {
        let r = x.sqrt();
        marcum_q1_unchecked(args.varpi * r, args.vartheta * r, Q1_TOL) * snr * a * x / LN_2
    })
}

/// Mean of the maximum of `b` estimated powers: (1 − σw²)·H_b.
pub fn jensen_mean(b: usize, imp: &ImpairmentParams) -> Result<f64> {
    check_order("jensen_mean", b)?;
    Ok(imp.estimate_power() * harmonic(b))
}

/// `i3` with the expectation moved inside: the integrand evaluated at the
/// mean of X.
pub fn i3_jensen(a: f64, b: usize, imp: &ImpairmentParams, snr: f64) -> Result<f64> {
    check_backoff("i3_jensen", a)?;
    let mean = jensen_mean(b, imp)?;
    if a == 0.0 {
        return Ok(0.0);
    }
    let args = IntegralArgs::new(a, imp)?;
    let r = mean.sqrt();
    Ok(marcum_q1_unchecked(args.varpi * r, args.vartheta * r, Q1_TOL) * (snr * a * mean).ln_1p() / LN_2)
}

/// Smallest x0 such that x ↦ Q1(ϖ√x, ϑ√x)·log2(1 + ρax) is concave on
/// [x0, x_max], located on a grid of `points` second differences. `None`
/// when the integrand is not concave at x_max.
pub fn concavity_onset(a: f64, imp: &ImpairmentParams, snr: f64, x_max: f64, points: usize) -> Result<Option<f64>> {
    check_backoff("concavity_onset", a)?;
    if !(x_max > 0.0) || points < 3 {
        return Err(Error::domain(
            "concavity_onset",
            "need x_max > 0 and at least three grid points",
        ));
    }
    let args = IntegralArgs::new(a, imp)?;
    let g = |x: f64| {
        let r = x.sqrt();
        marcum_q1_unchecked(args.varpi * r, args.vartheta * r, Q1_TOL) * (snr * a * x).ln_1p() / LN_2
    };
    let h = x_max / points as f64;
    let mut onset = None;
    for i in (1..points).rev() {
        let x = i as f64 * h;
        let second = g(x + h) - 2.0 * g(x) + g(x - h);
        if second > 1e-12 * g(x).abs().max(1e-300) {
            break;
        }
        onset = Some(x - h);
    }
    Ok(onset)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyMetrics {
    /// Average bits/s/Hz delivered per resource block.
    pub goodput: f64,
    /// Probability that a block is scheduled and its transmission fails.
    pub outage: f64,
}

/// How the variable-rate goodput integrand is averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RateMode {
    #[default]
    Exact,
    /// Order-b terms use `i3_jensen`. Applies with full feedback or where the
    /// expansion route is taken; elsewhere the exact integrand is used.
    Jensen,
}

/// Fixed-rate goodput and outage at threshold `beta0`.
pub fn fixed_rate_metrics(sys: &SystemConfig, imp: &ImpairmentParams, beta0: f64) -> Result<StrategyMetrics> {
    fixed_rate_metrics_with(sys, imp, beta0, EvalPath::Auto)
}

pub fn fixed_rate_metrics_with(
    sys: &SystemConfig,
    imp: &ImpairmentParams,
    beta0: f64,
    path: EvalPath,
) -> Result<StrategyMetrics> {
    let args = IntegralArgs::new(beta0, imp)?;
    let rate = (sys.snr() * beta0).ln_1p() / LN_2;
    if beta0 == 0.0 {
        return Ok(StrategyMetrics {
            goodput: 0.0,
            outage: 0.0,
        });
    }
    let law = ScheduledCqiLaw::new(sys, imp.estimate_power());
    let success = if sys.is_full_feedback() {
        i2(beta0, sys.num_users(), imp)?
    } else {
        law.expectation(
            path,
            |b| i2(beta0, b, imp),
            |x| marcum_q1_unchecked(args.varpi * x.sqrt(), args.vartheta, Q1_TOL),
        )?
    };
    Ok(StrategyMetrics {
        goodput: rate * success,
        outage: (law.scheduled_probability() - success).max(0.0),
    })
}

/// Variable-rate goodput and outage at backoff `beta1`.
pub fn variable_rate_metrics(sys: &SystemConfig, imp: &ImpairmentParams, beta1: f64) -> Result<StrategyMetrics> {
    variable_rate_metrics_with(sys, imp, beta1, RateMode::Exact, EvalPath::Auto)
}

pub fn variable_rate_metrics_with(
    sys: &SystemConfig,
    imp: &ImpairmentParams,
    beta1: f64,
    mode: RateMode,
    path: EvalPath,
) -> Result<StrategyMetrics> {
    check_backoff("variable_rate_metrics", beta1)?;
    if beta1 == 0.0 {
        return Ok(StrategyMetrics {
            goodput: 0.0,
            outage: 0.0,
        });
    }
    let args = IntegralArgs::new(beta1, imp)?;
    let snr = sys.snr();
    let law = ScheduledCqiLaw::new(sys, imp.estimate_power());
    let path = match path {
        EvalPath::Auto => law.auto_path(),
        p => p,
    };
    let q = |x: f64| {
        let r = x.sqrt();
        marcum_q1_unchecked(args.varpi * r, args.vartheta * r, Q1_TOL)
    };
    let (success, goodput) = if sys.is_full_feedback() {
        let k = sys.num_users();
        let g = match mode {
            RateMode::Exact => i3_quadrature(beta1, k, imp, snr)?,
            RateMode::Jensen => i3_jensen(beta1, k, imp, snr)?,
        };
        (i4(beta1, k, imp)?, g)
    } else {
        let success = law.expectation(path, |b| i4(beta1, b, imp), q)?;
        let pointwise = |x: f64| q(x) * (snr * beta1 * x).ln_1p() / LN_2;
        let goodput = match mode {
            RateMode::Jensen if path == EvalPath::Expansion => {
                law.expectation(path, |b| i3_jensen(beta1, b, imp, snr), pointwise)?
            }
            _ => law.expectation(path, |b| i3_quadrature(beta1, b, imp, snr), pointwise)?,
        };
        (success, goodput)
    };
    Ok(StrategyMetrics {
        goodput,
        outage: (law.scheduled_probability() - success).max(0.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beta1Optimum {
    pub beta1: f64,
    /// Jensen-approximated full-feedback goodput at the optimum.
    pub goodput: f64,
    /// Smallest best-M value matching the full-feedback sum rate to the
    /// requested fraction.
    pub matched_best_m: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beta0Optimum {
    pub beta0: f64,
    /// Full-feedback fixed-rate goodput at the optimum.
    pub goodput: f64,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section maximization of a unimodal function on [lo, hi].
pub fn golden_section_max(
    mut f: impl FnMut(f64) -> Result<f64>,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1)?;
        }
    }
    Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}

/// Backoff maximizing the Jensen-approximated full-feedback goodput, with the
/// best-M value reaching 99% of the full-feedback sum rate.
pub fn optimize_beta1(sys: &SystemConfig, imp: &ImpairmentParams) -> Result<Beta1Optimum> {
    optimize_beta1_with(sys, imp, 0.99)
}

pub fn optimize_beta1_with(sys: &SystemConfig, imp: &ImpairmentParams, gamma: f64) -> Result<Beta1Optimum> {
    let k = sys.num_users();
    let snr = sys.snr();
    let objective = |beta: f64| i3_jensen(beta.clamp(0.0, 1.0), k, imp, snr);
    let (mut beta, mut best) = golden_section_max(objective, 0.0, 1.0, 1e-7)?;
    // One Newton step on the derivative polishes the bracketed maximizer.
    let h = 1e-5;
    if beta - h > 0.0 && beta + h < 1.0 {
        let (fm, fp) = (objective(beta - h)?, objective(beta + h)?);
        let curvature = (fp - 2.0 * best + fm) / (h * h);
        if curvature < 0.0 {
            let step = -(fp - fm) / (2.0 * h) / curvature;
            let candidate = beta + step;
            if step.abs() < 1e-4 && (0.0..=1.0).contains(&candidate) {
                let value = objective(candidate)?;
                if value >= best {
                    beta = candidate;
                    best = value;
                }
            }
        }
    }
    Ok(Beta1Optimum {
        beta1: beta,
        goodput: best,
        matched_best_m: minimum_best_m(sys, gamma)?.exact,
    })
}

/// Threshold maximizing the full-feedback fixed-rate goodput.
///
/// The search starts on [0, (1 − σw²)(ln K + 6)], doubles the interval while
/// a coarse grid puts the maximizer on its upper edge, then refines by golden
/// section around the best grid point.
pub fn optimize_beta0(sys: &SystemConfig, imp: &ImpairmentParams) -> Result<Beta0Optimum> {
    let k = sys.num_users();
    let snr = sys.snr();
    let objective = |beta: f64| -> Result<f64> { Ok((snr * beta).ln_1p() / LN_2 * i2(beta, k, imp)?) };
    const GRID: usize = 120;
    let mut upper = imp.estimate_power() * ((k as f64).ln() + 6.0);
    for _ in 0..16 {
        let step = upper / GRID as f64;
        let mut best_i = 0;
        let mut best_v = f64::NEG_INFINITY;
        for i in 0..=GRID {
            let v = objective(i as f64 * step)?;
            if v > best_v {
                best_v = v;
                best_i = i;
            }
        }
        if best_i == GRID {
            upper *= 2.0;
            continue;
        }
        let lo = best_i.saturating_sub(1) as f64 * step;
        let hi = (best_i + 1) as f64 * step;
        let (beta0, goodput) = golden_section_max(objective, lo, hi, 1e-9 * upper.max(1.0))?;
        return Ok(Beta0Optimum { beta0, goodput });
    }
    Err(Error::non_convergence(
        "optimize_beta0",
        format!("maximizer still on the search boundary at {upper}"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::i1;
    use crate::channel::Cluster;
    use alloc::vec;

    fn imp() -> ImpairmentParams {
        ImpairmentParams::new(0.01, 0.98).unwrap()
    }

    #[test]
    fn i2_boundaries() {
        for b in [1, 3, 10, 50] {
            assert!((i2(0.0, b, &imp()).unwrap() - 1.0).abs() < 1e-12);
        }
        let none = ImpairmentParams::new(0.0, 0.0).unwrap();
        for b in [1, 2, 7] {
            assert!((i2(1.3, b, &none).unwrap() - (-1.3f64).exp()).abs() < 1e-12);
        }
        assert!(i2(1.0, 0, &imp()).is_err());
    }

    #[test]
    fn i2_reference_and_quadrature() {
        assert!((i2(1.0, 1, &imp()).unwrap() - 0.367_879_441_2).abs() < 1e-9);
        assert!((i2(1.0, 2, &imp()).unwrap() - 0.587_115_759_0).abs() < 1e-9);
        assert!((i2(1.0, 4, &imp()).unwrap() - 0.809_578_180_8).abs() < 1e-9);
        for b in [1, 2, 8, 20] {
            let c = i2(1.0, b, &imp()).unwrap();
            let q = i2_quadrature(1.0, b, &imp()).unwrap();
            assert!((c - q).abs() < 1e-8, "b={b}: {c} vs {q}");
        }
    }

    #[test]
    fn i4_reference_and_limits() {
        assert!((i4(0.5, 1, &imp()).unwrap() - 0.925_317_537_2).abs() < 1e-9);
        assert!((i4(0.5, 2, &imp()).unwrap() - 0.959_531_158_0).abs() < 1e-9);
        assert!((i4(0.5, 4, &imp()).unwrap() - 0.982_917_300_9).abs() < 1e-9);
        for b in [1, 5, 30] {
            assert!((i4(0.0, b, &imp()).unwrap() - 1.0).abs() < 1e-12);
        }
        let none = ImpairmentParams::new(0.0, 0.0).unwrap();
        for a in [0.1, 0.5, 0.9] {
            assert!((i4(a, 1, &none).unwrap() - 1.0 / (1.0 + a)).abs() < 1e-12);
        }
    }

    #[test]
    fn upper_bound_reference() {
        let want = [(1, 0.006_945_994), (2, 0.010_535_374), (4, 0.014_755_380)];
        for (b, v) in want {
            let ub = i3_upper_bound(0.5, b, &imp(), 0.01).unwrap();
            assert!((ub - v).abs() < 1e-8, "b={b}: {ub}");
            let lin = i3_linearized_quadrature(0.5, b, &imp(), 0.01).unwrap();
            assert!((ub - lin).abs() < 1e-9);
            assert!(ub >= i3_quadrature(0.5, b, &imp(), 0.01).unwrap());
        }
    }

    #[test]
    fn hypergeometric_argument_stays_below_one() {
        for &(s2, al) in &[(0.0, 0.999), (0.01, 0.98), (0.2, 0.5), (0.5, 1.0)] {
            let imp = ImpairmentParams::new(s2, al).unwrap();
            for &a in &[0.0, 0.3, 1.0, 5.0] {
                let args = IntegralArgs::new(a, &imp).unwrap();
                for l in 0..50 {
                    let u = args.hypergeometric_arg(l);
                    assert!((0.0..1.0).contains(&u));
                    let t = args.term(l);
                    assert!(t.phi > 2.0 * args.varpi * args.vartheta);
                }
            }
        }
    }

    #[test]
    fn jensen_values() {
        let perfect = ImpairmentParams::new(0.0, 0.5).unwrap();
        assert_eq!(jensen_mean(1, &perfect).unwrap(), 1.0);
        assert_eq!(jensen_mean(2, &perfect).unwrap(), 1.5);
        let m = jensen_mean(10, &imp()).unwrap();
        assert!((m - 2.899_678_6).abs() < 1e-7);
        let alt = alternating_binomial_sum(10, |l| 1.0 / ((l + 1) * (l + 1)) as f64).total() * 10.0 * 0.99;
        assert!((m - alt).abs() < 1e-12);
        assert_eq!(i3_jensen(0.0, 10, &imp(), 10.0).unwrap(), 0.0);
        assert_eq!(i3_quadrature(0.0, 10, &imp(), 10.0).unwrap(), 0.0);
    }

    #[test]
    fn i3_increases_with_order() {
        let mut prev = 0.0;
        for b in [1, 2, 4, 8, 16] {
            let v = i3_quadrature(0.5, b, &imp(), 10.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn fixed_rate_identity_and_boundary() {
        let sys = SystemConfig::new(16, vec![Cluster::new(1, 3), Cluster::new(4, 3)], 1, 10.0).unwrap();
        let zero = fixed_rate_metrics(&sys, &imp(), 0.0).unwrap();
        assert_eq!((zero.goodput, zero.outage), (0.0, 0.0));
        let beta0 = 1.0;
        let m = fixed_rate_metrics(&sys, &imp(), beta0).unwrap();
        let p = sys.report_probability();
        let sched = 1.0 - (1.0 - p).powi(6);
        let rhs = (1.0 + 10.0 * beta0).log2() * (sched - m.outage);
        assert!((m.goodput - rhs).abs() < 1e-10);
    }

    #[test]
    fn routes_agree_for_small_systems() {
        let sys = SystemConfig::new(8, vec![Cluster::new(1, 2), Cluster::new(2, 2)], 1, 10.0).unwrap();
        let e = fixed_rate_metrics_with(&sys, &imp(), 0.8, EvalPath::Expansion).unwrap();
        let q = fixed_rate_metrics_with(&sys, &imp(), 0.8, EvalPath::Quadrature).unwrap();
        assert!((e.goodput - q.goodput).abs() < 1e-9 && (e.outage - q.outage).abs() < 1e-9);
        let e = variable_rate_metrics_with(&sys, &imp(), 0.7, RateMode::Exact, EvalPath::Expansion).unwrap();
        let q = variable_rate_metrics_with(&sys, &imp(), 0.7, RateMode::Exact, EvalPath::Quadrature).unwrap();
        assert!((e.goodput - q.goodput).abs() < 1e-9 && (e.outage - q.outage).abs() < 1e-9);
    }

    #[test]
    fn full_feedback_collapse() {
        let sys = SystemConfig::new(64, vec![Cluster::new(1, 5), Cluster::new(4, 5)], 16, 10.0).unwrap();
        let m = fixed_rate_metrics(&sys, &imp(), 1.0).unwrap();
        let s = i2(1.0, 10, &imp()).unwrap();
        assert!((m.outage - (1.0 - s)).abs() < 1e-15);
        assert!((m.goodput - 11f64.log2() * s).abs() < 1e-15);
        let v = variable_rate_metrics(&sys, &imp(), 0.0).unwrap();
        assert_eq!((v.goodput, v.outage), (0.0, 0.0));
        // Near-perfect CQI with full backoff sends nearly the perfect-feedback rate.
        let clean = ImpairmentParams::new(1e-6, 0.999_999).unwrap();
        let v = variable_rate_metrics(&sys, &clean, 0.95).unwrap();
        assert!(v.goodput < i1(10.0, 10).unwrap());
        assert!(v.goodput > 0.9 * i1(10.0, 10).unwrap());
    }

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (x, v) = golden_section_max(|x| Ok(-(x - 0.3) * (x - 0.3) + 2.0), 0.0, 1.0, 1e-9).unwrap();
        assert!((x - 0.3).abs() < 1e-7 && (v - 2.0).abs() < 1e-15);
    }

    #[test]
    fn optimizers_land_inside_their_domains() {
        let sys = SystemConfig::new(64, vec![Cluster::new(1, 5), Cluster::new(4, 5)], 16, 10.0).unwrap();
        let o1 = optimize_beta1(&sys, &imp()).unwrap();
        assert!(o1.beta1 > 0.0 && o1.beta1 < 1.0);
        assert!((1..=16).contains(&o1.matched_best_m));
        let o0 = optimize_beta0(&sys, &imp()).unwrap();
        assert!(o0.beta0 > 0.0 && o0.goodput > 0.0);
        for d in [-0.01, 0.01] {
            let k = 10;
            let v = (1.0 + 10.0 * (o0.beta0 + d)).log2() * i2(o0.beta0 + d, k, &imp()).unwrap();
            assert!(v <= o0.goodput + 1e-12);
        }
    }

    #[test]
    fn concavity_onset_is_inside_range() {
        let x0 = concavity_onset(0.5, &imp(), 10.0, 10.0, 400).unwrap();
        let x0 = x0.expect("integrand is concave for large powers");
        assert!((0.0..10.0).contains(&x0));
    }
}
