//! Closed-form statistics of the scheduled CQI under best-M feedback with
//! perfect channel knowledge: reported-value distribution, feedback-set
//! probabilities, expansion coefficients and the average sum rate.
//!
//! Two evaluation routes are offered for expectations over the scheduled
//! CQI. The expansion route sums over feedback sets and selection
//! coefficients; its alternating coefficients grow quickly with the system
//! size. The product route integrates against the unconditional density,
//! which has the closed product form Π_g (1 − p(1 − F_g(x)))^{K_g}.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::LN_2;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::channel::SystemConfig;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_to_infinity, QuadratureOptions};
use crate::specfun;
use crate::summation::{alternating_binomial_sum, ln_binomial, trusted_total, CompensatedSum};

/// Coefficients ξ(m), m = 0..quota−1, of the reported-CQI CDF of a user
/// with `subbands` subbands who reports its `quota` best:
/// F(x) = Σ_m ξ(m)·F_Z(x)^(subbands − m).
pub fn xi_for(subbands: usize, quota: usize) -> Vec<f64> {
    if let Some(num) = xi_numerators(subbands, quota) {
        return num.iter().map(|&v| v as f64 / quota as f64).collect();
    }
    // Fall back to floating point when the exact numerators overflow.
    (0..quota)
        .map(|m| {
            let mut acc = CompensatedSum::new();
            for i in m..quota {
                let ln = ln_binomial(subbands as u64, i as u64) + ln_binomial(i as u64, m as u64);
                let t = (quota - i) as f64 * ln.exp();
                acc.add(if (i - m) % 2 == 0 { t } else { -t });
            }
            acc.total() / quota as f64
        })
        .collect()
}

/// Integer numerators quota·ξ(m); `None` on i128 overflow.
pub fn xi_numerators(subbands: usize, quota: usize) -> Option<Vec<i128>> {
    let n = subbands as i128;
    let mut choose_n = Vec::with_capacity(quota);
    let mut c: i128 = 1;
    for i in 0..quota as i128 {
        choose_n.push(c);
        c = c.checked_mul(n - i)? / (i + 1);
    }
    let mut out = Vec::with_capacity(quota);
    for m in 0..quota {
        let mut acc: i128 = 0;
        let mut c_im: i128 = 1; // C(i, m) for i = m
        #[allow(clippy::needless_range_loop)]
        for i in m..quota {
            if i > m {
                c_im = c_im.checked_mul(i as i128)? / (i - m) as i128;
            }
            let t = ((quota - i) as i128).checked_mul(choose_n[i])?.checked_mul(c_im)?;
            acc = if (i - m) % 2 == 0 {
                acc.checked_add(t)?
            } else {
                acc.checked_sub(t)?
            };
        }
        out.push(acc);
    }
    Some(out)
}

pub fn xi_coefficients(sys: &SystemConfig, g: usize) -> Result<Vec<f64>> {
    check_cluster(sys, g)?;
    Ok(xi_for(sys.subbands(g), sys.quota(g)))
}

fn check_cluster(sys: &SystemConfig, g: usize) -> Result<()> {
    if g >= sys.num_clusters() {
        return Err(Error::precondition(format!(
            "cluster index {g} out of range for {} clusters",
            sys.num_clusters()
        )));
    }
    Ok(())
}

/// CDF of a value reported by a user of cluster `g` (perfect feedback).
pub fn reported_cqi_cdf(x: f64, sys: &SystemConfig, g: usize) -> Result<f64> {
    check_cluster(sys, g)?;
    if !(x >= 0.0) {
        return Err(Error::domain(
            "reported_cqi_cdf",
            format!("x = {x} must be nonnegative"),
        ));
    }
    let law = ClusterLaw::new(sys.subbands(g), sys.quota(g), 0);
    Ok(law.cdf_and_density(x, 1.0).0)
}

/// Coefficients of (Σ_ℓ a_ℓ y^ℓ)^power by repeated squaring.
///
/// The classical term-by-term recurrence for powers of a series divides by
/// a_0 at every step and loses several digits when the coefficients
/// alternate; plain convolution keeps the error near ε·Σ|result|.
pub fn power_series_power(a: &[f64], power: usize) -> Vec<f64> {
    if power == 0 || a.is_empty() {
        return vec![1.0];
    }
    let mut result: Option<Vec<f64>> = None;
    let mut base = a.to_vec();
    let mut e = power;
    loop {
        if e & 1 == 1 {
            result = Some(match result {
                Some(r) => convolve(&r, &base),
                None => base.clone(),
            });
        }
        e >>= 1;
        if e == 0 {
            break;
        }
        base = convolve(&base, &base);
    }
    result.expect("power is positive")
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Expansion coefficients for one feedback set τ (number of reporting
/// users per cluster): F_{X|τ}(x) = Σ_m theta[m]·F_Z(x)^(top_exponent − m).
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    pub tau: Vec<usize>,
    pub xi: Vec<Vec<f64>>,
    pub lambda: Vec<Vec<f64>>,
    pub theta: Vec<f64>,
    pub top_exponent: usize,
}

impl CoefficientTable {
    /// Highest index of `theta`.
    pub fn phi(&self) -> usize {
        self.theta.len() - 1
    }

    pub fn exponent(&self, m: usize) -> usize {
        self.top_exponent - m
    }

    /// Conditional CDF of the scheduled CQI at a point where F_Z equals `fz`.
    pub fn cdf_at(&self, fz: f64) -> f64 {
        self.theta
            .iter()
            .enumerate()
            .map(|(m, t)| t * fz.powi(self.exponent(m) as i32))
            .sum()
    }
}

pub fn selection_coefficients(sys: &SystemConfig, tau: &[usize]) -> Result<CoefficientTable> {
    if tau.len() != sys.num_clusters() {
        return Err(Error::precondition("one reporting-user count per cluster is required"));
    }
    for (g, (&t, c)) in tau.iter().zip(sys.clusters()).enumerate() {
        if t > c.users {
            return Err(Error::precondition(format!(
                "cluster {g}: {t} reporting users exceeds {} users",
                c.users
            )));
        }
    }
    if tau.iter().all(|&t| t == 0) {
        return Err(Error::precondition("the feedback set must contain at least one user"));
    }
    let xi: Vec<Vec<f64>> = (0..sys.num_clusters())
        .map(|g| xi_for(sys.subbands(g), sys.quota(g)))
        .collect();
    Ok(table_from_xi(sys, tau, xi))
}

fn table_from_xi(sys: &SystemConfig, tau: &[usize], xi: Vec<Vec<f64>>) -> CoefficientTable {
    let lambda: Vec<Vec<f64>> = xi.iter().zip(tau).map(|(x, &t)| power_series_power(x, t)).collect();
    let theta = lambda
        .iter()
        .skip(1)
        .fold(lambda[0].clone(), |acc, l| convolve(&acc, l));
    let top_exponent = tau.iter().enumerate().map(|(g, &t)| sys.subbands(g) * t).sum();
    CoefficientTable {
        tau: tau.to_vec(),
        xi,
        lambda,
        theta,
        top_exponent,
    }
}

/// Distribution of the number of reporting users per cluster on a given
/// resource block. Every user reports a given subband independently with
/// the same probability p.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackSetDistribution {
    users: Vec<usize>,
    p: f64,
}

impl FeedbackSetDistribution {
    pub fn report_probability(&self) -> f64 {
        self.p
    }

    /// Number of τ vectors enumerated by `iter`.
    pub fn len(&self) -> usize {
        self.users.iter().fold(1usize, |acc, &k| acc.saturating_mul(k + 1))
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn probability(&self, tau: &[usize]) -> f64 {
        let k: usize = self.users.iter().sum();
        let s: usize = tau.iter().sum();
        let choose: f64 = tau
            .iter()
            .zip(&self.users)
            .map(|(&t, &kg)| {
                if t > kg {
                    0.0
                } else {
                    ln_binomial(kg as u64, t as u64).exp().round()
                }
            })
            .product();
        choose * self.p.powi(s as i32) * (1.0 - self.p).powi((k - s.min(k)) as i32)
    }

    /// Probability that at least one user reports the block.
    pub fn scheduled_probability(&self) -> f64 {
        let k: usize = self.users.iter().sum();
        1.0 - (1.0 - self.p).powi(k as i32)
    }

    /// Lazily enumerates every τ with its probability, the first cluster
    /// varying fastest.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        let mut next = Some(vec![0usize; self.users.len()]);
        core::iter::from_fn(move || {
            let tau = next.take()?;
            let mut succ = tau.clone();
            let mut advanced = false;
            for (t, &k) in succ.iter_mut().zip(&self.users) {
                if *t < k {
                    *t += 1;
                    advanced = true;
                    break;
                }
                *t = 0;
            }
            if advanced {
                next = Some(succ);
            }
            let p = self.probability(&tau);
            Some((tau, p))
        })
    }
}

pub fn feedback_set_pmf(sys: &SystemConfig) -> FeedbackSetDistribution {
    FeedbackSetDistribution {
        users: sys.clusters().iter().map(|c| c.users).collect(),
        p: sys.report_probability(),
    }
}

/// E[log2(1 + a·X)] for X distributed as the maximum of `b` unit-mean
/// exponentials.
pub fn i1(a: f64, b: usize) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::domain("i1", format!("a = {a} must be positive")));
    }
    if b == 0 {
        return Err(Error::domain("i1", "b must be at least 1"));
    }
    let acc = alternating_binomial_sum(b, |l| {
        let x = (l + 1) as f64 / a;
        specfun::scaled_exp_integral_e1(x).unwrap_or(0.0) / (l + 1) as f64
    });
    if let Some(total) = trusted_total(&acc, 8.0 * f64::EPSILON) {
        return Ok(b as f64 / LN_2 * total);
    }
    i1_quadrature(a, b)
}

/// Integration-by-parts form (1/ln2)∫ a/(1+ax)·P(X > x) dx.
pub fn i1_quadrature(a: f64, b: usize) -> Result<f64> {
    let survival = |x: f64| max_exponential_survival(x, b, 1.0);
    let f = |x: f64| a / (1.0 + a * x) * survival(x);
    let split = (b as f64).ln() + 2.0;
    let head = integrate(f, 0.0, split, quad_opts())?;
    let tail = integrate_to_infinity(f, split, 1.0, quad_opts())?;
    Ok((head.value + tail.value) / LN_2)
}

/// P(max of `b` i.i.d. exponentials with mean `scale` exceeds x).
pub(crate) fn max_exponential_survival(x: f64, b: usize, scale: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    // 1 − (1 − e^(−x/s))^b computed without cancellation.
    let ln_cdf = (-(-x / scale).exp_m1()).ln();
    -(b as f64 * ln_cdf).exp_m1()
}

/// Density of the maximum of `b` i.i.d. exponentials with mean `scale`.
pub(crate) fn max_exponential_density(x: f64, b: usize, scale: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    let q = (-x / scale).exp();
    if b == 1 {
        return q / scale;
    }
    let cdf = -(-x / scale).exp_m1();
    b as f64 * cdf.powi(b as i32 - 1) * q / scale
}

pub(crate) fn quad_opts() -> QuadratureOptions {
    QuadratureOptions {
        abs_tol: 1e-12,
        rel_tol: 1e-12,
        max_intervals: 4000,
    }
}

/// How an expectation over the scheduled CQI is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalPath {
    /// Expansion when it is well conditioned and small, otherwise product-form quadrature.
    #[default]
    Auto,
    Expansion,
    Quadrature,
}

/// Largest feedback-set enumeration the automatic path will expand.
const MAX_EXPANSION_SETS: usize = 100_000;
/// Largest per-cluster user count the automatic path will expand.
const MAX_EXPANSION_USERS: usize = 25;
/// Largest coefficient amplification Σ_τ P(τ)·Σ_m |Θ(m)| accepted by the
/// automatic path.
const MAX_EXPANSION_GAIN: f64 = 1e3;

#[derive(Debug, Clone)]
struct ClusterLaw {
    subbands: usize,
    quota: usize,
    users: usize,
    ln_binom: Vec<f64>,
}

impl ClusterLaw {
    fn new(subbands: usize, quota: usize, users: usize) -> Self {
        let ln_binom = (0..=quota.min(subbands))
            .map(|i| ln_binomial(subbands as u64, i as u64))
            .collect();
        Self {
            subbands,
            quota,
            users,
            ln_binom,
        }
    }

    /// CDF and density of one reported value, per-subband mean `scale`.
    ///
    /// With q = P(Z > x), the j-th best of n values is ≤ x exactly when
    /// fewer than j values exceed x, so the CDF is the average over the
    /// reported ranks of binomial CDFs in q.
    fn cdf_and_density(&self, x: f64, scale: f64) -> (f64, f64) {
        let n = self.subbands;
        let mq = self.quota;
        if x <= 0.0 {
            let density = if mq == n { 1.0 / scale } else { 0.0 };
            return (0.0, density);
        }
        let ln_q = -x / scale;
        let ln_p = (-(-x / scale).exp_m1()).ln();
        let pmf = |i: usize| (self.ln_binom[i] + i as f64 * ln_q + (n - i) as f64 * ln_p).exp();
        let mut cdf = 0.0;
        let mut dens = 0.0;
        for i in 0..mq {
            cdf += (mq - i) as f64 * pmf(i);
        }
        for i in 1..=mq.min(n) {
            dens += i as f64 * pmf(i);
        }
        ((cdf / mq as f64).min(1.0), dens / (mq as f64 * scale))
    }
}

/// Law of the CQI of the user scheduled on one resource block, including
/// the atom at zero for blocks nobody reports.
#[derive(Debug, Clone)]
pub struct ScheduledCqiLaw<'a> {
    sys: &'a SystemConfig,
    scale: f64,
    p: f64,
    clusters: Vec<ClusterLaw>,
}

impl<'a> ScheduledCqiLaw<'a> {
    /// `scale` is the mean of each per-subband CQI (1 with perfect estimates).
    pub fn new(sys: &'a SystemConfig, scale: f64) -> Self {
        let clusters = (0..sys.num_clusters())
            .map(|g| ClusterLaw::new(sys.subbands(g), sys.quota(g), sys.clusters()[g].users))
            .collect();
        Self {
            sys,
            scale,
            p: sys.report_probability(),
            clusters,
        }
    }

    /// Probability that the block is scheduled at all.
    pub fn scheduled_probability(&self) -> f64 {
        1.0 - (1.0 - self.p).powi(self.sys.num_users() as i32)
    }

    /// Unconditional CDF; its value at 0 is the scheduling-outage probability.
    pub fn cdf(&self, x: f64) -> f64 {
        self.clusters
            .iter()
            .map(|c| {
                let f = c.cdf_and_density(x, self.scale).0;
                (1.0 - self.p * (1.0 - f)).powi(c.users as i32)
            })
            .product()
    }

    /// Density of the continuous part (x > 0).
    pub fn density(&self, x: f64) -> f64 {
        let parts: Vec<(f64, f64)> = self
            .clusters
            .iter()
            .map(|c| {
                let (f, d) = c.cdf_and_density(x, self.scale);
                (1.0 - self.p * (1.0 - f), d)
            })
            .collect();
        let mut total = 0.0;
        for (g, c) in self.clusters.iter().enumerate() {
            if c.users == 0 || parts[g].1 == 0.0 {
                continue;
            }
            let mut term = c.users as f64 * self.p * parts[g].1 * parts[g].0.powi(c.users as i32 - 1);
            for (h, other) in self.clusters.iter().enumerate() {
                if h != g {
                    term *= parts[h].0.powi(other.users as i32);
                }
            }
            total += term;
        }
        total
    }

    /// Σ_τ P(τ)·Σ_m |Θ_τ(m)|, the factor by which rounding in the expansion
    /// route is amplified.
    pub fn expansion_gain(&self) -> f64 {
        self.clusters
            .iter()
            .map(|c| {
                let norm: f64 = xi_for(c.subbands, c.quota).iter().map(|v| v.abs()).sum();
                (1.0 - self.p + self.p * norm).powi(c.users as i32)
            })
            .product()
    }

    /// Route chosen by `EvalPath::Auto`.
    pub fn auto_path(&self) -> EvalPath {
        let sets = feedback_set_pmf(self.sys).len();
        let small = self.clusters.iter().all(|c| c.users <= MAX_EXPANSION_USERS);
        if self.p >= 1.0 || (sets <= MAX_EXPANSION_SETS && small && self.expansion_gain() <= MAX_EXPANSION_GAIN) {
            EvalPath::Expansion
        } else {
            EvalPath::Quadrature
        }
    }

    /// E[h(X)·1{block scheduled}].
    ///
    /// `per_order(b)` must return E[h(Y_b)] with Y_b the maximum of b
    /// i.i.d. per-subband CQIs; `pointwise` is h itself.
    pub fn expectation(
        &self,
        path: EvalPath,
        mut per_order: impl FnMut(usize) -> Result<f64>,
        pointwise: impl Fn(f64) -> f64,
    ) -> Result<f64> {
        let path = match path {
            EvalPath::Auto => self.auto_path(),
            other => other,
        };
        if self.p >= 1.0 && path == EvalPath::Expansion {
            // Every user reports every subband.
            return per_order(self.sys.num_users());
        }
        match path {
            EvalPath::Expansion => self.expand(&mut per_order),
            _ => self.integrate(&pointwise),
        }
    }

    fn expand(&self, per_order: &mut impl FnMut(usize) -> Result<f64>) -> Result<f64> {
        let dist = feedback_set_pmf(self.sys);
        let xi: Vec<Vec<f64>> = self.clusters.iter().map(|c| xi_for(c.subbands, c.quota)).collect();
        let max_order: usize = self.clusters.iter().map(|c| c.subbands * c.users).sum();
        let mut cache: Vec<Option<f64>> = vec![None; max_order + 1];
        let mut acc = CompensatedSum::new();
        for (tau, prob) in dist.iter() {
            if prob == 0.0 || tau.iter().all(|&t| t == 0) {
                continue;
            }
            let table = table_from_xi(self.sys, &tau, xi.clone());
            for (m, &theta) in table.theta.iter().enumerate() {
                if theta == 0.0 {
                    continue;
                }
                let b = table.exponent(m);
                let value = match cache[b] {
                    Some(v) => v,
                    None => {
                        let v = per_order(b)?;
                        cache[b] = Some(v);
                        v
                    }
                };
                acc.add(prob * theta * value);
            }
        }
        Ok(acc.total())
    }

    fn integrate(&self, h: &impl Fn(f64) -> f64) -> Result<f64> {
        let f = |x: f64| {
            let d = self.density(x);
            if d == 0.0 {
                0.0
            } else {
                h(x) * d
            }
        };
        let reach: usize = self.clusters.iter().map(|c| c.subbands * c.users).sum();
        let split = self.scale * ((reach.max(1) as f64).ln() + 3.0);
        let head = integrate(f, 0.0, split, quad_opts())?;
        let tail = integrate_to_infinity(f, split, self.scale, quad_opts())?;
        Ok(head.value + tail.value)
    }
}

/// Average sum rate per resource block, bits/s/Hz.
pub fn average_sum_rate(sys: &SystemConfig) -> Result<f64> {
    average_sum_rate_with(sys, EvalPath::Auto)
}

pub fn average_sum_rate_with(sys: &SystemConfig, path: EvalPath) -> Result<f64> {
    let rho = sys.snr();
    if sys.is_full_feedback() {
        return i1(rho, sys.num_users());
    }
    let law = ScheduledCqiLaw::new(sys, 1.0);
    law.expectation(path, |b| i1(rho, b), |x| (rho * x).ln_1p() / LN_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MinimumBestM {
    pub exact: usize,
    pub approx: usize,
}

/// Smallest best-M value reaching a fraction `gamma` of the full-feedback
/// sum rate, by exhaustive scan and by the closed-form saturation estimate.
pub fn minimum_best_m(sys: &SystemConfig, gamma: f64) -> Result<MinimumBestM> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::domain(
            "minimum_best_m",
            format!("gamma = {gamma} must lie in (0, 1)"),
        ));
    }
    let full = sys.full_feedback_m();
    let reference = i1(sys.snr(), sys.num_users())?;
    let mut exact = full;
    for m in 1..full {
        let rate = average_sum_rate(&sys.with_best_m(m)?)?;
        if rate >= gamma * reference {
            exact = m;
            break;
        }
    }
    Ok(MinimumBestM {
        exact,
        approx: approx_minimum_best_m(sys, gamma),
    })
}

/// ceil(M_F·(1 − (1 − γ)^(1/K))).
pub fn approx_minimum_best_m(sys: &SystemConfig, gamma: f64) -> usize {
    let full = sys.full_feedback_m() as f64;
    let k = sys.num_users() as f64;
    let raw = full * -((1.0 - gamma).ln() / k).exp_m1();
    (raw.ceil() as usize).clamp(1, sys.full_feedback_m())
}
