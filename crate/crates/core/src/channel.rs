//! System description and channel generators.
//!
//! Two channel models are provided: a frequency-selective model built from a
//! tapped delay line (subcarrier granularity) and a block model in which each
//! user sees independent Rayleigh gains on subbands of a cluster-specific size.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::specfun;

/// One group of users sharing a subband size (in resource blocks).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cluster {
    pub subband_size: usize,
    pub users: usize,
}

impl Cluster {
    pub fn new(subband_size: usize, users: usize) -> Self {
        Self { subband_size, users }
    }
}

/// Static description of a downlink experiment.
///
/// Users are numbered cluster by cluster: the first `clusters[0].users` ids
/// belong to the finest-grained cluster, and so on.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    num_rbs: usize,
    clusters: Vec<Cluster>,
    best_m: usize,
    snr: f64,
}

impl SystemConfig {
    pub fn new(num_rbs: usize, clusters: Vec<Cluster>, best_m: usize, snr: f64) -> Result<Self> {
        if num_rbs == 0 {
            return Err(Error::config("number of resource blocks must be positive"));
        }
        if clusters.is_empty() {
            return Err(Error::config("at least one cluster is required"));
        }
        for (g, c) in clusters.iter().enumerate() {
            if !c.subband_size.is_power_of_two() || c.subband_size > num_rbs {
                return Err(Error::config(format!(
                    "cluster {g}: subband size {} must be a power of two not exceeding {num_rbs}",
                    c.subband_size
                )));
            }
        }
        if clusters.windows(2).any(|w| w[0].subband_size >= w[1].subband_size) {
            return Err(Error::config(
                "subband sizes must be strictly increasing across clusters",
            ));
        }
        let largest = clusters[clusters.len() - 1].subband_size;
        if !num_rbs.is_multiple_of(largest) {
            return Err(Error::config(format!(
                "largest subband size {largest} must divide the number of resource blocks {num_rbs}"
            )));
        }
        let full = num_rbs / largest;
        if best_m == 0 || best_m > full {
            return Err(Error::config(format!("best-M value {best_m} must lie in 1..={full}")));
        }
        if clusters.iter().map(|c| c.users).sum::<usize>() == 0 {
            return Err(Error::config("the system needs at least one user"));
        }
        if !(snr > 0.0 && snr.is_finite()) {
            return Err(Error::config(format!("snr {snr} must be positive and finite")));
        }
        Ok(Self {
            num_rbs,
            clusters,
            best_m,
            snr,
        })
    }

    /// A single cluster of `users` users with subband size `subband_size`.
    pub fn homogeneous(num_rbs: usize, subband_size: usize, users: usize, best_m: usize, snr: f64) -> Result<Self> {
        Self::new(num_rbs, vec![Cluster::new(subband_size, users)], best_m, snr)
    }

    pub fn num_rbs(&self) -> usize {
        self.num_rbs
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn best_m(&self) -> usize {
        self.best_m
    }

    pub fn snr(&self) -> f64 {
        self.snr
    }

    pub fn num_users(&self) -> usize {
        self.clusters.iter().map(|c| c.users).sum()
    }

    pub fn largest_subband(&self) -> usize {
        self.clusters[self.clusters.len() - 1].subband_size
    }

    /// Best-M value at which every subband is reported.
    pub fn full_feedback_m(&self) -> usize {
        self.num_rbs / self.largest_subband()
    }

    pub fn is_full_feedback(&self) -> bool {
        self.best_m == self.full_feedback_m()
    }

    /// Number of subbands seen by a user of cluster `g`.
    pub fn subbands(&self, g: usize) -> usize {
        self.num_rbs / self.clusters[g].subband_size
    }

    /// Number of CQI values reported by each user of cluster `g`.
    pub fn quota(&self, g: usize) -> usize {
        self.largest_subband() / self.clusters[g].subband_size * self.best_m
    }

    /// Probability that a given subband is among a user's reports; the same
    /// in every cluster.
    pub fn report_probability(&self) -> f64 {
        (self.largest_subband() * self.best_m) as f64 / self.num_rbs as f64
    }

    /// Cluster index of user `k`.
    pub fn cluster_of(&self, user: usize) -> usize {
        let mut start = 0;
        for (g, c) in self.clusters.iter().enumerate() {
            if user < start + c.users {
                return g;
            }
            start += c.users;
        }
        self.clusters.len() - 1
    }

    /// Range of global user ids belonging to cluster `g`.
    pub fn users_of(&self, g: usize) -> core::ops::Range<usize> {
        let start: usize = self.clusters[..g].iter().map(|c| c.users).sum();
        start..start + self.clusters[g].users
    }

    pub fn with_best_m(&self, best_m: usize) -> Result<Self> {
        Self::new(self.num_rbs, self.clusters.clone(), best_m, self.snr)
    }

    pub fn with_users(&self, users: &[usize]) -> Result<Self> {
        if users.len() != self.clusters.len() {
            return Err(Error::config("one user count per cluster is required"));
        }
        let clusters = self
            .clusters
            .iter()
            .zip(users)
            .map(|(c, &k)| Cluster::new(c.subband_size, k))
            .collect();
        Self::new(self.num_rbs, clusters, self.best_m, self.snr)
    }
}

/// Channel estimation error and feedback-delay correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpairmentParams {
    est_error_var: f64,
    delay_corr: f64,
}

impl ImpairmentParams {
    pub fn new(est_error_var: f64, delay_corr: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&est_error_var) {
            return Err(Error::config(format!(
                "estimation error variance {est_error_var} must lie in [0, 1)"
            )));
        }
        if !(0.0..=1.0).contains(&delay_corr) {
            return Err(Error::config(format!(
                "delay correlation {delay_corr} must lie in [0, 1]"
            )));
        }
        let residual = delay_corr * delay_corr * est_error_var + 1.0 - delay_corr * delay_corr;
        if !(residual > 0.0) {
            return Err(Error::config(
                "zero estimation error with unit delay correlation leaves no residual uncertainty",
            ));
        }
        Ok(Self {
            est_error_var,
            delay_corr,
        })
    }

    pub fn est_error_var(&self) -> f64 {
        self.est_error_var
    }

    pub fn delay_corr(&self) -> f64 {
        self.delay_corr
    }

    /// Variance of the actual gain around its conditional mean, per complex sample.
    pub fn residual_var(&self) -> f64 {
        let a2 = self.delay_corr * self.delay_corr;
        a2 * self.est_error_var + 1.0 - a2
    }

    /// sqrt(2 / residual variance).
    pub fn alpha_w(&self) -> f64 {
        (2.0 / self.residual_var()).sqrt()
    }

    /// Mean of the estimated channel power |ĥ|².
    pub fn estimate_power(&self) -> f64 {
        1.0 - self.est_error_var
    }
}

/// Tapped-delay-line channel over `num_subcarriers` subcarriers.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatedChannelConfig {
    num_subcarriers: usize,
    subcarriers_per_rb: usize,
    pdp: Vec<f64>,
}

impl CorrelatedChannelConfig {
    pub fn new(num_subcarriers: usize, subcarriers_per_rb: usize, pdp: Vec<f64>) -> Result<Self> {
        if !num_subcarriers.is_power_of_two() {
            return Err(Error::config(format!(
                "subcarrier count {num_subcarriers} must be a power of two"
            )));
        }
        if subcarriers_per_rb == 0 || !num_subcarriers.is_multiple_of(subcarriers_per_rb) {
            return Err(Error::config(format!(
                "{subcarriers_per_rb} subcarriers per block does not divide {num_subcarriers}"
            )));
        }
        if pdp.is_empty() || pdp.len() > num_subcarriers {
            return Err(Error::config("tap count must lie in 1..=num_subcarriers"));
        }
        if pdp.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::config("tap powers must be nonnegative"));
        }
        let total: f64 = pdp.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!("tap powers sum to {total}, expected 1")));
        }
        Ok(Self {
            num_subcarriers,
            subcarriers_per_rb,
            pdp,
        })
    }

    /// Exponential delay profile with `num_taps` taps and decay constant `delta`.
    pub fn exponential(num_subcarriers: usize, subcarriers_per_rb: usize, num_taps: usize, delta: f64) -> Result<Self> {
        Self::new(num_subcarriers, subcarriers_per_rb, pdp_exponential(num_taps, delta)?)
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn subcarriers_per_rb(&self) -> usize {
        self.subcarriers_per_rb
    }

    pub fn num_rbs(&self) -> usize {
        self.num_subcarriers / self.subcarriers_per_rb
    }

    pub fn num_taps(&self) -> usize {
        self.pdp.len()
    }

    pub fn pdp(&self) -> &[f64] {
        &self.pdp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    Subcarrier,
    Subband,
}

/// Per-user complex gains for one fading draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    granularity: Granularity,
    gains: Vec<Vec<Complex64>>,
    /// Resource blocks covered by one granule, per user (subband model only).
    span: Vec<usize>,
}

impl ChannelRealization {
    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn num_users(&self) -> usize {
        self.gains.len()
    }

    pub fn gains(&self, user: usize) -> &[Complex64] {
        &self.gains[user]
    }

    /// |gain|² of `user` on `granule`.
    pub fn power(&self, user: usize, granule: usize) -> f64 {
        self.gains[user][granule].norm_sqr()
    }

    /// Gain seen on resource block `rb` in the subband model, where every
    /// block of a subband carries the subband's gain.
    pub fn block_gain(&self, user: usize, rb: usize) -> Option<Complex64> {
        match self.granularity {
            Granularity::Subband => self.gains[user].get(rb / self.span[user]).copied(),
            Granularity::Subcarrier => None,
        }
    }
}

/// Role of a random stream; keeps draws for different purposes independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Fading = 1,
    EstimationError = 2,
    Innovation = 3,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` under master seed `master`.
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    splitmix(splitmix(master) ^ trial.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Independent generator for (`seed`, `user`, `stream`).
pub fn substream(seed: u64, user: u64, stream: Stream) -> ChaCha8Rng {
    let mut state = splitmix(seed ^ splitmix(user.wrapping_add(0x5851_F42D_4C95_7F2D)));
    state = splitmix(state ^ (stream as u64).wrapping_mul(0xA24B_AED4_963E_E407));
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Standard circularly-symmetric complex Gaussian, E|z|² = 1.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

/// Normalized exponential power delay profile.
pub fn pdp_exponential(num_taps: usize, delta: f64) -> Result<Vec<f64>> {
    if num_taps == 0 {
        return Err(Error::domain("pdp_exponential", "at least one tap is required"));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::domain(
            "pdp_exponential",
            format!("decay constant {delta} must be positive"),
        ));
    }
    let head = -(-1.0 / delta).exp_m1() / -(-(num_taps as f64) / delta).exp_m1();
    let mut pdp: Vec<f64> = (0..num_taps).map(|l| head * (-(l as f64) / delta).exp()).collect();
    // Remove the last few ulps of normalization drift.
    let total: f64 = pdp.iter().sum();
    for p in &mut pdp {
        *p /= total;
    }
    Ok(pdp)
}

/// Correlation E[H*_{n1} H_{n2}] between two subcarriers.
pub fn subcarrier_correlation(pdp: &[f64], n1: usize, n2: usize, num_subcarriers: usize) -> Complex64 {
    let lag = n2 as f64 - n1 as f64;
    pdp.iter()
        .enumerate()
        .map(|(l, &p)| Complex64::from_polar(p, -2.0 * PI * l as f64 * lag / num_subcarriers as f64))
        .sum()
}

/// Draws `num_users` independent frequency responses from the tapped delay line.
pub fn gen_correlated_channel(cfg: &CorrelatedChannelConfig, num_users: usize, seed: u64) -> ChannelRealization {
    let nc = cfg.num_subcarriers;
    let twiddle: Vec<Complex64> = (0..nc)
        .map(|m| Complex64::from_polar(1.0, -2.0 * PI * m as f64 / nc as f64))
        .collect();
    let amplitude: Vec<f64> = cfg.pdp.iter().map(|p| p.sqrt()).collect();
    let gains = (0..num_users)
        .map(|k| {
            let mut rng = substream(seed, k as u64, Stream::Fading);
            let taps: Vec<Complex64> = amplitude.iter().map(|&a| complex_gaussian(&mut rng) * a).collect();
            (0..nc)
                .map(|n| taps.iter().enumerate().map(|(l, &t)| t * twiddle[(l * n) % nc]).sum())
                .collect()
        })
        .collect();
    ChannelRealization {
        granularity: Granularity::Subcarrier,
        gains,
        span: Vec::new(),
    }
}

/// Draws independent unit-power Rayleigh gains on every subband of every user.
pub fn gen_subband_fading(sys: &SystemConfig, seed: u64) -> ChannelRealization {
    let mut gains = Vec::with_capacity(sys.num_users());
    let mut span = Vec::with_capacity(sys.num_users());
    for (g, cluster) in sys.clusters.iter().enumerate() {
        for k in sys.users_of(g) {
            let mut rng = substream(seed, k as u64, Stream::Fading);
            gains.push((0..sys.subbands(g)).map(|_| complex_gaussian(&mut rng)).collect());
            span.push(cluster.subband_size);
        }
    }
    ChannelRealization {
        granularity: Granularity::Subband,
        gains,
        span,
    }
}

/// Turns unit-power draws into (estimated, actual) channel pairs.
///
/// The estimate is the input scaled to power 1 − σw²; the true channel adds
/// an independent error of power σw²; the gain seen at transmission time is
/// α·(true channel) plus an independent innovation of power 1 − α².
pub fn apply_impairments(
    draws: &ChannelRealization,
    imp: &ImpairmentParams,
    seed: u64,
) -> (ChannelRealization, ChannelRealization) {
    let est_scale = imp.estimate_power().sqrt();
    let err_scale = imp.est_error_var.sqrt();
    let alpha = imp.delay_corr;
    let innov_scale = (1.0 - alpha * alpha).max(0.0).sqrt();
    let mut estimated = draws.clone();
    let mut actual = draws.clone();
    for k in 0..draws.num_users() {
        let mut err_rng = substream(seed, k as u64, Stream::EstimationError);
        let mut innov_rng = substream(seed, k as u64, Stream::Innovation);
        for (i, &g) in draws.gains[k].iter().enumerate() {
            let est = g * est_scale;
            let truth = est + complex_gaussian(&mut err_rng) * err_scale;
            estimated.gains[k][i] = est;
            actual.gains[k][i] = truth * alpha + complex_gaussian(&mut innov_rng) * innov_scale;
        }
    }
    (estimated, actual)
}

/// Density of the actual channel power given the estimated power `chi_hat`.
pub fn conditional_pdf_actual(x: f64, chi_hat: f64, imp: &ImpairmentParams) -> Result<f64> {
    if !(x >= 0.0) || !(chi_hat >= 0.0) {
        return Err(Error::domain("conditional_pdf_actual", "arguments must be nonnegative"));
    }
    let aw2 = 2.0 / imp.residual_var();
    let alpha = imp.delay_corr;
    let arg = aw2 * alpha * (x * chi_hat).sqrt();
    let gap = x.sqrt() - alpha * chi_hat.sqrt();
    // exp(−aw²(x + α²χ̂)/2)·I0(arg) = exp(−aw²(√x − α√χ̂)²/2)·e^(−arg)I0(arg)
    Ok(0.5 * aw2 * (-0.5 * aw2 * gap * gap).exp() * specfun::bessel_i0_scaled(arg)?)
}
