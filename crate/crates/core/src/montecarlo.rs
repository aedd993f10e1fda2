//! Trial-level Monte Carlo estimators and their comparison with the analytic
//! engine.
//!
//! Trials are grouped into fixed chunks of `CHUNK_TRIALS` consecutive trial
//! indices. Each chunk accumulates independently and chunks are merged in
//! index order, so any executor that evaluates chunks in parallel and merges
//! them in order reproduces the serial result exactly.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::analytic::average_sum_rate;
use crate::channel::{
    apply_impairments, gen_correlated_channel, gen_subband_fading, trial_seed, CorrelatedChannelConfig,
    ImpairmentParams, SystemConfig,
};
use crate::error::{Error, Result};
use crate::feedback::{block_rates, power_feedback, rate_feedback};
use crate::goodput::{fixed_rate_metrics, variable_rate_metrics};
use crate::scheduler::{realize_fixed_rate, realize_variable_rate, schedule};

pub const CHUNK_TRIALS: u64 = 256;

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelModel {
    /// Tapped-delay-line channel with subband-average-rate CQI.
    Correlated(CorrelatedChannelConfig),
    /// Independent Rayleigh gain per subband with CQI |H|².
    SubbandFading,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    FixedRate { beta0: f64 },
    VariableRate { beta1: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub model: ChannelModel,
    pub system: SystemConfig,
    pub impairments: Option<ImpairmentParams>,
    pub strategy: Option<Strategy>,
    pub trials: u64,
    pub seed: u64,
}

impl ExperimentSpec {
    /// Perfect-CQI experiment.
    pub fn perfect(model: ChannelModel, system: SystemConfig, trials: u64, seed: u64) -> Self {
        Self {
            model,
            system,
            impairments: None,
            strategy: None,
            trials,
            seed,
        }
    }

    /// Subband-fading experiment with impaired CQI.
    pub fn imperfect(system: SystemConfig, imp: ImpairmentParams, strategy: Strategy, trials: u64, seed: u64) -> Self {
        Self {
            model: ChannelModel::SubbandFading,
            system,
            impairments: Some(imp),
            strategy: Some(strategy),
            trials,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 2 {
            return Err(Error::config(format!("need at least 2 trials, got {}", self.trials)));
        }
        if let ChannelModel::Correlated(cfg) = &self.model {
            if cfg.num_rbs() != self.system.num_rbs() {
                return Err(Error::config(format!(
                    "channel spans {} resource blocks but the system has {}",
                    cfg.num_rbs(),
                    self.system.num_rbs()
                )));
            }
            if self.impairments.is_some() {
                return Err(Error::config(
                    "impaired CQI is modeled on the subband-fading channel only",
                ));
            }
        }
        match (self.impairments.is_some(), self.strategy) {
            (true, None) => Err(Error::config("impaired CQI needs a transmission strategy")),
            (false, Some(_)) => Err(Error::config("a transmission strategy needs impairment parameters")),
            (_, Some(Strategy::FixedRate { beta0 })) if !(beta0 >= 0.0 && beta0.is_finite()) => {
                Err(Error::config(format!("beta0 = {beta0} must be a nonnegative number")))
            }
            (_, Some(Strategy::VariableRate { beta1 })) if !(0.0..=1.0).contains(&beta1) => {
                Err(Error::config(format!("beta1 = {beta1} must lie in [0, 1]")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateWithError {
    pub mean: f64,
    pub std_error: f64,
    pub trials: u64,
}

/// Streaming mean and variance (Welford), mergeable in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accumulator {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Accumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        let (na, nb) = (self.count as f64, other.count as f64);
        self.mean += delta * nb / n as f64;
        self.m2 += other.m2 + delta * delta * na * nb / n as f64;
        self.count = n;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn estimate(&self) -> EstimateWithError {
        let var = if self.count > 1 {
            self.m2 / (self.count - 1) as f64
        } else {
            0.0
        };
        EstimateWithError {
            mean: self.mean,
            std_error: (var / self.count.max(1) as f64).sqrt(),
            trials: self.count,
        }
    }
}

/// Consecutive trial ranges of at most `CHUNK_TRIALS` trials.
pub fn chunks(trials: u64) -> impl Iterator<Item = Range<u64>> {
    (0..trials.div_ceil(CHUNK_TRIALS)).map(move |c| c * CHUNK_TRIALS..((c + 1) * CHUNK_TRIALS).min(trials))
}

/// Average rate per resource block in one trial with perfect CQI.
pub fn perfect_trial(spec: &ExperimentSpec, trial: u64) -> f64 {
    let sys = &spec.system;
    let seed = trial_seed(spec.seed, trial);
    let total: f64 = match &spec.model {
        ChannelModel::SubbandFading => {
            let h = gen_subband_fading(sys, seed);
            let decision = schedule(&power_feedback(sys, &h), sys);
            decision
                .blocks
                .iter()
                .flatten()
                .map(|sel| (sys.snr() * sel.cqi).ln_1p())
                .sum::<f64>()
                / core::f64::consts::LN_2
        }
        ChannelModel::Correlated(cfg) => {
            let h = gen_correlated_channel(cfg, sys.num_users(), seed);
            let rates = block_rates(&h, cfg.subcarriers_per_rb(), sys.snr());
            let decision = schedule(&rate_feedback(sys, &rates), sys);
            decision
                .blocks
                .iter()
                .enumerate()
                .filter_map(|(rb, b)| b.map(|sel| rates[sel.user][rb]))
                .sum()
        }
    };
    total / sys.num_rbs() as f64
}

/// Per-trial block fractions under impaired CQI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImperfectSample {
    pub goodput: f64,
    /// Blocks scheduled whose transmission failed, over all blocks.
    pub outage: f64,
    /// Blocks left idle, over all blocks.
    pub idle: f64,
    pub failed_blocks: u64,
    pub scheduled_blocks: u64,
}

pub fn imperfect_trial(spec: &ExperimentSpec, trial: u64) -> Result<ImperfectSample> {
    let sys = &spec.system;
    let (imp, strategy) = match (&spec.impairments, spec.strategy) {
        (Some(imp), Some(s)) if spec.model == ChannelModel::SubbandFading => (imp, s),
        _ => {
            return Err(Error::config(
                "impaired trials need the subband-fading model, impairments and a strategy",
            ))
        }
    };
    let seed = trial_seed(spec.seed, trial);
    let draws = gen_subband_fading(sys, seed);
    let (estimated, actual) = apply_impairments(&draws, imp, seed);
    let decision = schedule(&power_feedback(sys, &estimated), sys);
    let outcome = match strategy {
        Strategy::FixedRate { beta0 } => realize_fixed_rate(&decision, &actual, beta0, sys.snr())?,
        Strategy::VariableRate { beta1 } => realize_variable_rate(&decision, &actual, beta1, sys.snr())?,
    };
    let n = sys.num_rbs() as f64;
    let failed = outcome.failed_blocks();
    let scheduled = outcome.scheduled_blocks();
    Ok(ImperfectSample {
        goodput: outcome.mean_goodput(),
        outage: failed as f64 / n,
        idle: (sys.num_rbs() - scheduled) as f64 / n,
        failed_blocks: failed as u64,
        scheduled_blocks: scheduled as u64,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ImperfectPartial {
    pub goodput: Accumulator,
    pub outage: Accumulator,
    pub idle: Accumulator,
    pub failed_blocks: u64,
    pub scheduled_blocks: u64,
}

impl ImperfectPartial {
    pub fn push(&mut self, s: &ImperfectSample) {
        self.goodput.push(s.goodput);
        self.outage.push(s.outage);
        self.idle.push(s.idle);
        self.failed_blocks += s.failed_blocks;
        self.scheduled_blocks += s.scheduled_blocks;
    }

    pub fn merge(&mut self, other: &ImperfectPartial) {
        self.goodput.merge(&other.goodput);
        self.outage.merge(&other.outage);
        self.idle.merge(&other.idle);
        self.failed_blocks += other.failed_blocks;
        self.scheduled_blocks += other.scheduled_blocks;
    }

    pub fn finish(&self) -> ImperfectEstimate {
        ImperfectEstimate {
            goodput: self.goodput.estimate(),
            outage: self.outage.estimate(),
            idle: self.idle.estimate(),
            conditional_outage: if self.scheduled_blocks == 0 {
                0.0
            } else {
                self.failed_blocks as f64 / self.scheduled_blocks as f64
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImperfectEstimate {
    pub goodput: EstimateWithError,
    /// Fraction of all blocks that were scheduled and failed.
    pub outage: EstimateWithError,
    /// Fraction of blocks nobody reported.
    pub idle: EstimateWithError,
    /// Failed blocks over scheduled blocks, pooled across trials.
    pub conditional_outage: f64,
}

pub fn check_perfect(spec: &ExperimentSpec) -> Result<()> {
    spec.validate()?;
    if spec.impairments.is_some() {
        return Err(Error::config("perfect-CQI run given impairment parameters"));
    }
    Ok(())
}

pub fn check_imperfect(spec: &ExperimentSpec) -> Result<()> {
    spec.validate()?;
    if spec.impairments.is_none() {
        return Err(Error::config("impaired-CQI run needs impairment parameters"));
    }
    Ok(())
}

pub fn perfect_chunk(spec: &ExperimentSpec, trials: Range<u64>) -> Accumulator {
    let mut acc = Accumulator::default();
    for t in trials {
        acc.push(perfect_trial(spec, t));
    }
    acc
}

pub fn imperfect_chunk(spec: &ExperimentSpec, trials: Range<u64>) -> Result<ImperfectPartial> {
    let mut acc = ImperfectPartial::default();
    for t in trials {
        acc.push(&imperfect_trial(spec, t)?);
    }
    Ok(acc)
}

/// Average sum rate per resource block, serially.
pub fn run_perfect(spec: &ExperimentSpec) -> Result<EstimateWithError> {
    check_perfect(spec)?;
    let mut total = Accumulator::default();
    for c in chunks(spec.trials) {
        total.merge(&perfect_chunk(spec, c));
    }
    Ok(total.estimate())
}

/// Goodput and outage estimates under impaired CQI, serially.
pub fn run_imperfect(spec: &ExperimentSpec) -> Result<ImperfectEstimate> {
    check_imperfect(spec)?;
    let mut total = ImperfectPartial::default();
    for c in chunks(spec.trials) {
        total.merge(&imperfect_chunk(spec, c)?);
    }
    Ok(total.finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    SumRate,
    Goodput,
    Outage,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::SumRate => "sum_rate",
            Quantity::Goodput => "goodput",
            Quantity::Outage => "outage",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub quantity: Quantity,
    pub empirical: EstimateWithError,
    pub analytic: f64,
    pub z: f64,
}

impl Comparison {
    pub fn new(quantity: Quantity, empirical: EstimateWithError, analytic: f64) -> Self {
        let diff = empirical.mean - analytic;
        let z = if empirical.std_error > 0.0 {
            diff / empirical.std_error
        } else if diff.abs() <= 1e-12 * analytic.abs().max(1.0) {
            0.0
        } else {
            f64::INFINITY.copysign(diff)
        };
        Self {
            quantity,
            empirical,
            analytic,
            z,
        }
    }

    pub fn flagged(&self) -> bool {
        !(self.z.abs() <= 3.0)
    }
}

/// Analytic counterparts exist only for the subband-fading model.
pub fn check_comparable(spec: &ExperimentSpec) -> Result<()> {
    if spec.model != ChannelModel::SubbandFading {
        return Err(Error::precondition(
            "analytic results exist for the subband-fading model only",
        ));
    }
    spec.validate()
}

/// Analytic counterparts of the perfect-CQI estimate.
pub fn compare_perfect(spec: &ExperimentSpec, empirical: EstimateWithError) -> Result<Vec<Comparison>> {
    check_comparable(spec)?;
    Ok(alloc::vec![Comparison::new(
        Quantity::SumRate,
        empirical,
        average_sum_rate(&spec.system)?
    )])
}

/// Analytic counterparts of the impaired-CQI estimates.
pub fn compare_imperfect(spec: &ExperimentSpec, empirical: &ImperfectEstimate) -> Result<Vec<Comparison>> {
    check_comparable(spec)?;
    let imp = spec
        .impairments
        .as_ref()
        .ok_or_else(|| Error::precondition("impaired comparison without impairment parameters"))?;
    let metrics = match spec.strategy {
        Some(Strategy::FixedRate { beta0 }) => fixed_rate_metrics(&spec.system, imp, beta0)?,
        Some(Strategy::VariableRate { beta1 }) => variable_rate_metrics(&spec.system, imp, beta1)?,
        None => return Err(Error::precondition("impaired comparison without a strategy")),
    };
    Ok(alloc::vec![
        Comparison::new(Quantity::Goodput, empirical.goodput, metrics.goodput),
        Comparison::new(Quantity::Outage, empirical.outage, metrics.outage),
    ])
}

/// Runs the experiment serially and compares every estimate with theory.
pub fn cross_validate(spec: &ExperimentSpec) -> Result<Vec<Comparison>> {
    check_comparable(spec)?;
    if spec.impairments.is_some() {
        compare_imperfect(spec, &run_imperfect(spec)?)
    } else {
        compare_perfect(spec, run_perfect(spec)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::i1;
    use crate::channel::Cluster;
    use alloc::vec;

    #[test]
    fn accumulator_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1013) as f64 / 17.0).collect();
        let mut whole = Accumulator::default();
        xs.iter().for_each(|&x| whole.push(x));
        let mut merged = Accumulator::default();
        for part in xs.chunks(333) {
            let mut a = Accumulator::default();
            part.iter().for_each(|&x| a.push(x));
            merged.merge(&a);
        }
        let (w, m) = (whole.estimate(), merged.estimate());
        assert_eq!(w.trials, m.trials);
        assert!((w.mean - m.mean).abs() < 1e-12);
        assert!((w.std_error - m.std_error).abs() < 1e-12);
        let mean = xs.iter().sum::<f64>() / 1000.0;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 999.0;
        assert!((w.std_error - (var / 1000.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn chunks_cover_trials_once() {
        let all: Vec<u64> = chunks(1000).flatten().collect();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
        assert_eq!(chunks(0).count(), 0);
    }

    #[test]
    fn spec_validation() {
        let sys = SystemConfig::homogeneous(8, 1, 2, 8, 10.0).unwrap();
        let imp = ImpairmentParams::new(0.01, 0.98).unwrap();
        let mut spec = ExperimentSpec::perfect(ChannelModel::SubbandFading, sys.clone(), 1, 0);
        assert!(spec.validate().is_err());
        spec.trials = 10;
        assert!(spec.validate().is_ok());
        assert!(run_imperfect(&spec).is_err());
        let cfg = CorrelatedChannelConfig::exponential(64, 4, 4, 2.0).unwrap();
        let wrong = ExperimentSpec::perfect(ChannelModel::Correlated(cfg), sys.clone(), 10, 0);
        assert!(wrong.validate().is_err());
        let fixed = ExperimentSpec::imperfect(sys.clone(), imp, Strategy::FixedRate { beta0: 1.0 }, 10, 0);
        assert!(run_perfect(&fixed).is_err());
        let bad = ExperimentSpec::imperfect(sys, imp, Strategy::VariableRate { beta1: 1.5 }, 10, 0);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn single_user_full_feedback_matches_i1() {
        let sys = SystemConfig::homogeneous(8, 1, 1, 8, 10.0).unwrap();
        let spec = ExperimentSpec::perfect(ChannelModel::SubbandFading, sys, 4000, 3);
        let est = run_perfect(&spec).unwrap();
        let z = (est.mean - i1(10.0, 1).unwrap()) / est.std_error;
        assert!(z.abs() < 3.0, "z = {z}");
    }

    #[test]
    fn zero_backoff_sends_nothing() {
        let sys = SystemConfig::new(16, vec![Cluster::new(1, 2), Cluster::new(4, 2)], 1, 10.0).unwrap();
        let imp = ImpairmentParams::new(0.05, 0.9).unwrap();
        let spec = ExperimentSpec::imperfect(sys, imp, Strategy::VariableRate { beta1: 0.0 }, 50, 1);
        let est = run_imperfect(&spec).unwrap();
        assert_eq!(est.goodput.mean, 0.0);
        assert_eq!(est.outage.mean, 0.0);
    }

    #[test]
    fn comparison_flags() {
        let e = EstimateWithError {
            mean: 1.0,
            std_error: 0.1,
            trials: 10,
        };
        assert!(!Comparison::new(Quantity::SumRate, e, 1.2).flagged());
        assert!(Comparison::new(Quantity::SumRate, e, 1.4).flagged());
        let exact = EstimateWithError { std_error: 0.0, ..e };
        assert!(!Comparison::new(Quantity::Outage, exact, 1.0).flagged());
        assert!(Comparison::new(Quantity::Outage, exact, 0.5).flagged());
        let cfg = CorrelatedChannelConfig::exponential(32, 4, 4, 2.0).unwrap();
        let sys = SystemConfig::homogeneous(8, 1, 2, 2, 10.0).unwrap();
        let spec = ExperimentSpec::perfect(ChannelModel::Correlated(cfg), sys, 10, 0);
        assert!(matches!(cross_validate(&spec), Err(Error::Precondition(_))));
    }
}
