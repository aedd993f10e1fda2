//! Data series behind each figure, with the published parameters built in.
//! Only the trial count and seed come from the run configuration.

use hetfb_core::analytic::{approx_minimum_best_m, minimum_best_m};
use hetfb_core::channel::{
    gen_correlated_channel, gen_subband_fading, trial_seed, Cluster, CorrelatedChannelConfig, ImpairmentParams,
    SystemConfig,
};
use hetfb_core::feedback::{best_m_select, block_rates, rate_feedback, FeedbackReport};
use hetfb_core::goodput::{
    fixed_rate_metrics, i3_jensen, optimize_beta0, optimize_beta1, variable_rate_metrics, StrategyMetrics,
};
use hetfb_core::montecarlo::{perfect_trial, Accumulator, ChannelModel, ExperimentSpec};
use hetfb_core::scheduler::schedule;
use rayon::prelude::*;

use crate::config::{db_to_linear, even_split};
use crate::error::AppError;
use crate::output::{Table, Value};
use crate::runner::map_chunks;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FigureId {
    #[value(name = "1")]
    Fig1,
    #[value(name = "3")]
    Fig3,
    #[value(name = "4a")]
    Fig4a,
    #[value(name = "4b")]
    Fig4b,
    #[value(name = "5")]
    Fig5,
    #[value(name = "6")]
    Fig6,
    #[value(name = "7")]
    Fig7,
    #[value(name = "8")]
    Fig8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FigureOptions {
    pub trials: u64,
    pub seed: u64,
}

pub fn generate(id: FigureId, opts: FigureOptions) -> Result<Vec<Table>, AppError> {
    match id {
        FigureId::Fig1 => fig1(&Fig1Params::default(), opts),
        FigureId::Fig3 => fig3(),
        FigureId::Fig4a => fig4a(),
        FigureId::Fig4b => fig4b(),
        FigureId::Fig5 => fig5(&Fig5Params::default(), opts),
        FigureId::Fig6 => fig6(),
        FigureId::Fig7 => fig7(&Fig7Params::default()),
        FigureId::Fig8 => fig8(&[10, 20, 30, 40]),
    }
}

const SNR_DB: f64 = 10.0;

fn snr() -> f64 {
    db_to_linear(SNR_DB)
}

/// Accumulators for a grid of series, merged chunk by chunk in order.
fn accumulate<F>(opts: FigureOptions, series: usize, trial: F) -> Vec<Accumulator>
where
    F: Fn(u64, &mut [f64]) + Sync,
{
    let parts = map_chunks(opts.trials, |range| {
        let mut accs = vec![Accumulator::default(); series];
        let mut values = vec![0.0; series];
        for t in range {
            trial(t, &mut values);
            accs.iter_mut().zip(&values).for_each(|(a, &v)| a.push(v));
        }
        accs
    });
    let mut total = vec![Accumulator::default(); series];
    for part in &parts {
        total.iter_mut().zip(part).for_each(|(a, p)| a.merge(p));
    }
    total
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Params {
    pub subcarriers: usize,
    pub num_rbs: usize,
    pub taps: usize,
    pub delay_decay: f64,
    pub subband_sizes: Vec<usize>,
    pub best_m: Vec<usize>,
    pub users: Vec<usize>,
}

impl Default for Fig1Params {
    fn default() -> Self {
        Self {
            subcarriers: 256,
            num_rbs: 32,
            taps: 16,
            delay_decay: 4.0,
            subband_sizes: vec![1, 2, 4],
            best_m: vec![2, 4],
            users: vec![1, 5, 10, 15, 20, 25, 30],
        }
    }
}

/// Sum rate on the correlated channel for homogeneous subband sizes.
///
/// Every trial draws the largest user population once; smaller populations
/// are its leading users, which is exactly what a separate run would draw.
pub fn fig1(p: &Fig1Params, opts: FigureOptions) -> Result<Vec<Table>, AppError> {
    let cfg = CorrelatedChannelConfig::exponential(p.subcarriers, p.subcarriers / p.num_rbs, p.taps, p.delay_decay)?;
    let max_users = p.users.iter().copied().max().unwrap_or(0);
    let mut systems = Vec::new();
    for &eta in &p.subband_sizes {
        for &m in &p.best_m {
            for &k in &p.users {
                systems.push((eta, m, k, SystemConfig::homogeneous(p.num_rbs, eta, k, m, snr())?));
            }
        }
    }
    let accs = accumulate(opts, systems.len(), |t, out| {
        let h = gen_correlated_channel(&cfg, max_users, trial_seed(opts.seed, t));
        let rates = block_rates(&h, cfg.subcarriers_per_rb(), snr());
        for (slot, (_, _, _, sys)) in out.iter_mut().zip(&systems) {
            let decision = schedule(&rate_feedback(sys, &rates), sys);
            let total: f64 = decision
                .blocks
                .iter()
                .enumerate()
                .filter_map(|(rb, b)| b.map(|sel| rates[sel.user][rb]))
                .sum();
            *slot = total / sys.num_rbs() as f64;
        }
    });
    let mut table = Table::new(
        "fig1",
        "sum rate versus users on the correlated channel for homogeneous subband sizes",
        &["eta", "M", "K", "sum_rate", "std_error", "trials"],
    );
    for ((eta, m, k, _), acc) in systems.iter().zip(&accs) {
        let e = acc.estimate();
        table.push(vec![
            (*eta).into(),
            (*m).into(),
            (*k).into(),
            e.mean.into(),
            e.std_error.into(),
            e.trials.into(),
        ]);
    }
    Ok(vec![table])
}

fn two_cluster(total: usize, best_m: usize, snr: f64) -> Result<SystemConfig, AppError> {
    let split = even_split(total, 2);
    Ok(SystemConfig::new(
        64,
        vec![Cluster::new(1, split[0]), Cluster::new(4, split[1])],
        best_m,
        snr,
    )?)
}

fn four_cluster(total: usize, best_m: usize) -> Result<SystemConfig, AppError> {
    let clusters = [1, 2, 4, 8]
        .iter()
        .zip(even_split(total, 4))
        .map(|(&eta, k)| Cluster::new(eta, k))
        .collect();
    Ok(SystemConfig::new(64, clusters, best_m, snr())?)
}

fn reference_impairments() -> ImpairmentParams {
    ImpairmentParams::new(0.01, 0.98).expect("valid impairment parameters")
}

fn grid(lo: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| lo + step * i as f64).collect()
}

/// Variable-rate goodput versus backoff for several feedback amounts, with
/// the Jensen approximation at full feedback.
pub fn fig3() -> Result<Vec<Table>, AppError> {
    let imp = reference_impairments();
    let betas = grid(0.0, 0.05, 21);
    let mut jobs = Vec::new();
    for snr_db in [10.0, 20.0] {
        for m in [2, 4, 16] {
            for &beta in &betas {
                jobs.push((snr_db, m, beta));
            }
        }
    }
    let rows: Vec<Result<Vec<Value>, AppError>> = jobs
        .par_iter()
        .map(|&(snr_db, m, beta)| {
            let sys = two_cluster(20, m, db_to_linear(snr_db))?;
            let g = variable_rate_metrics(&sys, &imp, beta)?.goodput;
            Ok(vec![snr_db.into(), m.into(), "exact".into(), beta.into(), g.into()])
        })
        .collect();
    let mut table = Table::new(
        "fig3",
        "variable-rate goodput versus backoff, exact and Jensen approximation",
        &["snr_db", "M", "method", "beta1", "goodput"],
    );
    for row in rows {
        table.push(row?);
    }
    for snr_db in [10.0, 20.0] {
        for &beta in &betas {
            let g = i3_jensen(beta, 20, &imp, db_to_linear(snr_db))?;
            table.push(vec![
                snr_db.into(),
                16usize.into(),
                "jensen".into(),
                beta.into(),
                g.into(),
            ]);
        }
    }
    Ok(vec![table])
}

/// Smallest M against total users, exact and approximate.
pub fn fig4a() -> Result<Vec<Table>, AppError> {
    let mut table = Table::new(
        "fig4a",
        "minimum best-M value versus users, exact and approximate",
        &["K", "gamma", "M_exact", "M_approx"],
    );
    let jobs: Vec<(usize, f64)> = [0.9, 0.99]
        .iter()
        .flat_map(|&g| (5..=50).map(move |k| (k, g)))
        .collect();
    let rows: Vec<Result<Vec<Value>, AppError>> = jobs
        .par_iter()
        .map(|&(k, gamma)| {
            let sys = two_cluster(k, 16, snr())?;
            let exact = minimum_best_m(&sys, gamma)?.exact;
            let approx = approx_minimum_best_m(&sys, gamma);
            Ok(vec![k.into(), gamma.into(), exact.into(), approx.into()])
        })
        .collect();
    for row in rows {
        table.push(row?);
    }
    Ok(vec![table])
}

/// Smallest M against the share of users in the fine-grained cluster.
pub fn fig4b() -> Result<Vec<Table>, AppError> {
    let mut table = Table::new(
        "fig4b",
        "minimum best-M value versus the first cluster's share of users",
        &["K", "ratio", "K1", "M_exact"],
    );
    let jobs: Vec<(usize, usize)> = [10, 20, 30, 40, 50]
        .iter()
        .flat_map(|&k| (1..=9).map(move |r| (k, r)))
        .collect();
    let rows: Vec<Result<Vec<Value>, AppError>> = jobs
        .par_iter()
        .map(|&(k, r)| {
            let k1 = (k * r + 5) / 10;
            let sys = SystemConfig::new(64, vec![Cluster::new(1, k1), Cluster::new(4, k - k1)], 16, snr())?;
            let exact = minimum_best_m(&sys, 0.99)?.exact;
            Ok(vec![k.into(), (r as f64 / 10.0).into(), k1.into(), exact.into()])
        })
        .collect();
    for row in rows {
        table.push(row?);
    }
    Ok(vec![table])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig5Params {
    pub users: Vec<usize>,
    pub best_m: Vec<usize>,
    /// Subband sizes of the homogeneous baselines.
    pub homogeneous_sizes: Vec<usize>,
}

impl Default for Fig5Params {
    fn default() -> Self {
        Self {
            users: vec![8, 16, 24, 32, 40],
            best_m: vec![2, 4],
            homogeneous_sizes: vec![2, 4],
        }
    }
}

/// CQI values each user sends under homogeneous feedback: enough to cover
/// the heterogeneous feedback load averaged over clusters.
pub fn homogeneous_quota(sys: &SystemConfig) -> usize {
    let g = sys.num_clusters();
    let total: usize = (0..g).map(|c| sys.quota(c)).sum();
    total.div_ceil(g)
}

/// Per-block rate of one trial when every user reports average rates over
/// subbands of `subband_size` blocks, whatever its own fading granularity.
pub fn homogeneous_trial(
    sys: &SystemConfig,
    hsys: &SystemConfig,
    channel: &hetfb_core::channel::ChannelRealization,
) -> f64 {
    let eta = hsys.clusters()[0].subband_size;
    let quota = hsys.quota(0);
    let n = sys.num_rbs();
    let snr = sys.snr();
    let mut cqis = Vec::with_capacity(n / eta);
    let reports: Vec<FeedbackReport> = (0..sys.num_users())
        .map(|user| {
            cqis.clear();
            for j in 0..n / eta {
                let rate: f64 = (j * eta..(j + 1) * eta)
                    .map(|rb| (snr * channel.block_gain(user, rb).expect("subband model").norm_sqr()).log2_1p())
                    .sum();
                cqis.push(rate / eta as f64);
            }
            FeedbackReport {
                user,
                cluster: 0,
                entries: best_m_select(&cqis, quota).expect("quota fits the subband count"),
            }
        })
        .collect();
    let decision = schedule(&reports, hsys);
    decision.blocks.iter().flatten().map(|sel| sel.cqi).sum::<f64>() / n as f64
}

trait Log2OnePlus {
    fn log2_1p(self) -> f64;
}

impl Log2OnePlus for f64 {
    fn log2_1p(self) -> f64 {
        self.ln_1p() / std::f64::consts::LN_2
    }
}

/// Single-cluster systems served in turn by the separate baseline.
pub fn separate_systems(sys: &SystemConfig) -> Result<Vec<SystemConfig>, AppError> {
    let coarsest = sys.largest_subband();
    sys.clusters()
        .iter()
        .filter(|c| c.users > 0)
        .map(|c| {
            let m = coarsest / c.subband_size * sys.best_m();
            Ok(SystemConfig::homogeneous(
                sys.num_rbs(),
                c.subband_size,
                c.users,
                m,
                sys.snr(),
            )?)
        })
        .collect()
}

/// Scheme labels in the order `fig5_trial` fills its output.
pub fn fig5_schemes(p: &Fig5Params) -> Vec<String> {
    let mut names = vec!["joint".to_string()];
    names.extend(p.homogeneous_sizes.iter().map(|e| format!("homogeneous_eta{e}")));
    names.push("separate".to_string());
    names
}

/// Per-block sum rates of the joint, homogeneous and separate schemes on
/// one trial; the first two share the channel draw.
pub fn fig5_trial(
    joint: &ExperimentSpec,
    homogeneous: &[SystemConfig],
    separate: &[ExperimentSpec],
    trial: u64,
    out: &mut [f64],
) {
    out[0] = perfect_trial(joint, trial);
    let h = gen_subband_fading(&joint.system, trial_seed(joint.seed, trial));
    for (slot, hsys) in out[1..].iter_mut().zip(homogeneous) {
        *slot = homogeneous_trial(&joint.system, hsys, &h);
    }
    let total: f64 = separate.iter().map(|spec| perfect_trial(spec, trial)).sum();
    out[homogeneous.len() + 1] = total / separate.len() as f64;
}

/// Specs of the joint scheme and of each separately served cluster.
pub fn fig5_specs(sys: &SystemConfig, seed: u64) -> Result<(ExperimentSpec, Vec<ExperimentSpec>), AppError> {
    let joint = ExperimentSpec::perfect(ChannelModel::SubbandFading, sys.clone(), 2, seed);
    let separate = separate_systems(sys)?
        .into_iter()
        .enumerate()
        .map(|(g, single)| {
            ExperimentSpec::perfect(ChannelModel::SubbandFading, single, 2, trial_seed(seed, g as u64 + 1))
        })
        .collect();
    Ok((joint, separate))
}

/// Joint heterogeneous feedback against homogeneous and separate baselines
/// on four clusters.
pub fn fig5(p: &Fig5Params, opts: FigureOptions) -> Result<Vec<Table>, AppError> {
    let names = fig5_schemes(p);
    let mut table = Table::new(
        "fig5",
        "sum rate of joint heterogeneous feedback against homogeneous and separate baselines",
        &["scheme", "M", "K", "sum_rate", "std_error", "trials"],
    );
    for &m in &p.best_m {
        for &k in &p.users {
            let sys = four_cluster(k, m)?;
            let quota = homogeneous_quota(&sys);
            let homogeneous = p
                .homogeneous_sizes
                .iter()
                .map(|&eta| SystemConfig::homogeneous(64, eta, k, quota, snr()))
                .collect::<Result<Vec<_>, _>>()?;
            let (joint, separate) = fig5_specs(&sys, opts.seed)?;
            let accs = accumulate(opts, names.len(), |t, out| {
                fig5_trial(&joint, &homogeneous, &separate, t, out)
            });
            for (name, acc) in names.iter().zip(&accs) {
                let e = acc.estimate();
                table.push(vec![
                    name.as_str().into(),
                    m.into(),
                    k.into(),
                    e.mean.into(),
                    e.std_error.into(),
                    e.trials.into(),
                ]);
            }
        }
    }
    Ok(vec![table])
}

/// System used for the fixed- versus variable-rate comparison.
pub fn fig6_system(total: usize) -> Result<SystemConfig, AppError> {
    two_cluster(total, 4, snr())
}

/// Fixed- and variable-rate goodput and outage on a normalized parameter
/// axis (beta1 = beta, beta0 = 10 beta).
pub fn fig6() -> Result<Vec<Table>, AppError> {
    let imp = reference_impairments();
    let betas = grid(0.05, 0.05, 20);
    let jobs: Vec<(usize, f64, bool)> = [10, 20, 40]
        .iter()
        .flat_map(|&k| betas.iter().flat_map(move |&b| [(k, b, false), (k, b, true)]))
        .collect();
    let rows: Vec<Result<Vec<Value>, AppError>> = jobs
        .par_iter()
        .map(|&(k, beta, variable)| {
            let sys = fig6_system(k)?;
            let (name, m) = if variable {
                ("variable", variable_rate_metrics(&sys, &imp, beta)?)
            } else {
                ("fixed", fixed_rate_metrics(&sys, &imp, 10.0 * beta)?)
            };
            Ok(vec![
                k.into(),
                beta.into(),
                name.into(),
                m.goodput.into(),
                m.outage.into(),
            ])
        })
        .collect();
    let mut table = Table::new(
        "fig6",
        "goodput and outage of fixed and variable rate on a normalized parameter axis",
        &["K", "beta", "strategy", "goodput", "outage"],
    );
    for row in rows {
        table.push(row?);
    }
    Ok(vec![table])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig7Params {
    pub users: usize,
    pub est_err_var: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl Default for Fig7Params {
    fn default() -> Self {
        Self {
            users: 10,
            est_err_var: grid(0.0, 0.005, 21),
            alpha: grid(0.9, 0.005, 19),
        }
    }
}

/// Optimal threshold and backoff over an impairment grid.
pub fn fig7(p: &Fig7Params) -> Result<Vec<Table>, AppError> {
    let sys = two_cluster(p.users, 16, snr())?;
    let jobs: Vec<(f64, f64)> = p
        .est_err_var
        .iter()
        .flat_map(|&s| p.alpha.iter().map(move |&a| (s, a)))
        .collect();
    let rows: Vec<Result<Vec<Value>, AppError>> = jobs
        .par_iter()
        .map(|&(s2, alpha)| {
            let imp = ImpairmentParams::new(s2, alpha)?;
            let o0 = optimize_beta0(&sys, &imp)?;
            let o1 = optimize_beta1(&sys, &imp)?;
            Ok(vec![
                s2.into(),
                alpha.into(),
                o0.beta0.into(),
                o1.beta1.into(),
                o0.goodput.into(),
                o1.goodput.into(),
            ])
        })
        .collect();
    let mut table = Table::new(
        "fig7",
        "optimal fixed-rate threshold and variable-rate backoff over estimation error and delay",
        &[
            "est_err_var",
            "alpha",
            "beta0_opt",
            "beta1_opt",
            "goodput0_opt",
            "goodput1_opt",
        ],
    );
    for row in rows {
        table.push(row?);
    }
    Ok(vec![table])
}

/// Goodput of both strategies after optimizing the parameter at full
/// feedback and then reducing feedback to the matched M.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptedStrategies {
    pub users: usize,
    pub matched_best_m: usize,
    pub beta0: f64,
    pub beta1: f64,
    pub fixed: StrategyMetrics,
    pub variable: StrategyMetrics,
}

pub fn adapt_strategies(total: usize) -> Result<AdaptedStrategies, AppError> {
    let imp = reference_impairments();
    let full = four_cluster(total, 8)?;
    let o0 = optimize_beta0(&full, &imp)?;
    let o1 = optimize_beta1(&full, &imp)?;
    let sys = full.with_best_m(o1.matched_best_m)?;
    Ok(AdaptedStrategies {
        users: total,
        matched_best_m: o1.matched_best_m,
        beta0: o0.beta0,
        beta1: o1.beta1,
        fixed: fixed_rate_metrics(&sys, &imp, o0.beta0)?,
        variable: variable_rate_metrics(&sys, &imp, o1.beta1)?,
    })
}

pub fn fig8(users: &[usize]) -> Result<Vec<Table>, AppError> {
    let results: Vec<Result<AdaptedStrategies, AppError>> = users.par_iter().map(|&k| adapt_strategies(k)).collect();
    let mut table = Table::new(
        "fig8",
        "goodput of optimized fixed and variable rate with matched partial feedback on four clusters",
        &["K", "strategy", "M_star", "beta0", "beta1", "goodput", "outage"],
    );
    for r in results {
        let r = r?;
        table.push(vec![
            r.users.into(),
            "fixed".into(),
            r.matched_best_m.into(),
            r.beta0.into(),
            Value::Empty,
            r.fixed.goodput.into(),
            r.fixed.outage.into(),
        ]);
        table.push(vec![
            r.users.into(),
            "variable".into(),
            r.matched_best_m.into(),
            Value::Empty,
            r.beta1.into(),
            r.variable.goodput.into(),
            r.variable.outage.into(),
        ]);
    }
    Ok(vec![table])
}
