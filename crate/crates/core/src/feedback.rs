//! CQI computation and best-M selection.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::channel::{ChannelRealization, SystemConfig};
use crate::error::{Error, Result};

/// Reports sent by one user: (subband index, CQI) in descending CQI order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackReport {
    pub user: usize,
    pub cluster: usize,
    pub entries: Vec<(usize, f64)>,
}

/// Mean spectral efficiency over the subcarriers of one subband.
pub fn cqi_subband_avg_rate(gains: &[Complex64], snr: f64) -> Result<f64> {
    if gains.is_empty() {
        return Err(Error::precondition("a subband needs at least one subcarrier"));
    }
    let total: f64 = gains.iter().map(|h| (snr * h.norm_sqr()).ln_1p()).sum();
    Ok(total / (gains.len() as f64 * core::f64::consts::LN_2))
}

/// The `m` largest values with their indices, largest first. Equal values
/// are ordered by index.
pub fn best_m_select(cqis: &[f64], m: usize) -> Result<Vec<(usize, f64)>> {
    if m == 0 || m > cqis.len() {
        return Err(Error::precondition(format!(
            "cannot select {m} of {} values",
            cqis.len()
        )));
    }
    let mut order: Vec<usize> = (0..cqis.len()).collect();
    let by_rank = |a: &usize, b: &usize| cqis[*b].total_cmp(&cqis[*a]).then(a.cmp(b));
    if m < order.len() {
        order.select_nth_unstable_by(m - 1, by_rank);
        order.truncate(m);
    }
    order.sort_unstable_by(by_rank);
    Ok(order.into_iter().map(|i| (i, cqis[i])).collect())
}

/// Number of CQI values reported by each user of cluster `g`.
pub fn cluster_feedback_quota(sys: &SystemConfig, g: usize) -> usize {
    sys.quota(g)
}

/// Best-M reports of every user when the CQI of a subband is its channel
/// power |H|² (the subband model).
pub fn power_feedback(sys: &SystemConfig, channel: &ChannelRealization) -> Vec<FeedbackReport> {
    let mut reports = Vec::with_capacity(sys.num_users());
    let mut cqis = Vec::new();
    for g in 0..sys.num_clusters() {
        let quota = sys.quota(g);
        for user in sys.users_of(g) {
            cqis.clear();
            cqis.extend(channel.gains(user).iter().map(|h| h.norm_sqr()));
            let entries = best_m_select(&cqis, quota).expect("quota never exceeds the subband count");
            reports.push(FeedbackReport {
                user,
                cluster: g,
                entries,
            });
        }
    }
    reports
}

/// Per-block spectral efficiencies of each user on the subcarrier model:
/// `rates[user][rb]`.
pub fn block_rates(channel: &ChannelRealization, subcarriers_per_rb: usize, snr: f64) -> Vec<Vec<f64>> {
    (0..channel.num_users())
        .map(|k| {
            channel
                .gains(k)
                .chunks(subcarriers_per_rb)
                .map(|chunk| cqi_subband_avg_rate(chunk, snr).expect("chunks are nonempty"))
                .collect()
        })
        .collect()
}

/// Best-M reports of every user when the CQI is the subband average rate,
/// built from per-block rates.
pub fn rate_feedback(sys: &SystemConfig, rates: &[Vec<f64>]) -> Vec<FeedbackReport> {
    let mut reports = Vec::with_capacity(sys.num_users());
    let mut cqis = Vec::new();
    for g in 0..sys.num_clusters() {
        let eta = sys.clusters()[g].subband_size;
        let quota = sys.quota(g);
        for user in sys.users_of(g) {
            cqis.clear();
            cqis.extend(rates[user].chunks(eta).map(|c| c.iter().sum::<f64>() / eta as f64));
            let entries = best_m_select(&cqis, quota).expect("quota never exceeds the subband count");
            reports.push(FeedbackReport {
                user,
                cluster: g,
                entries,
            });
        }
    }
    reports
}
