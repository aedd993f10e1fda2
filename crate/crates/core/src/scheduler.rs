//! Per-block opportunistic scheduling from partial feedback.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::channel::{ChannelRealization, SystemConfig};
use crate::error::{Error, Result};
use crate::feedback::FeedbackReport;

/// The user chosen for one resource block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub user: usize,
    /// Index of the user's subband containing the block.
    pub subband: usize,
    /// Reported CQI on that subband.
    pub cqi: f64,
}

/// One entry per resource block; `None` marks a scheduling outage.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleDecision {
    pub blocks: Vec<Option<Selection>>,
}

impl ScheduleDecision {
    pub fn scheduled_blocks(&self) -> usize {
        self.blocks.iter().filter(|b| b.is_some()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockOutcome {
    pub scheduled: bool,
    pub attempted_rate: f64,
    pub success: bool,
}

impl BlockOutcome {
    const IDLE: BlockOutcome = BlockOutcome {
        scheduled: false,
        attempted_rate: 0.0,
        success: false,
    };

    /// Bits/s/Hz actually delivered on the block.
    pub fn goodput(&self) -> f64 {
        if self.success {
            self.attempted_rate
        } else {
            0.0
        }
    }

    pub fn failed(&self) -> bool {
        self.scheduled && !self.success
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionOutcome {
    pub blocks: Vec<BlockOutcome>,
}

impl TransmissionOutcome {
    pub fn mean_goodput(&self) -> f64 {
        self.blocks.iter().map(BlockOutcome::goodput).sum::<f64>() / self.blocks.len() as f64
    }

    pub fn failed_blocks(&self) -> usize {
        self.blocks.iter().filter(|b| b.failed()).count()
    }

    pub fn scheduled_blocks(&self) -> usize {
        self.blocks.iter().filter(|b| b.scheduled).count()
    }
}

/// Gives every resource block to the user with the largest reported CQI on
/// it. Ties go to the lower user id; blocks nobody reported stay idle.
pub fn schedule(reports: &[FeedbackReport], sys: &SystemConfig) -> ScheduleDecision {
    let mut blocks: Vec<Option<Selection>> = vec![None; sys.num_rbs()];
    for report in reports {
        let eta = sys.clusters()[report.cluster].subband_size;
        for &(subband, cqi) in &report.entries {
            for slot in &mut blocks[subband * eta..(subband + 1) * eta] {
                let better = match slot {
                    None => true,
                    Some(cur) => cqi > cur.cqi || (cqi == cur.cqi && report.user < cur.user),
                };
                if better {
                    *slot = Some(Selection {
                        user: report.user,
                        subband,
                        cqi,
                    });
                }
            }
        }
    }
    ScheduleDecision { blocks }
}

/// Fixed-rate transmission at log2(1 + ρβ0); a block fails when the actual
/// channel power does not exceed β0.
pub fn realize_fixed_rate(
    decision: &ScheduleDecision,
    actual: &ChannelRealization,
    beta0: f64,
    snr: f64,
) -> Result<TransmissionOutcome> {
    if !(beta0 >= 0.0) {
        return Err(Error::precondition("the CQI threshold must be nonnegative"));
    }
    let rate = (snr * beta0).ln_1p() / core::f64::consts::LN_2;
    Ok(realize(decision, actual, |_| (rate, beta0)))
}

/// Variable-rate transmission at log2(1 + ρβ1χ̂); a block fails when the
/// actual channel power does not exceed β1χ̂.
pub fn realize_variable_rate(
    decision: &ScheduleDecision,
    actual: &ChannelRealization,
    beta1: f64,
    snr: f64,
) -> Result<TransmissionOutcome> {
    if !(0.0..=1.0).contains(&beta1) {
        return Err(Error::precondition("the backoff factor must lie in [0, 1]"));
    }
    Ok(realize(decision, actual, |cqi| {
        ((snr * beta1 * cqi).ln_1p() / core::f64::consts::LN_2, beta1 * cqi)
    }))
}

fn realize(
    decision: &ScheduleDecision,
    actual: &ChannelRealization,
    rate_and_threshold: impl Fn(f64) -> (f64, f64),
) -> TransmissionOutcome {
    let blocks = decision
        .blocks
        .iter()
        .map(|b| match b {
            None => BlockOutcome::IDLE,
            Some(sel) => {
                let (rate, threshold) = rate_and_threshold(sel.cqi);
                BlockOutcome {
                    scheduled: true,
                    attempted_rate: rate,
                    success: actual.power(sel.user, sel.subband) > threshold,
                }
            }
        })
        .collect();
    TransmissionOutcome { blocks }
}
