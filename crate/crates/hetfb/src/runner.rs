//! Parallel execution of Monte Carlo experiments.
//!
//! Chunks of trials run on the rayon pool; their partial results are
//! collected in chunk order and folded serially, so the estimates are
//! bit-identical to the serial kernels in `hetfb_core::montecarlo` whatever
//! the number of worker threads.

use std::ops::Range;

use hetfb_core::montecarlo::{
    check_comparable, check_imperfect, check_perfect, chunks, compare_imperfect, compare_perfect, imperfect_chunk,
    perfect_chunk, Accumulator, Comparison, EstimateWithError, ExperimentSpec, ImperfectEstimate, ImperfectPartial,
};
use hetfb_core::Result;
use rayon::prelude::*;

/// Evaluates `work` on every trial chunk in parallel and returns the results
/// in chunk order.
pub fn map_chunks<T, F>(trials: u64, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<u64>) -> T + Sync,
{
    let ranges: Vec<Range<u64>> = chunks(trials).collect();
    ranges.into_par_iter().map(&work).collect()
}

pub fn run_perfect(spec: &ExperimentSpec) -> Result<EstimateWithError> {
    check_perfect(spec)?;
    let parts = map_chunks(spec.trials, |r| perfect_chunk(spec, r));
    let mut total = Accumulator::default();
    parts.iter().for_each(|p| total.merge(p));
    Ok(total.estimate())
}

pub fn run_imperfect(spec: &ExperimentSpec) -> Result<ImperfectEstimate> {
    check_imperfect(spec)?;
    let parts = map_chunks(spec.trials, |r| imperfect_chunk(spec, r));
    let mut total = ImperfectPartial::default();
    for p in parts {
        total.merge(&p?);
    }
    Ok(total.finish())
}

/// Outcome of a run: the estimates and, when requested, their comparison
/// with the analytic engine.
#[derive(Debug, Clone, PartialEq)]
pub enum RunResult {
    Perfect(EstimateWithError),
    Imperfect(ImperfectEstimate),
}

pub fn run(spec: &ExperimentSpec) -> Result<RunResult> {
    if spec.impairments.is_some() {
        run_imperfect(spec).map(RunResult::Imperfect)
    } else {
        run_perfect(spec).map(RunResult::Perfect)
    }
}

pub fn compare(spec: &ExperimentSpec, result: &RunResult) -> Result<Vec<Comparison>> {
    match result {
        RunResult::Perfect(e) => compare_perfect(spec, *e),
        RunResult::Imperfect(e) => compare_imperfect(spec, e),
    }
}

/// Runs the experiment in parallel and compares every estimate with theory.
pub fn cross_validate(spec: &ExperimentSpec) -> Result<Vec<Comparison>> {
    check_comparable(spec)?;
    let result = run(spec)?;
    compare(spec, &result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use hetfb_core::channel::{Cluster, ImpairmentParams, SystemConfig};
    use hetfb_core::montecarlo::{self, ChannelModel, Strategy};

    #[test]
    fn parallel_matches_serial_bit_for_bit() {
        let sys = SystemConfig::new(16, vec![Cluster::new(1, 3), Cluster::new(4, 3)], 2, 10.0).unwrap();
        let spec = ExperimentSpec::perfect(ChannelModel::SubbandFading, sys.clone(), 1000, 9);
        assert_eq!(run_perfect(&spec).unwrap(), montecarlo::run_perfect(&spec).unwrap());
        let imp = ImpairmentParams::new(0.01, 0.98).unwrap();
        let spec = ExperimentSpec::imperfect(sys, imp, Strategy::FixedRate { beta0: 1.0 }, 700, 9);
        assert_eq!(run_imperfect(&spec).unwrap(), montecarlo::run_imperfect(&spec).unwrap());
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let sys = SystemConfig::homogeneous(8, 2, 4, 2, 10.0).unwrap();
        let spec = ExperimentSpec::perfect(ChannelModel::SubbandFading, sys, 1500, 4);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| run_perfect(&spec).unwrap());
        let b = three.install(|| run_perfect(&spec).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn correlated_model_cannot_be_cross_validated() {
        let cfg = hetfb_core::channel::CorrelatedChannelConfig::exponential(32, 4, 4, 2.0).unwrap();
        let sys = SystemConfig::homogeneous(8, 1, 2, 2, 10.0).unwrap();
        let spec = ExperimentSpec::perfect(ChannelModel::Correlated(cfg), sys, 10, 0);
        assert!(matches!(cross_validate(&spec), Err(hetfb_core::Error::Precondition(_))));
    }
}
