//! Seed sweeps. Each simulation stays single-threaded; with the `parallel`
//! feature, independent seeds are spread over the rayon pool.

use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::complex::build_hex_grid;
use crate::engine::{init_network, DeliveryOrder, NetworkConfig, DEFAULT_MAX_MESSAGES};
use crate::error::EngineError;
use crate::protocol::{ComponentId, Counts};
use crate::scenario::{FireParams, FireProcess};
use crate::verify::audit_interval;

/// One seeded fire simulation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FireRun {
    pub rows: usize,
    pub cols: usize,
    pub theta: f64,
    pub seed: u64,
    pub intervals: u64,
    pub params: FireParams,
    pub delivery: DeliveryOrder,
}

impl FireRun {
    pub fn new(rows: usize, cols: usize, seed: u64, intervals: u64) -> Self {
        Self {
            rows,
            cols,
            theta: 0.5,
            seed,
            intervals,
            params: FireParams::default(),
            delivery: DeliveryOrder::Fifo,
        }
    }
}

/// Outcome of an audited run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub intervals: u64,
    pub discrepancies: usize,
    pub event_check_failures: usize,
    pub complexity_failures: usize,
    pub event_counts: [usize; 9],
    pub ring_messages: u64,
    pub update_messages: u64,
    pub final_state: Vec<(Counts, Option<ComponentId>)>,
}

impl RunSummary {
    pub fn ok(&self) -> bool {
        self.discrepancies == 0 && self.event_check_failures == 0 && self.complexity_failures == 0
    }
}

/// Runs one fire simulation with a full audit after every interval.
pub fn run_fire(run: &FireRun) -> Result<RunSummary, EngineError> {
    let tri = build_hex_grid(run.rows, run.cols)?;
    let mut fire = FireProcess::new(tri.len(), run.theta, run.params, run.seed);
    let config = NetworkConfig {
        theta: run.theta,
        max_messages: DEFAULT_MAX_MESSAGES,
        delivery: run.delivery,
        record_trace: false,
    };
    let mut net = init_network(tri.clone(), fire.field(), config)?;
    let mut s = RunSummary {
        seed: run.seed,
        intervals: run.intervals,
        discrepancies: 0,
        event_check_failures: 0,
        complexity_failures: 0,
        event_counts: [0; 9],
        ring_messages: 0,
        update_messages: 0,
        final_state: Vec::new(),
    };
    for _ in 0..run.intervals {
        let field = fire.step(&tri);
        let a = audit_interval(&mut net, &field)?;
        s.discrepancies += a.discrepancies.len();
        s.event_check_failures += usize::from(!a.events.ok);
        s.complexity_failures += usize::from(!a.complexity.ok());
        s.ring_messages += a.report.ring_messages;
        s.update_messages += a.report.update_messages;
        for e in &a.report.events {
            s.event_counts[usize::from(e.event_type.code()) - 1] += 1;
        }
    }
    s.final_state = net
        .states()
        .iter()
        .map(|st| (st.comp_info, st.comp_id))
        .collect();
    Ok(s)
}

pub fn sweep_sequential(runs: &[FireRun]) -> Vec<Result<RunSummary, EngineError>> {
    runs.iter().map(run_fire).collect()
}

/// Parallel over runs; identical to [`sweep_sequential`] when the
/// `parallel` feature is off.
pub fn sweep_parallel(runs: &[FireRun]) -> Vec<Result<RunSummary, EngineError>> {
    #[cfg(feature = "parallel")]
    {
        runs.par_iter().map(run_fire).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        sweep_sequential(runs)
    }
}

/// Default sweep entry point.
pub fn sweep(runs: &[FireRun]) -> Vec<Result<RunSummary, EngineError>> {
    sweep_parallel(runs)
}

/// Maps `f` over a seed range, in parallel when available. Output order
/// follows the seeds.
pub fn map_seeds<T, F>(seeds: Range<u64>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        seeds.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        seeds.map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_matches_sequential() {
        let runs: Vec<FireRun> = (0..6).map(|s| FireRun::new(6, 6, s, 8)).collect();
        let a: Vec<_> = sweep_sequential(&runs)
            .into_iter()
            .map(Result::unwrap)
            .collect();
        let b: Vec<_> = sweep_parallel(&runs)
            .into_iter()
            .map(Result::unwrap)
            .collect();
        assert_eq!(a, b);
        assert!(a.iter().all(RunSummary::ok));
    }
}
