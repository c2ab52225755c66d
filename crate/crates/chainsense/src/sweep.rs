//! Parallel `(n_seq, B, T)` error sweep.
//!
//! Each cell gets its own seed from the master seed and its coordinates, so
//! results do not depend on the worker count or completion order.

use std::sync::atomic::{AtomicUsize, Ordering};

use chainsense_core::inference::{ErrorEstimator, LikelihoodTable};
use chainsense_core::protocol::{Probe, Schedule};
use chainsense_core::rng::{derive_seed, stream_rng};
use chainsense_core::scaling::{ErrorCell, TimeBudget};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{CliError, Result};

/// One cell of the sweep before it runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellJob {
    pub n_seq: usize,
    pub field_index: usize,
    pub time_index: usize,
    pub field: f64,
    /// Requested total time.
    pub target_time: f64,
    pub samples: u64,
    /// Realized total time for `samples`.
    pub total_time: f64,
    pub seed: u64,
}

/// Jobs sharing one sequence length, and hence one likelihood table.
#[derive(Debug, Clone)]
pub struct SweepBlock {
    pub n_seq: usize,
    pub schedule: Schedule,
    pub budget: TimeBudget,
    pub jobs: Vec<CellJob>,
}

pub fn cell_seed(master: u64, n_seq: usize, field_index: usize, time_index: usize) -> u64 {
    derive_seed(master, &[n_seq as u64, field_index as u64, time_index as u64])
}

/// Lays out every cell; the sample count at each target time is
/// `round(T / per_sample(n_seq))`, at least one.
pub fn plan(config: &RunConfig) -> Result<Vec<SweepBlock>> {
    let master = config.rng.seed;
    config
        .sweep
        .n_seq
        .iter()
        .map(|&n_seq| {
            let schedule = config.schedule_for(n_seq)?;
            let budget = config.budget(&schedule)?;
            let mut jobs = Vec::new();
            for (time_index, &target) in config.sweep.total_times.iter().enumerate() {
                let samples = budget.samples_for_time(n_seq, target).max(1);
                let total_time = budget.total_time(n_seq, samples);
                for (field_index, &field) in config.sweep.fields.iter().enumerate() {
                    jobs.push(CellJob {
                        n_seq,
                        field_index,
                        time_index,
                        field,
                        target_time: target,
                        samples,
                        total_time,
                        seed: cell_seed(master, n_seq, field_index, time_index),
                    });
                }
            }
            Ok(SweepBlock {
                n_seq,
                schedule,
                budget,
                jobs,
            })
        })
        .collect()
}

pub fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::config("output.workers", e.to_string()))
}

/// Likelihood table with grid points evaluated in parallel.
pub fn build_table(config: &RunConfig, schedule: &Schedule) -> Result<LikelihoodTable> {
    let template = config.template()?;
    let grid = config.grid()?;
    let rows = grid
        .values()
        .par_iter()
        .map(|&b| Ok(Probe::new(template.with_field(b), schedule.clone())?.distribution()))
        .collect::<chainsense_core::Result<Vec<_>>>()
        .map_err(|e| CliError::core(format!("likelihood table for n_seq={}", schedule.n_seq()), e))?;
    LikelihoodTable::from_rows(template, schedule, &grid, rows)
        .map_err(|e| CliError::core("likelihood table", e))
}

/// Runs every planned cell; results come back in plan order.
pub fn run(config: &RunConfig, blocks: &[SweepBlock], progress: bool) -> Result<Vec<ErrorCell>> {
    let total: usize = blocks.iter().map(|b| b.jobs.len()).sum();
    let done = AtomicUsize::new(0);
    let options = config.estimator_options();
    let repeats = config.inference.repeats;
    let mut cells = Vec::with_capacity(total);
    for block in blocks {
        let table = build_table(config, &block.schedule)?;
        let results = block
            .jobs
            .par_iter()
            .map(|job| {
                let avg = ErrorEstimator::new(&table, job.field, options)
                    .and_then(|est| est.average(job.samples, repeats, job.seed))
                    .map_err(|e| {
                        CliError::core(
                            format!(
                                "cell n_seq={} B/J={} JT={} M_sam={}",
                                job.n_seq, job.field, job.total_time, job.samples
                            ),
                            e,
                        )
                    })?;
                let k = done.fetch_add(1, Ordering::Relaxed) + 1;
                if progress {
                    eprintln!("cells {k}/{total}");
                }
                Ok(ErrorCell {
                    n_seq: job.n_seq,
                    field: job.field,
                    total_time: job.total_time,
                    samples: job.samples,
                    mean: avg.mean,
                    std_error: avg.std_error,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        cells.extend(results);
    }
    Ok(cells)
}

/// Cells drawn from the configured power law instead of simulation.
pub fn synthetic(config: &RunConfig, blocks: &[SweepBlock]) -> Vec<ErrorCell> {
    let law = config.synthetic_law();
    let noise = config.sweep.synthetic_law.noise;
    blocks
        .iter()
        .flat_map(|block| {
            let mut rng = stream_rng(derive_seed(config.rng.seed, &[block.n_seq as u64]), 0);
            let times: Vec<f64> = block
                .jobs
                .iter()
                .filter(|j| j.field_index == 0)
                .map(|j| j.total_time)
                .collect();
            let mut cells = law.table(block.n_seq, &config.sweep.fields, &times, noise, &mut rng);
            for (cell, job) in cells.iter_mut().zip(&block.jobs) {
                cell.samples = job.samples;
            }
            cells
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        RunConfig::from_toml(
            "",
            &[
                "chain.n_sites=3".into(),
                "inference.grid_points=41".into(),
                "inference.repeats=4".into(),
                "sweep.n_seq=[1, 2]".into(),
                "sweep.fields=[0.1, 0.2]".into(),
                "sweep.alpha_fields=[0.1]".into(),
                "sweep.total_times=[1e4, 1e5]".into(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn plan_covers_every_coordinate() {
        let blocks = plan(&small()).unwrap();
        assert_eq!(blocks.len(), 2);
        for b in &blocks {
            assert_eq!(b.jobs.len(), 4);
            for j in &b.jobs {
                assert_eq!(j.samples, b.budget.samples_for_time(b.n_seq, j.target_time));
                assert!((j.total_time - j.target_time).abs() <= b.budget.per_sample(b.n_seq) / 2.0 + 1e-9);
            }
        }
        let seeds: std::collections::BTreeSet<u64> =
            blocks.iter().flat_map(|b| b.jobs.iter().map(|j| j.seed)).collect();
        assert_eq!(seeds.len(), 8);
    }

    #[test]
    fn results_do_not_depend_on_workers() {
        let config = small();
        let blocks = plan(&config).unwrap();
        let one = thread_pool(1).unwrap().install(|| run(&config, &blocks, false)).unwrap();
        let three = thread_pool(3).unwrap().install(|| run(&config, &blocks, false)).unwrap();
        assert_eq!(one, three);
        assert_eq!(one.len(), 8);
        assert!(one.iter().all(|c| c.mean > 0.0 && c.mean.is_finite()));
    }
}
