//! Single-config experiment runs.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{ExperimentConfig, ResolvedExperiment};
use super::output::{summary_csv, trace_csv, write_file, SummaryRow, TraceMeta};
use crate::algorithms::{run_algorithm, RunTrace};
use crate::error::{Error, Result};

/// Smallest recorded `t` whose average-iterate gradient norm is at most
/// `epsilon`.
pub fn iterations_to_target(trace: &RunTrace, epsilon: f64) -> Option<usize> {
    trace
        .records
        .iter()
        .find(|r| r.grad_norm_avg_iterate <= epsilon)
        .map(|r| r.t)
}

/// Communication rounds completed by the record where the target is first met.
pub fn comm_rounds_to_target(trace: &RunTrace, epsilon: f64) -> Option<usize> {
    trace
        .records
        .iter()
        .find(|r| r.grad_norm_avg_iterate <= epsilon)
        .map(|r| r.comm_rounds_so_far)
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub meta: TraceMeta,
    pub trace: RunTrace,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub resolved: ResolvedExperiment,
    pub runs: Vec<SeedRun>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentResult {
    pub fn all_diverged(&self) -> bool {
        self.runs.iter().all(|r| r.trace.diverged())
    }

    pub fn trace_path(&self, dir: &Path, seed: u64) -> PathBuf {
        dir.join(format!("{}_seed{seed}.csv", self.resolved.run_id))
    }

    pub fn summary_path(&self, dir: &Path) -> PathBuf {
        dir.join(format!("{}_summary.csv", self.resolved.run_id))
    }

    /// Writes one trace CSV per seed and the summary CSV; returns the paths
    /// written, summary last.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut paths = Vec::with_capacity(self.runs.len() + 1);
        for run in &self.runs {
            let path = self.trace_path(dir, run.seed);
            write_file(&path, &trace_csv(&run.meta, &run.trace))?;
            paths.push(path);
        }
        let path = self.summary_path(dir);
        write_file(&path, &summary_csv(&self.summary))?;
        paths.push(path);
        Ok(paths)
    }
}

pub fn summary_row(
    meta: &TraceMeta,
    iterations: usize,
    trace: &RunTrace,
    epsilon: f64,
) -> SummaryRow {
    let last = trace.last();
    SummaryRow {
        meta: meta.clone(),
        iterations,
        iterations_to_target: iterations_to_target(trace, epsilon),
        comm_rounds_to_target: comm_rounds_to_target(trace, epsilon),
        final_t: last.t,
        final_f: last.f_avg_iterate,
        final_grad_norm: last.grad_norm_avg_iterate,
        max_consensus_dev: trace.max_consensus_dev,
        clip_fraction: if trace.step_count == 0 {
            0.0
        } else {
            trace.clip_count as f64 / trace.step_count as f64
        },
        comm_rounds: trace.comm_rounds,
        diverged: trace.diverged(),
    }
}

/// Runs every seed of an already resolved experiment. Seeds run in parallel;
/// results keep config order.
pub fn run_resolved(r: &ResolvedExperiment) -> Result<ExperimentResult> {
    let runs = r
        .seeds
        .par_iter()
        .map(|&seed| {
            let trace = run_algorithm(
                r.algorithm,
                &r.objective,
                &r.noise,
                &r.hyper,
                &r.x0,
                seed,
                r.record_every,
            )?;
            let meta = TraceMeta {
                run_id: r.run_id.clone(),
                algo: r.algorithm.name().to_string(),
                objective: r.objective.name().to_string(),
                dim: r.objective.dim(),
                workers: r.hyper.workers,
                interval: r.hyper.interval,
                eta: r.hyper.eta,
                gamma: r.hyper.gamma,
                sigma: r.noise.sigma(),
                seed,
            };
            Ok(SeedRun { seed, meta, trace })
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = runs
        .iter()
        .map(|run| summary_row(&run.meta, r.hyper.iterations, &run.trace, r.epsilon_target))
        .collect();
    Ok(ExperimentResult {
        resolved: r.clone(),
        runs,
        summary,
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    run_resolved(&cfg.resolve()?)
}

/// Runs and writes outputs to the configured directory (or `default_dir`).
pub fn run_and_write(
    cfg: &ExperimentConfig,
    default_dir: &Path,
) -> Result<(ExperimentResult, Vec<PathBuf>)> {
    let result = run_experiment(cfg)?;
    let dir = cfg.output.as_deref().unwrap_or(default_dir);
    if dir.exists() && !dir.is_dir() {
        return Err(Error::Config(format!(
            "output {} is not a directory",
            dir.display()
        )));
    }
    let paths = result.write(dir)?;
    Ok((result, paths))
}
