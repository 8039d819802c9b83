//! Speedup (worker count) and communication (interval) sweeps.
//!
//! Scaling policy: a sweep cell re-resolves the base config with the cell's
//! `N` or `I`. In desk and theorem modes the calculator step sizes are
//! recomputed per cell, so `gamma` grows with `N`; in explicit mode `eta` and
//! `gamma` stay fixed.

use std::fmt::Write as _;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::experiment::{run_resolved, ExperimentResult};
use super::output::{opt, SWEEP_HEADER};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Workers,
    Interval,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Workers => "N",
            SweepAxis::Interval => "I",
        }
    }
}

/// Mean and sample standard deviation; `std` is 0 for a single value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(Stat { mean, std })
    }
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub value: usize,
    pub eta: f64,
    pub gamma: f64,
    pub seeds: usize,
    /// Seeds whose trace reached the target.
    pub reached: usize,
    /// `None` unless every seed reached the target.
    pub iterations_to_target: Option<Stat>,
    pub comm_rounds_to_target: Option<Stat>,
    pub final_grad_norm: Stat,
    pub diverged: usize,
    /// Mean iterations-to-target relative to the baseline cell.
    pub iterations_ratio: Option<f64>,
    pub comm_ratio: Option<f64>,
    pub result: ExperimentResult,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn cell(&self, value: usize) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.value == value)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(SWEEP_HEADER);
        out.push('\n');
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                self.axis.name(),
                c.value,
                c.eta,
                c.gamma,
                c.seeds,
                c.reached,
                opt(c.iterations_to_target.map(|s| s.mean)),
                opt(c.iterations_to_target.map(|s| s.std)),
                opt(c.comm_rounds_to_target.map(|s| s.mean)),
                opt(c.comm_rounds_to_target.map(|s| s.std)),
                c.final_grad_norm.mean,
                c.final_grad_norm.std,
                c.diverged,
                opt(c.iterations_ratio),
                opt(c.comm_ratio)
            );
        }
        out
    }
}

fn cell_from(value: usize, result: ExperimentResult) -> SweepCell {
    let rows = &result.summary;
    let its: Vec<f64> = rows
        .iter()
        .filter_map(|r| r.iterations_to_target.map(|v| v as f64))
        .collect();
    let comms: Vec<f64> = rows
        .iter()
        .filter_map(|r| r.comm_rounds_to_target.map(|v| v as f64))
        .collect();
    let all = its.len() == rows.len();
    let grads: Vec<f64> = rows.iter().map(|r| r.final_grad_norm).collect();
    SweepCell {
        value,
        eta: result.resolved.hyper.eta,
        gamma: result.resolved.hyper.gamma,
        seeds: rows.len(),
        reached: its.len(),
        iterations_to_target: if all { Stat::of(&its) } else { None },
        comm_rounds_to_target: if all { Stat::of(&comms) } else { None },
        final_grad_norm: Stat::of(&grads).unwrap_or(Stat {
            mean: f64::NAN,
            std: f64::NAN,
        }),
        diverged: rows.iter().filter(|r| r.diverged).count(),
        iterations_ratio: None,
        comm_ratio: None,
        result,
    }
}

fn ratio(a: Option<Stat>, b: Option<Stat>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) if b.mean > 0.0 => Some(a.mean / b.mean),
        (Some(a), Some(b)) if a.mean == b.mean => Some(1.0),
        _ => None,
    }
}

fn sweep(
    cfg: &ExperimentConfig,
    axis: SweepAxis,
    values: &[usize],
    seeds: Option<&[u64]>,
) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(Error::Config(format!(
            "{} list must be nonempty",
            axis.name()
        )));
    }
    if !values.contains(&1) {
        return Err(Error::Config(format!(
            "{} list must include 1",
            axis.name()
        )));
    }
    if values.contains(&0) {
        return Err(Error::Config(format!(
            "{} values must be positive",
            axis.name()
        )));
    }
    let mut cfg = cfg.clone();
    if let Some(s) = seeds {
        if s.is_empty() {
            return Err(Error::Config("seeds must be nonempty".into()));
        }
        cfg.seeds = s.to_vec();
    }
    let resolved = values
        .iter()
        .map(|&v| match axis {
            SweepAxis::Workers => cfg.resolve_with(Some(v), None),
            SweepAxis::Interval => cfg.resolve_with(None, Some(v)),
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cells = resolved
        .par_iter()
        .zip(values.par_iter())
        .map(|(r, &v)| Ok(cell_from(v, run_resolved(r)?)))
        .collect::<Result<Vec<_>>>()?;

    let base = cells
        .iter()
        .find(|c| c.value == 1)
        .map(|c| (c.iterations_to_target, c.comm_rounds_to_target));
    if let Some((bi, bc)) = base {
        for c in &mut cells {
            c.iterations_ratio = ratio(c.iterations_to_target, bi);
            c.comm_ratio = ratio(c.comm_rounds_to_target, bc);
        }
    }
    Ok(SweepResult { axis, cells })
}

/// Runs the base config's algorithm for each worker count in `n_list`.
pub fn speedup_sweep(
    cfg: &ExperimentConfig,
    n_list: &[usize],
    seeds: Option<&[u64]>,
) -> Result<SweepResult> {
    sweep(cfg, SweepAxis::Workers, n_list, seeds)
}

/// Runs the base config's algorithm for each interval in `i_list` at the
/// configured worker count.
pub fn communication_sweep(
    cfg: &ExperimentConfig,
    i_list: &[usize],
    seeds: Option<&[u64]>,
) -> Result<SweepResult> {
    sweep(cfg, SweepAxis::Interval, i_list, seeds)
}
