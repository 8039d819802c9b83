//! Optimization engines: local clipped SGD with periodic averaging (CELGC),
//! the naive parallel clipped baseline, single-machine clipped SGD and plain
//! SGD.
//!
//! All engines share one stream convention: the stochastic gradient of worker
//! `i` at iteration `t` is keyed on `(seed, i, t)`, and participant selection
//! at a synchronization after iteration `t` is keyed on
//! `(seed, COORDINATOR, t)`. With a single worker every engine except plain
//! SGD therefore produces the same trajectory.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;

use crate::error::{Error, Result};
use crate::noise::{NoiseModel, NoiseSampler, RngStream, COORDINATOR};
use crate::objectives::ObjectiveSpec;
use crate::vecmath::{mean_unchecked, ParamVector};

/// Absolute slack for the step-length and consensus bounds.
pub const BOUND_SLACK: f64 = 1e-9;

/// Objective values above this mark a run as diverged.
pub const DIVERGENCE_VALUE: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    /// Unclipped step size.
    pub eta: f64,
    /// Upper bound on the length of a clipped step.
    pub gamma: f64,
    /// Synchronization interval.
    pub interval: usize,
    /// Total iterations.
    pub iterations: usize,
    /// Worker count.
    pub workers: usize,
    /// Workers averaged at each synchronization.
    pub participation: usize,
}

impl HyperParams {
    /// Full participation.
    pub fn new(eta: f64, gamma: f64, interval: usize, iterations: usize, workers: usize) -> Self {
        HyperParams {
            eta,
            gamma,
            interval,
            iterations,
            workers,
            participation: workers,
        }
    }

    pub fn with_participation(mut self, k: usize) -> Self {
        self.participation = k;
        self
    }

    pub fn with_workers(mut self, n: usize) -> Self {
        self.workers = n;
        self.participation = n;
        self
    }

    /// `gamma / eta`: clipping is active iff `||g|| >= gamma / eta`.
    pub fn clip_threshold(&self) -> f64 {
        self.gamma / self.eta
    }

    pub fn full_participation(&self) -> bool {
        self.participation == self.workers
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::param(
                "eta",
                format!("must be positive, got {}", self.eta),
            ));
        }
        if !(self.gamma > 0.0) || self.gamma.is_nan() {
            return Err(Error::param(
                "gamma",
                format!("must be positive, got {}", self.gamma),
            ));
        }
        if self.interval == 0 {
            return Err(Error::param("interval", "must be at least 1"));
        }
        if self.workers == 0 {
            return Err(Error::param("workers", "must be at least 1"));
        }
        if self.participation == 0 || self.participation > self.workers {
            return Err(Error::param(
                "participation",
                format!(
                    "must lie in [1, {}], got {}",
                    self.workers, self.participation
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Celgc,
    NaiveParallel,
    ClippedSgd,
    Sgd,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Celgc => "celgc",
            Algorithm::NaiveParallel => "naive-parallel",
            Algorithm::ClippedSgd => "clipped-sgd",
            Algorithm::Sgd => "sgd",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "celgc" => Ok(Algorithm::Celgc),
            "naive-parallel" => Ok(Algorithm::NaiveParallel),
            "clipped-sgd" => Ok(Algorithm::ClippedSgd),
            "sgd" => Ok(Algorithm::Sgd),
            other => Err(Error::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerState {
    pub worker_id: usize,
    pub x: ParamVector,
    pub clip_count: usize,
    pub step_count: usize,
}

impl WorkerState {
    pub fn new(worker_id: usize, x: ParamVector) -> Self {
        WorkerState {
            worker_id,
            x,
            clip_count: 0,
            step_count: 0,
        }
    }
}

/// Metrics at one recorded iteration, evaluated at the average iterate with
/// the analytic gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRecord {
    pub t: usize,
    pub f_avg_iterate: f64,
    pub grad_norm_avg_iterate: f64,
    pub consensus_max_dev: f64,
    pub clip_fraction_window: f64,
    pub comm_rounds_so_far: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    pub iteration: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub records: Vec<MetricRecord>,
    pub comm_rounds: usize,
    pub final_average: ParamVector,
    pub divergence: Option<Divergence>,
    pub clip_count: usize,
    pub step_count: usize,
    /// Max over every iteration (not only recorded ones) of the consensus
    /// deviation.
    pub max_consensus_dev: f64,
    /// Iterations where the consensus deviation exceeded `2 gamma I`; only
    /// counted under full participation.
    pub consensus_violations: usize,
    /// Worker or shared-iterate steps longer than `gamma`.
    pub step_violations: usize,
    /// Average-iterate steps longer than `gamma`.
    pub avg_step_violations: usize,
}

impl RunTrace {
    pub fn diverged(&self) -> bool {
        self.divergence.is_some()
    }

    pub fn last(&self) -> &MetricRecord {
        self.records
            .last()
            .expect("a trace always holds the initial record")
    }

    /// Whether any record or counter breaks the per-run invariants.
    pub fn invariant_violations(&self) -> usize {
        self.consensus_violations + self.step_violations + self.avg_step_violations
    }
}

/// Returns `x - s g` with `s = min(eta, gamma / ||g||)`, and whether the step
/// was clipped (`||g|| >= gamma / eta`).
pub fn clipped_step(
    x: &ParamVector,
    g: &ParamVector,
    eta: f64,
    gamma: f64,
) -> Result<(ParamVector, bool)> {
    if !(eta > 0.0) {
        return Err(Error::param("eta", "must be positive"));
    }
    if !(gamma > 0.0) {
        return Err(Error::param("gamma", "must be positive"));
    }
    if x.dim() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            actual: g.dim(),
        });
    }
    g.check_finite()?;
    let mut out = x.clone();
    let (clipped, _) = apply_clipped_step(&mut out, g, eta, gamma);
    Ok((out, clipped))
}

/// In-place clipped step; returns (clipped, step length).
fn apply_clipped_step(x: &mut ParamVector, g: &ParamVector, eta: f64, gamma: f64) -> (bool, f64) {
    let norm = g.norm();
    // ||g|| = 0 takes eta; the update is zero either way.
    let s = if norm > 0.0 {
        eta.min(gamma / norm)
    } else {
        eta
    };
    let clipped = norm >= gamma / eta;
    x.add_scaled(-s, g);
    (clipped, s * norm)
}

/// Averages the workers at `chosen` and assigns the mean to each of them.
pub fn average_participants(workers: &mut [WorkerState], chosen: &[usize]) -> Result<()> {
    if chosen.is_empty() {
        return Err(Error::Empty("participant set"));
    }
    if let Some(&i) = chosen.iter().find(|&&i| i >= workers.len()) {
        return Err(Error::param(
            "participants",
            format!("worker index {i} out of range"),
        ));
    }
    let mean = mean_unchecked(chosen.iter().map(|&i| &workers[i].x));
    for &i in chosen {
        workers[i].x = mean.clone();
    }
    Ok(())
}

/// Synchronization: picks `participation` workers uniformly without
/// replacement (all of them when `participation == workers.len()`) and resets
/// each to their mean. Returns the chosen indices in ascending order.
pub fn sync_average(
    workers: &mut [WorkerState],
    participation: usize,
    stream: RngStream,
) -> Result<Vec<usize>> {
    let n = workers.len();
    if participation == 0 || participation > n {
        return Err(Error::param(
            "participation",
            format!("must lie in [1, {n}], got {participation}"),
        ));
    }
    let chosen = if participation == n {
        (0..n).collect()
    } else {
        let mut rng = stream.rng();
        let mut v = index::sample(&mut rng, n, participation).into_vec();
        v.sort_unstable();
        v
    };
    average_participants(workers, &chosen)?;
    Ok(chosen)
}

struct Recorder<'a> {
    obj: &'a ObjectiveSpec,
    record_every: usize,
    iterations: usize,
    records: Vec<MetricRecord>,
    window_clips: usize,
    window_decisions: usize,
}

impl<'a> Recorder<'a> {
    fn new(obj: &'a ObjectiveSpec, record_every: usize, iterations: usize) -> Self {
        Recorder {
            obj,
            record_every,
            iterations,
            records: Vec::with_capacity(iterations / record_every.max(1) + 2),
            window_clips: 0,
            window_decisions: 0,
        }
    }

    fn decision(&mut self, clipped: bool) {
        self.window_decisions += 1;
        if clipped {
            self.window_clips += 1;
        }
    }

    fn due(&self, t: usize) -> bool {
        t.is_multiple_of(self.record_every) || t == self.iterations
    }

    fn push(&mut self, t: usize, avg: &ParamVector, consensus: f64, comm_rounds: usize) {
        let clip_fraction = if self.window_decisions == 0 {
            0.0
        } else {
            self.window_clips as f64 / self.window_decisions as f64
        };
        self.records.push(MetricRecord {
            t,
            f_avg_iterate: self.obj.value(avg),
            grad_norm_avg_iterate: self.obj.gradient(avg).norm(),
            consensus_max_dev: consensus,
            clip_fraction_window: clip_fraction,
            comm_rounds_so_far: comm_rounds,
        });
        self.window_clips = 0;
        self.window_decisions = 0;
    }
}

fn divergence_check(obj: &ObjectiveSpec, x: &ParamVector, t: usize) -> Option<Divergence> {
    if let Err(e) = x.check_finite() {
        return Some(Divergence {
            iteration: t,
            reason: e.to_string(),
        });
    }
    let f = obj.value(x);
    if !f.is_finite() || f > DIVERGENCE_VALUE {
        return Some(Divergence {
            iteration: t,
            reason: format!("objective value {f} exceeds {DIVERGENCE_VALUE:e}"),
        });
    }
    None
}

fn prepare(
    obj: &ObjectiveSpec,
    noise: &NoiseModel,
    x0: &ParamVector,
    record_every: usize,
) -> Result<NoiseSampler> {
    obj.check_point(x0)?;
    x0.check_finite()?;
    if record_every == 0 {
        return Err(Error::param("record_every", "must be at least 1"));
    }
    noise.sampler(obj.dim())
}

/// Local clipped SGD on `workers` nodes with averaging after every
/// `interval`-th update.
pub fn run_celgc(
    obj: &ObjectiveSpec,
    noise: &NoiseModel,
    hp: &HyperParams,
    x0: &ParamVector,
    seed: u64,
    record_every: usize,
) -> Result<RunTrace> {
    hp.validate()?;
    let sampler = prepare(obj, noise, x0, record_every)?;
    let n = hp.workers;
    let consensus_bound = 2.0 * hp.gamma * hp.interval as f64 + BOUND_SLACK;
    let step_bound = hp.gamma + BOUND_SLACK;

    let mut workers: Vec<WorkerState> = (0..n).map(|i| WorkerState::new(i, x0.clone())).collect();
    let mut rec = Recorder::new(obj, record_every, hp.iterations);
    let mut avg = x0.clone();
    let mut comm_rounds = 0;
    let mut max_consensus: f64 = 0.0;
    let (mut consensus_violations, mut step_violations, mut avg_step_violations) = (0, 0, 0);
    let mut divergence = None;
    rec.push(0, &avg, 0.0, 0);

    for t in 0..hp.iterations {
        for w in workers.iter_mut() {
            let g = sampler.stochastic_gradient(
                obj,
                &w.x,
                RngStream::new(seed, w.worker_id as u64, t as u64),
            );
            let (clipped, len) = apply_clipped_step(&mut w.x, &g, hp.eta, hp.gamma);
            w.step_count += 1;
            if clipped {
                w.clip_count += 1;
            }
            if len > step_bound {
                step_violations += 1;
            }
            rec.decision(clipped);
        }
        if (t + 1) % hp.interval == 0 {
            sync_average(
                &mut workers,
                hp.participation,
                RngStream::new(seed, COORDINATOR, t as u64),
            )?;
            // A single node exchanges nothing.
            if n > 1 {
                comm_rounds += 1;
            }
        }

        let next = mean_unchecked(workers.iter().map(|w| &w.x));
        if next.distance(&avg) > step_bound {
            avg_step_violations += 1;
        }
        avg = next;
        if let Some(d) = divergence_check(obj, &avg, t + 1) {
            divergence = Some(d);
            break;
        }
        let consensus = workers
            .iter()
            .map(|w| w.x.distance(&avg))
            .fold(0.0, f64::max);
        max_consensus = max_consensus.max(consensus);
        if hp.full_participation() && consensus > consensus_bound {
            consensus_violations += 1;
        }
        if rec.due(t + 1) {
            rec.push(t + 1, &avg, consensus, comm_rounds);
        }
    }

    Ok(RunTrace {
        records: rec.records,
        comm_rounds,
        final_average: avg,
        divergence,
        clip_count: workers.iter().map(|w| w.clip_count).sum(),
        step_count: workers.iter().map(|w| w.step_count).sum(),
        max_consensus_dev: max_consensus,
        consensus_violations,
        step_violations,
        avg_step_violations,
    })
}

/// Per-iteration gradient averaging across workers followed by one clipped
/// step on the shared iterate.
pub fn run_naive_parallel_clip(
    obj: &ObjectiveSpec,
    noise: &NoiseModel,
    hp: &HyperParams,
    x0: &ParamVector,
    seed: u64,
    record_every: usize,
) -> Result<RunTrace> {
    hp.validate()?;
    let sampler = prepare(obj, noise, x0, record_every)?;
    shared_iterate_loop(obj, &sampler, hp, x0, seed, record_every, hp.workers, true)
}

/// Single-machine clipped SGD; `hp.workers` is ignored.
pub fn run_clipped_sgd(
    obj: &ObjectiveSpec,
    noise: &NoiseModel,
    hp: &HyperParams,
    x0: &ParamVector,
    seed: u64,
    record_every: usize,
) -> Result<RunTrace> {
    hp.with_workers(1).validate()?;
    let sampler = prepare(obj, noise, x0, record_every)?;
    shared_iterate_loop(obj, &sampler, hp, x0, seed, record_every, 1, true)
}

/// Fixed-step SGD `x <- x - eta g`. Divergence is recorded in the trace.
pub fn run_sgd(
    obj: &ObjectiveSpec,
    noise: &NoiseModel,
    hp: &HyperParams,
    x0: &ParamVector,
    seed: u64,
    record_every: usize,
) -> Result<RunTrace> {
    if !(hp.eta >= 0.0 && hp.eta.is_finite()) {
        return Err(Error::param(
            "eta",
            format!("must be nonnegative, got {}", hp.eta),
        ));
    }
    let sampler = prepare(obj, noise, x0, record_every)?;
    shared_iterate_loop(obj, &sampler, hp, x0, seed, record_every, 1, false)
}

#[allow(clippy::too_many_arguments)]
fn shared_iterate_loop(
    obj: &ObjectiveSpec,
    sampler: &NoiseSampler,
    hp: &HyperParams,
    x0: &ParamVector,
    seed: u64,
    record_every: usize,
    workers: usize,
    clip: bool,
) -> Result<RunTrace> {
    let step_bound = hp.gamma + BOUND_SLACK;
    let mut rec = Recorder::new(obj, record_every, hp.iterations);
    let mut x = x0.clone();
    let mut comm_rounds = 0;
    let (mut clip_count, mut step_count) = (0, 0);
    let (mut step_violations, mut avg_step_violations) = (0, 0);
    let mut divergence = None;
    rec.push(0, &x, 0.0, 0);

    for t in 0..hp.iterations {
        let grads: Vec<ParamVector> = (0..workers)
            .map(|i| sampler.stochastic_gradient(obj, &x, RngStream::new(seed, i as u64, t as u64)))
            .collect();
        let g = mean_unchecked(grads.iter());
        if workers > 1 {
            comm_rounds += 1;
        }
        step_count += 1;
        if clip {
            let (clipped, len) = apply_clipped_step(&mut x, &g, hp.eta, hp.gamma);
            if clipped {
                clip_count += 1;
            }
            if len > step_bound {
                step_violations += 1;
                avg_step_violations += 1;
            }
            rec.decision(clipped);
        } else {
            x.add_scaled(-hp.eta, &g);
            rec.decision(false);
        }
        if let Some(d) = divergence_check(obj, &x, t + 1) {
            divergence = Some(d);
            break;
        }
        if rec.due(t + 1) {
            rec.push(t + 1, &x, 0.0, comm_rounds);
        }
    }

    Ok(RunTrace {
        records: rec.records,
        comm_rounds,
        final_average: x,
        divergence,
        clip_count,
        step_count,
        max_consensus_dev: 0.0,
        consensus_violations: 0,
        step_violations,
        avg_step_violations,
    })
}

/// Dispatches on `algorithm`.
pub fn run_algorithm(
    algorithm: Algorithm,
    obj: &ObjectiveSpec,
    noise: &NoiseModel,
    hp: &HyperParams,
    x0: &ParamVector,
    seed: u64,
    record_every: usize,
) -> Result<RunTrace> {
    match algorithm {
        Algorithm::Celgc => run_celgc(obj, noise, hp, x0, seed, record_every),
        Algorithm::NaiveParallel => run_naive_parallel_clip(obj, noise, hp, x0, seed, record_every),
        Algorithm::ClippedSgd => run_clipped_sgd(obj, noise, hp, x0, seed, record_every),
        Algorithm::Sgd => run_sgd(obj, noise, hp, x0, seed, record_every),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{make_quadratic, make_quartic};

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    fn noise() -> NoiseModel {
        NoiseModel::truncated_gaussian(1.0, None).unwrap()
    }

    #[test]
    fn clipped_step_examples() {
        let (x, clipped) = clipped_step(&pv(&[0.0, 0.0]), &pv(&[3.0, 4.0]), 0.2, 0.5).unwrap();
        assert!(clipped);
        assert!(x.distance(&pv(&[-0.3, -0.4])) < 1e-12);

        // ||g|| = 0.5 < gamma / eta = 2.5
        let (x, clipped) = clipped_step(&pv(&[1.0, 1.0]), &pv(&[0.3, 0.4]), 0.2, 0.5).unwrap();
        assert!(!clipped);
        assert!(x.distance(&pv(&[1.0 - 0.06, 1.0 - 0.08])) < 1e-12);

        let (x, clipped) = clipped_step(&pv(&[2.0]), &pv(&[0.0]), 0.2, 0.5).unwrap();
        assert!(!clipped);
        assert_eq!(x, pv(&[2.0]));
    }

    #[test]
    fn clipped_step_tie_counts_as_clipped() {
        // ||g|| = 5 = gamma / eta
        let (x, clipped) = clipped_step(&pv(&[0.0, 0.0]), &pv(&[3.0, 4.0]), 0.1, 0.5).unwrap();
        assert!(clipped);
        assert!((x.norm() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn clipped_step_errors() {
        let x = pv(&[0.0]);
        assert!(clipped_step(&x, &pv(&[1.0]), 0.0, 1.0).is_err());
        assert!(clipped_step(&x, &pv(&[1.0]), 1.0, 0.0).is_err());
        assert!(clipped_step(&x, &ParamVector::from_raw(vec![f64::NAN]), 1.0, 1.0).is_err());
        assert!(clipped_step(&x, &pv(&[1.0, 2.0]), 1.0, 1.0).is_err());
    }

    #[test]
    fn sync_average_examples() {
        let mut ws = vec![
            WorkerState::new(0, pv(&[0.0, 0.0])),
            WorkerState::new(1, pv(&[2.0, 2.0])),
        ];
        sync_average(&mut ws, 2, RngStream::new(0, COORDINATOR, 0)).unwrap();
        assert_eq!(ws[0].x, pv(&[1.0, 1.0]));
        assert_eq!(ws[1].x, pv(&[1.0, 1.0]));

        let mut ws: Vec<_> = [0.0, 5.0, 4.0]
            .iter()
            .enumerate()
            .map(|(i, &v)| WorkerState::new(i, pv(&[v])))
            .collect();
        let before = ws.clone();
        let chosen = sync_average(&mut ws, 1, RngStream::new(3, COORDINATOR, 7)).unwrap();
        assert_eq!(chosen.len(), 1);
        assert_eq!(ws, before);

        average_participants(&mut ws, &[0, 2]).unwrap();
        assert_eq!(ws[0].x, pv(&[2.0]));
        assert_eq!(ws[2].x, pv(&[2.0]));
        assert_eq!(ws[1].x, pv(&[5.0]));

        assert!(sync_average(&mut ws, 0, RngStream::new(0, 0, 0)).is_err());
        assert!(sync_average(&mut ws, 4, RngStream::new(0, 0, 0)).is_err());
    }

    #[test]
    fn partial_sync_touches_only_chosen() {
        let mut ws: Vec<_> = (0..8)
            .map(|i| WorkerState::new(i, pv(&[i as f64, -(i as f64)])))
            .collect();
        let before = ws.clone();
        let chosen = sync_average(&mut ws, 6, RngStream::new(42, COORDINATOR, 3)).unwrap();
        assert_eq!(chosen.len(), 6);
        let mean = mean_unchecked(chosen.iter().map(|&i| &before[i].x));
        for i in 0..8 {
            if chosen.contains(&i) {
                assert_eq!(ws[i].x, mean);
            } else {
                assert_eq!(ws[i].x, before[i].x);
            }
        }
        let again =
            sync_average(&mut before.clone(), 6, RngStream::new(42, COORDINATOR, 3)).unwrap();
        assert_eq!(chosen, again);
    }

    #[test]
    fn clipped_sgd_quadratic_contracts() {
        let q = make_quadratic(2).unwrap();
        let hp = HyperParams::new(0.1, 1e6, 1, 50, 1);
        let tr = run_clipped_sgd(&q, &NoiseModel::Zero, &hp, &pv(&[1.0, -2.0]), 0, 1).unwrap();
        assert_eq!(tr.records.len(), 51);
        for r in &tr.records {
            let expected = 0.9f64.powi(r.t as i32) * 5f64.sqrt();
            assert!((r.grad_norm_avg_iterate - expected).abs() <= 1e-12 * expected.max(1.0));
            assert_eq!(r.clip_fraction_window, 0.0);
        }
        assert_eq!(tr.comm_rounds, 0);
    }

    #[test]
    fn clipped_sgd_quartic_early_steps_are_gamma() {
        let q = make_quartic(1).unwrap();
        let hp = HyperParams::new(0.01, 0.5, 1, 5, 1);
        let tr = run_clipped_sgd(&q, &NoiseModel::Zero, &hp, &pv(&[10.0]), 0, 1).unwrap();
        for (k, r) in tr.records.iter().enumerate() {
            let x = 10.0 - 0.5 * k as f64;
            assert!((r.f_avg_iterate - x.powi(4)).abs() < 1e-9 * x.powi(4));
        }
        assert_eq!(tr.clip_count, 5);
    }

    #[test]
    fn zero_iterations_record_only_initial_state() {
        let q = make_quartic(2).unwrap();
        let hp = HyperParams::new(0.01, 0.5, 1, 0, 1);
        let x0 = pv(&[1.0, 2.0]);
        let tr = run_clipped_sgd(&q, &noise(), &hp, &x0, 0, 10).unwrap();
        assert_eq!(tr.records.len(), 1);
        assert_eq!(tr.records[0].t, 0);
        assert_eq!(tr.records[0].f_avg_iterate, 17.0);
        assert_eq!(tr.final_average, x0);
    }

    #[test]
    fn sgd_examples() {
        let q = make_quadratic(2).unwrap();
        let hp = HyperParams::new(0.1, 1.0, 1, 30, 1);
        let tr = run_sgd(&q, &NoiseModel::Zero, &hp, &pv(&[1.0, 0.0]), 0, 1).unwrap();
        for r in &tr.records {
            let expected = 0.9f64.powi(r.t as i32);
            assert!((r.grad_norm_avg_iterate - expected).abs() < 1e-12);
        }

        let q1 = make_quartic(1).unwrap();
        let hp = HyperParams::new(0.1, 1.0, 1, 100, 1);
        let tr = run_sgd(&q1, &NoiseModel::Zero, &hp, &pv(&[10.0]), 0, 1).unwrap();
        let d = tr.divergence.as_ref().expect("diverges");
        assert_eq!(d.iteration, 2);
        assert!(tr.records.len() <= 2);
        assert_eq!(tr.records[1].f_avg_iterate, 390f64.powi(4));

        let hp = HyperParams::new(0.0, 1.0, 1, 20, 1);
        let x0 = pv(&[0.3, -0.2]);
        let tr = run_sgd(&q, &noise(), &hp, &x0, 1, 1).unwrap();
        assert_eq!(tr.final_average, x0);
    }

    #[test]
    fn naive_parallel_counts_every_iteration() {
        let q = make_quartic(3).unwrap();
        let hp = HyperParams::new(0.01, 0.05, 1, 37, 4);
        let tr = run_naive_parallel_clip(&q, &noise(), &hp, &pv(&[1.0, 0.0, 0.0]), 3, 5).unwrap();
        assert_eq!(tr.comm_rounds, 37);
        assert_eq!(tr.last().comm_rounds_so_far, 37);
        assert_eq!(tr.last().t, 37);
    }

    #[test]
    fn naive_parallel_zero_noise_is_clipped_gd() {
        let q = make_quartic(2).unwrap();
        let hp = HyperParams::new(0.01, 0.1, 1, 200, 5);
        let x0 = pv(&[2.0, -1.0]);
        let a = run_naive_parallel_clip(&q, &NoiseModel::Zero, &hp, &x0, 0, 1).unwrap();
        let b = run_clipped_sgd(&q, &NoiseModel::Zero, &hp, &x0, 0, 1).unwrap();
        assert_eq!(a.final_average, b.final_average);
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!(ra.grad_norm_avg_iterate, rb.grad_norm_avg_iterate);
        }
    }

    #[test]
    fn celgc_counts_sync_events() {
        let q = make_quartic(2).unwrap();
        let hp = HyperParams::new(0.01, 0.05, 4, 103, 3);
        let tr = run_celgc(&q, &noise(), &hp, &pv(&[1.0, 1.0]), 9, 10).unwrap();
        assert_eq!(tr.comm_rounds, 25);
        assert_eq!(tr.last().t, 103);
        assert_eq!(tr.last().comm_rounds_so_far, 25);
        assert_eq!(tr.step_count, 3 * 103);
        assert!(tr.clip_count <= tr.step_count);
        let ts: Vec<_> = tr.records.iter().map(|r| r.t).collect();
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn celgc_consensus_bound() {
        let q = make_quartic(3).unwrap();
        let hp = HyperParams::new(0.1, 0.5, 4, 400, 4);
        let tr = run_celgc(&q, &noise(), &hp, &pv(&[3.0, 0.0, 0.0]), 1, 1).unwrap();
        assert_eq!(tr.consensus_violations, 0);
        assert!(tr.max_consensus_dev <= 4.0);
        assert_eq!(tr.step_violations, 0);
        assert_eq!(tr.avg_step_violations, 0);
        for r in &tr.records {
            assert!(r.consensus_max_dev <= 4.0 + BOUND_SLACK);
            assert!((0.0..=1.0).contains(&r.clip_fraction_window));
            if r.t % 4 == 0 {
                assert_eq!(r.consensus_max_dev, 0.0);
            }
        }
    }

    #[test]
    fn celgc_zero_noise_every_step_sync_has_no_drift() {
        let q = make_quartic(4).unwrap();
        let hp = HyperParams::new(0.01, 0.1, 1, 300, 3);
        let tr = run_celgc(
            &q,
            &NoiseModel::Zero,
            &hp,
            &pv(&[0.1, 0.7, -1.3, 2.0]),
            0,
            1,
        )
        .unwrap();
        assert_eq!(tr.max_consensus_dev, 0.0);
        assert!(tr.records.iter().all(|r| r.consensus_max_dev == 0.0));
    }

    #[test]
    fn single_worker_engines_agree() {
        let q = make_quartic(3).unwrap();
        let hp = HyperParams::new(0.02, 0.1, 3, 500, 1);
        let x0 = pv(&[2.0, 0.5, -1.0]);
        let a = run_celgc(&q, &noise(), &hp, &x0, 17, 7).unwrap();
        let b = run_naive_parallel_clip(&q, &noise(), &hp, &x0, 17, 7).unwrap();
        let c = run_clipped_sgd(&q, &noise(), &hp, &x0, 17, 7).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(b.records, c.records);
        assert_eq!(a.final_average, c.final_average);
    }

    #[test]
    fn partial_participation_runs_and_skips_consensus_check() {
        let q = make_quartic(2).unwrap();
        let hp = HyperParams::new(0.05, 0.2, 2, 200, 8).with_participation(6);
        let tr = run_celgc(&q, &noise(), &hp, &pv(&[2.0, 2.0]), 5, 10).unwrap();
        assert_eq!(tr.consensus_violations, 0);
        assert_eq!(tr.comm_rounds, 100);
        assert_eq!(tr.avg_step_violations, 0);
    }

    #[test]
    fn hyperparam_validation() {
        let ok = HyperParams::new(0.1, 0.5, 2, 10, 4);
        assert!(ok.validate().is_ok());
        assert!(HyperParams { eta: 0.0, ..ok }.validate().is_err());
        assert!(HyperParams { gamma: -1.0, ..ok }.validate().is_err());
        assert!(HyperParams { interval: 0, ..ok }.validate().is_err());
        assert!(ok.with_participation(5).validate().is_err());
        assert!(ok.with_participation(0).validate().is_err());
        assert_eq!(ok.clip_threshold(), 5.0);
        assert!("gossip".parse::<Algorithm>().is_err());
        assert_eq!(
            "naive-parallel".parse::<Algorithm>().unwrap(),
            Algorithm::NaiveParallel
        );
    }
}
