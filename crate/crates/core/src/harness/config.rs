//! TOML experiment configuration.
//!
//! ```toml
//! run_id = "quartic-celgc"
//! algorithm = "celgc"
//! epsilon_target = 0.1
//! seeds = [1, 2, 3]
//! record_every = 10
//! output = "out"
//!
//! [objective]
//! name = "quartic"
//! dim = 8
//!
//! [noise]
//! kind = "truncated-gaussian-ball"
//! sigma = 1.0
//!
//! [hyper]
//! mode = "desk"        # or "explicit" (eta/gamma given) or "theorem"
//! interval = 2
//! iterations = 8000
//! workers = 4
//!
//! [x0]
//! radius = 5.0         # or: vector = [...]
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::algorithms::{Algorithm, HyperParams};
use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::objectives::{ObjectiveKind, ObjectiveSpec};
use crate::theory::{theorem1_plan, PlanInputs, TheoremOnePlan};
use crate::vecmath::ParamVector;

pub const DEFAULT_RECORD_EVERY: usize = 10;
pub const DEFAULT_DESK_FACTOR: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run_id: String,
    pub algorithm: Algorithm,
    pub epsilon_target: f64,
    pub seeds: Vec<u64>,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub objective: ObjectiveSection,
    pub noise: NoiseSection,
    pub hyper: HyperSection,
    #[serde(default)]
    pub x0: X0Section,
}

fn default_record_every() -> usize {
    DEFAULT_RECORD_EVERY
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSection {
    pub name: String,
    #[serde(default = "one")]
    pub dim: usize,
    /// Curvature scale for "exp1d".
    #[serde(default)]
    pub a: Option<f64>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub kind: String,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub inner_std: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HyperMode {
    /// `eta` and `gamma` are given directly and held fixed across sweeps.
    #[default]
    Explicit,
    /// Calculator step sizes scaled by `desk_factor`, recomputed per worker
    /// count.
    Desk,
    /// Calculator step sizes unscaled.
    Theorem,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperSection {
    #[serde(default)]
    pub mode: HyperMode,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
    /// Defaults to the calculator's `I_max` in planned modes.
    #[serde(default)]
    pub interval: Option<usize>,
    pub iterations: usize,
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default)]
    pub participation: Option<usize>,
    #[serde(default)]
    pub desk_factor: Option<f64>,
    #[serde(default)]
    pub c_min: Option<f64>,
    /// Defaults to `f(x0) - f_star`.
    #[serde(default)]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct X0Section {
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub vector: Option<Vec<f64>>,
}

/// A configuration with every name resolved and every default applied.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedExperiment {
    pub run_id: String,
    pub algorithm: Algorithm,
    pub objective: ObjectiveSpec,
    pub noise: NoiseModel,
    pub hyper: HyperParams,
    pub x0: ParamVector,
    pub seeds: Vec<u64>,
    pub record_every: usize,
    pub epsilon_target: f64,
    pub plan: Option<TheoremOnePlan>,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&s).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.run_id.is_empty()
            || !self
                .run_id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
        {
            return Err(Error::Config(format!(
                "run_id `{}` must be nonempty and use only [A-Za-z0-9-_.]",
                self.run_id
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be nonempty".into()));
        }
        if !(self.epsilon_target > 0.0 && self.epsilon_target.is_finite()) {
            return Err(Error::Config("epsilon_target must be positive".into()));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        if self.x0.radius.is_some() && self.x0.vector.is_some() {
            return Err(Error::Config(
                "x0: give either radius or vector, not both".into(),
            ));
        }
        Ok(())
    }

    /// Resolves names and hyperparameters with the configured worker count
    /// and interval.
    pub fn resolve(&self) -> Result<ResolvedExperiment> {
        self.resolve_with(None, None)
    }

    /// Resolves with the worker count and/or interval overridden (used by
    /// sweeps). Overriding the worker count restores full participation.
    pub fn resolve_with(
        &self,
        workers: Option<usize>,
        interval: Option<usize>,
    ) -> Result<ResolvedExperiment> {
        let cfg_err = |e: Error| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        };
        let objective =
            ObjectiveSpec::from_name(&self.objective.name, self.objective.dim, self.objective.a)
                .map_err(cfg_err)?;
        let noise = NoiseModel::from_name(&self.noise.kind, self.noise.sigma, self.noise.inner_std)
            .map_err(cfg_err)?;
        noise.sampler(objective.dim()).map_err(cfg_err)?;
        let x0 = self.resolve_x0(&objective)?;

        let h = &self.hyper;
        let n = workers.unwrap_or(h.workers);
        if n == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        let participation = match (workers, h.participation) {
            (Some(_), _) | (None, None) => n,
            (None, Some(k)) => k,
        };

        let (eta, gamma, interval, plan) = match h.mode {
            HyperMode::Explicit => {
                let (Some(eta), Some(gamma)) = (h.eta, h.gamma) else {
                    return Err(Error::Config(
                        "hyper.eta and hyper.gamma are required in explicit mode".into(),
                    ));
                };
                let interval = interval.or(h.interval).ok_or_else(|| {
                    Error::Config("hyper.interval is required in explicit mode".into())
                })?;
                (eta, gamma, interval, None)
            }
            HyperMode::Desk | HyperMode::Theorem => {
                if h.eta.is_some() || h.gamma.is_some() {
                    return Err(Error::Config(
                        "hyper.eta/gamma are derived in desk and theorem modes; remove them".into(),
                    ));
                }
                let delta = match h.delta {
                    Some(d) => d,
                    None => objective.value(&x0) - objective.f_star(),
                };
                let plan = theorem1_plan(PlanInputs {
                    epsilon: self.epsilon_target,
                    workers: n,
                    sigma: noise.sigma(),
                    l0: objective.l0(),
                    l1: objective.l1(),
                    delta,
                    c_min: h.c_min.unwrap_or(1.0),
                })
                .map_err(cfg_err)?;
                let factor = match h.mode {
                    HyperMode::Desk => h.desk_factor.unwrap_or(DEFAULT_DESK_FACTOR),
                    _ => 1.0,
                };
                if !(factor > 0.0) {
                    return Err(Error::Config("hyper.desk_factor must be positive".into()));
                }
                let (eta, gamma) = plan.scaled_steps(factor);
                let interval = interval
                    .or(h.interval)
                    .unwrap_or(plan.interval_max.max(1) as usize);
                if !plan.consensus_radius_ok(gamma, interval as u64) {
                    return Err(Error::Config(format!(
                        "2*gamma*I = {} exceeds 1/(2*L1) = {} (gamma = {gamma}, I = {interval}, N = {n}); \
                         lower desk_factor or interval",
                        2.0 * gamma * interval as f64,
                        0.5 / objective.l1()
                    )));
                }
                (eta, gamma, interval, Some(plan))
            }
        };

        let hyper = HyperParams {
            eta,
            gamma,
            interval,
            iterations: h.iterations,
            workers: n,
            participation,
        };
        if self.algorithm == Algorithm::Sgd {
            if !(eta >= 0.0) {
                return Err(Error::Config("hyper.eta must be nonnegative".into()));
            }
        } else {
            hyper.validate().map_err(cfg_err)?;
        }

        Ok(ResolvedExperiment {
            run_id: self.run_id.clone(),
            algorithm: self.algorithm,
            objective,
            noise,
            hyper,
            x0,
            seeds: self.seeds.clone(),
            record_every: self.record_every,
            epsilon_target: self.epsilon_target,
            plan,
        })
    }

    fn resolve_x0(&self, obj: &ObjectiveSpec) -> Result<ParamVector> {
        if let Some(v) = &self.x0.vector {
            if v.len() != obj.dim() {
                return Err(Error::Config(format!(
                    "x0.vector has {} entries, objective dim is {}",
                    v.len(),
                    obj.dim()
                )));
            }
            return ParamVector::new(v.clone()).map_err(|e| Error::Config(e.to_string()));
        }
        let radius = self.x0.radius.unwrap_or(default_radius(obj));
        if !radius.is_finite() {
            return Err(Error::Config("x0.radius must be finite".into()));
        }
        Ok(ParamVector::on_axis(obj.dim(), radius))
    }
}

/// Starting radius along the first axis when the config gives none.
pub fn default_radius(obj: &ObjectiveSpec) -> f64 {
    match obj.kind() {
        ObjectiveKind::Quartic => 5.0,
        ObjectiveKind::Quadratic => 1.0,
        ObjectiveKind::Exp1d { .. } => 2.0,
    }
}
