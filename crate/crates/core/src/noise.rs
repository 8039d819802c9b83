//! Bounded, symmetric, unimodal stochastic-gradient noise.
//!
//! Randomness is drawn from ChaCha8 keyed on `(seed, worker_id, iteration)`,
//! so a sample is a pure function of its key and never depends on the order in
//! which workers are stepped.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::gamma_lr;

use crate::error::{Error, Result};
use crate::objectives::ObjectiveSpec;
use crate::vecmath::ParamVector;

/// Below this rejection acceptance probability a noise model is considered
/// misconfigured.
pub const MIN_ACCEPTANCE: f64 = 1e-6;

/// Worker id reserved for draws made by the coordinator (participant
/// selection at synchronization events).
pub const COORDINATOR: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub worker_id: u64,
    pub iteration: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, worker_id: u64, iteration: u64) -> Self {
        RngStream {
            seed,
            worker_id,
            iteration,
        }
    }

    /// The generator for this key.
    pub fn rng(&self) -> ChaCha8Rng {
        let w0 = splitmix64(self.seed);
        let w1 = splitmix64(w0 ^ self.worker_id);
        let w2 = splitmix64(w1 ^ self.iteration);
        let w3 = splitmix64(w2 ^ 0x6365_6c67_635f_7631);
        let mut key = [0u8; 32];
        for (chunk, w) in key.chunks_exact_mut(8).zip([w0, w1, w2, w3]) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    Zero,
    /// Isotropic Gaussian with standard deviation `inner_std` per coordinate,
    /// conditioned on `||zeta|| <= sigma`.
    TruncatedGaussianBall {
        sigma: f64,
        inner_std: f64,
    },
}

impl NoiseModel {
    /// Truncated Gaussian noise; `inner_std` defaults to `sigma / 3`.
    pub fn truncated_gaussian(sigma: f64, inner_std: Option<f64>) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::NoiseConfig(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        let inner_std = inner_std.unwrap_or(sigma / 3.0);
        if !(inner_std > 0.0 && inner_std.is_finite()) {
            return Err(Error::NoiseConfig(format!(
                "inner_std must be positive, got {inner_std}"
            )));
        }
        Ok(NoiseModel::TruncatedGaussianBall { sigma, inner_std })
    }

    /// Resolves a config name: "zero" or "truncated-gaussian-ball".
    pub fn from_name(kind: &str, sigma: f64, inner_std: Option<f64>) -> Result<Self> {
        match kind {
            "zero" => Ok(NoiseModel::Zero),
            "truncated-gaussian-ball" => NoiseModel::truncated_gaussian(sigma, inner_std),
            other => Err(Error::Config(format!("unknown noise kind `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NoiseModel::Zero => "zero",
            NoiseModel::TruncatedGaussianBall { .. } => "truncated-gaussian-ball",
        }
    }

    /// Almost-sure bound on `||zeta||`.
    pub fn sigma(&self) -> f64 {
        match *self {
            NoiseModel::Zero => 0.0,
            NoiseModel::TruncatedGaussianBall { sigma, .. } => sigma,
        }
    }

    /// Probability that one Gaussian proposal lands inside the ball:
    /// `P(chi2_d <= (sigma / inner_std)^2)`.
    pub fn acceptance_probability(&self, dim: usize) -> f64 {
        match *self {
            NoiseModel::Zero => 1.0,
            NoiseModel::TruncatedGaussianBall { sigma, inner_std } => {
                let r = sigma / inner_std;
                gamma_lr(dim as f64 / 2.0, r * r / 2.0)
            }
        }
    }

    /// Validates the model for a given dimension and returns a sampler.
    pub fn sampler(&self, dim: usize) -> Result<NoiseSampler> {
        if dim == 0 {
            return Err(Error::param("dim", "must be at least 1"));
        }
        let p = self.acceptance_probability(dim);
        if p < MIN_ACCEPTANCE {
            return Err(Error::NoiseConfig(format!(
                "rejection acceptance probability {p:.3e} below {MIN_ACCEPTANCE:e} \
                 (inner_std too large relative to sigma in dim {dim})"
            )));
        }
        Ok(NoiseSampler { model: *self, dim })
    }
}

/// A noise model validated for a fixed dimension.
#[derive(Debug, Clone, Copy)]
pub struct NoiseSampler {
    model: NoiseModel,
    dim: usize,
}

impl NoiseSampler {
    pub fn model(&self) -> &NoiseModel {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sample(&self, stream: RngStream) -> ParamVector {
        let mut out = vec![0.0; self.dim];
        self.sample_into(stream, &mut out);
        ParamVector::from_raw(out)
    }

    pub(crate) fn sample_into(&self, stream: RngStream, out: &mut [f64]) {
        match self.model {
            NoiseModel::Zero => out.iter_mut().for_each(|v| *v = 0.0),
            NoiseModel::TruncatedGaussianBall { sigma, inner_std } => {
                let mut rng = stream.rng();
                let limit = sigma * sigma;
                loop {
                    let mut sq = 0.0;
                    for v in out.iter_mut() {
                        let z: f64 = rng.sample(StandardNormal);
                        *v = inner_std * z;
                        sq += *v * *v;
                    }
                    if sq <= limit {
                        break;
                    }
                }
                debug_assert!(out.iter().map(|v| v * v).sum::<f64>().sqrt() <= sigma);
            }
        }
    }

    /// `grad f(x) + zeta`
    pub fn stochastic_gradient(
        &self,
        obj: &ObjectiveSpec,
        x: &ParamVector,
        stream: RngStream,
    ) -> ParamVector {
        let mut g = obj.gradient(x);
        if let NoiseModel::Zero = self.model {
            return g;
        }
        let mut zeta = vec![0.0; self.dim];
        self.sample_into(stream, &mut zeta);
        for (gi, z) in g.as_mut_slice().iter_mut().zip(&zeta) {
            *gi += z;
        }
        g
    }
}

/// One draw of `zeta` for `stream`.
pub fn sample_noise(model: &NoiseModel, dim: usize, stream: RngStream) -> Result<ParamVector> {
    Ok(model.sampler(dim)?.sample(stream))
}

/// `grad f(x) + zeta` with `zeta` drawn from `model` under `stream`.
pub fn stochastic_gradient(
    obj: &ObjectiveSpec,
    model: &NoiseModel,
    x: &ParamVector,
    stream: RngStream,
) -> Result<ParamVector> {
    obj.check_point(x)?;
    x.check_finite()?;
    let g = model
        .sampler(obj.dim())?
        .stochastic_gradient(obj, x, stream);
    g.check_finite()?;
    Ok(g)
}
