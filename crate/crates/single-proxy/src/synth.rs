//! Synthetic benchmark with a deterministically confounded proxy.
//!
//! A scalar latent confounder drives treatment, outcome, and proxy:
//!
//! - `u ~ Uniform(-1, 1)`
//! - `a = map(u) + 0.1 * z_a`
//! - `y = sin(TAU * u) + a * a - 0.3 + noise * z_y`
//! - `w = exp(u) + 0.05 * z_w`
//!
//! with `z_a, z_y, z_w` independent standard normals and `map` either the
//! standard normal CDF (default) or the error function. The structural
//! function — the outcome with the confounding path severed — is
//! `f(a) = a^2 - 0.3`; the `sin` term is pure confounding that a direct
//! regression of `y` on `a` absorbs as bias.
//!
//! Draw order is fixed per row (`u`, `z_a`, `z_y`, `z_w`) and `z_y` is
//! drawn even when `noise == 0`, so datasets generated from the same seed
//! at different noise levels share identical treatments, proxies, and
//! latents bit for bit.

use std::f64::consts::{SQRT_2, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{Dataset, Points};
use crate::error::{Error, Result};

/// Link from the latent confounder to the treatment mean.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TreatmentMap {
    /// Standard normal CDF `Phi(u)`; treatment centers near `1/2`.
    NormalCdf,
    /// Error function `erf(u)`; treatment centers near `0`.
    ErrorFunction,
}

impl TreatmentMap {
    pub fn apply(self, u: f64) -> f64 {
        match self {
            TreatmentMap::NormalCdf => gaussian_cdf(u),
            TreatmentMap::ErrorFunction => libm::erf(u),
        }
    }
}

/// Standard normal CDF via the error function.
pub fn gaussian_cdf(u: f64) -> f64 {
    0.5 * (1.0 + libm::erf(u / SQRT_2))
}

/// The structural function `f(a) = a^2 - 0.3` of the benchmark.
pub fn true_structural(a: f64) -> f64 {
    a * a - 0.3
}

#[derive(Clone, Copy, Debug)]
pub struct SynthConfig {
    pub samples: usize,
    /// Outcome noise scale; `0` gives a noiseless outcome.
    pub noise: f64,
    pub seed: u64,
    pub treatment_map: TreatmentMap,
}

impl SynthConfig {
    pub fn new(samples: usize, noise: f64, seed: u64) -> Self {
        SynthConfig {
            samples,
            noise,
            seed,
            treatment_map: TreatmentMap::NormalCdf,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidParameter("samples must be >= 1".into()));
        }
        if !self.noise.is_finite() || self.noise < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "noise must be finite and >= 0, got {}",
                self.noise
            )));
        }
        Ok(())
    }
}

/// Generates a dataset along with the latent confounder draws.
pub fn generate_with_latent(config: &SynthConfig) -> Result<(Dataset, Vec<f64>)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.samples;
    let mut treatments = Vec::with_capacity(n);
    let mut outcomes = Vec::with_capacity(n);
    let mut proxies = Vec::with_capacity(n);
    let mut latents = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random_range(-1.0..1.0);
        let z_a: f64 = rng.sample(StandardNormal);
        let z_y: f64 = rng.sample(StandardNormal);
        let z_w: f64 = rng.sample(StandardNormal);
        let a = config.treatment_map.apply(u) + 0.1 * z_a;
        let y = (TAU * u).sin() + a * a - 0.3 + config.noise * z_y;
        let w = (u).exp() + 0.05 * z_w;
        treatments.push(a);
        outcomes.push(y);
        proxies.push(w);
        latents.push(u);
    }
    let data = Dataset::new(
        Points::from_scalars(&treatments)?,
        outcomes,
        Points::from_scalars(&proxies)?,
    )?;
    Ok((data, latents))
}

/// Generates a dataset, discarding the latent draws.
pub fn generate(config: &SynthConfig) -> Result<Dataset> {
    generate_with_latent(config).map(|(data, _)| data)
}
