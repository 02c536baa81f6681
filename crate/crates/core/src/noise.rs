//! Label-noise processes and the exact clean/noisy relationships they induce.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

/// An instance-independent label-flipping process.
///
/// `alpha` is P(ỹ = -1 | y = +1) and `beta` is P(ỹ = +1 | y = -1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    Uniform { tau: f64 },
    ClassConditional { alpha: f64, beta: f64 },
}

impl NoiseSpec {
    pub fn uniform(tau: f64) -> Result<Self> {
        let spec = NoiseSpec::Uniform { tau };
        spec.validate()?;
        Ok(spec)
    }

    pub fn class_conditional(alpha: f64, beta: f64) -> Result<Self> {
        let spec = NoiseSpec::ClassConditional { alpha, beta };
        spec.validate()?;
        Ok(spec)
    }

    /// No corruption at all.
    pub fn none() -> Self {
        NoiseSpec::ClassConditional { alpha: 0.0, beta: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseSpec::Uniform { tau } => {
                if !(0.0..0.5).contains(&tau) {
                    return Err(Error::InvalidParameter(format!(
                        "uniform noise rate must satisfy 0 <= tau < 0.5, got {tau}"
                    )));
                }
            }
            NoiseSpec::ClassConditional { alpha, beta } => {
                if !(alpha >= 0.0 && beta >= 0.0 && alpha + beta < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "class-conditional rates must satisfy alpha, beta >= 0 and alpha + beta < 1, got ({alpha}, {beta})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Flip probabilities as (P(flip | y=+1), P(flip | y=-1)).
    pub fn flip_rates(&self) -> (f64, f64) {
        match *self {
            NoiseSpec::Uniform { tau } => (tau, tau),
            NoiseSpec::ClassConditional { alpha, beta } => (alpha, beta),
        }
    }

    /// The affine map p ↦ (1-α-β)p + β shared by posteriors and priors,
    /// evaluated as p + β(1-p) - αp so that p = 1/2 with α = β is exact.
    fn apply(&self, p: f64) -> f64 {
        let (alpha, beta) = self.flip_rates();
        p + (beta * (1.0 - p) - alpha * p)
    }
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("{name} must lie in [0, 1], got {p}")));
    }
    Ok(())
}

/// P(ỹ = +1 | x) given the clean posterior η(x).
pub fn noisy_posterior(eta: f64, spec: &NoiseSpec) -> Result<f64> {
    spec.validate()?;
    check_probability("eta", eta)?;
    Ok(spec.apply(eta))
}

/// P(ỹ = +1) given the clean prior π.
pub fn noisy_prior(pi: f64, spec: &NoiseSpec) -> Result<f64> {
    spec.validate()?;
    check_probability("pi", pi)?;
    Ok(spec.apply(pi))
}

/// Flip each label independently at its class rate. Deterministic in `seed`.
pub fn corrupt_labels(labels: &[i8], spec: &NoiseSpec, seed: u64) -> Result<Vec<i8>> {
    spec.validate()?;
    if labels.is_empty() {
        return Err(Error::InvalidParameter("no labels to corrupt".into()));
    }
    let (rate_pos, rate_neg) = spec.flip_rates();
    let mut rng = rng_from_seed(seed);
    labels
        .iter()
        .map(|&y| {
            // one draw per label regardless of class keeps the stream aligned
            let u: f64 = rng.random();
            let rate = match y {
                1 => rate_pos,
                -1 => rate_neg,
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "labels must be -1 or +1, got {other}"
                    )))
                }
            };
            Ok(if u < rate { -y } else { y })
        })
        .collect()
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Whether uniform noise at rate `tau` keeps the Bayes decision at `eta`.
/// η = 1/2 is its own sign class.
pub fn un_sign_preserved(eta: f64, tau: f64) -> Result<bool> {
    let spec = NoiseSpec::uniform(tau)?;
    let noisy = noisy_posterior(eta, &spec)?;
    Ok(sign(noisy - 0.5) == sign(eta - 0.5))
}
