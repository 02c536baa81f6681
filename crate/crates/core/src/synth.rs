//! Two-Gaussian synthetic benchmark with a known logistic posterior.
//!
//! With identity covariance and class means μ₊, μ₋, the Bayes log-odds are
//! linear: log η/(1-η) = (μ₊-μ₋)ᵀx + (|μ₋|² - |μ₊|²)/2 + log(π/(1-π)).
//! So θ₀ = (b, w) with w = μ₊-μ₋ and b the constant above, and the logistic
//! model is correctly specified on clean data.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::anchors::AnchorSet;
use crate::error::{Error, Result};
use crate::logistic::{sigmoid, Dataset};
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaussianSetup {
    pub mean_pos: Vec<f64>,
    pub mean_neg: Vec<f64>,
    /// P(y = +1).
    pub prior: f64,
}

impl Default for GaussianSetup {
    fn default() -> Self {
        GaussianSetup { mean_pos: vec![1.0, 1.0], mean_neg: vec![-1.0, -1.0], prior: 0.5 }
    }
}

impl GaussianSetup {
    pub fn validate(&self) -> Result<()> {
        if self.mean_pos.is_empty() || self.mean_pos.len() != self.mean_neg.len() {
            return Err(Error::InvalidParameter(
                "class means must be nonempty and of equal length".into(),
            ));
        }
        if !(self.prior > 0.0 && self.prior < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "prior must lie in (0, 1), got {}",
                self.prior
            )));
        }
        if self.mean_pos == self.mean_neg {
            return Err(Error::InvalidParameter("class means coincide; no decision boundary".into()));
        }
        Ok(())
    }

    /// Number of raw features (without the intercept).
    pub fn features(&self) -> usize {
        self.mean_pos.len()
    }

    /// θ₀ = (b, μ₊ - μ₋).
    pub fn theta_true(&self) -> DVector<f64> {
        let sq = |m: &[f64]| m.iter().map(|v| v * v).sum::<f64>();
        let b = 0.5 * (sq(&self.mean_neg) - sq(&self.mean_pos)) + (self.prior / (1.0 - self.prior)).ln();
        let w = self.mean_pos.iter().zip(&self.mean_neg).map(|(p, n)| p - n);
        DVector::from_iterator(self.features() + 1, std::iter::once(b).chain(w))
    }

    /// Clean posterior η(x) = σ(θ₀ᵀx) for an intercept-augmented x.
    pub fn posterior(&self, x: &DVector<f64>) -> Result<f64> {
        let theta = self.theta_true();
        if x.len() != theta.len() {
            return Err(Error::DimensionMismatch { expected: theta.len(), got: x.len() });
        }
        Ok(sigmoid(theta.dot(x)))
    }

    /// Index (into raw features) solved for when placing boundary points:
    /// the largest |wⱼ|, last one on ties, so for the default setup the
    /// first coordinate is free and the anchors are (t, -t).
    fn dependent_coordinate(&self) -> usize {
        let theta = self.theta_true();
        let mut best = 0;
        for j in 0..self.features() {
            if theta[j + 1].abs() >= theta[best + 1].abs() {
                best = j;
            }
        }
        best
    }

    /// The intercept-augmented point on {θ₀ᵀx = 0} whose free coordinates
    /// (every raw feature but the dependent one, in order) are `free`.
    pub fn boundary_point(&self, free: &[f64]) -> Result<DVector<f64>> {
        self.validate()?;
        let p = self.features();
        if free.len() + 1 != p {
            return Err(Error::DimensionMismatch { expected: p - 1, got: free.len() });
        }
        let theta = self.theta_true();
        let dep = self.dependent_coordinate();
        let mut x = DVector::zeros(p + 1);
        x[0] = 1.0;
        let mut it = free.iter();
        let mut partial = theta[0];
        for j in 0..p {
            if j != dep {
                let v = *it.next().expect("length checked");
                x[j + 1] = v;
                partial += theta[j + 1] * v;
            }
        }
        x[dep + 1] = -partial / theta[dep + 1];
        Ok(x)
    }
}

/// Draw n labelled points: class by the prior, features from N(μ_class, I).
pub fn generate(setup: &GaussianSetup, n: usize, seed: u64) -> Result<Dataset> {
    setup.validate()?;
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need n >= 2, got {n}")));
    }
    let p = setup.features();
    let mut rng = rng_from_seed(seed);
    let mut features = DMatrix::zeros(n, p + 1);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let positive = rng.random::<f64>() < setup.prior;
        let mean = if positive { &setup.mean_pos } else { &setup.mean_neg };
        features[(i, 0)] = 1.0;
        for j in 0..p {
            let e: f64 = rng.sample(StandardNormal);
            features[(i, j + 1)] = mean[j] + e;
        }
        labels.push(if positive { 1 } else { -1 });
    }
    Dataset::new(features, labels)
}

/// Sample k anchors on the true decision boundary, free coordinates uniform
/// in [-c, c]. With δ > 0 each anchor is then moved along w so that its clean
/// posterior is exactly 1/2 + εᵢ, εᵢ ~ U[-δ, δ].
pub fn sample_anchors(
    setup: &GaussianSetup,
    k: usize,
    delta: f64,
    half_width: f64,
    seed: u64,
) -> Result<AnchorSet> {
    setup.validate()?;
    if k == 0 {
        return Err(Error::InvalidAnchors("k must be at least 1".into()));
    }
    if !(0.0..0.5).contains(&delta) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in [0, 0.5) so that 1/2 ± delta stays inside (0, 1), got {delta}"
        )));
    }
    if half_width.is_nan() || half_width <= 0.0 {
        return Err(Error::InvalidParameter(format!("half-width must be positive, got {half_width}")));
    }
    let theta = setup.theta_true();
    let w = theta.rows(1, setup.features()).into_owned();
    let w_sq = w.norm_squared();
    let mut rng = rng_from_seed(seed);
    let mut points = Vec::with_capacity(k);
    for _ in 0..k {
        let free: Vec<f64> = (1..setup.features())
            .map(|_| rng.random_range(-half_width..=half_width))
            .collect();
        let mut x = setup.boundary_point(&free)?;
        if delta > 0.0 {
            let eps: f64 = rng.random_range(-delta..=delta);
            let target = 0.5 + eps;
            let shift = (target / (1.0 - target)).ln() / w_sq;
            for j in 0..w.len() {
                x[j + 1] += shift * w[j];
            }
        }
        points.push(x);
    }
    AnchorSet::new(points, delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn default_theta() {
        let s = GaussianSetup::default();
        assert_eq!(s.theta_true().as_slice(), &[0.0, 2.0, 2.0]);
    }

    #[test]
    fn theta_matches_bayes_posterior() {
        // independent route: ratio of class densities times prior odds
        let s = GaussianSetup { mean_pos: vec![1.5, -0.5], mean_neg: vec![-1.0, 0.25], prior: 0.3 };
        let dens = |x: &[f64], m: &[f64]| {
            (-0.5 * x.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()).exp()
        };
        for x in [[0.2, 0.1], [-1.0, 2.0], [3.0, -1.5]] {
            let num = s.prior * dens(&x, &s.mean_pos);
            let bayes = num / (num + (1.0 - s.prior) * dens(&x, &s.mean_neg));
            let xa = DVector::from_vec(vec![1.0, x[0], x[1]]);
            assert_abs_diff_eq!(s.posterior(&xa).unwrap(), bayes, epsilon = 1e-12);
        }
    }

    #[test]
    fn class_balance_and_means() {
        let s = GaussianSetup::default();
        let d = generate(&s, 100_000, 5).unwrap();
        let pos = d.positive_count() as f64 / d.len() as f64;
        assert!((pos - 0.5).abs() < 0.01, "{pos}");
        let x = d.features();
        for j in 1..=2 {
            let (sum, cnt) = d
                .labels()
                .iter()
                .enumerate()
                .filter(|(_, &y)| y == 1)
                .fold((0.0, 0usize), |(s, c), (i, _)| (s + x[(i, j)], c + 1));
            let mean = sum / cnt as f64;
            assert!((mean - 1.0).abs() < 0.02, "coordinate {j}: {mean}");
        }
    }

    #[test]
    fn generation_is_seeded() {
        let s = GaussianSetup::default();
        let mut a = Vec::new();
        let mut b = Vec::new();
        generate(&s, 200, 42).unwrap().write_csv(&mut a).unwrap();
        generate(&s, 200, 42).unwrap().write_csv(&mut b).unwrap();
        assert_eq!(a, b);
        let mut c = Vec::new();
        generate(&s, 200, 43).unwrap().write_csv(&mut c).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn strict_anchors_lie_on_boundary() {
        let s = GaussianSetup::default();
        let theta = s.theta_true();
        let a = sample_anchors(&s, 50, 0.0, 4.0, 3).unwrap();
        for x in a.points() {
            assert_eq!(theta.dot(x), 0.0);
            assert_eq!(s.posterior(x).unwrap(), 0.5);
            assert!(x[1].abs() <= 4.0);
            assert_eq!(x[2], -x[1]);
        }
    }

    #[test]
    fn midpoint_anchor() {
        let s = GaussianSetup::default();
        let x = s.boundary_point(&[0.0]).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn relaxed_anchor_posteriors_are_uniform() {
        let s = GaussianSetup::default();
        let a = sample_anchors(&s, 10_000, 0.1, 4.0, 8).unwrap();
        let etas: Vec<f64> = a.points().iter().map(|x| s.posterior(x).unwrap()).collect();
        let mean = etas.iter().sum::<f64>() / etas.len() as f64;
        assert!((mean - 0.5).abs() < 0.002, "{mean}");
        assert!(etas.iter().all(|&e| (0.4 - 1e-12..=0.6 + 1e-12).contains(&e)));
        // variance of U[-δ, δ] is δ²/3
        let var = etas.iter().map(|e| (e - 0.5).powi(2)).sum::<f64>() / etas.len() as f64;
        assert!((var - 0.01 / 3.0).abs() < 0.0002, "{var}");
    }

    #[test]
    fn anchor_errors() {
        let s = GaussianSetup::default();
        assert!(sample_anchors(&s, 0, 0.0, 4.0, 1).is_err());
        assert!(sample_anchors(&s, 3, 0.5, 4.0, 1).is_err());
        assert!(sample_anchors(&s, 3, -0.1, 4.0, 1).is_err());
        let bad = GaussianSetup { mean_pos: vec![0.0, 0.0], mean_neg: vec![0.0, 0.0], prior: 0.5 };
        assert!(generate(&bad, 10, 1).is_err());
    }
}
