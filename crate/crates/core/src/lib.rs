//! Hypothesis tests for class-conditional label noise in binary
//! classification.
//!
//! A logistic regression is fitted by maximum likelihood; its inverse
//! observed information gives a delta-method variance for the predicted
//! posterior at user-supplied anchor points (instances whose clean posterior
//! is 1/2). Uniform label noise leaves that posterior at 1/2, while
//! class-conditional noise CCN(α, β) moves it to (1 - α + β)/2, so a z-test
//! on the anchor posteriors separates the two.
//!
//! Modules:
//! - [`noise`]: noise processes and clean/noisy relationships
//! - [`logistic`]: MLE fit, posterior prediction, delta-method variance
//! - [`anchors`]: the anchor z-test, power, multi/relaxed-anchor variances
//! - [`prior`]: exact and large-sample tests on the class prior
//! - [`synth`]: the two-Gaussian benchmark and anchor sampling
//! - [`experiment`]: the Monte-Carlo grid harness

pub mod anchors;
pub mod error;
pub mod experiment;
pub mod format;
pub mod logistic;
pub mod noise;
pub mod normal;
pub mod plot;
pub mod prior;
pub mod seed;
pub mod stats;
pub mod synth;

pub use anchors::{
    alternative_variance, anchor_mean_and_variance, expected_random_anchor_variance, power,
    power_k, power_ratio, relaxed_variance, z_test, AnchorSet, TestReport,
};
pub use error::{Error, Result};
pub use experiment::{run_cell, run_grid, ExperimentConfig, ExperimentSummary, GridOptions};
pub use logistic::{delta_variance, fit, fit_with, predict_posterior, Dataset, FitOptions, FittedModel};
pub use noise::{corrupt_labels, noisy_posterior, noisy_prior, un_sign_preserved, NoiseSpec};
pub use prior::{prior_exact_test, prior_z_test, PriorMethod, PriorTestReport};
pub use synth::{generate, sample_anchors, GaussianSetup};
