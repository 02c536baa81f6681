//! Tests on the positive-label fraction against a known clean prior π₀.
//!
//! Under CCN(α, β) the observed prior shifts to (1-α-β)π + β. Note what this
//! does and does not detect: at π = 1/2 uniform noise leaves the prior
//! unchanged while CCN shifts it by (β-α)/2, so the test separates the two
//! there; away from π = 1/2 uniform noise shifts the prior as well, and a
//! rejection only says that *some* noise is present.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;

/// Relative slack when collecting outcomes "as or less likely" than the
/// observed one, so exact ties survive rounding in log space.
const TIE_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorMethod {
    ExactBinomial,
    ZApprox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorTestReport {
    pub n: u64,
    pub k_pos: u64,
    pub pi0: f64,
    pub pi_hat: f64,
    /// (k - nπ₀)/√(nπ₀(1-π₀)); reported for both methods.
    pub z: f64,
    pub p_value: f64,
    pub method: PriorMethod,
}

impl PriorTestReport {
    pub fn reject(&self, significance: f64) -> bool {
        self.p_value < significance
    }
}

fn check(n: u64, k_pos: u64, pi0: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if k_pos > n {
        return Err(Error::InvalidParameter(format!("k_pos = {k_pos} exceeds n = {n}")));
    }
    if !(pi0 > 0.0 && pi0 < 1.0) {
        return Err(Error::InvalidParameter(format!("pi0 must lie in (0, 1), got {pi0}")));
    }
    Ok(())
}

fn z_statistic(n: u64, k_pos: u64, pi0: f64) -> f64 {
    let n = n as f64;
    (k_pos as f64 - n * pi0) / (n * pi0 * (1.0 - pi0)).sqrt()
}

/// Large-sample z-test. Requires nπ₀(1-π₀) ≥ 10.
pub fn prior_z_test(n: u64, k_pos: u64, pi0: f64) -> Result<PriorTestReport> {
    check(n, k_pos, pi0)?;
    let spread = n as f64 * pi0 * (1.0 - pi0);
    if spread < 10.0 {
        return Err(Error::LargeSampleGuard(spread));
    }
    let z = z_statistic(n, k_pos, pi0);
    Ok(PriorTestReport {
        n,
        k_pos,
        pi0,
        pi_hat: k_pos as f64 / n as f64,
        z,
        p_value: normal::two_sided_p(z),
        method: PriorMethod::ZApprox,
    })
}

/// ln P(X = i) for X ~ Binomial(n, p), 0 < p < 1.
pub fn binomial_ln_pmf(n: u64, i: u64, p: f64) -> f64 {
    ln_choose(n, i) + i as f64 * p.ln() + (n - i) as f64 * (-p).ln_1p()
}

fn ln_choose(n: u64, i: u64) -> f64 {
    let lg = |m: u64| libm::lgamma(m as f64 + 1.0);
    lg(n) - lg(i) - lg(n - i)
}

/// Exact two-sided binomial test: sums P(X = i) over every outcome no more
/// likely than the observed one.
pub fn prior_exact_test(n: u64, k_pos: u64, pi0: f64) -> Result<PriorTestReport> {
    check(n, k_pos, pi0)?;
    let threshold = binomial_ln_pmf(n, k_pos, pi0) + TIE_TOLERANCE.ln_1p();
    let p_value: f64 = (0..=n)
        .map(|i| binomial_ln_pmf(n, i, pi0))
        .filter(|&lp| lp <= threshold)
        .map(f64::exp)
        .sum();
    Ok(PriorTestReport {
        n,
        k_pos,
        pi0,
        pi_hat: k_pos as f64 / n as f64,
        z: z_statistic(n, k_pos, pi0),
        p_value: p_value.min(1.0),
        method: PriorMethod::ExactBinomial,
    })
}
