//! Anchor-point z-test for class-conditional noise.
//!
//! Anchors are instances whose clean posterior is 1/2 (strict) or within ±δ
//! of 1/2 (relaxed). Under uniform noise the noisy posterior at an anchor
//! stays at 1/2; under CCN(α, β) it moves to (1 - α + β)/2. The test compares
//! the fitted posterior averaged over the anchors against 1/2, using the
//! delta-method variance (1/16)·x̄ᵀĤx̄ at the anchor mean x̄.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::format::fmt_f64;
use crate::logistic::{predict_posterior, read_numeric_records, FittedModel};
use crate::normal;

/// [η(1-η)]² at η = 1/2.
const NULL_FACTOR: f64 = 1.0 / 16.0;

/// k anchor vectors (intercept-augmented) and a relaxation half-width δ.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    points: Vec<DVector<f64>>,
    delta: f64,
}

impl AnchorSet {
    pub fn new(points: Vec<DVector<f64>>, delta: f64) -> Result<Self> {
        let d = match points.first() {
            Some(p) => p.len(),
            None => return Err(Error::InvalidAnchors("anchor set is empty".into())),
        };
        if let Some(p) = points.iter().find(|p| p.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: p.len() });
        }
        if points.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidAnchors("non-finite anchor coordinate".into()));
        }
        check_delta(delta)?;
        Ok(AnchorSet { points, delta })
    }

    /// Build from raw feature rows; the intercept entry is prepended.
    pub fn from_rows(rows: &[Vec<f64>], delta: f64) -> Result<Self> {
        let points = rows
            .iter()
            .map(|r| DVector::from_iterator(r.len() + 1, std::iter::once(1.0).chain(r.iter().copied())))
            .collect();
        AnchorSet::new(points, delta)
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn k(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// Same points, different declared δ.
    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(AnchorSet { points: self.points.clone(), delta })
    }

    /// x̄ = (1/k) Σ xᵢ.
    pub fn mean_point(&self) -> DVector<f64> {
        let sum = self
            .points
            .iter()
            .fold(DVector::zeros(self.dim()), |acc, p| acc + p);
        sum / self.k() as f64
    }

    /// Read a CSV of k rows × (d-1) feature columns (header optional).
    pub fn read_csv<R: Read>(reader: R, delta: f64) -> Result<Self> {
        let rows = read_numeric_records(reader)?;
        AnchorSet::from_rows(&rows, delta)
    }

    /// Read anchors and take δ from the sidecar file if one exists.
    pub fn load(path: &Path) -> Result<Self> {
        let delta = read_sidecar_delta(&sidecar_path(path))?.unwrap_or(0.0);
        AnchorSet::read_csv(std::fs::File::open(path)?, delta)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let p = self.dim() - 1;
        let header: Vec<String> = (1..=p).map(|j| format!("f{j}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for x in &self.points {
            let line: Vec<String> = x.iter().skip(1).map(|&v| fmt_f64(v)).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// Write the CSV plus a `delta=<value>` sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))?;
        std::fs::write(sidecar_path(path), format!("delta={}\n", fmt_f64(self.delta)))?;
        Ok(())
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&delta) {
        return Err(Error::InvalidParameter(format!(
            "anchor relaxation delta must lie in [0, 0.5], got {delta}"
        )));
    }
    Ok(())
}

/// `anchors.csv` → `anchors.csv.meta`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// Parse `key=value` lines and return `delta` if present.
pub fn read_sidecar_delta(path: &Path) -> Result<Option<f64>> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("sidecar line is not key=value: {line}")))?;
        if key.trim() == "delta" {
            let v = value
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad delta in sidecar: {e}")))?;
            return Ok(Some(v));
        }
    }
    Ok(None)
}

fn check_model(model: &FittedModel, anchors: &AnchorSet) -> Result<()> {
    if model.dim() != anchors.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: anchors.dim() });
    }
    Ok(())
}

/// Mean fitted posterior over the anchors and its null variance
/// (1/16)·x̄ᵀĤx̄.
pub fn anchor_mean_and_variance(model: &FittedModel, anchors: &AnchorSet) -> Result<(f64, f64)> {
    check_model(model, anchors)?;
    let mut eta_sum = 0.0;
    for x in anchors.points() {
        eta_sum += predict_posterior(model, x)?;
    }
    let eta_bar = eta_sum / anchors.k() as f64;
    let v_bar = NULL_FACTOR * model.quad_form(&anchors.mean_point())?;
    Ok((eta_bar, v_bar))
}

/// The same null variance assembled from per-anchor variances and pairwise
/// covariances: (1/k²)[Σ Vᵢ + 2 Σ_{i<j} Cov(η̂ᵢ, η̂ⱼ)] with Cov = (1/16)xᵢᵀĤxⱼ.
pub fn pairwise_anchor_variance(model: &FittedModel, anchors: &AnchorSet) -> Result<f64> {
    check_model(model, anchors)?;
    let pts = anchors.points();
    let mut total = 0.0;
    for (i, xi) in pts.iter().enumerate() {
        total += NULL_FACTOR * model.quad_form(xi)?;
        for xj in &pts[i + 1..] {
            total += 2.0 * NULL_FACTOR * model.bilinear(xi, xj)?;
        }
    }
    let k = pts.len() as f64;
    Ok(total / (k * k))
}

/// Null variance corrected for relaxed anchors:
/// (1/16 - δ²/6)·x̄ᵀĤx̄ + δ²/(3k).
pub fn relaxed_variance(model: &FittedModel, anchors: &AnchorSet) -> Result<f64> {
    check_model(model, anchors)?;
    relaxed_variance_from_quad(model.quad_form(&anchors.mean_point())?, anchors.delta(), anchors.k())
}

/// [`relaxed_variance`] given x̄ᵀĤx̄ directly.
pub fn relaxed_variance_from_quad(quad: f64, delta: f64, k: usize) -> Result<f64> {
    check_delta(delta)?;
    if k == 0 {
        return Err(Error::InvalidAnchors("anchor set is empty".into()));
    }
    let d2 = delta * delta;
    Ok((NULL_FACTOR - d2 / 6.0) * quad + d2 / (3.0 * k as f64))
}

/// Outcome of the anchor z-test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub eta_bar: f64,
    pub variance: f64,
    pub z: f64,
    pub p_value: f64,
    pub significance: f64,
    pub retain_lower: f64,
    pub retain_upper: f64,
    pub reject: bool,
    pub k: usize,
    pub delta: f64,
}

impl TestReport {
    /// Assemble the report for an observed anchor mean and null variance.
    pub fn from_statistic(eta_bar: f64, variance: f64, significance: f64) -> Result<Self> {
        check_significance(significance)?;
        if variance.is_nan() || variance <= 0.0 || !variance.is_finite() {
            return Err(Error::DegenerateVariance(variance));
        }
        let sd = variance.sqrt();
        let z = (eta_bar - 0.5) / sd;
        let p_value = normal::two_sided_p(z);
        Ok(TestReport {
            eta_bar,
            variance,
            z,
            p_value,
            significance,
            retain_lower: normal::quantile(significance / 2.0) * sd + 0.5,
            retain_upper: normal::quantile(1.0 - significance / 2.0) * sd + 0.5,
            reject: p_value < significance,
            k: 1,
            delta: 0.0,
        })
    }

    /// Whether `eta_bar` falls in the retain region [L, U].
    pub fn in_retain_region(&self) -> bool {
        self.retain_lower <= self.eta_bar && self.eta_bar <= self.retain_upper
    }

    pub fn verdict(&self) -> String {
        let action = if self.reject { "reject" } else { "retain" };
        format!(
            "{action} H0 (alpha = beta) at level {}: z = {:.4}, p = {:.4e}, eta_bar = {:.6} (retain region [{:.6}, {:.6}])",
            self.significance, self.z, self.p_value, self.eta_bar, self.retain_lower, self.retain_upper
        )
    }
}

fn check_significance(a: f64) -> Result<()> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "significance level must lie in (0, 1), got {a}"
        )));
    }
    Ok(())
}

/// Two-sided z-test of H0: α = β using the fitted posterior at the anchors.
///
/// The relaxed variance is used when the anchors declare δ > 0.
pub fn z_test(model: &FittedModel, anchors: &AnchorSet, significance: f64) -> Result<TestReport> {
    let (eta_bar, strict) = anchor_mean_and_variance(model, anchors)?;
    let variance = if anchors.delta() > 0.0 {
        relaxed_variance(model, anchors)?
    } else {
        strict
    };
    let mut report = TestReport::from_statistic(eta_bar, variance, significance)?;
    report.k = anchors.k();
    report.delta = anchors.delta();
    Ok(report)
}

/// Variance of η̂ at an anchor under CCN(α, β): [η̃(1-η̃)]²·xᵀĤx with
/// η̃ = (1 - α + β)/2.
pub fn alternative_variance(alpha: f64, beta: f64, quad: f64) -> Result<f64> {
    check_rates(alpha, beta)?;
    let eta = (1.0 - alpha + beta) / 2.0;
    let g = eta * (1.0 - eta);
    Ok(g * g * quad)
}

fn check_rates(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha >= 0.0 && beta >= 0.0 && alpha + beta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "noise rates must satisfy alpha, beta >= 0 and alpha + beta < 1, got ({alpha}, {beta})"
        )));
    }
    Ok(())
}

fn check_variances(v: f64, v_tilde: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite() && v_tilde > 0.0 && v_tilde.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "variances must be positive and finite, got v = {v}, v_tilde = {v_tilde}"
        )));
    }
    Ok(())
}

/// Probability of retaining H0 when the anchor mean is shifted by `h`:
/// Φ((z√v + h)/√ṽ) - Φ((-z√v + h)/√ṽ).
fn retain_probability(h: f64, v: f64, v_tilde: f64, z: f64) -> f64 {
    let half = z * v.sqrt();
    let s = v_tilde.sqrt();
    // symmetric in h, so evaluate at |h| where the interval sits right of zero
    let h = h.abs();
    normal::interval_prob((h - half) / s, (h + half) / s)
}

/// Power 1 - b₁ of the single-anchor test against CCN(α, β).
pub fn power(alpha: f64, beta: f64, v: f64, v_tilde: f64, significance: f64) -> Result<f64> {
    check_rates(alpha, beta)?;
    check_variances(v, v_tilde)?;
    check_significance(significance)?;
    let z = normal::quantile(1.0 - significance / 2.0);
    Ok(1.0 - retain_probability((beta - alpha) / 2.0, v, v_tilde, z))
}

/// Power with k random anchors, substituting E v(x̄) = v/k (and ṽ/k).
pub fn power_k(
    alpha: f64,
    beta: f64,
    v: f64,
    v_tilde: f64,
    k: usize,
    significance: f64,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let kf = k as f64;
    power(alpha, beta, v / kf, v_tilde / kf, significance)
}

/// b_k / b₁: retain probability with k anchors relative to one anchor.
pub fn power_ratio(h: f64, v: f64, v_tilde: f64, k: usize, significance: f64) -> Result<f64> {
    check_variances(v, v_tilde)?;
    check_significance(significance)?;
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if k == 1 {
        return Ok(1.0);
    }
    let z = normal::quantile(1.0 - significance / 2.0);
    let b1 = retain_probability(h, v, v_tilde, z);
    let bk = retain_probability(h * (k as f64).sqrt(), v, v_tilde, z);
    if b1 == 0.0 {
        // both underflowed; the ratio tends to zero as h grows
        return Ok(0.0);
    }
    Ok(bk / b1)
}

/// E_S v(x̄) for k anchors drawn uniformly with coordinates in [-c, c]:
/// d·c²·q/(3k), where q = tr(Ĥ).
pub fn expected_random_anchor_variance(d: usize, c: f64, q: f64, k: usize) -> Result<f64> {
    if d == 0 || k == 0 || c.is_nan() || c <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "need d >= 1, c > 0, k >= 1; got d = {d}, c = {c}, k = {k}"
        )));
    }
    Ok(d as f64 * c * c * q / (3.0 * k as f64))
}

/// One analytic power curve: power against β - α for a fixed k.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerCurve {
    pub k: usize,
    pub gaps: Vec<f64>,
    pub power: Vec<f64>,
}

/// Power curves over β - α ∈ `gaps` (with α = 0) for each k.
pub fn power_curves(
    v: f64,
    v_tilde: f64,
    significance: f64,
    ks: &[usize],
    gaps: &[f64],
) -> Result<Vec<PowerCurve>> {
    ks.iter()
        .map(|&k| {
            let power = gaps
                .iter()
                .map(|&g| power_k(0.0, g, v, v_tilde, k, significance))
                .collect::<Result<Vec<_>>>()?;
            Ok(PowerCurve { k, gaps: gaps.to_vec(), power })
        })
        .collect()
}

/// `gap` columns then one `power_k<k>` column per curve.
pub fn write_power_curves_csv<W: Write>(curves: &[PowerCurve], mut w: W) -> Result<()> {
    let Some(first) = curves.first() else {
        return Ok(());
    };
    let mut header = vec!["beta_minus_alpha".to_string()];
    header.extend(curves.iter().map(|c| format!("power_k{}", c.k)));
    writeln!(w, "{}", header.join(","))?;
    for (i, &g) in first.gaps.iter().enumerate() {
        let mut line = vec![fmt_f64(g)];
        line.extend(curves.iter().map(|c| fmt_f64(c.power[i])));
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}
