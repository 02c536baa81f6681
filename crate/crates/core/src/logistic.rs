//! Maximum-likelihood logistic regression with the inverse observed
//! information, plus the delta-method variance of a predicted posterior.
//!
//! Labels live in {-1, +1}; the likelihood uses `(y + 1) / 2` as the
//! Bernoulli outcome. The fitter is damped Newton-Raphson (IRLS) with
//! step halving, solving the d×d system by Cholesky each iteration.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::format::fmt_f64;

/// Feature matrix with a leading column of ones, and labels in {-1, +1}.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: DMatrix<f64>,
    labels: Vec<i8>,
}

impl Dataset {
    /// Build from an already intercept-augmented matrix.
    pub fn new(features: DMatrix<f64>, labels: Vec<i8>) -> Result<Self> {
        let (n, d) = features.shape();
        if labels.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
        }
        if d == 0 || features.column(0).iter().any(|&v| v != 1.0) {
            return Err(Error::InvalidDataset(
                "first feature column must be the intercept (all ones)".into(),
            ));
        }
        if n < d {
            return Err(Error::InvalidDataset(format!(
                "need at least as many rows as columns, got {n} rows for {d} columns"
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite feature value".into()));
        }
        if let Some(bad) = labels.iter().find(|&&y| y != 1 && y != -1) {
            return Err(Error::InvalidDataset(format!("labels must be -1 or +1, got {bad}")));
        }
        if !labels.contains(&1) || !labels.contains(&-1) {
            return Err(Error::InvalidDataset("labels must contain both classes".into()));
        }
        Ok(Dataset { features, labels })
    }

    /// Build from raw feature rows (no intercept); the intercept is prepended.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<i8>) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::DimensionMismatch { expected: p, got: r.len() });
        }
        let features = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { rows[i][j - 1] });
        Dataset::new(features, labels)
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of columns including the intercept.
    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Same features, new labels (used after corruption).
    pub fn with_labels(&self, labels: Vec<i8>) -> Result<Self> {
        Dataset::new(self.features.clone(), labels)
    }

    pub fn positive_count(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    /// Read CSV with columns `f1..fp,label`. A header row is optional.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (line, rec) in read_numeric_records(reader)?.into_iter().enumerate() {
            let (label, feats) = rec
                .split_last()
                .ok_or_else(|| Error::Parse(format!("row {}: empty record", line + 1)))?;
            let v = *label;
            let y = match v {
                _ if v == 1.0 => 1,
                _ if v == -1.0 => -1,
                _ => {
                    return Err(Error::Parse(format!(
                        "row {}: label must be -1 or +1, got {v}",
                        line + 1
                    )))
                }
            };
            rows.push(feats.to_vec());
            labels.push(y);
        }
        if rows.is_empty() {
            return Err(Error::InvalidDataset("dataset file has no rows".into()));
        }
        Dataset::from_rows(&rows, labels)
    }

    /// Write CSV with a `f1..fp,label` header; the intercept is not written.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let p = self.dim() - 1;
        let header: Vec<String> = (1..=p).map(|j| format!("f{j}")).chain(["label".into()]).collect();
        writeln!(w, "{}", header.join(","))?;
        for (i, &y) in self.labels.iter().enumerate() {
            let mut line: Vec<String> = (1..=p).map(|j| fmt_f64(self.features[(i, j)])).collect();
            line.push(y.to_string());
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Parse a headerless-or-headed numeric CSV into rows of f64.
pub(crate) fn read_numeric_records<R: Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => continue, // header
            Err(e) => return Err(Error::Parse(format!("row {}: {e}", i + 1))),
        }
    }
    Ok(out)
}

/// Optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Gradient sup-norm at which the fit is declared converged.
    pub tol: f64,
    /// Coefficient 2-norm beyond which the data are declared separable.
    pub separation_norm: f64,
    /// On separation, refit with a small ridge penalty instead of failing.
    pub ridge_fallback: bool,
    pub ridge_lambda: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 100,
            tol: 1e-8,
            separation_norm: 30.0,
            ridge_fallback: false,
            ridge_lambda: 1e-6,
        }
    }
}

/// A fitted model. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRecord", into = "ModelRecord")]
pub struct FittedModel {
    theta: DVector<f64>,
    hessian_inv: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
    pub ridge_used: f64,
    pub log_likelihood: f64,
    /// Number of observations the model was fitted on.
    pub n: usize,
}

#[derive(Serialize, Deserialize)]
struct ModelRecord {
    theta: Vec<f64>,
    hessian_inv: Vec<Vec<f64>>,
    converged: bool,
    iterations: usize,
    grad_norm: f64,
    ridge_used: f64,
    log_likelihood: f64,
    n: usize,
}

impl From<FittedModel> for ModelRecord {
    fn from(m: FittedModel) -> Self {
        let d = m.theta.len();
        ModelRecord {
            theta: m.theta.iter().copied().collect(),
            hessian_inv: (0..d).map(|i| m.hessian_inv.row(i).iter().copied().collect()).collect(),
            converged: m.converged,
            iterations: m.iterations,
            grad_norm: m.grad_norm,
            ridge_used: m.ridge_used,
            log_likelihood: m.log_likelihood,
            n: m.n,
        }
    }
}

impl TryFrom<ModelRecord> for FittedModel {
    type Error = Error;

    fn try_from(r: ModelRecord) -> Result<Self> {
        let d = r.theta.len();
        if r.hessian_inv.len() != d || r.hessian_inv.iter().any(|row| row.len() != d) {
            return Err(Error::Parse(format!("hessian_inv must be {d}x{d}")));
        }
        Ok(FittedModel {
            theta: DVector::from_vec(r.theta),
            hessian_inv: DMatrix::from_fn(d, d, |i, j| r.hessian_inv[i][j]),
            converged: r.converged,
            iterations: r.iterations,
            grad_norm: r.grad_norm,
            ridge_used: r.ridge_used,
            log_likelihood: r.log_likelihood,
            n: r.n,
        })
    }
}

impl FittedModel {
    /// Assemble a model from known parameters (mainly for tests and tooling).
    pub fn from_parts(theta: DVector<f64>, hessian_inv: DMatrix<f64>) -> Result<Self> {
        let d = theta.len();
        if hessian_inv.shape() != (d, d) {
            return Err(Error::DimensionMismatch { expected: d, got: hessian_inv.nrows() });
        }
        Ok(FittedModel {
            theta,
            hessian_inv,
            converged: true,
            iterations: 0,
            grad_norm: 0.0,
            ridge_used: 0.0,
            log_likelihood: f64::NAN,
            n: 0,
        })
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    /// (XᵀDX)⁻¹ at the fitted coefficients.
    pub fn hessian_inv(&self) -> &DMatrix<f64> {
        &self.hessian_inv
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }

    /// xᵀ Ĥ y.
    pub fn bilinear(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        Ok(x.dot(&(&self.hessian_inv * y)))
    }

    /// xᵀ Ĥ x.
    pub fn quad_form(&self, x: &DVector<f64>) -> Result<f64> {
        self.bilinear(x, x)
    }
}

pub fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

// log(1 + e^x)
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn log_likelihood(x: &DMatrix<f64>, y01: &[f64], theta: &DVector<f64>) -> f64 {
    let scores = x * theta;
    scores
        .iter()
        .zip(y01)
        .map(|(&s, &y)| if y == 1.0 { -softplus(-s) } else { -softplus(s) })
        .sum()
}

/// Gradient and information (XᵀDX) of the log-likelihood at `theta`.
fn gradient_and_information(
    x: &DMatrix<f64>,
    y01: &[f64],
    theta: &DVector<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    let (n, d) = x.shape();
    let mut grad = DVector::zeros(d);
    let mut info = DMatrix::zeros(d, d);
    for (i, &yi) in y01.iter().enumerate().take(n) {
        let row = x.row(i);
        let eta = sigmoid(row.dot(&theta.transpose()));
        let r = yi - eta;
        let w = eta * (1.0 - eta);
        for a in 0..d {
            grad[a] += r * row[a];
            let wa = w * row[a];
            for b in 0..=a {
                info[(a, b)] += wa * row[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            info[(b, a)] = info[(a, b)];
        }
    }
    (grad, info)
}

/// Log-likelihood of `theta` on `data` (no penalty).
pub fn log_likelihood_at(data: &Dataset, theta: &DVector<f64>) -> Result<f64> {
    if theta.len() != data.dim() {
        return Err(Error::DimensionMismatch { expected: data.dim(), got: theta.len() });
    }
    let y01: Vec<f64> = data.labels.iter().map(|&y| f64::from(y + 1) / 2.0).collect();
    Ok(log_likelihood(&data.features, &y01, theta))
}

/// Fit with default options.
pub fn fit(data: &Dataset) -> Result<FittedModel> {
    fit_with(data, &FitOptions::default())
}

pub fn fit_with(data: &Dataset, opts: &FitOptions) -> Result<FittedModel> {
    fit_traced(data, opts, |_| {})
}

/// Fit and report the (penalized) log-likelihood after every accepted step.
pub fn fit_traced(
    data: &Dataset,
    opts: &FitOptions,
    mut on_step: impl FnMut(f64),
) -> Result<FittedModel> {
    match newton(data, opts, 0.0, &mut on_step) {
        Err(Error::Separable { .. }) if opts.ridge_fallback => {
            newton(data, opts, opts.ridge_lambda, &mut on_step)
        }
        other => other,
    }
}

fn newton(
    data: &Dataset,
    opts: &FitOptions,
    lambda: f64,
    on_step: &mut impl FnMut(f64),
) -> Result<FittedModel> {
    let x = &data.features;
    let d = x.ncols();
    let y01: Vec<f64> = data.labels.iter().map(|&y| f64::from(y + 1) / 2.0).collect();
    let objective = |t: &DVector<f64>| log_likelihood(x, &y01, t) - lambda * t.norm_squared();

    let mut theta = DVector::zeros(d);
    let mut current = objective(&theta);
    on_step(current);
    let mut iterations = 0;
    let mut converged = false;
    let mut grad_norm: f64;

    loop {
        let (mut grad, mut info) = gradient_and_information(x, &y01, &theta);
        if lambda > 0.0 {
            grad -= 2.0 * lambda * &theta;
            for a in 0..d {
                info[(a, a)] += 2.0 * lambda;
            }
        }
        grad_norm = grad.amax();
        if grad_norm <= opts.tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        let chol = info.cholesky().ok_or_else(|| {
            Error::Numerical("information matrix XᵀDX is not positive definite".into())
        })?;
        let step = chol.solve(&grad);

        // changes below the rounding error of the summed objective carry no signal
        let slack = 64.0 * f64::EPSILON * current.abs().max(1.0);
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let candidate = &theta + scale * &step;
            let value = objective(&candidate);
            if value >= current - slack {
                accepted = Some((candidate, value));
                break;
            }
            scale *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((t, v)) => {
                theta = t;
                current = v;
                on_step(current);
            }
            // no ascent possible at machine precision: we are at the optimum
            None => {
                let (g, _) = gradient_and_information(x, &y01, &theta);
                grad_norm = (g - 2.0 * lambda * &theta).amax();
                converged = grad_norm <= opts.tol;
                break;
            }
        }
        let norm = theta.norm();
        if lambda == 0.0 && norm > opts.separation_norm {
            return Err(Error::Separable { norm, limit: opts.separation_norm });
        }
    }

    // a finite optimum cannot classify every point with positive margin
    if lambda == 0.0 {
        let scores = x * &theta;
        if scores.iter().zip(&data.labels).all(|(&s, &y)| s * f64::from(y) > 0.0) {
            return Err(Error::Separable { norm: theta.norm(), limit: opts.separation_norm });
        }
    }

    let (_, mut info) = gradient_and_information(x, &y01, &theta);
    for a in 0..d {
        info[(a, a)] += 2.0 * lambda;
    }
    let hessian_inv = invert_spd(&info)?;
    let log_likelihood = log_likelihood(x, &y01, &theta);

    Ok(FittedModel {
        theta,
        hessian_inv,
        converged,
        iterations,
        grad_norm,
        ridge_used: lambda,
        log_likelihood,
        n: data.len(),
    })
}

fn invert_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("XᵀDX is singular at the fitted coefficients".into()))?;
    let inv = chol.inverse();
    Ok((&inv + inv.transpose()) * 0.5)
}

/// σ(θ̂ᵀx).
pub fn predict_posterior(model: &FittedModel, x: &DVector<f64>) -> Result<f64> {
    model.check_dim(x)?;
    Ok(sigmoid(model.theta.dot(x)))
}

/// Delta-method variance of η̂(x): [η(1-η)]² · xᵀĤx.
///
/// Ĥ = (XᵀDX)⁻¹ already carries the 1/n scale, so no further factor is applied.
pub fn delta_variance(model: &FittedModel, x: &DVector<f64>, eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Domain(format!(
            "delta-method variance needs 0 < eta < 1, got {eta}"
        )));
    }
    let g = eta * (1.0 - eta);
    Ok(g * g * model.quad_form(x)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn symmetric_four() -> Dataset {
        Dataset::from_rows(&[vec![1.0], vec![1.0], vec![-1.0], vec![-1.0]], vec![1, -1, 1, -1]).unwrap()
    }

    fn intercept_only(n: usize) -> Dataset {
        let labels = (0..n).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        Dataset::new(DMatrix::from_element(n, 1, 1.0), labels).unwrap()
    }

    fn overlapping(n: usize) -> Dataset {
        // deterministic, non-separable: x spread over [-2, 2] with alternating noise
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![-2.0 + 4.0 * i as f64 / (n - 1) as f64]).collect();
        let labels = rows
            .iter()
            .enumerate()
            .map(|(i, r)| if (r[0] + if i % 3 == 0 { 1.5 } else { -0.3 }) > 0.0 { 1 } else { -1 })
            .collect();
        Dataset::from_rows(&rows, labels).unwrap()
    }

    #[test]
    fn symmetric_data_gives_zero_coefficients() {
        let m = fit(&symmetric_four()).unwrap();
        assert!(m.converged);
        assert_abs_diff_eq!(m.theta()[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.theta()[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn intercept_only_balanced_has_closed_form_inverse() {
        for n in [2, 16, 100] {
            let m = fit(&intercept_only(n)).unwrap();
            assert_abs_diff_eq!(m.theta()[0], 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(m.hessian_inv()[(0, 0)], 4.0 / n as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn predict_examples() {
        let zero = FittedModel::from_parts(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        assert_eq!(predict_posterior(&zero, &DVector::from_vec(vec![1.0, -7.3])).unwrap(), 0.5);
        let m = FittedModel::from_parts(DVector::from_vec(vec![0.0, 1.0]), DMatrix::identity(2, 2)).unwrap();
        assert_eq!(predict_posterior(&m, &DVector::from_vec(vec![1.0, 0.0])).unwrap(), 0.5);
        let p = predict_posterior(&m, &DVector::from_vec(vec![1.0, 3.0_f64.ln()])).unwrap();
        assert_abs_diff_eq!(p, 0.75, epsilon = 1e-15);
        assert!(matches!(
            predict_posterior(&m, &DVector::from_vec(vec![1.0])),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn sigmoid_is_stable_in_the_tails() {
        assert_eq!(sigmoid(800.0), 1.0);
        assert_eq!(sigmoid(-800.0), 0.0);
        assert_abs_diff_eq!(sigmoid(-30.0), (-30.0_f64).exp() / (1.0 + (-30.0_f64).exp()), epsilon = 1e-28);
        assert_abs_diff_eq!(softplus(-800.0), 0.0);
        assert_abs_diff_eq!(softplus(800.0), 800.0);
    }

    #[test]
    fn delta_variance_examples() {
        let m = fit(&intercept_only(16)).unwrap();
        let x = DVector::from_vec(vec![1.0]);
        assert_abs_diff_eq!(delta_variance(&m, &x, 0.5).unwrap(), 1.0 / 64.0, epsilon = 1e-15);

        let h = DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.1, 0.2]);
        let m = FittedModel::from_parts(DVector::zeros(2), h).unwrap();
        let x = DVector::from_vec(vec![1.0, 2.0]);
        let quad = 0.3 + 2.0 * 2.0 * 0.1 + 4.0 * 0.2;
        assert_abs_diff_eq!(delta_variance(&m, &x, 0.5).unwrap(), quad / 16.0, epsilon = 1e-15);
        assert_abs_diff_eq!(delta_variance(&m, &x, 0.2).unwrap(), 0.16 * 0.16 * quad, epsilon = 1e-15);
        for bad in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(matches!(delta_variance(&m, &x, bad), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn information_matches_finite_difference_hessian() {
        let data = overlapping(60);
        let m = fit(&data).unwrap();
        let theta = m.theta().clone();
        let h = 1e-4;
        let mut fd = DMatrix::zeros(2, 2);
        for a in 0..2 {
            for b in 0..2 {
                let t = |da: f64, db: f64| {
                    let mut th = theta.clone();
                    th[a] += da;
                    th[b] += db;
                    log_likelihood_at(&data, &th).unwrap()
                };
                fd[(a, b)] = -(t(h, h) - t(h, -h) - t(-h, h) + t(-h, -h)) / (4.0 * h * h);
            }
        }
        let info = m.hessian_inv().clone().try_inverse().unwrap();
        for a in 0..2 {
            for b in 0..2 {
                assert!((fd[(a, b)] - info[(a, b)]).abs() < 1e-4 * info[(a, b)].abs().max(1.0));
            }
        }
    }

    #[test]
    fn log_likelihood_never_decreases() {
        let data = overlapping(200);
        let mut trace = Vec::new();
        let m = fit_traced(&data, &FitOptions::default(), |v| trace.push(v)).unwrap();
        assert!(m.converged);
        assert!(trace.len() >= 2);
        for w in trace.windows(2) {
            // steps may only lose what the rounding slack permits
            assert!(w[1] >= w[0] - 1e-12 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
        }
        assert_abs_diff_eq!(*trace.last().unwrap(), m.log_likelihood, epsilon = 1e-12);
    }

    #[test]
    fn gradient_vanishes_at_the_fit() {
        let data = overlapping(200);
        let m = fit(&data).unwrap();
        assert!(m.grad_norm <= FitOptions::default().tol);
        // any perturbation lowers the likelihood
        for d in [[1e-3, 0.0], [0.0, 1e-3], [-1e-3, 1e-3]] {
            let t = m.theta() + DVector::from_row_slice(&d);
            assert!(log_likelihood_at(&data, &t).unwrap() < m.log_likelihood);
        }
    }

    #[test]
    fn separable_data_is_detected() {
        let rows = vec![vec![-2.0], vec![-1.0], vec![1.0], vec![2.0]];
        let data = Dataset::from_rows(&rows, vec![-1, -1, 1, 1]).unwrap();
        assert!(matches!(fit(&data), Err(Error::Separable { .. })));
        let opts = FitOptions { ridge_fallback: true, ..FitOptions::default() };
        let m = fit_with(&data, &opts).unwrap();
        assert_eq!(m.ridge_used, opts.ridge_lambda);
        assert!(m.converged);
        assert!(m.theta()[1] > 0.0);
    }

    #[test]
    fn dataset_validation() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 1.0, -0.5]);
        assert!(Dataset::new(x.clone(), vec![1, -1]).is_ok());
        assert!(matches!(Dataset::new(x.clone(), vec![1]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(Dataset::new(x.clone(), vec![1, 1]), Err(Error::InvalidDataset(_))));
        assert!(matches!(Dataset::new(x.clone(), vec![1, 0]), Err(Error::InvalidDataset(_))));
        let no_intercept = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 1.0, -0.5]);
        assert!(matches!(Dataset::new(no_intercept, vec![1, -1]), Err(Error::InvalidDataset(_))));
        let nan = DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, 1.0, -0.5]);
        assert!(matches!(Dataset::new(nan, vec![1, -1]), Err(Error::InvalidDataset(_))));
        let wide = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 1.0, 1.0, 0.0]);
        assert!(matches!(Dataset::new(wide, vec![1, -1]), Err(Error::InvalidDataset(_))));
    }

    #[test]
    fn csv_round_trip() {
        let data = overlapping(25);
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, data);

        let headerless = "0.5,1\n-0.5,-1\n1.5,1\n";
        let d = Dataset::read_csv(headerless.as_bytes()).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.dim(), 2);
        assert!(Dataset::read_csv("x,label\n0.5,2\n1.0,-1\n".as_bytes()).is_err());
        assert!(matches!(Dataset::read_csv("x,label\n0.5,1\nabc,-1\n".as_bytes()), Err(Error::Parse(_))));
    }

    #[test]
    fn model_json_round_trip() {
        let m = fit(&overlapping(40)).unwrap();
        let text = serde_json::to_string(&m).unwrap();
        let back: FittedModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
        let bad = r#"{"theta":[0,1],"hessian_inv":[[1]],"converged":true,"iterations":0,"grad_norm":0,"ridge_used":0,"log_likelihood":0,"n":0}"#;
        assert!(serde_json::from_str::<FittedModel>(bad).is_err());
    }
}
