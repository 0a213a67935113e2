//! Soft-margin C-SVM dual solved by sequential minimal optimisation with
//! second-order working-set selection, for one-dimensional features.
//!
//! The dual is `min 0.5 a'Qa - sum(a)` subject to `y'a = 0` and
//! `0 <= a <= C`, with `Q_ij = y_i y_j K(x_i, x_j)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_MAX_ITER: usize = 100_000;
const TAU: f64 = 1e-12;

pub fn rbf_kernel(a: f64, b: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Domain(format!("gamma must be positive, got {gamma}")));
    }
    Ok(rbf(a, b, gamma))
}

#[inline]
pub(crate) fn rbf(a: f64, b: f64, gamma: f64) -> f64 {
    let d = a - b;
    (-gamma * d * d).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportVector {
    pub s: f64,
    pub alpha_y: f64,
}

/// Trained RBF SVM over a scalar feature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvmModel {
    pub gamma: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub bias: f64,
    pub support: Vec<SupportVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_checkpoint_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv_table: Option<crate::svm::cv::CvTable>,
}

impl SvmModel {
    /// `sum_i alpha_i y_i K(s_i, x) + b`.
    pub fn decision(&self, x: f64) -> f64 {
        self.support.iter().map(|sv| sv.alpha_y * rbf(sv.s, x, self.gamma)).sum::<f64>() + self.bias
    }

    /// Label in {0, 1} and the signed margin.
    pub fn predict(&self, x: f64) -> (u8, f64) {
        let m = self.decision(x);
        (u8::from(m > 0.0), m)
    }
}

pub fn svm_predict(model: &SvmModel, feature: f64) -> (u8, f64) {
    model.predict(feature)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoParams {
    pub gamma: f64,
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl SmoParams {
    pub fn new(gamma: f64, c: f64) -> Self {
        Self { gamma, c, tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER }
    }
}

/// Full solver state at exit, converged or not.
#[derive(Clone, Debug)]
pub struct SmoOutcome {
    pub model: SvmModel,
    /// Dual variables in input order.
    pub alpha: Vec<f64>,
    /// Value of the minimised dual objective.
    pub objective: f64,
    pub iterations: usize,
    /// Final maximal KKT violation `m(a) - M(a)`.
    pub violation: f64,
    pub converged: bool,
}

fn check_inputs(features: &[f64], labels: &[u8], p: &SmoParams) -> Result<Vec<f64>> {
    if features.len() != labels.len() {
        return Err(Error::dim("one label per feature is required"));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("features must be finite".into()));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::Domain("labels must be 0 or 1".into()));
    }
    if !(labels.contains(&0) && labels.contains(&1)) {
        return Err(Error::Domain("SVM training needs both classes".into()));
    }
    if !(p.gamma > 0.0 && p.gamma.is_finite() && p.c > 0.0 && p.c.is_finite() && p.tol > 0.0) {
        return Err(Error::config(format!("gamma, C and tol must be positive (gamma={}, C={})", p.gamma, p.c)));
    }
    Ok(labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect())
}

/// Runs SMO to tolerance or the iteration cap and returns the state either way.
pub fn smo_solve(features: &[f64], labels: &[u8], p: &SmoParams) -> Result<SmoOutcome> {
    let y = check_inputs(features, labels, p)?;
    let n = features.len();
    let c = p.c;
    let k: Vec<f64> = (0..n * n).map(|idx| rbf(features[idx / n], features[idx % n], p.gamma)).collect();
    let kk = |i: usize, j: usize| k[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

    let mut iterations = 0;
    let mut violation;
    loop {
        // i: maximal -y G over I_up; ties go to the lowest index
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if up(alpha[t], y[t]) && -y[t] * grad[t] > gmax {
                gmax = -y[t] * grad[t];
                i = t;
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            if i != usize::MAX && v < gmax {
                let b = gmax - v;
                let a = (kk(i, i) + kk(t, t) - 2.0 * kk(i, t)).max(TAU);
                let score = -(b * b) / a;
                if score < best {
                    best = score;
                    j = t;
                }
            }
        }
        violation = if i == usize::MAX || gmin == f64::INFINITY { 0.0 } else { gmax - gmin };
        if violation < p.tol || j == usize::MAX {
            break;
        }
        if iterations >= p.max_iter {
            break;
        }
        iterations += 1;

        let (yi, yj) = (y[i], y[j]);
        let (ai_old, aj_old) = (alpha[i], alpha[j]);
        let quad = (kk(i, i) + kk(j, j) - 2.0 * kk(i, j)).max(TAU);
        if yi != yj {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai_old - aj_old;
            let (mut ai, mut aj) = (ai_old + delta, aj_old + delta);
            if diff > 0.0 && aj < 0.0 {
                aj = 0.0;
                ai = diff;
            } else if diff <= 0.0 && ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 && ai > c {
                ai = c;
                aj = c - diff;
            } else if diff <= 0.0 && aj > c {
                aj = c;
                ai = c + diff;
            }
            alpha[i] = ai;
            alpha[j] = aj;
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai_old + aj_old;
            let (mut ai, mut aj) = (ai_old - delta, aj_old + delta);
            if sum > c && ai > c {
                ai = c;
                aj = sum - c;
            } else if sum <= c && aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c && aj > c {
                aj = c;
                ai = sum - c;
            } else if sum <= c && ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
            alpha[i] = ai;
            alpha[j] = aj;
        }
        let (di, dj) = (alpha[i] - ai_old, alpha[j] - aj_old);
        for t in 0..n {
            grad[t] += y[t] * (yi * kk(t, i) * di + yj * kk(t, j) * dj);
        }
    }

    let bias = bias_from(&alpha, &grad, &y, c);
    // G = Qa - 1, so 0.5 a'Qa - sum(a) = 0.5 a'(G - 1)
    let objective = 0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>();
    let support = (0..n)
        .filter(|&t| alpha[t] > 0.0)
        .map(|t| SupportVector { s: features[t], alpha_y: alpha[t] * y[t] })
        .collect();
    Ok(SmoOutcome {
        model: SvmModel { gamma: p.gamma, c, bias, support, source_checkpoint_id: None, cv_table: None },
        alpha,
        objective,
        iterations,
        violation,
        converged: violation < p.tol,
    })
}

/// Offset from the free support vectors, or the midpoint of the feasible
/// interval when every multiplier sits at a bound.
fn bias_from(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum, mut free) = (0.0, 0usize);
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    let rho = if free > 0 { sum / free as f64 } else { (ub + lb) / 2.0 };
    -rho
}

/// Trains an SVM; fails with [`Error::NotConverged`] at the iteration cap.
pub fn smo_train(features: &[f64], labels: &[u8], p: &SmoParams) -> Result<SvmModel> {
    let out = smo_solve(features, labels, p)?;
    if !out.converged {
        return Err(Error::NotConverged { iterations: out.iterations, violation: out.violation });
    }
    Ok(out.model)
}
