//! Binary soft-margin SVM trained through its dual.

mod kernel;
mod smo;

pub use kernel::{kernel_eval, Kernel};
pub use smo::SmoConfig;
pub(crate) use smo::{solve, KernelRows};

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// A trained classifier. Immutable once built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// One multiplier per training point, each in `[0, C]`.
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub support_indices: Vec<usize>,
    pub support_vectors: Vec<Vec<f64>>,
    /// `y_i * alpha_i` per support vector.
    pub support_coefs: Vec<f64>,
    pub kernel: Kernel,
    pub c: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn check_training(labels: &[f64], c: f64) -> Result<()> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::domain(format!("C must be positive, got {c}")));
    }
    let pos = labels.iter().any(|&y| y > 0.0);
    let neg = labels.iter().any(|&y| y < 0.0);
    if !(pos && neg) {
        return Err(Error::SingleClass);
    }
    Ok(())
}

/// Trains on `data` with penalty `c`. A solver that hits its iteration cap
/// still returns a model, with `converged == false`.
pub fn smo_train(data: &Dataset, c: f64, kernel: Kernel, config: &SmoConfig) -> Result<SvmModel> {
    kernel.validate()?;
    config.validate()?;
    check_training(data.labels(), c)?;
    let n = data.len();
    let diag = (0..n).map(|i| kernel.value(data.row(i), data.row(i))).collect();
    let mut rows = KernelRows::new(n, config.cache_size, diag, |i, out: &mut [f64]| {
        let xi = data.row(i);
        for (t, o) in out.iter_mut().enumerate() {
            *o = kernel.value(xi, data.row(t));
        }
    });
    let sol = solve(&mut rows, data.labels(), c, config);
    let support_indices: Vec<usize> = (0..n).filter(|&i| sol.alphas[i] > 0.0).collect();
    Ok(SvmModel {
        support_vectors: support_indices.iter().map(|&i| data.row(i).to_vec()).collect(),
        support_coefs: support_indices
            .iter()
            .map(|&i| data.label(i) * sol.alphas[i])
            .collect(),
        support_indices,
        alphas: sol.alphas,
        bias: sol.bias,
        kernel,
        c,
        converged: sol.converged,
        iterations: sol.iterations,
    })
}

impl SvmModel {
    /// Pre-sign output `sum_i y_i a_i K(x_i, x) + b`.
    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        if let Some(sv) = self.support_vectors.first() {
            if sv.len() != x.len() {
                return Err(Error::DimensionMismatch {
                    expected: sv.len(),
                    found: x.len(),
                });
            }
        }
        Ok(self.decision_unchecked(x))
    }

    fn decision_unchecked(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.support_coefs)
            .map(|(sv, coef)| coef * self.kernel.value(sv, x))
            .sum::<f64>()
            + self.bias
    }

    /// `+1` or `-1`; a zero decision value maps to `+1`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(sign(self.decision_value(x)?))
    }

    /// Fraction of misclassified rows of `data`.
    pub fn error_rate(&self, data: &Dataset) -> Result<f64> {
        if data.n_features() != self.support_vectors.first().map_or(data.n_features(), Vec::len) {
            return Err(Error::DimensionMismatch {
                expected: self.support_vectors[0].len(),
                found: data.n_features(),
            });
        }
        let wrong = (0..data.len())
            .filter(|&i| sign(self.decision_unchecked(data.row(i))) != data.label(i))
            .count();
        Ok(wrong as f64 / data.len() as f64)
    }
}

pub fn sign(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

pub fn decision_value(model: &SvmModel, x: &[f64]) -> Result<f64> {
    model.decision_value(x)
}

pub fn predict(model: &SvmModel, x: &[f64]) -> Result<f64> {
    model.predict(x)
}

/// `sum a_i - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)` at the model's
/// multipliers; `data` must be the training set.
pub fn dual_objective(model: &SvmModel, data: &Dataset) -> f64 {
    let linear: f64 = model.alphas.iter().sum();
    let sv = &model.support_indices;
    let mut quad = 0.0;
    for (a, &i) in sv.iter().enumerate() {
        for (b, &j) in sv.iter().enumerate() {
            quad += model.support_coefs[a]
                * model.support_coefs[b]
                * model.kernel.value(data.row(i), data.row(j));
        }
    }
    linear - 0.5 * quad
}

/// Largest KKT violation over the training set:
/// `a = 0` needs `y f >= 1`, `0 < a < C` needs `y f = 1`, `a = C` needs
/// `y f <= 1`.
pub fn max_kkt_violation(model: &SvmModel, data: &Dataset) -> f64 {
    (0..data.len())
        .map(|i| {
            let yf = data.label(i) * model.decision_unchecked(data.row(i));
            let a = model.alphas[i];
            if a <= 0.0 {
                (1.0 - yf).max(0.0)
            } else if a >= model.c {
                (yf - 1.0).max(0.0)
            } else {
                (yf - 1.0).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// `|sum_i a_i y_i|`.
pub fn equality_residual(model: &SvmModel, data: &Dataset) -> f64 {
    model
        .alphas
        .iter()
        .zip(data.labels())
        .map(|(a, y)| a * y)
        .sum::<f64>()
        .abs()
}
