use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mercer kernels for the binary SVM.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Kernel {
    /// `<a, b>`
    Linear,
    /// `(gamma <a, b> + r)^degree`
    Polynomial { gamma: f64, r: f64, degree: u32 },
    /// `exp(-gamma |a - b|^2)`
    Rbf { gamma: f64 },
    /// `tanh(gamma <a, b> + r)`
    Sigmoid { gamma: f64, r: f64 },
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl Kernel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Kernel::Linear => Ok(()),
            Kernel::Polynomial { gamma, r, degree } => {
                if !(gamma > 0.0) || !r.is_finite() || degree == 0 {
                    return Err(Error::domain(format!(
                        "polynomial kernel needs gamma > 0, finite r and degree >= 1 (got {gamma}, {r}, {degree})"
                    )));
                }
                Ok(())
            }
            Kernel::Rbf { gamma } => {
                if !(gamma > 0.0 && gamma.is_finite()) {
                    return Err(Error::domain(format!("RBF gamma must be positive, got {gamma}")));
                }
                Ok(())
            }
            Kernel::Sigmoid { gamma, r } => {
                if !(gamma.is_finite() && r.is_finite()) {
                    return Err(Error::domain("sigmoid kernel parameters must be finite"));
                }
                Ok(())
            }
        }
    }

    /// Kernel value without a length check.
    #[inline]
    pub fn value(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        match *self {
            Kernel::Linear => dot(a, b),
            Kernel::Polynomial { gamma, r, degree } => (gamma * dot(a, b) + r).powi(degree as i32),
            Kernel::Rbf { gamma } => (-gamma * squared_distance(a, b)).exp(),
            Kernel::Sigmoid { gamma, r } => (gamma * dot(a, b) + r).tanh(),
        }
    }
}

pub fn kernel_eval(kernel: &Kernel, a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(kernel.value(a, b))
}
