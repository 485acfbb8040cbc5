//! Sequential minimal optimization for the box-constrained SVM dual.
//!
//! Minimizes `1/2 a^T Q a - e^T a` subject to `y^T a = 0`, `0 <= a_i <= C`
//! with `Q_ij = y_i y_j K_ij`. Each iteration picks the maximal violating
//! pair and solves the two-variable subproblem in closed form. The solver
//! stops when `m(a) - M(a) <= tol`, which bounds every KKT violation of the
//! returned model by `tol`.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoConfig {
    /// Bound on the maximal KKT violation at convergence.
    pub kkt_tolerance: f64,
    /// Iteration cap in units of `n` pair updates. `None` means `10 * n`
    /// passes.
    pub max_passes: Option<usize>,
    /// Kernel rows kept in memory.
    pub cache_size: usize,
}

impl Default for SmoConfig {
    fn default() -> Self {
        Self {
            kkt_tolerance: 1e-3,
            max_passes: None,
            cache_size: 4096,
        }
    }
}

impl SmoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kkt_tolerance > 0.0) {
            return Err(Error::domain("KKT tolerance must be positive"));
        }
        if self.max_passes == Some(0) {
            return Err(Error::domain("max_passes must be positive"));
        }
        Ok(())
    }

    pub fn max_iterations(&self, n: usize) -> usize {
        let passes = self.max_passes.unwrap_or(10 * n);
        passes.saturating_mul(n).max(1)
    }
}

/// Lazily computed kernel rows with LRU eviction. Row values do not depend
/// on the cache state.
pub(crate) struct KernelRows<'a> {
    n: usize,
    compute: Box<dyn Fn(usize, &mut [f64]) + 'a>,
    diag: Vec<f64>,
    rows: Vec<Option<Arc<[f64]>>>,
    recent: VecDeque<usize>,
    capacity: usize,
}

impl<'a> KernelRows<'a> {
    pub(crate) fn new(
        n: usize,
        capacity: usize,
        diag: Vec<f64>,
        compute: impl Fn(usize, &mut [f64]) + 'a,
    ) -> Self {
        debug_assert_eq!(diag.len(), n);
        Self {
            n,
            compute: Box::new(compute),
            diag,
            rows: vec![None; n],
            recent: VecDeque::new(),
            capacity: capacity.max(2),
        }
    }

    fn row(&mut self, i: usize) -> Arc<[f64]> {
        if let Some(r) = &self.rows[i] {
            return Arc::clone(r);
        }
        let mut buf = vec![0.0; self.n];
        (self.compute)(i, &mut buf);
        let row: Arc<[f64]> = buf.into();
        if self.recent.len() >= self.capacity {
            if let Some(old) = self.recent.pop_front() {
                self.rows[old] = None;
            }
        }
        self.recent.push_back(i);
        self.rows[i] = Some(Arc::clone(&row));
        row
    }
}

pub(crate) struct Solution {
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[inline]
fn in_up(alpha: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && alpha < c) || (y < 0.0 && alpha > 0.0)
}

#[inline]
fn in_low(alpha: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && alpha > 0.0) || (y < 0.0 && alpha < c)
}

pub(crate) fn solve(rows: &mut KernelRows<'_>, y: &[f64], c: f64, config: &SmoConfig) -> Solution {
    let n = y.len();
    let tol = config.kkt_tolerance;
    let max_iter = config.max_iterations(n);
    let mut alpha = vec![0.0; n];
    // f_t = -y_t G_t, where G is the gradient of 1/2 a^T Q a - e^T a
    let mut f: Vec<f64> = y.to_vec();
    let mut up: Vec<bool> = y.iter().map(|&yt| in_up(0.0, yt, c)).collect();
    let mut low: Vec<bool> = y.iter().map(|&yt| in_low(0.0, yt, c)).collect();
    let mut iterations = 0;
    let mut converged = false;

    // i maximizes f over I_up, j minimizes it over I_low
    let (mut i, mut m, mut j, mut big_m) = select_pair(&f, &up, &low);
    loop {
        if i == usize::MAX || j == usize::MAX || m - big_m <= tol {
            converged = true;
            break;
        }
        if iterations >= max_iter {
            break;
        }
        iterations += 1;

        let ki = rows.row(i);
        let kj = rows.row(j);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let q_ij = y[i] * y[j] * ki[j];

        if y[i] != y[j] {
            let quad = (rows.diag[i] + rows.diag[j] + 2.0 * q_ij).max(TAU);
            let delta = (y[i] * f[i] + y[j] * f[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (rows.diag[i] + rows.diag[j] - 2.0 * q_ij).max(TAU);
            let delta = (y[j] * f[j] - y[i] * f[i]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let di = (alpha[i] - old_i) * y[i];
        let dj = (alpha[j] - old_j) * y[j];
        for t in [i, j] {
            up[t] = in_up(alpha[t], y[t], c);
            low[t] = in_low(alpha[t], y[t], c);
        }
        // gradient update fused with the next pair selection
        (i, m, j, big_m) = (usize::MAX, f64::NEG_INFINITY, usize::MAX, f64::INFINITY);
        let lanes = f.iter_mut().zip(up.iter().zip(&low)).zip(ki.iter().zip(kj.iter()));
        for (t, ((ft, (&ut, &lt)), (&kit, &kjt))) in lanes.enumerate() {
            *ft -= kit * di + kjt * dj;
            if ut && *ft > m {
                m = *ft;
                i = t;
            }
            if lt && *ft < big_m {
                big_m = *ft;
                j = t;
            }
        }
    }

    Solution {
        bias: bias(&alpha, &f, y, c),
        alphas: alpha,
        iterations,
        converged,
    }
}

fn select_pair(f: &[f64], up: &[bool], low: &[bool]) -> (usize, f64, usize, f64) {
    let (mut i, mut m, mut j, mut big_m) = (usize::MAX, f64::NEG_INFINITY, usize::MAX, f64::INFINITY);
    for t in 0..f.len() {
        if up[t] && f[t] > m {
            m = f[t];
            i = t;
        }
        if low[t] && f[t] < big_m {
            big_m = f[t];
            j = t;
        }
    }
    (i, m, j, big_m)
}

/// Mean of `-y_t G_t` over free multipliers, or the midpoint of the feasible
/// interval when every multiplier sits at a bound.
fn bias(alpha: &[f64], f: &[f64], y: &[f64], c: f64) -> f64 {
    let mut sum = 0.0;
    let mut free = 0usize;
    let mut up = f64::NEG_INFINITY;
    let mut low = f64::INFINITY;
    for t in 0..alpha.len() {
        let ft = f[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            sum += ft;
            free += 1;
        }
        if in_up(alpha[t], y[t], c) {
            up = up.max(ft);
        }
        if in_low(alpha[t], y[t], c) {
            low = low.min(ft);
        }
    }
    if free > 0 {
        return sum / free as f64;
    }
    match (up.is_finite(), low.is_finite()) {
        (true, true) => 0.5 * (up + low),
        (true, false) => up,
        (false, true) => low,
        (false, false) => 0.0,
    }
}
