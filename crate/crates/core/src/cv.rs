//! k-fold cross-validated misclassification rate as a fitness function.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::space::{decode, Position, SvmParams};
use crate::svm::{self, sign, solve, Kernel, KernelRows, SmoConfig};

/// Above this many training points kernel rows are computed on demand
/// instead of from a precomputed Gram matrix.
const DENSE_GRAM_LIMIT: usize = 3000;

/// Stratified assignment of examples to folds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

/// Shuffles each class with a seeded RNG and deals it round-robin into `k`
/// folds. The second class continues dealing where the first stopped, so
/// fold sizes also differ by at most one.
pub fn make_folds(data: &Dataset, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::domain(format!("need at least 2 folds, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = vec![0; data.len()];
    let mut next = 0usize;
    for class in [-1.0, 1.0] {
        let mut members: Vec<usize> = (0..data.len()).filter(|&i| data.label(i) == class).collect();
        if members.len() < k {
            return Err(Error::domain(format!(
                "class {class:+} has {} examples, fewer than {k} folds",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for i in members {
            assignments[i] = next % k;
            next += 1;
        }
    }
    Ok(FoldPlan { k, assignments, seed })
}

impl FoldPlan {
    /// `(training indices, held-out indices)` for fold `j`.
    pub fn split(&self, j: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.assignments.len()).partition(|&i| self.assignments[i] != j)
    }

    /// Largest difference between two folds in the count of any class.
    pub fn stratification_deviation(&self, labels: &[f64]) -> usize {
        [-1.0, 1.0]
            .iter()
            .map(|&class| {
                let mut counts = vec![0usize; self.k];
                for (i, &f) in self.assignments.iter().enumerate() {
                    if labels[i] == class {
                        counts[f] += 1;
                    }
                }
                counts.iter().max().unwrap() - counts.iter().min().unwrap()
            })
            .max()
            .unwrap_or(0)
    }
}

/// Mean of the per-fold misclassification rates.
pub fn kcv_misclassification(fold_rates: &[f64]) -> f64 {
    fold_rates.iter().sum::<f64>() / fold_rates.len() as f64
}

/// RBF-SVM cross-validation error over `(log2 C, log2 gamma)`.
///
/// The fold plan is fixed at construction, so the same position always
/// scores the same. Every call to [`CvObjective::fitness`] ticks the
/// evaluation counter once, including cache hits.
pub struct CvObjective {
    data: Arc<Dataset>,
    folds: FoldPlan,
    splits: Vec<(Vec<usize>, Vec<usize>)>,
    smo: SmoConfig,
    counter: AtomicU64,
    cache: Option<Mutex<HashMap<Vec<u64>, f64>>>,
}

impl CvObjective {
    pub fn new(data: Arc<Dataset>, folds: FoldPlan, smo: SmoConfig) -> Result<Self> {
        if folds.assignments.len() != data.len() {
            return Err(Error::DimensionMismatch {
                expected: data.len(),
                found: folds.assignments.len(),
            });
        }
        smo.validate()?;
        let splits = (0..folds.k).map(|j| folds.split(j)).collect();
        Ok(Self {
            data,
            folds,
            splits,
            smo,
            counter: AtomicU64::new(0),
            cache: None,
        })
    }

    /// Stratified `k`-fold objective with folds drawn from `seed`.
    pub fn stratified(data: Arc<Dataset>, k: usize, seed: u64, smo: SmoConfig) -> Result<Self> {
        let folds = make_folds(&data, k, seed)?;
        Self::new(data, folds, smo)
    }

    pub fn with_cache(mut self, enabled: bool) -> Self {
        self.cache = enabled.then(|| Mutex::new(HashMap::new()));
        self
    }

    pub fn folds(&self) -> &FoldPlan {
        &self.folds
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    pub fn evaluations(&self) -> u64 {
        self.counter.load(Ordering::Relaxed)
    }

    /// Cross-validation error at `pos`; ticks the counter.
    pub fn fitness(&self, pos: &Position) -> f64 {
        self.counter.fetch_add(1, Ordering::Relaxed);
        let key: Vec<u64> = pos.coords().iter().map(|x| x.to_bits()).collect();
        if let Some(cache) = &self.cache {
            if let Some(&f) = cache.lock().unwrap().get(&key) {
                return f;
            }
        }
        let f = kcv_misclassification(&self.fold_error_rates(&decode(pos)));
        if let Some(cache) = &self.cache {
            cache.lock().unwrap().insert(key, f);
        }
        f
    }

    /// Misclassification rate of each held-out fold. A fold whose training
    /// part lacks a class scores 1. Does not tick the counter.
    pub fn fold_error_rates(&self, params: &SvmParams) -> Vec<f64> {
        let data = &*self.data;
        let n = data.len();
        let kernel = Kernel::Rbf { gamma: params.gamma };
        let gram = (n <= DENSE_GRAM_LIMIT).then(|| gram_matrix(data, &kernel));
        let k_at = |a: usize, b: usize| match &gram {
            Some(g) => g[a * n + b],
            None => kernel.value(data.row(a), data.row(b)),
        };

        self.splits
            .iter()
            .map(|(train, test)| {
                let y: Vec<f64> = train.iter().map(|&i| data.label(i)).collect();
                let both = y.iter().any(|&v| v > 0.0) && y.iter().any(|&v| v < 0.0);
                if !both || !(params.c > 0.0 && params.c.is_finite()) {
                    return 1.0;
                }
                let diag = train.iter().map(|&i| k_at(i, i)).collect();
                let mut rows = KernelRows::new(train.len(), self.smo.cache_size, diag, |r, out: &mut [f64]| {
                    let gi = train[r];
                    for (o, &gt) in out.iter_mut().zip(train) {
                        *o = k_at(gi, gt);
                    }
                });
                let sol = solve(&mut rows, &y, params.c, &self.smo);
                let support: Vec<(usize, f64)> = train
                    .iter()
                    .zip(&sol.alphas)
                    .zip(&y)
                    .filter(|((_, &a), _)| a > 0.0)
                    .map(|((&i, &a), &yi)| (i, a * yi))
                    .collect();
                let wrong = test
                    .iter()
                    .filter(|&&t| {
                        let f: f64 = support.iter().map(|&(s, coef)| coef * k_at(s, t)).sum::<f64>() + sol.bias;
                        sign(f) != data.label(t)
                    })
                    .count();
                wrong as f64 / test.len() as f64
            })
            .collect()
    }
}

impl Objective for CvObjective {
    fn evaluate(&mut self, pos: &Position) -> f64 {
        self.fitness(pos)
    }
}

fn gram_matrix(data: &Dataset, kernel: &Kernel) -> Vec<f64> {
    let n = data.len();
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        let xi = data.row(i);
        for j in i..n {
            let v = kernel.value(xi, data.row(j));
            g[i * n + j] = v;
            g[j * n + i] = v;
        }
    }
    g
}

/// Trains on all of `train` at the decoded parameters and returns the
/// misclassification rate on `test`.
pub fn test_error(train: &Dataset, test: &Dataset, pos: &Position, smo: &SmoConfig) -> Result<f64> {
    let params = decode(pos);
    params.validate()?;
    if train.n_features() != test.n_features() {
        return Err(Error::DimensionMismatch {
            expected: train.n_features(),
            found: test.n_features(),
        });
    }
    let model = svm::smo_train(train, params.c, Kernel::Rbf { gamma: params.gamma }, smo)?;
    model.error_rate(test)
}
