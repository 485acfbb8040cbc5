//! Choosing which individuals receive local refinement.
//!
//! [`SelectionStrategy::Probabilistic`] walks the population from best to
//! worst. Each candidate is accepted with its linearly scaled roulette
//! probability `(f_max - f_i) / sum_y (f_max - f_y)`; an accepted candidate
//! removes every remaining individual within `radius` of it, so refined
//! points never crowd the same basin.

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::Position;

pub const DEFAULT_RADIUS: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SelectionStrategy {
    /// Refine everyone.
    All,
    /// Refine each individual independently with this probability.
    FixedProbability(f64),
    /// Refine the `k` fittest.
    TopK(usize),
    /// Crowding-aware roulette selection with the given exclusion radius.
    Probabilistic { radius: f64 },
}

impl SelectionStrategy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SelectionStrategy::FixedProbability(p) if !(0.0..=1.0).contains(&p) => Err(
                Error::domain(format!("refinement probability {p} outside [0, 1]")),
            ),
            SelectionStrategy::TopK(0) => Err(Error::domain("top-k needs k >= 1")),
            SelectionStrategy::Probabilistic { radius } if !(radius >= 0.0) => {
                Err(Error::domain(format!("radius {radius} must be non-negative")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SelectionOutcome {
    /// Selected particle indices, in selection order.
    pub selected: Vec<usize>,
    /// `(index, probability)` for every individual that was considered.
    pub probabilities_used: Vec<(usize, f64)>,
}

fn check_fitnesses(fitnesses: &[f64]) -> Result<()> {
    if fitnesses.is_empty() {
        return Err(Error::domain("selection needs a non-empty population"));
    }
    if let Some(f) = fitnesses.iter().find(|f| !f.is_finite()) {
        return Err(Error::domain(format!("non-finite fitness {f}")));
    }
    Ok(())
}

/// Roulette probabilities with linear scaling against the worst fitness.
/// If every fitness is equal the probabilities are uniform.
pub fn selection_probabilities(fitnesses: &[f64]) -> Result<Vec<f64>> {
    check_fitnesses(fitnesses)?;
    let worst = fitnesses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = fitnesses.iter().map(|f| worst - f).sum();
    if total == 0.0 {
        let n = fitnesses.len() as f64;
        return Ok(vec![1.0 / n; fitnesses.len()]);
    }
    Ok(fitnesses.iter().map(|f| (worst - f) / total).collect())
}

pub fn selection_probability(fitnesses: &[f64], index: usize) -> Result<f64> {
    if index >= fitnesses.len() {
        return Err(Error::domain(format!(
            "index {index} out of range for {} individuals",
            fitnesses.len()
        )));
    }
    Ok(selection_probabilities(fitnesses)?[index])
}

/// Indices sorted by fitness, ties by index.
fn rank(fitnesses: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..fitnesses.len()).collect();
    order.sort_by(|&a, &b| fitnesses[a].total_cmp(&fitnesses[b]).then(a.cmp(&b)));
    order
}

/// Crowding-aware probabilistic selection.
///
/// Probabilities are computed once over the whole population. Candidates are
/// visited best first; a rejected candidate is dropped on its own, an
/// accepted one also drops every remaining individual at Euclidean distance
/// `<= radius`.
pub fn select_probabilistic<R: Rng + ?Sized>(
    positions: &[Position],
    fitnesses: &[f64],
    radius: f64,
    rng: &mut R,
) -> Result<SelectionOutcome> {
    if positions.len() != fitnesses.len() {
        return Err(Error::DimensionMismatch {
            expected: fitnesses.len(),
            found: positions.len(),
        });
    }
    let probs = selection_probabilities(fitnesses)?;
    let mut remaining = vec![true; fitnesses.len()];
    let mut out = SelectionOutcome::default();

    for x in rank(fitnesses) {
        if !remaining[x] {
            continue;
        }
        remaining[x] = false;
        let p = probs[x];
        out.probabilities_used.push((x, p));
        let u: f64 = rng.sample(Open01);
        if p >= u {
            out.selected.push(x);
            for (y, alive) in remaining.iter_mut().enumerate() {
                if *alive && positions[x].distance(&positions[y]) <= radius {
                    *alive = false;
                }
            }
        }
    }
    Ok(out)
}

/// Applies `strategy` to a population snapshot.
///
/// Non-finite fitnesses (unevaluated or failed individuals) are treated as
/// the worst finite fitness in the population.
pub fn select<R: Rng + ?Sized>(
    strategy: &SelectionStrategy,
    positions: &[Position],
    fitnesses: &[f64],
    rng: &mut R,
) -> Result<SelectionOutcome> {
    strategy.validate()?;
    if fitnesses.is_empty() {
        return Err(Error::domain("selection needs a non-empty population"));
    }
    let worst_finite = fitnesses
        .iter()
        .copied()
        .filter(|f| f.is_finite())
        .fold(None, |acc: Option<f64>, f| Some(acc.map_or(f, |a| a.max(f))))
        .unwrap_or(0.0);
    let fitnesses: Vec<f64> = fitnesses
        .iter()
        .map(|&f| if f.is_finite() { f } else { worst_finite })
        .collect();
    let n = fitnesses.len();

    Ok(match *strategy {
        SelectionStrategy::All => SelectionOutcome {
            selected: (0..n).collect(),
            probabilities_used: (0..n).map(|i| (i, 1.0)).collect(),
        },
        SelectionStrategy::FixedProbability(p) => {
            let mut out = SelectionOutcome::default();
            for i in 0..n {
                out.probabilities_used.push((i, p));
                if rng.random::<f64>() < p {
                    out.selected.push(i);
                }
            }
            out
        }
        SelectionStrategy::TopK(k) => {
            let order = rank(&fitnesses);
            let k = k.min(n);
            let mut probabilities_used: Vec<(usize, f64)> =
                order.iter().enumerate().map(|(r, &i)| (i, if r < k { 1.0 } else { 0.0 })).collect();
            probabilities_used.sort_by_key(|&(i, _)| i);
            SelectionOutcome {
                selected: order[..k].to_vec(),
                probabilities_used,
            }
        }
        SelectionStrategy::Probabilistic { radius } => {
            select_probabilistic(positions, &fitnesses, radius, rng)?
        }
    })
}
