//! Rood-pattern direct search used as the local refinement operator.
//!
//! Each poll evaluates `center + step * column` for every non-zero pattern
//! column. The center moves to the best strictly improving neighbor and the
//! step resets to its initial value; otherwise the step halves. The search
//! stops once the step drops below `min_step`, after `max_polls` polls, or
//! when the evaluation budget runs out.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::space::{clamp, Position, SearchSpace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternConfig {
    pub initial_step: f64,
    pub min_step: f64,
    pub max_polls: usize,
    /// Offset columns. Must contain `+e_d`, `-e_d` for every axis and the
    /// zero column.
    pub pattern: Vec<Vec<f64>>,
}

impl Default for PatternConfig {
    fn default() -> Self {
        Self::with_initial_step(1.0)
    }
}

impl PatternConfig {
    /// Two-dimensional rood pattern, minimum step `initial_step / 8`.
    pub fn with_initial_step(initial_step: f64) -> Self {
        Self {
            initial_step,
            min_step: initial_step / 8.0,
            max_polls: 20,
            pattern: rood(2),
        }
    }

    pub fn validate(&self, dims: usize) -> Result<()> {
        if !(self.min_step > 0.0 && self.min_step <= self.initial_step) {
            return Err(Error::domain(format!(
                "need 0 < min_step <= initial_step, got {} and {}",
                self.min_step, self.initial_step
            )));
        }
        if self.max_polls == 0 {
            return Err(Error::domain("max_polls must be positive"));
        }
        for col in &self.pattern {
            if col.len() != dims {
                return Err(Error::DimensionMismatch {
                    expected: dims,
                    found: col.len(),
                });
            }
        }
        for (i, a) in self.pattern.iter().enumerate() {
            if self.pattern[..i].contains(a) {
                return Err(Error::domain("pattern columns must be distinct"));
            }
        }
        for required in rood(dims) {
            if !self.pattern.contains(&required) {
                return Err(Error::domain(format!(
                    "pattern is missing the column {required:?}"
                )));
            }
        }
        Ok(())
    }
}

/// `+e_1 .. +e_D, -e_1 .. -e_D, 0`. For `D = 2` this is
/// `[[1,0],[0,1],[-1,0],[0,-1],[0,0]]`.
pub fn rood(dims: usize) -> Vec<Vec<f64>> {
    let axis = |d: usize, s: f64| {
        let mut v = vec![0.0; dims];
        v[d] = s;
        v
    };
    (0..dims)
        .map(|d| axis(d, 1.0))
        .chain((0..dims).map(|d| axis(d, -1.0)))
        .chain(std::iter::once(vec![0.0; dims]))
        .collect()
}

/// Why [`refine`] stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RefinementStop {
    StepSize,
    MaxPolls,
    Budget,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefinementResult {
    pub point: Position,
    pub fitness: f64,
    pub evaluations_used: usize,
    pub polls: usize,
    pub stop: RefinementStop,
}

/// Neighbors of `center` at `step`, in pattern-column order, clamped into the
/// space. Points equal to the center or to an earlier neighbor are dropped.
pub fn poll_points(
    center: &Position,
    step: f64,
    config: &PatternConfig,
    space: &SearchSpace,
) -> Vec<Position> {
    let mut out: Vec<Position> = Vec::with_capacity(config.pattern.len());
    for col in &config.pattern {
        if col.iter().all(|&c| c == 0.0) {
            continue;
        }
        let raw: Vec<f64> = center
            .coords()
            .iter()
            .zip(col)
            .map(|(x, c)| x + step * c)
            .collect();
        let p = clamp(&Position::new(raw), space);
        if &p != center && !out.contains(&p) {
            out.push(p);
        }
    }
    out
}

/// Pattern search from `start`, whose fitness is `start_fitness` (not
/// re-evaluated). At most `eval_budget` objective calls are made.
pub fn refine<O: Objective + ?Sized>(
    start: &Position,
    start_fitness: f64,
    objective: &mut O,
    config: &PatternConfig,
    space: &SearchSpace,
    eval_budget: usize,
) -> RefinementResult {
    let mut center = start.clone();
    let mut fitness = start_fitness;
    let mut step = config.initial_step;
    let mut used = 0usize;
    let mut polls = 0usize;

    let stop = loop {
        if used >= eval_budget || objective.exhausted() {
            break RefinementStop::Budget;
        }
        if step < config.min_step {
            break RefinementStop::StepSize;
        }
        if polls >= config.max_polls {
            break RefinementStop::MaxPolls;
        }

        polls += 1;
        let mut best: Option<(Position, f64)> = None;
        let mut cut_short = false;
        for p in poll_points(&center, step, config, space) {
            if used >= eval_budget || objective.exhausted() {
                cut_short = true;
                break;
            }
            let f = objective.evaluate(&p);
            used += 1;
            let f = if f.is_nan() { f64::INFINITY } else { f };
            let incumbent = best.as_ref().map_or(fitness, |b| b.1);
            if f < incumbent {
                best = Some((p, f));
            }
        }

        match best {
            Some((p, f)) => {
                center = p;
                fitness = f;
                step = config.initial_step;
            }
            None if !cut_short => step /= 2.0,
            None => {}
        }
    };

    RefinementResult {
        point: center,
        fitness,
        evaluations_used: used,
        polls,
        stop,
    }
}
