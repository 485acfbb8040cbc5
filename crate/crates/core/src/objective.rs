//! The black-box contract every optimizer in this crate minimizes.

use crate::space::Position;

/// A fitness function over positions; lower is better.
///
/// Implementations may keep state (counters, caches), hence `&mut self`.
pub trait Objective {
    fn evaluate(&mut self, pos: &Position) -> f64;

    /// `true` once the objective refuses further evaluations. Local searches
    /// check this before every call so a run-level budget can stop them
    /// mid-poll.
    fn exhausted(&self) -> bool {
        false
    }
}

impl<F> Objective for F
where
    F: FnMut(&Position) -> f64,
{
    fn evaluate(&mut self, pos: &Position) -> f64 {
        self(pos)
    }
}

/// Wraps an objective and counts calls.
#[derive(Debug)]
pub struct Counting<O> {
    inner: O,
    calls: u64,
}

impl<O: Objective> Counting<O> {
    pub fn new(inner: O) -> Self {
        Self { inner, calls: 0 }
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }

    pub fn into_inner(self) -> O {
        self.inner
    }
}

impl<O: Objective> Objective for Counting<O> {
    fn evaluate(&mut self, pos: &Position) -> f64 {
        self.calls += 1;
        self.inner.evaluate(pos)
    }

    fn exhausted(&self) -> bool {
        self.inner.exhausted()
    }
}

/// Sum of squares, the usual smoke test for optimizers.
pub fn sphere(pos: &Position) -> f64 {
    pos.coords().iter().map(|x| x * x).sum()
}
