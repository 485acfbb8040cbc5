//! Run orchestration: plain PSO, the four memetic variants and grid search.
//!
//! A memetic generation evaluates the swarm, updates the bests, selects
//! particles by the variant's strategy, refines each with pattern search
//! (writing the refined point back into the particle and its pbest), then
//! takes a PSO step. Every objective call goes through one run-level counter
//! that enforces the evaluation budget and the stall rule.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::pattern::{refine, PatternConfig};
use crate::pso::{init_swarm, update_bests, PsoConfig, Swarm};
use crate::selection::{select, SelectionStrategy, DEFAULT_RADIUS};
use crate::space::{Position, SearchSpace};

/// Refinement probability used by [`Algorithm::Ma2`].
pub const MA2_PROBABILITY: f64 = 0.1;
/// Number of particles refined by [`Algorithm::Ma3`].
pub const MA3_TOP_K: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "PSO")]
    Pso,
    /// Refine every particle.
    #[serde(rename = "MA1")]
    Ma1,
    /// Refine each particle with a fixed probability.
    #[serde(rename = "MA2")]
    Ma2,
    /// Refine the two fittest particles.
    #[serde(rename = "MA3")]
    Ma3,
    /// Crowding-aware probabilistic selection.
    #[serde(rename = "MA4")]
    Ma4,
    #[serde(rename = "GS")]
    GridSearch,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Pso,
        Algorithm::Ma1,
        Algorithm::Ma2,
        Algorithm::Ma3,
        Algorithm::Ma4,
        Algorithm::GridSearch,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Pso => "PSO",
            Algorithm::Ma1 => "MA1",
            Algorithm::Ma2 => "MA2",
            Algorithm::Ma3 => "MA3",
            Algorithm::Ma4 => "MA4",
            Algorithm::GridSearch => "GS",
        }
    }

    pub fn is_memetic(&self) -> bool {
        self.default_strategy().is_some()
    }

    pub fn default_strategy(&self) -> Option<SelectionStrategy> {
        match self {
            Algorithm::Ma1 => Some(SelectionStrategy::All),
            Algorithm::Ma2 => Some(SelectionStrategy::FixedProbability(MA2_PROBABILITY)),
            Algorithm::Ma3 => Some(SelectionStrategy::TopK(MA3_TOP_K)),
            Algorithm::Ma4 => Some(SelectionStrategy::Probabilistic {
                radius: DEFAULT_RADIUS,
            }),
            Algorithm::Pso | Algorithm::GridSearch => None,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase();
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == up || (up == "GRID" && *a == Algorithm::GridSearch))
            .ok_or_else(|| {
                Error::domain(format!(
                    "unknown algorithm {s:?} (expected one of PSO, MA1, MA2, MA3, MA4, GS)"
                ))
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub space: SearchSpace,
    pub pso: PsoConfig,
    pub pattern: PatternConfig,
    /// `None` for PSO and grid search.
    pub strategy: Option<SelectionStrategy>,
    pub max_evaluations: u64,
    /// Memetic runs stop after this many evaluations without improvement.
    pub stall_evaluations: u64,
    pub grid_step: f64,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(algorithm: Algorithm, seed: u64) -> Self {
        Self {
            algorithm,
            space: SearchSpace::svm_default(),
            pso: PsoConfig::default(),
            pattern: PatternConfig::default(),
            strategy: algorithm.default_strategy(),
            max_evaluations: 1500,
            stall_evaluations: 450,
            grid_step: 0.5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pso.validate()?;
        self.pattern.validate(self.space.dims())?;
        let consistent = match (self.algorithm.default_strategy(), &self.strategy) {
            (None, None) => true,
            (Some(a), Some(b)) => std::mem::discriminant(&a) == std::mem::discriminant(b),
            _ => false,
        };
        if !consistent {
            return Err(Error::domain(format!(
                "selection strategy {:?} does not match algorithm {}",
                self.strategy, self.algorithm
            )));
        }
        if let Some(s) = &self.strategy {
            s.validate()?;
        }
        if self.algorithm != Algorithm::GridSearch
            && self.max_evaluations < self.pso.population_size as u64
        {
            return Err(Error::domain(format!(
                "evaluation budget {} is smaller than the population ({})",
                self.max_evaluations, self.pso.population_size
            )));
        }
        if self.stall_evaluations == 0 {
            return Err(Error::domain("stall_evaluations must be positive"));
        }
        if !(self.grid_step > 0.0) {
            return Err(Error::domain("grid step must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub evaluations: u64,
    pub best_fitness: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub best_position: Position,
    pub best_fitness: f64,
    pub evaluations: u64,
    /// Swarm generations evaluated (grid points for grid search).
    pub iterations: usize,
    pub trace: Vec<TracePoint>,
    pub seed: u64,
    pub wall_time: Duration,
}

/// Counters consulted by [`check_termination`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunAccounting {
    pub evaluations: u64,
    pub evaluations_since_improvement: u64,
    pub iterations: usize,
    pub iterations_since_improvement: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Continue,
    Budget,
    Stall,
    Iterations,
}

impl Termination {
    pub fn should_stop(&self) -> bool {
        *self != Termination::Continue
    }
}

pub fn check_termination(config: &RunConfig, state: &RunAccounting) -> Termination {
    if config.algorithm == Algorithm::GridSearch {
        return Termination::Continue;
    }
    if state.evaluations >= config.max_evaluations {
        return Termination::Budget;
    }
    if config.algorithm == Algorithm::Pso {
        if state.iterations >= config.pso.max_iterations {
            return Termination::Iterations;
        }
        if state.iterations_since_improvement >= config.pso.stall_iterations {
            return Termination::Stall;
        }
    } else if state.evaluations_since_improvement >= config.stall_evaluations {
        return Termination::Stall;
    }
    Termination::Continue
}

/// Run-level view of the objective: counts calls, tracks the best point and
/// refuses calls once the budget or the stall window is used up.
struct Tracked<'a, O: ?Sized> {
    inner: &'a mut O,
    evaluations: u64,
    best: Option<(Position, f64)>,
    last_improvement: u64,
    max_evaluations: u64,
    stall_evaluations: Option<u64>,
}

impl<'a, O: Objective + ?Sized> Tracked<'a, O> {
    fn new(inner: &'a mut O, max_evaluations: u64, stall_evaluations: Option<u64>) -> Self {
        Self {
            inner,
            evaluations: 0,
            best: None,
            last_improvement: 0,
            max_evaluations,
            stall_evaluations,
        }
    }

    fn best_fitness(&self) -> f64 {
        self.best.as_ref().map_or(f64::INFINITY, |b| b.1)
    }

    fn since_improvement(&self) -> u64 {
        self.evaluations - self.last_improvement
    }

    /// Stall counting starts once the initial population has been scored.
    fn start_stall_clock(&mut self) {
        self.last_improvement = self.evaluations;
    }

    fn trace_point(&self) -> TracePoint {
        TracePoint {
            evaluations: self.evaluations,
            best_fitness: self.best_fitness(),
        }
    }
}

impl<O: Objective + ?Sized> Objective for Tracked<'_, O> {
    fn evaluate(&mut self, pos: &Position) -> f64 {
        let f = self.inner.evaluate(pos);
        let f = if f.is_finite() { f } else { f64::INFINITY };
        self.evaluations += 1;
        if self.best.is_none() || f < self.best_fitness() {
            if f < self.best_fitness() {
                self.last_improvement = self.evaluations;
            }
            self.best = Some((pos.clone(), f));
        }
        f
    }

    fn exhausted(&self) -> bool {
        self.evaluations >= self.max_evaluations
            || self
                .stall_evaluations
                .is_some_and(|s| self.since_improvement() >= s)
    }
}

fn evaluate_swarm<O: Objective + ?Sized>(swarm: &Swarm, objective: &mut Tracked<'_, O>) -> Vec<f64> {
    let mut out = vec![f64::INFINITY; swarm.particles.len()];
    for (f, p) in out.iter_mut().zip(&swarm.particles) {
        if objective.exhausted() {
            break;
        }
        *f = objective.evaluate(&p.position);
    }
    out
}

fn push_trace(trace: &mut Vec<TracePoint>, point: TracePoint) {
    if trace.last() != Some(&point) {
        trace.push(point);
    }
}

/// Runs `config.algorithm` against `objective`.
pub fn run<O: Objective + ?Sized>(config: &RunConfig, objective: &mut O) -> Result<RunResult> {
    config.validate()?;
    if config.algorithm == Algorithm::GridSearch {
        let mut result = grid_search(&config.space, config.grid_step, objective)?;
        result.seed = config.seed;
        return Ok(result);
    }

    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let stall = config.strategy.map(|_| config.stall_evaluations);
    let mut tracked = Tracked::new(objective, config.max_evaluations, stall);
    let mut trace = Vec::new();

    let mut swarm = init_swarm(&config.space, &config.pso, &mut rng);
    let mut fitness = evaluate_swarm(&swarm, &mut tracked);
    update_bests(&mut swarm, &fitness);
    tracked.start_stall_clock();
    push_trace(&mut trace, tracked.trace_point());
    let mut iterations = 1usize;
    let mut stale_iterations = 0usize;

    let accounting = |tracked: &Tracked<'_, O>, iterations: usize, stale: usize| RunAccounting {
        evaluations: tracked.evaluations,
        evaluations_since_improvement: tracked.since_improvement(),
        iterations,
        iterations_since_improvement: stale,
    };

    loop {
        if check_termination(config, &accounting(&tracked, iterations, stale_iterations)).should_stop() {
            break;
        }

        if let Some(strategy) = &config.strategy {
            let positions = swarm.positions();
            let chosen = select(strategy, &positions, &fitness, &mut rng)?;
            for idx in chosen.selected {
                if tracked.exhausted() {
                    break;
                }
                let remaining = (config.max_evaluations - tracked.evaluations) as usize;
                let refined = refine(
                    &positions[idx],
                    fitness[idx],
                    &mut tracked,
                    &config.pattern,
                    &config.space,
                    remaining,
                );
                fitness[idx] = refined.fitness;
                swarm.absorb(idx, refined.point, refined.fitness);
            }
            push_trace(&mut trace, tracked.trace_point());
            if check_termination(config, &accounting(&tracked, iterations, stale_iterations)).should_stop() {
                break;
            }
        }

        let before = swarm.gbest_fitness;
        swarm.advance(&config.pso, &config.space, &mut rng);
        fitness = evaluate_swarm(&swarm, &mut tracked);
        update_bests(&mut swarm, &fitness);
        iterations += 1;
        if swarm.gbest_fitness < before {
            stale_iterations = 0;
        } else {
            stale_iterations += 1;
        }
        push_trace(&mut trace, tracked.trace_point());
    }

    let (best_position, best_fitness) = tracked
        .best
        .clone()
        .expect("budget covers at least one evaluation");
    Ok(RunResult {
        algorithm: config.algorithm,
        best_position,
        best_fitness,
        evaluations: tracked.evaluations,
        iterations,
        trace,
        seed: config.seed,
        wall_time: started.elapsed(),
    })
}

/// Number of lattice points per dimension, or an error if `step` does not
/// divide the range.
fn lattice_size(space: &SearchSpace, step: f64) -> Result<Vec<usize>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::domain(format!("grid step {step} must be positive")));
    }
    (0..space.dims())
        .map(|d| {
            let cells = space.range(d) / step;
            let rounded = cells.round();
            if (cells - rounded).abs() > 1e-9 {
                return Err(Error::domain(format!(
                    "grid step {step} does not divide the range {} of dimension {d}",
                    space.range(d)
                )));
            }
            Ok(rounded as usize + 1)
        })
        .collect()
}

/// Exhaustive search over `lower + i * step` in every dimension, endpoints
/// included. Ties go to the lexicographically smallest point.
pub fn grid_search<O: Objective + ?Sized>(space: &SearchSpace, step: f64, objective: &mut O) -> Result<RunResult> {
    let started = Instant::now();
    let sizes = lattice_size(space, step)?;
    let total: u64 = sizes.iter().map(|&s| s as u64).product();
    let mut tracked = Tracked::new(objective, u64::MAX, None);
    let mut trace = Vec::new();
    let coord = |d: usize, i: usize| {
        if i + 1 == sizes[d] {
            space.upper()[d]
        } else {
            space.lower()[d] + i as f64 * step
        }
    };

    let mut index = vec![0usize; sizes.len()];
    loop {
        let pos = Position::new(index.iter().enumerate().map(|(d, &i)| coord(d, i)).collect());
        let before = tracked.best_fitness();
        tracked.evaluate(&pos);
        if tracked.best_fitness() < before {
            push_trace(&mut trace, tracked.trace_point());
        }
        // odometer, last dimension fastest
        let mut d = sizes.len();
        loop {
            if d == 0 {
                let (best_position, best_fitness) = tracked.best.clone().expect("lattice is non-empty");
                debug_assert_eq!(tracked.evaluations, total);
                push_trace(&mut trace, tracked.trace_point());
                return Ok(RunResult {
                    algorithm: Algorithm::GridSearch,
                    best_position,
                    best_fitness,
                    evaluations: tracked.evaluations,
                    iterations: total as usize,
                    trace,
                    seed: 0,
                    wall_time: started.elapsed(),
                });
            }
            d -= 1;
            index[d] += 1;
            if index[d] < sizes[d] {
                break;
            }
            index[d] = 0;
        }
    }
}
