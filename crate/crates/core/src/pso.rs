//! Particle swarm: initialization, velocity/position updates and best tracking.
//!
//! Positions are drawn uniformly in the box and velocities uniformly in
//! `[-cap_d, cap_d]`. Updates are synchronous: every velocity is computed
//! against the same `gbest`, then every particle moves. Positions that leave
//! the box are clamped and the clipped velocity components zeroed.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{Position, SearchSpace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsoConfig {
    pub population_size: usize,
    /// Cognitive (pbest) acceleration.
    pub c1: f64,
    /// Social (gbest) acceleration.
    pub c2: f64,
    pub w_start: f64,
    pub w_end: f64,
    pub max_iterations: usize,
    pub stall_iterations: usize,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            population_size: 15,
            c1: 2.0,
            c2: 2.0,
            w_start: 1.2,
            w_end: 0.8,
            max_iterations: 100,
            stall_iterations: 30,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::domain("population size must be at least 2"));
        }
        if self.max_iterations == 0 || self.stall_iterations == 0 {
            return Err(Error::domain("iteration limits must be positive"));
        }
        if !(self.w_start >= self.w_end) {
            return Err(Error::domain(format!(
                "inertia must not increase: w_start {} < w_end {}",
                self.w_start, self.w_end
            )));
        }
        if !(self.c1.is_finite() && self.c2.is_finite()) {
            return Err(Error::domain("acceleration coefficients must be finite"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Particle {
    pub position: Position,
    pub velocity: Vec<f64>,
    pub pbest_position: Position,
    /// `+inf` until the particle has been evaluated.
    pub pbest_fitness: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Swarm {
    pub particles: Vec<Particle>,
    pub gbest_position: Position,
    pub gbest_fitness: f64,
    pub iteration: usize,
}

/// Uniform draw in `[0, 1]`.
fn unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(0.0..=1.0)
}

pub fn init_swarm<R: Rng + ?Sized>(space: &SearchSpace, config: &PsoConfig, rng: &mut R) -> Swarm {
    init_swarm_with(space, config, &mut || unit(rng))
}

/// [`init_swarm`] with an explicit source of `[0, 1]` draws. For each
/// particle all position coordinates are drawn first, then the velocity.
pub fn init_swarm_with(
    space: &SearchSpace,
    config: &PsoConfig,
    draw: &mut dyn FnMut() -> f64,
) -> Swarm {
    let dims = space.dims();
    let particles: Vec<Particle> = (0..config.population_size)
        .map(|_| {
            let coords = (0..dims)
                .map(|d| space.lower()[d] + draw() * space.range(d))
                .collect::<Vec<_>>();
            let velocity = (0..dims)
                .map(|d| {
                    let cap = space.velocity_cap(d);
                    -cap + draw() * 2.0 * cap
                })
                .collect();
            let position = Position::new(coords);
            Particle {
                pbest_position: position.clone(),
                position,
                velocity,
                pbest_fitness: f64::INFINITY,
            }
        })
        .collect();
    Swarm {
        gbest_position: particles[0].position.clone(),
        gbest_fitness: f64::INFINITY,
        particles,
        iteration: 0,
    }
}

/// Linearly decreasing inertia; iterations past the schedule get `w_end`.
pub fn inertia_at(iteration: usize, config: &PsoConfig) -> f64 {
    if config.max_iterations <= 1 {
        return config.w_start;
    }
    let last = (config.max_iterations - 1) as f64;
    let t = (iteration as f64).min(last);
    config.w_start - (config.w_start - config.w_end) * t / last
}

pub fn step_velocity<R: Rng + ?Sized>(
    particle: &Particle,
    gbest: &Position,
    w: f64,
    config: &PsoConfig,
    space: &SearchSpace,
    rng: &mut R,
) -> Vec<f64> {
    step_velocity_with(particle, gbest, w, config, space, &mut || unit(rng))
}

/// `v' = w v + c1 r1 (pbest - x) + c2 r2 (gbest - x)`, clamped to the
/// velocity cap. One `r1` and one `r2` are drawn per call, in that order, and
/// shared by all dimensions.
pub fn step_velocity_with(
    particle: &Particle,
    gbest: &Position,
    w: f64,
    config: &PsoConfig,
    space: &SearchSpace,
    draw: &mut dyn FnMut() -> f64,
) -> Vec<f64> {
    let x = particle.position.coords();
    let pbest = particle.pbest_position.coords();
    let gbest = gbest.coords();
    let r1 = draw();
    let r2 = draw();
    (0..x.len())
        .map(|d| {
            let v = w * particle.velocity[d]
                + config.c1 * r1 * (pbest[d] - x[d])
                + config.c2 * r2 * (gbest[d] - x[d]);
            let cap = space.velocity_cap(d);
            v.clamp(-cap, cap)
        })
        .collect()
}

/// Moves the particle by its velocity. Coordinates that leave the box are
/// clamped and the matching velocity component is zeroed.
pub fn step_position(particle: &mut Particle, space: &SearchSpace) {
    let dims = particle.position.dims();
    for d in 0..dims {
        let moved = particle.position.coords()[d] + particle.velocity[d];
        let clamped = moved.clamp(space.lower()[d], space.upper()[d]);
        if clamped != moved {
            particle.velocity[d] = 0.0;
        }
        particle.position.coords_mut()[d] = clamped;
    }
}

/// Folds one fitness per particle into pbest/gbest. Only strict improvements
/// replace a best; non-finite fitness never does. Returns whether gbest
/// improved.
pub fn update_bests(swarm: &mut Swarm, fitnesses: &[f64]) -> bool {
    assert_eq!(fitnesses.len(), swarm.particles.len());
    let mut improved = false;
    for (p, &f) in swarm.particles.iter_mut().zip(fitnesses) {
        let f = if f.is_finite() { f } else { f64::INFINITY };
        if f < p.pbest_fitness {
            p.pbest_fitness = f;
            p.pbest_position = p.position.clone();
        }
        if p.pbest_fitness < swarm.gbest_fitness {
            swarm.gbest_fitness = p.pbest_fitness;
            swarm.gbest_position = p.pbest_position.clone();
            improved = true;
        }
    }
    improved
}

impl Swarm {
    /// One synchronous PSO move: all velocities against the current gbest,
    /// then all positions. Inertia comes from the current iteration count,
    /// which is incremented afterwards.
    pub fn advance<R: Rng + ?Sized>(&mut self, config: &PsoConfig, space: &SearchSpace, rng: &mut R) {
        let w = inertia_at(self.iteration, config);
        let velocities: Vec<Vec<f64>> = self
            .particles
            .iter()
            .map(|p| step_velocity(p, &self.gbest_position, w, config, space, rng))
            .collect();
        for (p, v) in self.particles.iter_mut().zip(velocities) {
            p.velocity = v;
            step_position(p, space);
        }
        self.iteration += 1;
    }

    pub fn positions(&self) -> Vec<Position> {
        self.particles.iter().map(|p| p.position.clone()).collect()
    }

    /// Writes a refined point back into particle `index` (position and, if
    /// strictly better, pbest/gbest).
    pub fn absorb(&mut self, index: usize, position: Position, fitness: f64) {
        let p = &mut self.particles[index];
        p.position = position;
        if fitness < p.pbest_fitness {
            p.pbest_fitness = fitness;
            p.pbest_position = p.position.clone();
        }
        if p.pbest_fitness < self.gbest_fitness {
            self.gbest_fitness = p.pbest_fitness;
            self.gbest_position = p.pbest_position.clone();
        }
    }
}

/// Minimizes `objective` with plain PSO for `config.max_iterations`
/// generations (stopping early after `config.stall_iterations` generations
/// without gbest improvement). Returns the final swarm.
pub fn minimize<R, F>(space: &SearchSpace, config: &PsoConfig, rng: &mut R, mut objective: F) -> Swarm
where
    R: Rng + ?Sized,
    F: FnMut(&Position) -> f64,
{
    let mut swarm = init_swarm(space, config, rng);
    let mut stall = 0;
    loop {
        let fitnesses: Vec<f64> = swarm.particles.iter().map(|p| objective(&p.position)).collect();
        if update_bests(&mut swarm, &fitnesses) {
            stall = 0;
        } else {
            stall += 1;
        }
        if swarm.iteration + 1 >= config.max_iterations || stall >= config.stall_iterations {
            return swarm;
        }
        swarm.advance(config, space, rng);
    }
}
