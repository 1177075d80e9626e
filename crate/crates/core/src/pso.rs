//! Bounded particle swarm optimisation with reflective walls.
//!
//! Particles move with
//!
//! ```text
//! v ← w v + c1 r1 (p_best − u) + c2 r2 (g_best − u)
//! u ← u + v
//! ```
//!
//! where `w`, `c1` and `c2` follow linear schedules over the iterations and
//! `r1`, `r2` are fresh uniform draws per particle and dimension. A particle
//! leaving the box is mirrored back in and its velocity component negated.
//!
//! Dimensions whose bounds are positive and span at least three decades are
//! searched in log10 space; the objective always sees natural units.
//!
//! Random numbers come from one ChaCha stream per `(iteration, particle)`
//! pair, and objective values are gathered in particle order, so results do
//! not depend on how many threads evaluate the swarm.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Value substituted for non-finite objective results.
pub const OBJECTIVE_SENTINEL: f64 = 1e300;

/// Ratio of upper to lower bound above which a dimension is log-scaled.
const LOG_SCALE_RATIO: f64 = 1e3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PsoError {
    #[error("invalid bounds: {0}")]
    Bounds(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scale {
    Linear,
    Log10,
}

/// Box constraints, one `(min, max)` pair per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
    scales: Vec<Scale>,
}

impl Bounds {
    pub fn new(pairs: &[(f64, f64)]) -> Result<Self, PsoError> {
        if pairs.is_empty() {
            return Err(PsoError::Bounds("at least one dimension required".into()));
        }
        for (i, &(lo, hi)) in pairs.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(PsoError::Bounds(format!("dimension {i}: need min < max, got ({lo}, {hi})")));
            }
        }
        let scales = pairs
            .iter()
            .map(|&(lo, hi)| {
                if lo > 0.0 && hi / lo >= LOG_SCALE_RATIO {
                    Scale::Log10
                } else {
                    Scale::Linear
                }
            })
            .collect();
        Ok(Self {
            lower: pairs.iter().map(|p| p.0).collect(),
            upper: pairs.iter().map(|p| p.1).collect(),
            scales,
        })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn scales(&self) -> &[Scale] {
        &self.scales
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    /// Bounds in search coordinates.
    fn search_interval(&self, d: usize) -> (f64, f64) {
        match self.scales[d] {
            Scale::Linear => (self.lower[d], self.upper[d]),
            Scale::Log10 => (self.lower[d].log10(), self.upper[d].log10()),
        }
    }

    fn to_natural(&self, d: usize, s: f64) -> f64 {
        let v = match self.scales[d] {
            Scale::Linear => s,
            Scale::Log10 => 10f64.powf(s),
        };
        v.clamp(self.lower[d], self.upper[d])
    }

    fn natural(&self, search: &[f64]) -> Vec<f64> {
        search.iter().enumerate().map(|(d, &s)| self.to_natural(d, s)).collect()
    }
}

/// Linear schedule from `start` (first iteration) to `end` (last iteration).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub start: f64,
    pub end: f64,
}

impl Schedule {
    pub const fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    /// Value at `iteration` (1-based) of `total`.
    pub fn at(&self, iteration: usize, total: usize) -> f64 {
        let frac = if total <= 1 {
            0.0
        } else {
            (iteration.saturating_sub(1)) as f64 / (total - 1) as f64
        };
        self.start + (self.end - self.start) * frac.min(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsoConfig {
    pub n_particles: usize,
    pub n_iterations: usize,
    pub inertia: Schedule,
    pub cognitive: Schedule,
    pub social: Schedule,
    pub seed: u64,
    /// Velocity limit as a fraction of each dimension's search range.
    pub v_max_fraction: f64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            n_particles: 200,
            n_iterations: 50,
            inertia: Schedule::new(0.9, 0.4),
            cognitive: Schedule::new(2.5, 0.5),
            social: Schedule::new(0.5, 2.5),
            seed: 0,
            v_max_fraction: 0.2,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<(), PsoError> {
        if self.n_particles == 0 || self.n_iterations == 0 {
            return Err(PsoError::Config("particle and iteration counts must be >= 1".into()));
        }
        let ends = [
            self.inertia.start,
            self.inertia.end,
            self.cognitive.start,
            self.cognitive.end,
            self.social.start,
            self.social.end,
        ];
        if ends.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(PsoError::Config("schedule endpoints must be >= 0".into()));
        }
        if !(self.v_max_fraction > 0.0 && self.v_max_fraction <= 1.0) {
            return Err(PsoError::Config(format!(
                "v_max_fraction must lie in (0, 1], got {}",
                self.v_max_fraction
            )));
        }
        Ok(())
    }
}

/// Swarm positions and memory. Coordinates are in search space (log10 for
/// log-scaled dimensions); use [`SwarmState::best_position`] for natural units.
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState {
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub personal_best: Vec<Vec<f64>>,
    pub personal_best_value: Vec<f64>,
    pub global_best: Vec<f64>,
    pub global_best_value: f64,
    /// Completed update steps (0 after initialisation).
    pub iteration: usize,
    /// Objective evaluations so far.
    pub evaluations: u64,
}

impl SwarmState {
    pub fn best_position(&self, bounds: &Bounds) -> Vec<f64> {
        bounds.natural(&self.global_best)
    }

    pub fn natural_positions(&self, bounds: &Bounds) -> Vec<Vec<f64>> {
        self.positions.iter().map(|p| bounds.natural(p)).collect()
    }
}

fn particle_rng(seed: u64, iteration: usize, particle: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(particle as u64);
    rng.set_word_pos((iteration as u128) << 40);
    rng
}

fn evaluate<F>(bounds: &Bounds, positions: &[Vec<f64>], objective: &F) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    positions
        .par_iter()
        .map(|p| {
            let v = objective(&bounds.natural(p));
            if v.is_finite() {
                v
            } else {
                OBJECTIVE_SENTINEL
            }
        })
        .collect()
}

/// Index of the smallest value; ties go to the lowest index.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Samples positions uniformly in search space, zero velocities, and
/// evaluates the initial bests.
pub fn initialize<F>(bounds: &Bounds, cfg: &PsoConfig, objective: &F) -> Result<SwarmState, PsoError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    cfg.validate()?;
    let dim = bounds.dim();
    let positions: Vec<Vec<f64>> = (0..cfg.n_particles)
        .map(|p| {
            let mut rng = particle_rng(cfg.seed, 0, p);
            (0..dim)
                .map(|d| {
                    let (lo, hi) = bounds.search_interval(d);
                    lo + (hi - lo) * rng.random::<f64>()
                })
                .collect()
        })
        .collect();
    let values = evaluate(bounds, &positions, objective);
    let best = argmin(&values);
    Ok(SwarmState {
        velocities: vec![vec![0.0; dim]; cfg.n_particles],
        personal_best: positions.clone(),
        personal_best_value: values.clone(),
        global_best: positions[best].clone(),
        global_best_value: values[best],
        positions,
        iteration: 0,
        evaluations: cfg.n_particles as u64,
    })
}

/// Mirrors `position` back into `[lower, upper]`, negating the velocity
/// component once per reflection.
pub fn reflect(position: f64, velocity: f64, lower: f64, upper: f64) -> (f64, f64) {
    let mut x = position;
    let mut v = velocity;
    for _ in 0..64 {
        if x > upper {
            x = 2.0 * upper - x;
            v = -v;
        } else if x < lower {
            x = 2.0 * lower - x;
            v = -v;
        } else {
            return (x, v);
        }
    }
    // Far outside: fold over the period 2·range directly.
    let range = upper - lower;
    let period = 2.0 * range;
    let offset = (x - lower).rem_euclid(period);
    let (folded, flips) = if offset <= range {
        (lower + offset, ((x - lower) / period).floor() as i64 * 2)
    } else {
        (upper - (offset - range), ((x - lower) / period).floor() as i64 * 2 + 1)
    };
    let v = if flips.rem_euclid(2) == 0 { v } else { -v };
    (folded.clamp(lower, upper), v)
}

/// Reflects every coordinate of a position/velocity pair into `bounds`
/// (natural units).
pub fn reflect_into(bounds: &Bounds, position: &mut [f64], velocity: &mut [f64]) {
    for d in 0..position.len() {
        let (x, v) = reflect(position[d], velocity[d], bounds.lower[d], bounds.upper[d]);
        position[d] = x;
        velocity[d] = v;
    }
}

/// One synchronous swarm update followed by evaluation of the new positions.
pub fn step<F>(mut state: SwarmState, bounds: &Bounds, cfg: &PsoConfig, objective: &F) -> SwarmState
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let iteration = state.iteration + 1;
    let w = cfg.inertia.at(iteration, cfg.n_iterations);
    let c1 = cfg.cognitive.at(iteration, cfg.n_iterations);
    let c2 = cfg.social.at(iteration, cfg.n_iterations);
    let dim = bounds.dim();
    let intervals: Vec<(f64, f64)> = (0..dim).map(|d| bounds.search_interval(d)).collect();

    for p in 0..state.positions.len() {
        let mut rng = particle_rng(cfg.seed, iteration, p);
        let pos = &mut state.positions[p];
        let vel = &mut state.velocities[p];
        for d in 0..dim {
            let r1: f64 = rng.random();
            let r2: f64 = rng.random();
            let (lo, hi) = intervals[d];
            let v_max = cfg.v_max_fraction * (hi - lo);
            let v = w * vel[d]
                + c1 * r1 * (state.personal_best[p][d] - pos[d])
                + c2 * r2 * (state.global_best[d] - pos[d]);
            let v = v.clamp(-v_max, v_max);
            let (x, v) = reflect(pos[d] + v, v, lo, hi);
            pos[d] = x;
            vel[d] = v;
        }
    }

    let values = evaluate(bounds, &state.positions, objective);
    state.evaluations += values.len() as u64;
    for (p, &value) in values.iter().enumerate() {
        if value < state.personal_best_value[p] {
            state.personal_best_value[p] = value;
            state.personal_best[p] = state.positions[p].clone();
        }
    }
    let best = argmin(&state.personal_best_value);
    if state.personal_best_value[best] < state.global_best_value {
        state.global_best_value = state.personal_best_value[best];
        state.global_best = state.personal_best[best].clone();
    }
    state.iteration = iteration;
    state
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoOutcome {
    /// Natural units.
    pub best_position: Vec<f64>,
    pub best_value: f64,
    /// Global best after initialisation and after each iteration.
    pub history: Vec<f64>,
    pub evaluations: u64,
}

/// Initialises the swarm and runs `cfg.n_iterations` steps.
pub fn optimize<F>(bounds: &Bounds, cfg: &PsoConfig, objective: &F) -> Result<PsoOutcome, PsoError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut state = initialize(bounds, cfg, objective)?;
    let mut history = Vec::with_capacity(cfg.n_iterations + 1);
    history.push(state.global_best_value);
    for _ in 0..cfg.n_iterations {
        state = step(state, bounds, cfg, objective);
        history.push(state.global_best_value);
    }
    Ok(PsoOutcome {
        best_position: state.best_position(bounds),
        best_value: state.global_best_value,
        history,
        evaluations: state.evaluations,
    })
}
