use std::cell::RefCell;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::is_free;
use crate::scenario::Scenario;
use crate::world::{CostEstimator, EntityId, WorldState};

/// Proposals tried by [`get_neighbor`] before giving up.
pub const NEIGHBOR_TRIES: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealingSchedule {
    pub initial_temperature: f64,
    pub cooling_rate: f64,
    pub iterations: usize,
}

impl AnnealingSchedule {
    pub fn new(iterations: usize) -> Self {
        AnnealingSchedule { initial_temperature: 1000.0, cooling_rate: 0.95, iterations }
    }

    /// Temperature at iteration `i`, counting from zero.
    pub fn temperature(&self, i: usize) -> f64 {
        self.initial_temperature * self.cooling_rate.powi(i as i32)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnealTrace {
    pub temperatures: Vec<f64>,
    pub proposals: Vec<f64>,
    pub accepted: Vec<bool>,
}

/// Simulated annealing from `initial`. Proposals with `delta < 0` are taken
/// without drawing from `uniform`; others when `uniform() < exp(-delta / T)`.
/// The best state is tracked over accepted states only.
pub fn anneal<S: Clone>(
    initial: S,
    schedule: &AnnealingSchedule,
    mut cost: impl FnMut(&S) -> f64,
    mut neighbor: impl FnMut(&S) -> S,
    mut uniform: impl FnMut() -> f64,
) -> (S, f64, AnnealTrace) {
    let mut current_value = cost(&initial);
    let mut current = initial;
    let mut best = current.clone();
    let mut best_value = current_value;
    let mut trace = AnnealTrace::default();
    for i in 0..schedule.iterations {
        let t = schedule.temperature(i);
        let candidate = neighbor(&current);
        let value = cost(&candidate);
        let delta = value - current_value;
        let accept = delta < 0.0 || uniform() < (-delta / t).exp();
        trace.temperatures.push(t);
        trace.proposals.push(value);
        trace.accepted.push(accept);
        if accept {
            current = candidate;
            current_value = value;
            if current_value < best_value {
                best = current.clone();
                best_value = current_value;
            }
        }
    }
    (best, best_value, trace)
}

/// Moves one randomly chosen resting object to a uniform point of a disc
/// around its pose, staying in its region and clear of everything else.
/// Returns `s` unchanged when no proposal is valid.
pub fn get_neighbor<R: Rng + ?Sized>(scenario: &Scenario, s: &WorldState, rng: &mut R) -> WorldState {
    let movable: Vec<EntityId> = s.present_objects().collect();
    if movable.is_empty() {
        return s.clone();
    }
    for _ in 0..NEIGHBOR_TRIES {
        let o = movable[rng.random_range(0..movable.len())];
        let region = s.placement(o);
        let reach = scenario.perturb_fraction * scenario.region(region).rect.min_dimension();
        let r = reach * rng.random::<f64>().sqrt();
        let theta = rng.random::<f64>() * std::f64::consts::TAU;
        let p = s.pose(o) + crate::world::Pose2::new(r * theta.cos(), r * theta.sin());
        if is_free(scenario, s, region, p, scenario.object(o).radius, Some(o)) {
            let mut next = s.clone();
            next.poses[o.index()] = p;
            return next;
        }
    }
    s.clone()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prepared {
    pub state: WorldState,
    pub value: f64,
    pub initial_value: f64,
    pub trace: AnnealTrace,
}

impl Prepared {
    /// Objects whose pose changed, and their summed displacement.
    pub fn rearrangement(&self, from: &WorldState) -> (usize, f64) {
        from.poses
            .iter()
            .zip(&self.state.poses)
            .map(|(a, b)| a.distance(*b))
            .filter(|d| *d > 0.0)
            .fold((0, 0.0), |(n, t), d| (n + 1, t + d))
    }
}

/// Task-free minimization of the estimated future cost over object poses,
/// keeping every placement fixed.
pub fn prepare<R: Rng + ?Sized>(
    scenario: &Scenario,
    s0: &WorldState,
    estimator: &dyn CostEstimator,
    schedule: &AnnealingSchedule,
    rng: &mut R,
) -> Prepared {
    let rng = RefCell::new(rng);
    let (state, value, trace) = anneal(
        s0.clone(),
        schedule,
        |s| estimator.estimate(s),
        |s| get_neighbor(scenario, s, &mut **rng.borrow_mut()),
        || rng.borrow_mut().random::<f64>(),
    );
    let initial_value = estimator.estimate(s0);
    Prepared { state, value, initial_value, trace }
}
