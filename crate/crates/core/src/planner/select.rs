use std::sync::Arc;

use rayon::prelude::*;

use crate::error::Result;
use crate::scenario::Scenario;
use crate::solver::{sample_goal_states, SolverConfig};
use crate::world::{CostEstimator, Plan, Task, WorldState};

#[derive(Clone)]
pub struct PlannerConfig {
    /// Candidate plans sampled per task.
    pub n_candidates: usize,
    pub estimator: Arc<dyn CostEstimator>,
    pub base_seed: u64,
    pub solver: SolverConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub seed: u64,
    pub cost: f64,
    pub estimate: f64,
}

impl Candidate {
    pub fn total(&self) -> f64 {
        self.cost + self.estimate
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub plan: Plan,
    pub index: usize,
    pub candidates: Vec<Candidate>,
}

impl Selection {
    pub fn chosen(&self) -> &Candidate {
        &self.candidates[self.index]
    }
}

/// Index of the last minimum; later entries win ties. NaN never wins.
pub fn select_last_min(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_nan() {
            continue;
        }
        match best {
            Some(b) if s > scores[b] => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Samples `n_candidates` plans and keeps the one minimizing plan cost plus
/// the estimated cost of the next task from its terminal state.
pub fn anticipatory_tamp(scenario: &Scenario, s0: &WorldState, task: &Task, config: &PlannerConfig) -> Result<Selection> {
    let n = config.n_candidates.max(1);
    let plans = sample_goal_states(scenario, s0, task, n, config.base_seed, &config.solver)?;
    let estimates: Vec<f64> = plans.par_iter().map(|(plan, _)| config.estimator.estimate(&plan.terminal)).collect();
    let candidates: Vec<Candidate> = plans
        .iter()
        .zip(&estimates)
        .enumerate()
        .map(|(i, ((_, cost), &estimate))| Candidate {
            seed: config.base_seed.wrapping_add(i as u64),
            cost: *cost,
            estimate,
        })
        .collect();
    let totals: Vec<f64> = candidates.iter().map(Candidate::total).collect();
    let index = select_last_min(&totals).unwrap_or(n - 1);
    let plan = plans.into_iter().nth(index).expect("index in range").0;
    Ok(Selection { plan, index, candidates })
}
