//! Brute-force anticipatory cost: solve every possible next task.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rng;
use crate::scenario::Scenario;
use crate::solver::{cost_lower_bound, tamp_solve, SolverConfig};
use crate::world::{task_satisfied, CostEstimator, Task, TaskDistribution, WorldState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Solver calls per task; the cheapest plan found is the task's cost.
    pub samples_per_task: usize,
    pub seed: u64,
    pub solver: SolverConfig,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { samples_per_task: 10, seed: 0, solver: SolverConfig::default() }
    }
}

impl OracleConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        OracleConfig { seed, ..self.clone() }
    }

    /// Solver seed for sample `m` of task `k`.
    pub fn sample_seed(&self, k: usize, m: usize) -> u64 {
        rng::mix(rng::mix(self.seed, k as u64), m as u64)
    }
}

/// Cheapest sampled plan cost for `task` (the `k`-th task of the distribution).
/// Sampling stops early once a plan meets the task's analytic lower bound,
/// since no further sample can beat it.
pub fn task_value(scenario: &Scenario, state: &WorldState, task: &Task, k: usize, config: &OracleConfig) -> Result<f64> {
    if task_satisfied(scenario, task, state)? {
        return Ok(0.0);
    }
    let bound = cost_lower_bound(scenario, state, task);
    let mut best = f64::INFINITY;
    for m in 0..config.samples_per_task.max(1) {
        let (_, cost) = tamp_solve(scenario, state, task, &config.solver.with_seed(config.sample_seed(k, m)))?;
        best = best.min(cost);
        if best <= bound + 1e-9 {
            break;
        }
    }
    Ok(best)
}

/// Expected cost of the next task drawn from `dist`, starting from `state`.
pub fn oracle_vap(scenario: &Scenario, state: &WorldState, dist: &TaskDistribution, config: &OracleConfig) -> Result<f64> {
    let start = state.begin_task();
    let mut total = 0.0;
    for (k, (task, p)) in dist.entries.iter().enumerate() {
        if *p == 0.0 {
            continue;
        }
        total += p * task_value(scenario, &start, task, k, config)?;
    }
    Ok(total)
}

pub struct OracleEstimator {
    scenario: Arc<Scenario>,
    config: OracleConfig,
}

impl OracleEstimator {
    pub fn new(scenario: Arc<Scenario>, config: OracleConfig) -> Self {
        OracleEstimator { scenario, config }
    }
}

impl CostEstimator for OracleEstimator {
    /// Unsolvable futures are infinitely expensive.
    fn estimate(&self, state: &WorldState) -> f64 {
        match oracle_vap(&self.scenario, state, &self.scenario.tasks, &self.config) {
            Ok(v) => v,
            Err(e) => {
                log::warn!("oracle failed: {e}");
                f64::INFINITY
            }
        }
    }
}
