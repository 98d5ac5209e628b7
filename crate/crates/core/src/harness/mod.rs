//! Deployment runner: persistent task sequences under the four planner variants.

pub mod report;
pub mod snapshot;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anticipate::{EstimatorModel, LearnedEstimator, OracleConfig, OracleEstimator};
use crate::error::{Error, Result};
use crate::planner::{anticipatory_tamp, prepare, AnnealingSchedule, PlannerConfig};
use crate::rng::{self, streams};
use crate::scenario::{Domain, LoadOptions, Scenario};
use crate::solver::SolverConfig;
use crate::world::{apply_plan, CostEstimator, GroundAction, WorldState, ZeroEstimator};

pub use report::{improvement_pct, summarize, write_results, Summary, VariantSummary};
pub use snapshot::render_snapshot;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "myopic")]
    Myopic,
    #[serde(rename = "anttamp")]
    AntTamp,
    #[serde(rename = "prep-myopic")]
    PrepMyopic,
    #[serde(rename = "prep-anttamp")]
    PrepAntTamp,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Myopic, Variant::AntTamp, Variant::PrepMyopic, Variant::PrepAntTamp];

    pub fn prepares(self) -> bool {
        matches!(self, Variant::PrepMyopic | Variant::PrepAntTamp)
    }

    pub fn anticipates(self) -> bool {
        matches!(self, Variant::AntTamp | Variant::PrepAntTamp)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Myopic => "myopic",
            Variant::AntTamp => "anttamp",
            Variant::PrepMyopic => "prep-myopic",
            Variant::PrepAntTamp => "prep-anttamp",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s.to_ascii_lowercase().replace('+', "-"))
            .ok_or_else(|| Error::Scenario(format!("unknown variant `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimatorSource {
    Zero,
    Oracle,
    Model(PathBuf),
}

impl FromStr for EstimatorSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(EstimatorSource::Zero),
            "oracle" => Ok(EstimatorSource::Oracle),
            _ => match s.strip_prefix("model:") {
                Some(p) if !p.is_empty() => Ok(EstimatorSource::Model(PathBuf::from(p))),
                _ => Err(Error::Scenario(format!("unknown estimator `{s}`; use zero, oracle or model:<path>"))),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeploymentConfig {
    pub domain: Domain,
    /// Scenario file; the built-in scenario of `domain` when absent.
    pub scenario: Option<PathBuf>,
    pub variant: Variant,
    pub estimator: EstimatorSource,
    pub sequence_length: usize,
    pub n_trials: usize,
    pub seed: u64,
    pub n_candidates: usize,
    pub prep_iterations: usize,
    /// Inclusive object-count range cycled over trials; all objects when absent.
    pub object_counts: Option<(usize, usize)>,
    pub oracle: OracleConfig,
    pub solver: SolverConfig,
}

impl DeploymentConfig {
    pub fn defaults(domain: Domain, variant: Variant) -> Self {
        let (sequence_length, n_trials, n_candidates, prep_iterations) = match domain {
            Domain::Namo => (20, 32, 100, 5000),
            Domain::Cabinet => (10, 16, 200, 2500),
        };
        DeploymentConfig {
            domain,
            scenario: None,
            variant,
            estimator: EstimatorSource::Oracle,
            sequence_length,
            n_trials,
            seed: 0,
            n_candidates,
            prep_iterations,
            object_counts: None,
            oracle: OracleConfig::default(),
            solver: SolverConfig::default(),
        }
    }

    pub fn load_scenario(&self, object_count: Option<usize>) -> Result<Scenario> {
        let opts = LoadOptions { object_count, ..Default::default() };
        let scn = match &self.scenario {
            Some(p) => Scenario::load_with(p, &opts)?,
            None => Scenario::builtin(self.domain, &opts)?,
        };
        if scn.domain != self.domain {
            return Err(Error::Scenario(format!("scenario `{}` is not a {} scenario", scn.name, self.domain)));
        }
        Ok(scn)
    }

    /// Object count used by `trial`.
    pub fn objects_for(&self, trial: usize) -> Option<usize> {
        self.object_counts.map(|(lo, hi)| lo + trial % (hi.max(lo) - lo + 1))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrepRecord {
    pub initial_estimate: f64,
    pub prepared_estimate: f64,
    pub moved_objects: usize,
    pub displacement: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task_index: usize,
    pub task: String,
    pub cost: f64,
    pub estimate: f64,
    pub relocations: usize,
    pub actions: Vec<GroundAction>,
    pub wallclock_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub variant: Variant,
    pub scenario: String,
    pub objects: usize,
    pub trial_seed: u64,
    pub prep: Option<PrepRecord>,
    pub tasks: Vec<TaskRecord>,
    /// Set when a task could not be solved; later tasks are not attempted.
    pub error: Option<String>,
    pub initial: WorldState,
    /// State the first task starts from: `initial`, or its prepared version.
    pub start: WorldState,
    pub terminal: WorldState,
    pub prep_wallclock_ms: f64,
}

impl TrialRecord {
    pub fn costs(&self) -> Vec<f64> {
        self.tasks.iter().map(|t| t.cost).collect()
    }
}

fn build_estimator(config: &DeploymentConfig, scenario: &Arc<Scenario>) -> Result<Arc<dyn CostEstimator>> {
    Ok(match &config.estimator {
        EstimatorSource::Zero => Arc::new(ZeroEstimator),
        EstimatorSource::Oracle => Arc::new(OracleEstimator::new(scenario.clone(), config.oracle.clone())),
        EstimatorSource::Model(path) => Arc::new(LearnedEstimator::new(scenario.clone(), EstimatorModel::load(path)?)?),
    })
}

fn millis(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// One trial: draw the task sequence and initial state, optionally prepare,
/// then solve the tasks in order on the persistent state.
pub fn run_trial(config: &DeploymentConfig, trial: usize, model: Option<&EstimatorModel>) -> Result<TrialRecord> {
    let scenario = Arc::new(config.load_scenario(config.objects_for(trial))?);
    let estimator: Arc<dyn CostEstimator> = match (model, &config.estimator) {
        (Some(m), EstimatorSource::Model(_)) => Arc::new(LearnedEstimator::new(scenario.clone(), m.clone())?),
        _ => build_estimator(config, &scenario)?,
    };
    let trial_seed = rng::mix(config.seed, trial as u64);

    let mut task_rng = rng::stream(trial_seed, streams::TASKS);
    let sequence: Vec<usize> = (0..config.sequence_length).map(|_| scenario.tasks.sample_index(&mut task_rng)).collect();
    let initial = scenario.random_state(&mut rng::stream(trial_seed, streams::INITIAL_STATE))?;

    let started = Instant::now();
    let (mut state, prep) = if config.variant.prepares() {
        let mut prep_rng = rng::stream(trial_seed, streams::PREPARATION);
        let schedule = AnnealingSchedule::new(config.prep_iterations);
        let p = prepare(&scenario, &initial, estimator.as_ref(), &schedule, &mut prep_rng);
        let (moved_objects, displacement) = p.rearrangement(&initial);
        let record = PrepRecord {
            initial_estimate: p.initial_value,
            prepared_estimate: p.value,
            moved_objects,
            displacement,
        };
        (p.state, Some(record))
    } else {
        (initial.clone(), None)
    };
    let prep_wallclock_ms = millis(started);

    let start_state = state.clone();
    let selector: Arc<dyn CostEstimator> = if config.variant.anticipates() { estimator } else { Arc::new(ZeroEstimator) };
    let solver_seed = rng::mix(trial_seed, streams::SOLVER);
    let mut tasks = Vec::with_capacity(sequence.len());
    let mut error = None;
    for (i, &k) in sequence.iter().enumerate() {
        let t0 = Instant::now();
        let task = &scenario.tasks.entries[k].0;
        let start = state.begin_task();
        let planner = PlannerConfig {
            n_candidates: config.n_candidates,
            estimator: selector.clone(),
            base_seed: rng::mix(solver_seed, i as u64),
            solver: config.solver.clone(),
        };
        let selection = match anticipatory_tamp(&scenario, &start, task, &planner) {
            Ok(s) => s,
            Err(e) => {
                error = Some(format!("task {i} ({}): {e}", task.label));
                break;
            }
        };
        let next = apply_plan(&scenario, &start, &selection.plan.actions)?;
        if !next.approx_eq(&selection.plan.terminal, 1e-9) {
            return Err(Error::Invariant(format!("trial {trial} task {i}: replay diverged from plan terminal")));
        }
        let chosen = selection.chosen();
        tasks.push(TaskRecord {
            task_index: i,
            task: task.label.clone(),
            cost: chosen.cost,
            estimate: chosen.estimate,
            relocations: selection.plan.relocations(),
            actions: selection.plan.actions.clone(),
            wallclock_ms: millis(t0),
        });
        state = next;
    }
    Ok(TrialRecord {
        trial,
        variant: config.variant,
        scenario: scenario.name.clone(),
        objects: scenario.objects.len(),
        trial_seed,
        prep,
        tasks,
        error,
        initial,
        start: start_state,
        terminal: state,
        prep_wallclock_ms,
    })
}

/// All trials of `config`, in trial order. Trials run in parallel.
pub fn run_deployment(config: &DeploymentConfig) -> Result<Vec<TrialRecord>> {
    let model = match &config.estimator {
        EstimatorSource::Model(p) => Some(EstimatorModel::load(p)?),
        _ => None,
    };
    (0..config.n_trials).into_par_iter().map(|t| run_trial(config, t, model.as_ref())).collect()
}
