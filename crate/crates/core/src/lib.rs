//! Anticipatory task and motion planning over disc worlds.
//!
//! A robot solves a stream of tasks drawn from a known distribution. Each
//! task is solved by sampling several goal states and keeping the one whose
//! expected future cost, as judged by a [`CostEstimator`], is lowest.

pub mod anticipate;
pub mod cabinet;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod namo;
pub mod planner;
pub mod rng;
pub mod scenario;
pub mod solver;
pub mod world;

pub use error::{Error, Result};
pub use scenario::{Domain, Scenario};
pub use solver::{sample_goal_states, tamp_solve, SolverConfig};
pub use world::{CostEstimator, Plan, Task, TaskDistribution, WorldState, ZeroEstimator};
