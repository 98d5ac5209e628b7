//! Candidate selection by immediate plus anticipated cost, and preparation
//! of the environment by simulated annealing.

pub mod anneal;
pub mod select;

pub use anneal::{anneal, get_neighbor, prepare, AnnealTrace, AnnealingSchedule, Prepared};
pub use select::{anticipatory_tamp, select_last_min, Candidate, PlannerConfig, Selection};
