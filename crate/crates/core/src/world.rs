//! Domain-independent state, task, action and plan types, plus the state
//! transition used to replay plans.

use std::ops::{Add, Mul, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{Domain, Scenario};
use crate::{cabinet, namo};

/// Overlap tolerance for the disc non-overlap invariant (meters).
pub const OVERLAP_EPS: f64 = 1e-6;
/// Tolerance for pose equality on replay and for "robot is at" checks.
pub const POSE_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub u16);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegionId(pub u16);

impl RegionId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Planar position in meters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
}

impl Pose2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Pose2 { x, y }
    }

    pub fn dot(self, o: Pose2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Pose2) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Pose2 {
    type Output = Pose2;
    fn add(self, o: Pose2) -> Pose2 {
        Pose2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Pose2 {
    type Output = Pose2;
    fn sub(self, o: Pose2) -> Pose2 {
        Pose2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Pose2 {
    type Output = Pose2;
    fn mul(self, k: f64) -> Pose2 {
        Pose2::new(self.x * k, self.y * k)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gripper {
    Empty,
    Holding(EntityId),
}

/// Discrete part of the state.
///
/// `reached` is task-scoped: it records the object the robot last reached
/// and is cleared by [`WorldState::begin_task`] when a new task starts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolicState {
    pub placements: Vec<RegionId>,
    pub gripper: Gripper,
    pub reached: Option<EntityId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub symbolic: SymbolicState,
    pub robot: Pose2,
    /// Object poses indexed by `EntityId`.
    pub poses: Vec<Pose2>,
}

impl WorldState {
    pub fn object_count(&self) -> usize {
        self.poses.len()
    }

    pub fn pose(&self, id: EntityId) -> Pose2 {
        self.poses[id.index()]
    }

    pub fn placement(&self, id: EntityId) -> RegionId {
        self.symbolic.placements[id.index()]
    }

    pub fn is_held(&self, id: EntityId) -> bool {
        self.symbolic.gripper == Gripper::Holding(id)
    }

    pub fn objects(&self) -> impl Iterator<Item = EntityId> + '_ {
        (0..self.poses.len() as u16).map(EntityId)
    }

    /// Objects resting in a region (everything but the held object).
    pub fn present_objects(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.objects().filter(move |&id| !self.is_held(id))
    }

    /// The state as seen at the start of a new task: task-scoped marks cleared.
    pub fn begin_task(&self) -> WorldState {
        let mut s = self.clone();
        s.symbolic.reached = None;
        s
    }

    /// Equality of the persistent part of two states (task-scoped marks ignored).
    pub fn same_persistent(&self, other: &WorldState, tol: f64) -> bool {
        self.symbolic.placements == other.symbolic.placements
            && self.symbolic.gripper == other.symbolic.gripper
            && self.robot.distance(other.robot) <= tol
            && self.poses.len() == other.poses.len()
            && self.poses.iter().zip(&other.poses).all(|(a, b)| a.distance(*b) <= tol)
    }

    /// Symbolic part bit-exact, poses within `tol`.
    pub fn approx_eq(&self, other: &WorldState, tol: f64) -> bool {
        self.symbolic == other.symbolic && self.same_persistent(other, tol)
    }

    /// Object poses quantized at `resolution`, for counting distinct states.
    pub fn pose_key(&self, resolution: f64) -> Vec<(i64, i64)> {
        self.poses
            .iter()
            .map(|p| ((p.x / resolution).round() as i64, (p.y / resolution).round() as i64))
            .collect()
    }

    /// Checks every state invariant against the scenario.
    pub fn validate(&self, scenario: &Scenario) -> Result<()> {
        let n = scenario.objects.len();
        if self.poses.len() != n || self.symbolic.placements.len() != n {
            return Err(Error::Scenario(format!(
                "state has {} poses / {} placements, scenario has {n} objects",
                self.poses.len(),
                self.symbolic.placements.len()
            )));
        }
        if let Gripper::Holding(id) = self.symbolic.gripper {
            if id.index() >= n {
                return Err(Error::UnknownEntity(format!("#{}", id.0)));
            }
        }
        if !self.robot.is_finite() {
            return Err(Error::Invariant("robot pose not finite".into()));
        }
        for id in self.objects() {
            let p = self.pose(id);
            if !p.is_finite() {
                return Err(Error::Invariant(format!("pose of {} not finite", scenario.object(id).name)));
            }
            let region = self.placement(id);
            if region.index() >= scenario.regions.len() {
                return Err(Error::UnknownRegion(format!("#{}", region.0)));
            }
            if self.is_held(id) {
                continue;
            }
            let r = scenario.object(id).radius;
            if !scenario.region(region).rect.contains_disc(p, r, POSE_EPS) {
                return Err(Error::Invariant(format!(
                    "{} at ({:.4}, {:.4}) outside region {}",
                    scenario.object(id).name,
                    p.x,
                    p.y,
                    scenario.region(region).name
                )));
            }
            for k in scenario.keepouts() {
                if p.distance(k.center) < r + k.radius - OVERLAP_EPS {
                    return Err(Error::Invariant(format!("{} overlaps a keep-out disc", scenario.object(id).name)));
                }
            }
        }
        let present: Vec<EntityId> = self.present_objects().collect();
        for (i, &a) in present.iter().enumerate() {
            for &b in &present[i + 1..] {
                let min = scenario.object(a).radius + scenario.object(b).radius - OVERLAP_EPS;
                if self.pose(a).distance(self.pose(b)) < min {
                    return Err(Error::Invariant(format!(
                        "{} overlaps {}",
                        scenario.object(a).name,
                        scenario.object(b).name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Ground Boolean relation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Fluent {
    In { object: EntityId, region: RegionId },
    Reached(EntityId),
    AtHome,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    /// Sorted, duplicate-free, nonempty.
    pub goal: Vec<Fluent>,
    pub label: String,
}

impl Task {
    pub fn new(label: impl Into<String>, mut goal: Vec<Fluent>) -> Result<Task> {
        let label = label.into();
        goal.sort();
        goal.dedup();
        if goal.is_empty() {
            return Err(Error::Scenario(format!("task `{label}` has an empty goal")));
        }
        Ok(Task { goal, label })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskDistribution {
    pub entries: Vec<(Task, f64)>,
}

impl TaskDistribution {
    pub fn new(entries: Vec<(Task, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Scenario("empty task distribution".into()));
        }
        if let Some((t, p)) = entries.iter().find(|(_, p)| !(0.0..=1.0).contains(p)) {
            return Err(Error::Scenario(format!("task `{}` has probability {p}", t.label)));
        }
        let total: f64 = entries.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Scenario(format!("task probabilities sum to {total}")));
        }
        for (i, (a, _)) in entries.iter().enumerate() {
            if entries[i + 1..].iter().any(|(b, _)| a.goal == b.goal) {
                return Err(Error::Scenario(format!("duplicate task `{}`", a.label)));
            }
        }
        Ok(TaskDistribution { entries })
    }

    pub fn uniform(tasks: Vec<Task>) -> Result<Self> {
        let p = 1.0 / tasks.len().max(1) as f64;
        Self::new(tasks.into_iter().map(|t| (t, p)).collect())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn tasks(&self) -> impl Iterator<Item = &Task> {
        self.entries.iter().map(|(t, _)| t)
    }

    /// Inverse-CDF draw of a task index.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, (_, p)) in self.entries.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.entries.len() - 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionKind {
    Move,
    Pick,
    Place,
    MoveClear,
}

/// One blocker carried out of the way during a MoveClear.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Relocation {
    pub object: EntityId,
    pub from: Pose2,
    pub to: Pose2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum GroundAction {
    Move { to: Pose2, cost: f64 },
    Pick { object: EntityId, cost: f64 },
    Place { object: EntityId, region: RegionId, pose: Pose2, cost: f64 },
    MoveClear { target: EntityId, relocations: Vec<Relocation>, cost: f64 },
}

impl GroundAction {
    pub fn kind(&self) -> ActionKind {
        match self {
            GroundAction::Move { .. } => ActionKind::Move,
            GroundAction::Pick { .. } => ActionKind::Pick,
            GroundAction::Place { .. } => ActionKind::Place,
            GroundAction::MoveClear { .. } => ActionKind::MoveClear,
        }
    }

    pub fn cost(&self) -> f64 {
        match *self {
            GroundAction::Move { cost, .. }
            | GroundAction::Pick { cost, .. }
            | GroundAction::Place { cost, .. }
            | GroundAction::MoveClear { cost, .. } => cost,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub actions: Vec<GroundAction>,
    pub initial: WorldState,
    pub terminal: WorldState,
    pub total_cost: f64,
}

impl Plan {
    pub fn empty(state: WorldState) -> Plan {
        Plan { actions: Vec::new(), terminal: state.clone(), initial: state, total_cost: 0.0 }
    }

    /// Builds a plan by replaying `actions` from `initial`.
    pub fn from_actions(scenario: &Scenario, initial: WorldState, actions: Vec<GroundAction>) -> Result<Plan> {
        let terminal = apply_plan(scenario, &initial, &actions)?;
        let total_cost = plan_total_cost(&actions)?;
        Ok(Plan { actions, initial, terminal, total_cost })
    }

    pub fn count(&self, kind: ActionKind) -> usize {
        self.actions.iter().filter(|a| a.kind() == kind).count()
    }

    /// Objects moved out of the way (NAMO relocations).
    pub fn relocations(&self) -> usize {
        self.actions
            .iter()
            .map(|a| match a {
                GroundAction::MoveClear { relocations, .. } => relocations.len(),
                _ => 0,
            })
            .sum()
    }
}

/// Estimate of expected future cost at a state.
pub trait CostEstimator: Send + Sync {
    fn estimate(&self, state: &WorldState) -> f64;
}

/// The myopic estimator.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroEstimator;

impl CostEstimator for ZeroEstimator {
    fn estimate(&self, _state: &WorldState) -> f64 {
        0.0
    }
}

pub fn evaluate_fluent(scenario: &Scenario, fluent: &Fluent, state: &WorldState) -> Result<bool> {
    let check = |id: EntityId| {
        if id.index() < state.object_count() {
            Ok(())
        } else {
            Err(Error::UnknownEntity(format!("#{}", id.0)))
        }
    };
    Ok(match *fluent {
        Fluent::In { object, region } => {
            check(object)?;
            if region.index() >= scenario.regions.len() {
                return Err(Error::UnknownRegion(format!("#{}", region.0)));
            }
            state.placement(object) == region && !state.is_held(object)
        }
        Fluent::Reached(object) => {
            check(object)?;
            state.symbolic.reached == Some(object)
        }
        Fluent::AtHome => state.robot.distance(scenario.home) <= POSE_EPS,
    })
}

pub fn task_satisfied(scenario: &Scenario, task: &Task, state: &WorldState) -> Result<bool> {
    for f in &task.goal {
        if !evaluate_fluent(scenario, f, state)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Exact sum of action costs.
pub fn plan_total_cost(actions: &[GroundAction]) -> Result<f64> {
    let mut total = 0.0;
    for (i, a) in actions.iter().enumerate() {
        let c = a.cost();
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::Invariant(format!("action {i} has cost {c}")));
        }
        total += c;
    }
    Ok(total)
}

/// Cost of `action` from `before` under the scenario's cost model.
pub fn action_cost(scenario: &Scenario, before: &WorldState, action: &GroundAction) -> f64 {
    match action {
        GroundAction::Move { to, .. } => before.robot.distance(*to),
        GroundAction::Pick { .. } => cabinet::PICK_COST,
        GroundAction::Place { .. } => cabinet::PLACE_COST,
        GroundAction::MoveClear { target, relocations, .. } => {
            namo::moveclear_cost(scenario, before, *target, relocations)
        }
    }
}

fn require_at_station(scenario: &Scenario, state: &WorldState, region: RegionId) -> std::result::Result<(), String> {
    match scenario.region(region).station {
        Some(st) if state.robot.distance(st) > POSE_EPS => {
            Err(format!("robot not at the station of {}", scenario.region(region).name))
        }
        _ => Ok(()),
    }
}

fn transition(scenario: &Scenario, state: &WorldState, action: &GroundAction) -> std::result::Result<WorldState, String> {
    let mut next = state.clone();
    match *action {
        GroundAction::Move { to, .. } => {
            if !to.is_finite() || !scenario.workspace.contains(to, POSE_EPS) {
                return Err("move target outside workspace".into());
            }
            next.robot = to;
        }
        GroundAction::Pick { object, .. } => {
            if object.index() >= state.object_count() {
                return Err(format!("unknown object #{}", object.0));
            }
            if state.symbolic.gripper != Gripper::Empty {
                return Err("pick with a non-empty gripper".into());
            }
            let region = state.placement(object);
            require_at_station(scenario, state, region)?;
            if scenario.region(region).front.is_some() {
                let obstructors = cabinet::grasp_obstructors(scenario, object, state, &[]);
                if !obstructors.is_empty() {
                    let names: Vec<&str> = obstructors.iter().map(|&o| scenario.object(o).name.as_str()).collect();
                    return Err(format!("grasp of {} obstructed by {names:?}", scenario.object(object).name));
                }
            }
            next.symbolic.gripper = Gripper::Holding(object);
        }
        GroundAction::Place { object, region, pose, .. } => {
            if state.symbolic.gripper != Gripper::Holding(object) {
                return Err("place of an object that is not held".into());
            }
            if region.index() >= scenario.regions.len() {
                return Err(format!("unknown region #{}", region.0));
            }
            require_at_station(scenario, state, region)?;
            let r = scenario.object(object).radius;
            if !crate::geometry::is_free(scenario, state, region, pose, r, Some(object)) {
                return Err(format!("place pose for {} not free", scenario.object(object).name));
            }
            if scenario.region(region).front.is_some() && !cabinet::access_clear(scenario, state, region, pose, r, object) {
                return Err(format!("access to place pose of {} obstructed", scenario.object(object).name));
            }
            next.symbolic.placements[object.index()] = region;
            next.poses[object.index()] = pose;
            next.symbolic.gripper = Gripper::Empty;
        }
        GroundAction::MoveClear { target, ref relocations, .. } => {
            if scenario.domain != Domain::Namo {
                return Err("moveclear outside the NAMO domain".into());
            }
            next = namo::apply_moveclear(scenario, state, target, relocations)?;
        }
    }
    Ok(next)
}

/// Applies one action after checking its preconditions and cost stamp.
pub fn apply_action(scenario: &Scenario, state: &WorldState, action: &GroundAction, index: usize) -> Result<WorldState> {
    let expected = action_cost(scenario, state, action);
    if (expected - action.cost()).abs() > POSE_EPS {
        return Err(Error::InvalidPlan {
            index,
            reason: format!("stamped cost {} differs from cost model {expected}", action.cost()),
        });
    }
    let next = transition(scenario, state, action).map_err(|reason| Error::InvalidPlan { index, reason })?;
    if cfg!(debug_assertions) {
        next.validate(scenario).map_err(|e| Error::InvalidPlan { index, reason: e.to_string() })?;
    }
    Ok(next)
}

pub fn apply_plan(scenario: &Scenario, s0: &WorldState, actions: &[GroundAction]) -> Result<WorldState> {
    let mut state = s0.clone();
    for (i, a) in actions.iter().enumerate() {
        state = apply_action(scenario, &state, a, i)?;
    }
    Ok(state)
}
