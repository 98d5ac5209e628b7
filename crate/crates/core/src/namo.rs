//! Navigation among movable obstacles: reach a target block from home and
//! return, carrying every block on the straight path to a sampled free pose.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{blockers, blocks, sample_free_pose_where, Corridor, Segment};
use crate::scenario::Scenario;
use crate::solver::SolverConfig;
use crate::world::{EntityId, Fluent, GroundAction, Gripper, Plan, Pose2, Relocation, Task, WorldState, POSE_EPS};

/// Fixed charge per relocated block.
pub const BLOCK_MOVE_COST: f64 = 200.0;

pub fn namo_goal(scenario: &Scenario, target: EntityId) -> Result<Task> {
    let obj = scenario
        .objects
        .get(target.index())
        .ok_or_else(|| Error::UnknownEntity(format!("#{}", target.0)))?;
    Task::new(format!("reach {}", obj.name), vec![Fluent::Reached(target), Fluent::AtHome])
}

/// The target of a reach task, if `task` is one.
pub fn namo_target(task: &Task) -> Option<EntityId> {
    match task.goal.as_slice() {
        [Fluent::Reached(t), Fluent::AtHome] => Some(*t),
        _ => None,
    }
}

/// Where the robot stops in front of a disc at `target`, approaching from `from`.
pub fn standoff_from(scenario: &Scenario, from: Pose2, target: Pose2, target_radius: f64) -> Pose2 {
    let offset = scenario.robot_radius + target_radius + scenario.clearance;
    let d = target - from;
    let dist = d.norm();
    if dist <= offset {
        from
    } else {
        from + d * ((dist - offset) / dist)
    }
}

pub fn reach_corridor_from(scenario: &Scenario, from: Pose2, target: Pose2, target_radius: f64) -> Corridor {
    let end = standoff_from(scenario, from, target, target_radius);
    Corridor::new(Segment::new(from, end), scenario.robot_radius + target_radius + scenario.clearance)
}

/// Straight home-to-standoff corridor for reaching `target`.
pub fn reach_corridor(scenario: &Scenario, state: &WorldState, target: EntityId) -> Corridor {
    reach_corridor_from(scenario, scenario.home, state.pose(target), scenario.object(target).radius)
}

/// Out-and-back travel to the standoff; no reach plan costs less.
pub fn reach_lower_bound(scenario: &Scenario, state: &WorldState, target: EntityId) -> f64 {
    let s = standoff_from(scenario, scenario.home, state.pose(target), scenario.object(target).radius);
    2.0 * scenario.home.distance(s)
}

/// 200 per relocated block plus the robot's total travel: a home round trip
/// through each blocker and its drop pose, then home → standoff → home.
pub fn moveclear_cost(scenario: &Scenario, before: &WorldState, target: EntityId, relocations: &[Relocation]) -> f64 {
    let home = scenario.home;
    let relocation_travel: f64 = relocations
        .iter()
        .map(|r| home.distance(r.from) + r.from.distance(r.to) + r.to.distance(home))
        .sum();
    BLOCK_MOVE_COST * relocations.len() as f64 + relocation_travel + reach_lower_bound(scenario, before, target)
}

pub(crate) fn apply_moveclear(
    scenario: &Scenario,
    state: &WorldState,
    target: EntityId,
    relocations: &[Relocation],
) -> std::result::Result<WorldState, String> {
    if target.index() >= state.object_count() {
        return Err(format!("unknown target #{}", target.0));
    }
    if state.symbolic.gripper != Gripper::Empty {
        return Err("moveclear with a non-empty gripper".into());
    }
    if state.robot.distance(scenario.home) > POSE_EPS {
        return Err("moveclear must start at home".into());
    }
    let mut s = state.clone();
    for r in relocations {
        let o = r.object;
        if o == target || o.index() >= s.object_count() {
            return Err(format!("cannot relocate #{}", o.0));
        }
        if s.pose(o).distance(r.from) > POSE_EPS {
            return Err(format!("{} is not at its recorded pose", scenario.object(o).name));
        }
        if !crate::geometry::is_free(scenario, &s, s.placement(o), r.to, scenario.object(o).radius, Some(o)) {
            return Err(format!("drop pose of {} is not free", scenario.object(o).name));
        }
        s.poses[o.index()] = r.to;
    }
    let corridor = reach_corridor(scenario, &s, target);
    let left = blockers(scenario, &corridor, &s, &[target]);
    if !left.is_empty() {
        return Err(format!("{} blocker(s) remain on the path to {}", left.len(), scenario.object(target).name));
    }
    s.symbolic.reached = Some(target);
    s.robot = scenario.home;
    Ok(s)
}

pub fn solve_namo<R: Rng + ?Sized>(
    scenario: &Scenario,
    state: &WorldState,
    task: &Task,
    rng: &mut R,
    config: &SolverConfig,
) -> Result<Plan> {
    let unsolvable = |reason: &str| Error::Unsolvable { task: task.label.clone(), reason: reason.to_string() };
    let target = namo_target(task).ok_or_else(|| unsolvable("not a reach task"))?;
    if target.index() >= state.object_count() {
        return Err(Error::UnknownEntity(format!("#{}", target.0)));
    }
    if state.robot.distance(scenario.home) > POSE_EPS || state.symbolic.gripper != Gripper::Empty {
        return Err(unsolvable("robot must start at home with an empty gripper"));
    }
    let corridor = reach_corridor(scenario, state, target);
    let in_the_way = blockers(scenario, &corridor, state, &[target]);

    let attempts = config.skeleton_retry_budget * config.refinement_retry_budget;
    for _ in 0..attempts {
        let mut s = state.clone();
        let mut relocations = Vec::with_capacity(in_the_way.len());
        for &b in &in_the_way {
            let r = scenario.object(b).radius;
            let drop = sample_free_pose_where(
                scenario,
                s.placement(b),
                &s,
                r,
                Some(b),
                rng,
                scenario.max_tries,
                |p| !blocks(&corridor, p, r),
            );
            match drop {
                Some(to) => {
                    relocations.push(Relocation { object: b, from: s.pose(b), to });
                    s.poses[b.index()] = to;
                }
                None => break,
            }
        }
        if relocations.len() == in_the_way.len() {
            let cost = moveclear_cost(scenario, state, target, &relocations);
            let action = GroundAction::MoveClear { target, relocations, cost };
            return Plan::from_actions(scenario, state.clone(), vec![action]);
        }
    }
    Err(unsolvable("no free drop pose for a blocker within the retry budget"))
}
