//! Test-side reference computations. Nothing here calls the library's cost
//! model, blocker queries or expectation code; only plain data access.
#![allow(dead_code)]

use antplan::rng;
use antplan::world::{Fluent, GroundAction, Pose2};
use antplan::{tamp_solve, Domain, Scenario, SolverConfig, Task, WorldState};

pub fn dist(a: Pose2, b: Pose2) -> f64 {
    ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt()
}

/// Distance from `p` to the segment `a`-`b`.
pub fn seg_dist(p: Pose2, a: Pose2, b: Pose2) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0) };
    dist(p, Pose2::new(a.x + t * dx, a.y + t * dy))
}

pub fn standoff(scn: &Scenario, target: Pose2, target_radius: f64) -> Pose2 {
    let d = dist(scn.home, target);
    let back = scn.robot_radius + target_radius + scn.clearance;
    Pose2::new(target.x - (target.x - scn.home.x) / d * back, target.y - (target.y - scn.home.y) / d * back)
}

/// Objects whose disc cuts the home-to-standoff corridor of `target`.
pub fn namo_blockers(scn: &Scenario, s: &WorldState, target: usize) -> Vec<usize> {
    let rt = scn.objects[target].radius;
    let half = scn.robot_radius + rt + scn.clearance;
    let goal = standoff(scn, s.poses[target], rt);
    (0..s.poses.len())
        .filter(|&o| o != target && seg_dist(s.poses[o], scn.home, goal) < half + scn.objects[o].radius)
        .collect()
}

/// Cost of `actions` from `s0`, recomputed from the cost model's definition.
pub fn reference_cost(scn: &Scenario, s0: &WorldState, actions: &[GroundAction]) -> f64 {
    let mut robot = s0.robot;
    let mut poses = s0.poses.clone();
    let mut total = 0.0;
    for a in actions {
        match a {
            GroundAction::Move { to, .. } => {
                total += dist(robot, *to);
                robot = *to;
            }
            GroundAction::Pick { .. } | GroundAction::Place { .. } => total += 20.0,
            GroundAction::MoveClear { target, relocations, .. } => {
                let h = scn.home;
                total += 200.0 * relocations.len() as f64;
                for r in relocations {
                    total += dist(h, r.from) + dist(r.from, r.to) + dist(r.to, h);
                    poses[r.object.index()] = r.to;
                }
                let t = target.index();
                total += 2.0 * dist(h, standoff(scn, poses[t], scn.objects[t].radius));
                robot = h;
            }
        }
        if let GroundAction::Place { object, pose, .. } = a {
            poses[object.index()] = *pose;
        }
    }
    total
}

pub fn goal_holds(scn: &Scenario, task: &Task, s: &WorldState) -> bool {
    task.goal.iter().all(|f| match *f {
        Fluent::In { object, region } => s.symbolic.placements[object.index()] == region,
        Fluent::Reached(o) => s.symbolic.reached == Some(o),
        Fluent::AtHome => dist(s.robot, scn.home) <= 1e-9,
    })
}

pub fn relocation_count(actions: &[GroundAction]) -> usize {
    actions
        .iter()
        .map(|a| match a {
            GroundAction::MoveClear { relocations, .. } => relocations.len(),
            _ => 0,
        })
        .sum()
}

/// Expected next-task cost by solving every task with every sample seed and
/// pricing each plan with [`reference_cost`].
pub fn brute_force_vap(scn: &Scenario, s: &WorldState, samples: usize, seed: u64, solver: &SolverConfig) -> f64 {
    let mut s = s.clone();
    s.symbolic.reached = None;
    let mut total = 0.0;
    for (k, (task, p)) in scn.tasks.entries.iter().enumerate() {
        if goal_holds(scn, task, &s) {
            continue;
        }
        let mut best = f64::INFINITY;
        for m in 0..samples {
            let cfg = solver.with_seed(rng::mix(rng::mix(seed, k as u64), m as u64));
            let (plan, _) = tamp_solve(scn, &s, task, &cfg).expect("every task is solvable");
            best = best.min(reference_cost(scn, &s, &plan.actions));
        }
        total += p * best;
    }
    total
}

/// Checks one plan against the references; `Err` says what disagreed.
pub fn check_plan(scn: &Scenario, s0: &WorldState, task: &Task, seed: u64) -> Result<(), String> {
    let (plan, cost) = tamp_solve(scn, s0, task, &SolverConfig::default().with_seed(seed)).map_err(|e| e.to_string())?;
    let terminal = antplan::world::apply_plan(scn, s0, &plan.actions).map_err(|e| e.to_string())?;
    if !terminal.approx_eq(&plan.terminal, 1e-12) {
        return Err("replayed terminal differs from reported".into());
    }
    if !goal_holds(scn, task, &terminal) {
        return Err(format!("goal of `{}` not satisfied", task.label));
    }
    let reference = reference_cost(scn, s0, &plan.actions);
    if (reference - cost).abs() > 1e-9 || cost != plan.total_cost {
        return Err(format!("cost {cost} vs reference {reference}"));
    }
    match scn.domain {
        Domain::Namo => {
            if let Some(Fluent::Reached(t)) = task.goal.iter().find(|f| matches!(f, Fluent::Reached(_))) {
                let left = namo_blockers(scn, &terminal, t.index());
                let before = namo_blockers(scn, s0, t.index());
                if !left.is_empty() {
                    return Err(format!("corridor still blocked by {left:?}"));
                }
                if relocation_count(&plan.actions) != before.len() {
                    return Err(format!("{} relocations for {} blockers", relocation_count(&plan.actions), before.len()));
                }
            }
        }
        Domain::Cabinet => {
            let picks = plan.actions.iter().filter(|a| matches!(a, GroundAction::Pick { .. })).count();
            let places = plan.actions.iter().filter(|a| matches!(a, GroundAction::Place { .. })).count();
            if picks != places {
                return Err(format!("{picks} picks vs {places} places"));
            }
        }
    }
    Ok(())
}
