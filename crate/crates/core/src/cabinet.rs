//! Pick-and-place between a table and a front-opening cabinet.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{blockers, sample_free_pose_where, Corridor, Segment};
use crate::scenario::Scenario;
use crate::solver::SolverConfig;
use crate::world::{apply_action, EntityId, Fluent, GroundAction, Gripper, Plan, Pose2, RegionId, Task, TaskDistribution, WorldState};

pub const PICK_COST: f64 = 20.0;
pub const PLACE_COST: f64 = 20.0;

/// First region with an open front edge.
pub fn cabinet_region(scenario: &Scenario) -> Option<RegionId> {
    scenario.regions.iter().position(|r| r.front.is_some()).map(|i| RegionId(i as u16))
}

/// First region without a front edge; obstructors are parked here.
pub fn table_region(scenario: &Scenario) -> Option<RegionId> {
    scenario.regions.iter().position(|r| r.front.is_none()).map(|i| RegionId(i as u16))
}

/// Load and unload tasks for each class, or for every non-empty set of
/// classes when the scenario is multi-class. Uniform probabilities.
pub fn cabinet_tasks(scenario: &Scenario) -> Result<TaskDistribution> {
    let cab = cabinet_region(scenario).ok_or_else(|| Error::Scenario("no region with a front edge".into()))?;
    let table = table_region(scenario).ok_or_else(|| Error::Scenario("no region without a front edge".into()))?;
    let k = scenario.classes.len();
    let sets: Vec<Vec<usize>> = if scenario.multi_class {
        (1u32..(1 << k)).map(|m| (0..k).filter(|c| m & (1 << c) != 0).collect()).collect()
    } else {
        (0..k).map(|c| vec![c]).collect()
    };
    let mut tasks = Vec::new();
    for set in sets {
        let members: Vec<EntityId> = set.iter().flat_map(|&c| scenario.class_members(c)).collect();
        if members.is_empty() {
            continue;
        }
        let names: Vec<&str> = set.iter().map(|&c| scenario.classes[c].as_str()).collect();
        for (verb, region) in [("load", cab), ("unload", table)] {
            let goal = members.iter().map(|&object| Fluent::In { object, region }).collect();
            tasks.push(Task::new(format!("{verb} {}", names.join("+")), goal)?);
        }
    }
    TaskDistribution::uniform(tasks)
}

/// Straight reach from the nearest point of the front edge to the object.
pub fn grasp_corridor(scenario: &Scenario, state: &WorldState, object: EntityId) -> Option<Corridor> {
    let region = scenario.region(state.placement(object));
    let front = region.front?;
    let p = state.pose(object);
    let a = front.nearest_point(&region.rect, p);
    Some(Corridor::new(Segment::new(a, p), scenario.object(object).radius + scenario.clearance))
}

/// Objects that must leave before `object` can be grasped, front-most first.
pub fn grasp_obstructors(scenario: &Scenario, object: EntityId, state: &WorldState, ignore: &[EntityId]) -> Vec<EntityId> {
    let Some(corridor) = grasp_corridor(scenario, state, object) else {
        return Vec::new();
    };
    let mut skip = ignore.to_vec();
    skip.push(object);
    blockers(scenario, &corridor, state, &skip)
}

/// Whether a disc can be inserted through the front edge of `region` to `pose`.
pub fn access_clear(scenario: &Scenario, state: &WorldState, region: RegionId, pose: Pose2, radius: f64, object: EntityId) -> bool {
    let reg = scenario.region(region);
    let Some(front) = reg.front else {
        return true;
    };
    let a = front.nearest_point(&reg.rect, pose);
    let corridor = Corridor::new(Segment::new(a, pose), radius + scenario.clearance);
    blockers(scenario, &corridor, state, &[object]).is_empty()
}

fn goal_placements(task: &Task) -> Option<Vec<(EntityId, RegionId)>> {
    task.goal
        .iter()
        .map(|f| match *f {
            Fluent::In { object, region } => Some((object, region)),
            _ => None,
        })
        .collect()
}

fn pending(state: &WorldState, goals: &[(EntityId, RegionId)]) -> Vec<(EntityId, RegionId)> {
    goals.iter().copied().filter(|&(o, r)| state.is_held(o) || state.placement(o) != r).collect()
}

/// Pick/place count times 20 plus the travel every relocation-free plan
/// must make. Plans with relocations only cost more.
pub fn transfer_lower_bound(scenario: &Scenario, state: &WorldState, task: &Task) -> f64 {
    let Some(goals) = goal_placements(task) else {
        return 0.0;
    };
    let todo = pending(state, &goals);
    let m = todo.len();
    if m == 0 {
        return 0.0;
    }
    let manip = (PICK_COST + PLACE_COST) * m as f64;
    let src = state.placement(todo[0].0);
    let dst = todo[0].1;
    let one_way = todo.iter().all(|&(o, r)| r == dst && !state.is_held(o) && state.placement(o) == src);
    match (one_way, scenario.region(src).station, scenario.region(dst).station) {
        (true, Some(a), Some(b)) => manip + state.robot.distance(a) + (2 * m - 1) as f64 * a.distance(b),
        _ => manip,
    }
}

struct Builder<'a> {
    scenario: &'a Scenario,
    state: WorldState,
    actions: Vec<GroundAction>,
    parking: RegionId,
    goals: Vec<(EntityId, RegionId)>,
    budget: usize,
}

type Step = std::result::Result<(), ()>;

impl Builder<'_> {
    fn push(&mut self, action: GroundAction) -> Step {
        let next = apply_action(self.scenario, &self.state, &action, self.actions.len()).map_err(|_| ())?;
        self.state = next;
        self.actions.push(action);
        Ok(())
    }

    fn go_to(&mut self, region: RegionId) -> Step {
        let Some(to) = self.scenario.region(region).station else {
            return Ok(());
        };
        let cost = self.state.robot.distance(to);
        if cost > 0.0 {
            self.push(GroundAction::Move { to, cost })?;
        }
        Ok(())
    }

    fn clear<R: Rng + ?Sized>(&mut self, object: EntityId, remaining: &mut Vec<(EntityId, RegionId)>, rng: &mut R) -> Step {
        loop {
            let obs = grasp_obstructors(self.scenario, object, &self.state, &[]);
            let Some(&front) = obs.first() else {
                return Ok(());
            };
            match remaining.iter().position(|&(o, _)| o == front) {
                Some(i) => {
                    let (o, r) = remaining.remove(i);
                    self.transfer(o, r, remaining, rng)?;
                }
                None => {
                    self.transfer(front, self.parking, remaining, rng)?;
                    if let Some(&goal) = self.goals.iter().find(|g| g.0 == front && g.1 != self.parking) {
                        remaining.push(goal);
                    }
                }
            }
        }
    }

    /// Samples a place pose in `dest`, parking non-goal objects from `dest`
    /// on the table while none is available.
    fn make_room<R: Rng + ?Sized>(
        &mut self,
        object: EntityId,
        dest: RegionId,
        remaining: &mut Vec<(EntityId, RegionId)>,
        rng: &mut R,
    ) -> std::result::Result<Pose2, ()> {
        let scn = self.scenario;
        let radius = scn.object(object).radius;
        loop {
            let state = &self.state;
            let found = sample_free_pose_where(scn, dest, state, radius, Some(object), rng, scn.max_tries, |p| {
                access_clear(scn, state, dest, p, radius, object)
            });
            if let Some(p) = found {
                return Ok(p);
            }
            if dest == self.parking {
                return Err(());
            }
            let victims: Vec<EntityId> = state
                .present_objects()
                .filter(|&o| o != object && state.placement(o) == dest && self.goals.iter().all(|g| g.0 != o))
                .collect();
            let &victim = victims.choose(rng).ok_or(())?;
            self.transfer(victim, self.parking, remaining, rng)?;
        }
    }

    fn transfer<R: Rng + ?Sized>(
        &mut self,
        object: EntityId,
        dest: RegionId,
        remaining: &mut Vec<(EntityId, RegionId)>,
        rng: &mut R,
    ) -> Step {
        if self.budget == 0 {
            return Err(());
        }
        self.budget -= 1;
        self.clear(object, remaining, rng)?;
        let pose = self.make_room(object, dest, remaining, rng)?;
        let src = self.state.placement(object);
        self.go_to(src)?;
        self.push(GroundAction::Pick { object, cost: PICK_COST })?;
        self.go_to(dest)?;
        self.push(GroundAction::Place { object, region: dest, pose, cost: PLACE_COST })
    }
}

fn refine<R: Rng + ?Sized>(
    scenario: &Scenario,
    state: &WorldState,
    order: &[(EntityId, RegionId)],
    goals: &[(EntityId, RegionId)],
    rng: &mut R,
) -> Option<Vec<GroundAction>> {
    let mut b = Builder {
        scenario,
        state: state.clone(),
        actions: Vec::new(),
        parking: table_region(scenario)?,
        goals: goals.to_vec(),
        budget: 4 * state.object_count() + 4,
    };
    let mut remaining = order.to_vec();
    while !remaining.is_empty() {
        let next = if scenario.interchangeable_obstructors {
            let waiting: Vec<EntityId> = remaining.iter().map(|&(o, _)| o).collect();
            remaining
                .iter()
                .position(|&(o, _)| {
                    grasp_obstructors(scenario, o, &b.state, &[]).iter().all(|x| !waiting.contains(x))
                })
                .unwrap_or(0)
        } else {
            0
        };
        let (o, r) = remaining.remove(next);
        b.transfer(o, r, &mut remaining, rng).ok()?;
    }
    Some(b.actions)
}

pub fn solve_cabinet<R: Rng + ?Sized>(
    scenario: &Scenario,
    state: &WorldState,
    task: &Task,
    rng: &mut R,
    config: &SolverConfig,
) -> Result<Plan> {
    let unsolvable = |reason: &str| Error::Unsolvable { task: task.label.clone(), reason: reason.to_string() };
    let goals = goal_placements(task).ok_or_else(|| unsolvable("goal is not a conjunction of In fluents"))?;
    if state.symbolic.gripper != Gripper::Empty {
        return Err(unsolvable("gripper must start empty"));
    }
    let todo = pending(state, &goals);
    if todo.is_empty() {
        return Ok(Plan::empty(state.clone()));
    }
    for _ in 0..config.skeleton_retry_budget {
        let mut order = todo.clone();
        order.shuffle(rng);
        for _ in 0..config.refinement_retry_budget {
            if let Some(actions) = refine(scenario, state, &order, &goals, rng) {
                return Plan::from_actions(scenario, state.clone(), actions);
            }
        }
    }
    Err(unsolvable("no refinement found within the retry budget"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::world::{apply_plan, task_satisfied, ActionKind};

    fn p(x: f64, y: f64) -> Pose2 {
        Pose2::new(x, y)
    }

    /// All nine objects on the table in a grid, robot at the table station.
    fn tabletop() -> (Scenario, WorldState) {
        let scn = Scenario::cabinet_default();
        let mut s = scn.initial_state().unwrap();
        let table = scn.region_id("table").unwrap();
        for (i, o) in scn.objects().enumerate() {
            s.symbolic.placements[o.index()] = table;
            s.poses[o.index()] = p(-2.0 + 0.3 * (i % 3) as f64, -0.6 + 0.3 * (i / 3) as f64);
        }
        s.robot = scn.region(table).station.unwrap();
        s.validate(&scn).unwrap();
        (scn, s)
    }

    fn task(scn: &Scenario, label: &str) -> Task {
        scn.tasks.tasks().find(|t| t.label == label).unwrap().clone()
    }

    #[test]
    fn six_single_class_tasks() {
        let scn = Scenario::cabinet_default();
        assert_eq!(scn.tasks.len(), 6);
        for t in scn.tasks.tasks() {
            assert_eq!(t.goal.len(), 3);
        }
    }

    #[test]
    fn front_object_obstructs_back_one() {
        let (scn, mut s) = tabletop();
        let cab = scn.region_id("cabinet").unwrap();
        let (a, b) = (EntityId(0), EntityId(3));
        s.symbolic.placements[a.index()] = cab;
        s.symbolic.placements[b.index()] = cab;
        s.poses[a.index()] = p(1.4, 0.0);
        s.poses[b.index()] = p(1.15, 0.0);
        s.validate(&scn).unwrap();
        assert_eq!(grasp_obstructors(&scn, a, &s, &[]), vec![b]);
        assert!(grasp_obstructors(&scn, b, &s, &[]).is_empty());
        assert!(grasp_obstructors(&scn, a, &s, &[b]).is_empty());
    }

    #[test]
    fn clean_load_costs_manipulation_plus_travel() {
        let (scn, s) = tabletop();
        let t = task(&scn, "load mug");
        let plan = solve_cabinet(&scn, &s, &t, &mut rng::seeded(3), &SolverConfig::default()).unwrap();
        let d = p(-0.7, 0.0).distance(p(0.7, 0.0));
        assert_eq!(plan.count(ActionKind::Pick), 3);
        assert_eq!(plan.count(ActionKind::Place), 3);
        assert!((plan.total_cost - (120.0 + 5.0 * d)).abs() < 1e-9);
        assert!((plan.total_cost - transfer_lower_bound(&scn, &s, &t)).abs() < 1e-9);
    }

    #[test]
    fn relocating_an_obstructor_adds_a_pick_place_round_trip() {
        let (scn, mut s) = tabletop();
        let cab = scn.region_id("cabinet").unwrap();
        let mugs = scn.class_members(0);
        let bottle = scn.class_members(1)[0];
        for (m, y) in mugs.iter().zip([-0.3, 0.0, 0.3]) {
            s.symbolic.placements[m.index()] = cab;
            s.poses[m.index()] = p(1.4, y);
        }
        let base = solve_cabinet(&scn, &s, &task(&scn, "unload mug"), &mut rng::seeded(4), &SolverConfig::default()).unwrap();
        s.symbolic.placements[bottle.index()] = cab;
        s.poses[bottle.index()] = p(1.15, 0.0);
        s.validate(&scn).unwrap();
        let t = task(&scn, "unload mug");
        let plan = solve_cabinet(&scn, &s, &t, &mut rng::seeded(4), &SolverConfig::default()).unwrap();
        let d = p(-0.7, 0.0).distance(p(0.7, 0.0));
        assert_eq!(plan.count(ActionKind::Pick), base.count(ActionKind::Pick) + 1);
        assert_eq!(plan.count(ActionKind::Place), base.count(ActionKind::Place) + 1);
        assert!((plan.total_cost - base.total_cost - (40.0 + 2.0 * d)).abs() < 1e-9);
        let end = apply_plan(&scn, &s, &plan.actions).unwrap();
        assert_eq!(end.placement(bottle), scn.region_id("table").unwrap());
    }

    #[test]
    fn same_class_obstructor_is_not_relocated() {
        let (scn, mut s) = tabletop();
        let cab = scn.region_id("cabinet").unwrap();
        let mugs = scn.class_members(0);
        s.symbolic.placements[mugs[0].index()] = cab;
        s.poses[mugs[0].index()] = p(1.4, 0.0);
        s.symbolic.placements[mugs[1].index()] = cab;
        s.poses[mugs[1].index()] = p(1.15, 0.0);
        s.symbolic.placements[mugs[2].index()] = cab;
        s.poses[mugs[2].index()] = p(1.3, 0.35);
        s.validate(&scn).unwrap();
        let t = task(&scn, "unload mug");
        let plan = solve_cabinet(&scn, &s, &t, &mut rng::seeded(5), &SolverConfig::default()).unwrap();
        assert_eq!(plan.count(ActionKind::Pick), 3);
        assert!((plan.total_cost - transfer_lower_bound(&scn, &s, &t)).abs() < 1e-9);
    }

    #[test]
    fn random_instances_replay_and_satisfy() {
        let scn = Scenario::cabinet_default();
        for seed in 0..300u64 {
            let s = scn.random_state(&mut rng::seeded(seed)).unwrap();
            let t = scn.tasks.tasks().nth((seed % 6) as usize).unwrap().clone();
            let plan = solve_cabinet(&scn, &s, &t, &mut rng::seeded(seed ^ 0xabc), &SolverConfig::default()).unwrap();
            let end = apply_plan(&scn, &s, &plan.actions).unwrap();
            assert!(task_satisfied(&scn, &t, &end).unwrap());
            assert!(end.approx_eq(&plan.terminal, 1e-9));
            assert!(plan.total_cost + 1e-9 >= transfer_lower_bound(&scn, &s, &t));
        }
    }

    #[test]
    fn multi_class_adds_set_tasks() {
        let opts = crate::scenario::LoadOptions { multi_class: Some(true), ..Default::default() };
        let scn = Scenario::builtin(crate::scenario::Domain::Cabinet, &opts).unwrap();
        assert_eq!(scn.tasks.len(), 14);
    }
}
