//! Scenario files: workspace geometry, entities, regions and the task
//! distribution. Every other module sees a scenario only through [`Scenario`],
//! which is produced by the loader here.
//!
//! The on-disk format is TOML; `docs/scenario-format.md` at the repository
//! root describes every key. Built-in scenarios live in `crates/core/scenarios/`.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{sample_free_pose, Rect};
use crate::rng;
use crate::world::{EntityId, Fluent, Gripper, Pose2, RegionId, SymbolicState, Task, TaskDistribution, WorldState};
use crate::{cabinet, namo};

pub const FORMAT_VERSION: u32 = 1;

const NAMO_TOML: &str = include_str!("../scenarios/namo.toml");
const CABINET_TOML: &str = include_str!("../scenarios/cabinet.toml");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Namo,
    Cabinet,
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Domain::Namo => "namo",
            Domain::Cabinet => "cabinet",
        })
    }
}

impl std::str::FromStr for Domain {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "namo" => Ok(Domain::Namo),
            "cabinet" => Ok(Domain::Cabinet),
            other => Err(Error::Scenario(format!("unknown domain `{other}`"))),
        }
    }
}

/// The open side of a container region.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrontEdge {
    MinX,
    MaxX,
    MinY,
    MaxY,
}

impl FrontEdge {
    /// Nearest point of the edge to `p`.
    pub fn nearest_point(self, rect: &Rect, p: Pose2) -> Pose2 {
        let cx = p.x.clamp(rect.min.x, rect.max.x);
        let cy = p.y.clamp(rect.min.y, rect.max.y);
        match self {
            FrontEdge::MinX => Pose2::new(rect.min.x, cy),
            FrontEdge::MaxX => Pose2::new(rect.max.x, cy),
            FrontEdge::MinY => Pose2::new(cx, rect.min.y),
            FrontEdge::MaxY => Pose2::new(cx, rect.max.y),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub name: String,
    pub rect: Rect,
    pub front: Option<FrontEdge>,
    /// Robot base pose from which the region is manipulated.
    pub station: Option<Pose2>,
    /// Extra separation kept between discs resting in this region.
    pub gap: f64,
    /// Whether the region appears as a node in the scene graph.
    pub container: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub name: String,
    pub class: usize,
    pub radius: f64,
    pub region: RegionId,
    pub pose: Option<Pose2>,
}

/// Static disc no object may overlap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeepOut {
    pub center: Pose2,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub domain: Domain,
    pub workspace: Rect,
    pub clearance: f64,
    pub max_tries: usize,
    /// get_neighbor perturbation radius as a fraction of the region's smaller side.
    pub perturb_fraction: f64,
    pub layout_seed: u64,
    pub randomize_placement: bool,
    pub robot_radius: f64,
    pub home: Pose2,
    pub regions: Vec<Region>,
    pub classes: Vec<String>,
    pub objects: Vec<ObjectSpec>,
    pub tasks: TaskDistribution,
    pub multi_class: bool,
    pub interchangeable_obstructors: bool,
    keepouts: Vec<KeepOut>,
}

/// Load-time overrides applied before validation.
#[derive(Clone, Debug, Default)]
pub struct LoadOptions {
    /// Keep only the first `n` objects.
    pub object_count: Option<usize>,
    pub multi_class: Option<bool>,
    pub interchangeable_obstructors: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default)]
    format: Option<String>,
    version: u32,
    name: String,
    domain: Domain,
    workspace: RawWorkspace,
    robot: RawRobot,
    classes: Vec<String>,
    regions: Vec<RawRegion>,
    objects: Vec<RawObject>,
    tasks: RawTasks,
}

fn default_clearance() -> f64 {
    0.01
}
fn default_max_tries() -> usize {
    256
}
fn default_perturb() -> f64 {
    0.2
}
fn default_true() -> bool {
    true
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWorkspace {
    min: [f64; 2],
    max: [f64; 2],
    #[serde(default = "default_clearance")]
    clearance: f64,
    #[serde(default = "default_max_tries")]
    max_tries: usize,
    #[serde(default = "default_perturb")]
    perturb_fraction: f64,
    #[serde(default)]
    layout_seed: u64,
    #[serde(default)]
    randomize_placement: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRobot {
    radius: f64,
    home: [f64; 2],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegion {
    name: String,
    min: [f64; 2],
    max: [f64; 2],
    #[serde(default)]
    front: Option<FrontEdge>,
    #[serde(default)]
    station: Option<[f64; 2]>,
    #[serde(default)]
    gap: f64,
    #[serde(default)]
    container: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObject {
    name: String,
    class: String,
    radius: f64,
    region: String,
    #[serde(default)]
    pose: Option<[f64; 2]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTasks {
    #[serde(default)]
    generator: Option<String>,
    #[serde(default)]
    multi_class: bool,
    #[serde(default = "default_true")]
    interchangeable_obstructors: bool,
    #[serde(default)]
    entries: Vec<RawTask>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTask {
    label: String,
    probability: f64,
    goal: Vec<String>,
}

fn pose(a: [f64; 2]) -> Pose2 {
    Pose2::new(a[0], a[1])
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Scenario> {
        Self::load_with(path, &LoadOptions::default())
    }

    pub fn load_with(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str_with(&text, opts)
    }

    pub fn from_toml_str(text: &str) -> Result<Scenario> {
        Self::from_toml_str_with(text, &LoadOptions::default())
    }

    pub fn from_toml_str_with(text: &str, opts: &LoadOptions) -> Result<Scenario> {
        let mut raw: RawScenario = toml::from_str(text)?;
        if let Some(f) = &raw.format {
            if f != "antplan-scenario" {
                return Err(Error::Scenario(format!("unexpected format tag `{f}`")));
            }
        }
        if raw.version != FORMAT_VERSION {
            return Err(Error::Scenario(format!("unsupported scenario version {}", raw.version)));
        }
        if let Some(n) = opts.object_count {
            if n == 0 || n > raw.objects.len() {
                return Err(Error::Scenario(format!("object count {n} out of range 1..={}", raw.objects.len())));
            }
            raw.objects.truncate(n);
        }
        if let Some(m) = opts.multi_class {
            raw.tasks.multi_class = m;
        }
        if let Some(i) = opts.interchangeable_obstructors {
            raw.tasks.interchangeable_obstructors = i;
        }
        Self::build(raw)
    }

    fn build(raw: RawScenario) -> Result<Scenario> {
        let workspace = Rect::new(pose(raw.workspace.min), pose(raw.workspace.max));
        if !(workspace.width() > 0.0 && workspace.height() > 0.0) {
            return Err(Error::Scenario("workspace has no area".into()));
        }
        if !(raw.robot.radius > 0.0) || !(raw.workspace.clearance >= 0.0) || raw.workspace.max_tries == 0 {
            return Err(Error::Scenario("robot radius, clearance and max_tries must be positive".into()));
        }
        let home = pose(raw.robot.home);
        if !workspace.contains(home, 0.0) {
            return Err(Error::Scenario("home pose outside workspace".into()));
        }
        if raw.classes.is_empty() {
            return Err(Error::Scenario("no object classes".into()));
        }

        let mut regions = Vec::with_capacity(raw.regions.len());
        for r in raw.regions {
            if regions.iter().any(|x: &Region| x.name == r.name) {
                return Err(Error::Scenario(format!("duplicate region `{}`", r.name)));
            }
            let rect = Rect::new(pose(r.min), pose(r.max));
            if rect.area() <= 0.0 || !workspace.contains(rect.min, 1e-9) || !workspace.contains(rect.max, 1e-9) {
                return Err(Error::Scenario(format!("region `{}` is empty or outside the workspace", r.name)));
            }
            regions.push(Region {
                name: r.name,
                rect,
                front: r.front,
                station: r.station.map(pose),
                gap: r.gap,
                container: r.container,
            });
        }
        if regions.is_empty() {
            return Err(Error::Scenario("no regions".into()));
        }

        let mut objects = Vec::with_capacity(raw.objects.len());
        for o in raw.objects {
            if objects.iter().any(|x: &ObjectSpec| x.name == o.name) {
                return Err(Error::Scenario(format!("duplicate object `{}`", o.name)));
            }
            let class = raw
                .classes
                .iter()
                .position(|c| *c == o.class)
                .ok_or_else(|| Error::Scenario(format!("object `{}` has unknown class `{}`", o.name, o.class)))?;
            let region = regions
                .iter()
                .position(|r| r.name == o.region)
                .map(|i| RegionId(i as u16))
                .ok_or_else(|| Error::UnknownRegion(o.region.clone()))?;
            if !(o.radius > 0.0) {
                return Err(Error::Scenario(format!("object `{}` has non-positive radius", o.name)));
            }
            objects.push(ObjectSpec { name: o.name, class, radius: o.radius, region, pose: o.pose.map(pose) });
        }
        if objects.is_empty() || objects.len() > u16::MAX as usize {
            return Err(Error::Scenario("object count out of range".into()));
        }

        let keepouts = match raw.domain {
            // nothing may rest where it would block the robot leaving home in every direction
            Domain::Namo => {
                let widest = objects.iter().map(|o| o.radius).fold(0.0, f64::max);
                vec![KeepOut { center: home, radius: raw.robot.radius + widest + raw.workspace.clearance }]
            }
            Domain::Cabinet => Vec::new(),
        };

        let mut scn = Scenario {
            name: raw.name,
            domain: raw.domain,
            workspace,
            clearance: raw.workspace.clearance,
            max_tries: raw.workspace.max_tries,
            perturb_fraction: raw.workspace.perturb_fraction,
            layout_seed: raw.workspace.layout_seed,
            randomize_placement: raw.workspace.randomize_placement,
            robot_radius: raw.robot.radius,
            home,
            regions,
            classes: raw.classes,
            objects,
            tasks: TaskDistribution { entries: Vec::new() },
            multi_class: raw.tasks.multi_class,
            interchangeable_obstructors: raw.tasks.interchangeable_obstructors,
            keepouts,
        };

        for (i, o) in scn.objects.iter().enumerate() {
            if scn.regions[o.region.index()].rect.inset(o.radius).is_none() {
                return Err(Error::Scenario(format!("object `{}` does not fit its region", o.name)));
            }
            if scn.domain == Domain::Cabinet && scn.regions.iter().all(|r| r.rect.inset(o.radius).is_none()) {
                return Err(Error::Scenario(format!("object #{i} fits no region")));
            }
        }

        scn.tasks = if !raw.tasks.entries.is_empty() {
            if raw.tasks.generator.is_some() {
                return Err(Error::Scenario("tasks: give either `generator` or `entries`, not both".into()));
            }
            let mut entries = Vec::new();
            for t in raw.tasks.entries {
                let goal = t.goal.iter().map(|g| scn.parse_fluent(g)).collect::<Result<Vec<_>>>()?;
                entries.push((Task::new(t.label, goal)?, t.probability));
            }
            TaskDistribution::new(entries)?
        } else {
            match raw.tasks.generator.as_deref() {
                Some("reach-each") => {
                    let tasks = scn.objects().map(|o| namo::namo_goal(&scn, o)).collect::<Result<Vec<_>>>()?;
                    TaskDistribution::uniform(tasks)?
                }
                Some("load-unload") => cabinet::cabinet_tasks(&scn)?,
                Some(other) => return Err(Error::Scenario(format!("unknown task generator `{other}`"))),
                None => return Err(Error::Scenario("no tasks given".into())),
            }
        };
        scn.validate_tasks()?;
        if scn.objects.iter().all(|o| o.pose.is_some()) {
            scn.initial_state()?;
        }
        Ok(scn)
    }

    fn validate_tasks(&self) -> Result<()> {
        for task in self.tasks.tasks() {
            for f in &task.goal {
                match *f {
                    Fluent::In { object, region } => {
                        let o = self.objects.get(object.index()).ok_or_else(|| Error::UnknownEntity(task.label.clone()))?;
                        let r = self.regions.get(region.index()).ok_or_else(|| Error::UnknownRegion(task.label.clone()))?;
                        if r.rect.inset(o.radius).is_none() {
                            return Err(Error::Scenario(format!("task `{}` is unsatisfiable", task.label)));
                        }
                    }
                    Fluent::Reached(object) => {
                        if object.index() >= self.objects.len() {
                            return Err(Error::UnknownEntity(task.label.clone()));
                        }
                    }
                    Fluent::AtHome => {}
                }
            }
        }
        Ok(())
    }

    /// Parses `In(obj, region)`, `Reached(obj)` or `AtHome`.
    pub fn parse_fluent(&self, text: &str) -> Result<Fluent> {
        let t = text.trim();
        if t == "AtHome" {
            return Ok(Fluent::AtHome);
        }
        let (head, rest) = t.split_once('(').ok_or_else(|| Error::Scenario(format!("bad fluent `{t}`")))?;
        let args: Vec<&str> = rest
            .strip_suffix(')')
            .ok_or_else(|| Error::Scenario(format!("bad fluent `{t}`")))?
            .split(',')
            .map(str::trim)
            .collect();
        match (head.trim(), args.as_slice()) {
            ("In", [o, r]) => Ok(Fluent::In { object: self.entity_id(o)?, region: self.region_id(r)? }),
            ("Reached", [o]) => Ok(Fluent::Reached(self.entity_id(o)?)),
            _ => Err(Error::Scenario(format!("bad fluent `{t}`"))),
        }
    }

    pub fn namo_default() -> Scenario {
        Self::from_toml_str(NAMO_TOML).expect("built-in NAMO scenario")
    }

    /// The built-in NAMO scenario restricted to its first `n` objects.
    pub fn namo_toy(n: usize) -> Scenario {
        let opts = LoadOptions { object_count: Some(n), ..Default::default() };
        Self::from_toml_str_with(NAMO_TOML, &opts).expect("built-in NAMO scenario")
    }

    pub fn cabinet_default() -> Scenario {
        Self::from_toml_str(CABINET_TOML).expect("built-in cabinet scenario")
    }

    pub fn builtin(domain: Domain, opts: &LoadOptions) -> Result<Scenario> {
        let text = match domain {
            Domain::Namo => NAMO_TOML,
            Domain::Cabinet => CABINET_TOML,
        };
        Self::from_toml_str_with(text, opts)
    }

    pub fn object(&self, id: EntityId) -> &ObjectSpec {
        &self.objects[id.index()]
    }

    pub fn objects(&self) -> impl Iterator<Item = EntityId> {
        (0..self.objects.len() as u16).map(EntityId)
    }

    pub fn region(&self, id: RegionId) -> &Region {
        &self.regions[id.index()]
    }

    pub fn region_id(&self, name: &str) -> Result<RegionId> {
        self.regions
            .iter()
            .position(|r| r.name == name)
            .map(|i| RegionId(i as u16))
            .ok_or_else(|| Error::UnknownRegion(name.to_string()))
    }

    pub fn entity_id(&self, name: &str) -> Result<EntityId> {
        self.objects
            .iter()
            .position(|o| o.name == name)
            .map(|i| EntityId(i as u16))
            .ok_or_else(|| Error::UnknownEntity(name.to_string()))
    }

    pub fn class_of(&self, id: EntityId) -> usize {
        self.objects[id.index()].class
    }

    pub fn class_members(&self, class: usize) -> Vec<EntityId> {
        self.objects().filter(|&o| self.class_of(o) == class).collect()
    }

    pub fn keepouts(&self) -> &[KeepOut] {
        &self.keepouts
    }

    /// The scenario's declared initial state: explicit poses when every
    /// object has one, otherwise a layout drawn from `layout_seed`.
    pub fn initial_state(&self) -> Result<WorldState> {
        if self.objects.iter().all(|o| o.pose.is_some()) {
            let s = WorldState {
                symbolic: SymbolicState {
                    placements: self.objects.iter().map(|o| o.region).collect(),
                    gripper: Gripper::Empty,
                    reached: None,
                },
                robot: self.home,
                poses: self.objects.iter().map(|o| o.pose.unwrap()).collect(),
            };
            s.validate(self)?;
            Ok(s)
        } else {
            self.random_state(&mut rng::seeded(self.layout_seed))
        }
    }

    /// A random valid state with the robot at home. Placements are drawn
    /// uniformly over regions when `randomize_placement` is set.
    pub fn random_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<WorldState> {
        const ATTEMPTS: usize = 200;
        for _ in 0..ATTEMPTS {
            let placements: Vec<RegionId> = self
                .objects
                .iter()
                .map(|o| {
                    if self.randomize_placement {
                        RegionId(rng.random_range(0..self.regions.len() as u16))
                    } else {
                        o.region
                    }
                })
                .collect();
            if placements
                .iter()
                .zip(&self.objects)
                .any(|(r, o)| self.region(*r).rect.inset(o.radius).is_none())
            {
                continue;
            }
            let far = Pose2::new(f64::INFINITY, f64::INFINITY);
            let mut state = WorldState {
                symbolic: SymbolicState { placements, gripper: Gripper::Empty, reached: None },
                robot: self.home,
                poses: vec![far; self.objects.len()],
            };
            // Objects not yet placed must not constrain sampling; hold them
            // out of the way by treating them as absent via a far pose.
            let mut ok = true;
            for id in self.objects() {
                let region = state.placement(id);
                match self.sample_into(&state, id, region, rng) {
                    Some(p) => state.poses[id.index()] = p,
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                debug_assert!(state.validate(self).is_ok());
                return Ok(state);
            }
        }
        Err(Error::Scenario(format!("could not sample a valid state of `{}`", self.name)))
    }

    fn sample_into<R: Rng + ?Sized>(&self, state: &WorldState, id: EntityId, region: RegionId, rng: &mut R) -> Option<Pose2> {
        sample_free_pose(self, region, state, self.object(id).radius, Some(id), rng, self.max_tries)
    }

    /// Robot poses at which a task may begin: home plus every region station.
    pub fn robot_rest_poses(&self) -> Vec<Pose2> {
        let mut v = vec![self.home];
        for r in &self.regions {
            if let Some(s) = r.station {
                if s.distance(self.home) > 0.0 {
                    v.push(s);
                }
            }
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_load() {
        let n = Scenario::namo_default();
        assert_eq!(n.objects.len(), 10);
        assert_eq!(n.tasks.len(), 10);
        assert!(n.tasks.entries.iter().all(|(_, p)| (*p - 0.1).abs() < 1e-15));
        let c = Scenario::cabinet_default();
        assert_eq!(c.objects.len(), 9);
        assert_eq!(c.tasks.len(), 6);
        for cls in 0..3 {
            assert_eq!(c.class_members(cls).len(), 3);
        }
    }

    #[test]
    fn initial_states_are_valid() {
        Scenario::namo_default().initial_state().unwrap();
        Scenario::cabinet_default().initial_state().unwrap();
    }

    #[test]
    fn random_states_are_valid_and_reproducible() {
        let scn = Scenario::cabinet_default();
        for seed in 0..20 {
            let a = scn.random_state(&mut rng::seeded(seed)).unwrap();
            a.validate(&scn).unwrap();
            assert_eq!(a, scn.random_state(&mut rng::seeded(seed)).unwrap());
        }
    }

    #[test]
    fn empty_goal_entry_rejected() {
        let text = NAMO_TOML.replace(
            "generator = \"reach-each\"",
            "entries = [{ label = \"nothing\", probability = 1.0, goal = [] }]",
        );
        assert!(Scenario::from_toml_str(&text).is_err());
    }

    #[test]
    fn explicit_entries_parse() {
        let text = NAMO_TOML.replace(
            "generator = \"reach-each\"",
            "entries = [{ label = \"a\", probability = 0.25, goal = [\"Reached(obj0)\", \"AtHome\"] },\n\
             { label = \"b\", probability = 0.75, goal = [\"Reached(obj1)\"] }]",
        );
        let scn = Scenario::from_toml_str(&text).unwrap();
        assert_eq!(scn.tasks.len(), 2);
        assert_eq!(scn.tasks.entries[0].0.goal, vec![Fluent::Reached(EntityId(0)), Fluent::AtHome]);
    }

    #[test]
    fn unknown_names_rejected() {
        let scn = Scenario::namo_default();
        assert!(matches!(scn.parse_fluent("Reached(nope)"), Err(Error::UnknownEntity(_))));
        assert!(matches!(scn.parse_fluent("In(obj0, attic)"), Err(Error::UnknownRegion(_))));
        assert!(scn.parse_fluent("Teleported(obj0)").is_err());
    }

    #[test]
    fn bad_probabilities_rejected() {
        let text = NAMO_TOML.replace(
            "generator = \"reach-each\"",
            "entries = [{ label = \"a\", probability = 0.5, goal = [\"Reached(obj0)\"] }]",
        );
        assert!(Scenario::from_toml_str(&text).is_err());
    }

    #[test]
    fn version_checked() {
        let text = NAMO_TOML.replace("version = 1", "version = 9");
        assert!(Scenario::from_toml_str(&text).is_err());
    }
}
