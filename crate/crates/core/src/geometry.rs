//! Continuous-space predicates over discs and straight corridors.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::scenario::Scenario;
use crate::world::{EntityId, Pose2, RegionId, WorldState};

/// Axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Pose2,
    pub max: Pose2,
}

impl Rect {
    pub fn new(min: Pose2, max: Pose2) -> Self {
        Rect { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn center(&self) -> Pose2 {
        Pose2::new(0.5 * (self.min.x + self.max.x), 0.5 * (self.min.y + self.max.y))
    }

    pub fn min_dimension(&self) -> f64 {
        self.width().min(self.height())
    }

    /// Rectangle of admissible centers for a disc of `radius` that must lie
    /// fully inside `self`. `None` when the disc does not fit.
    pub fn inset(&self, radius: f64) -> Option<Rect> {
        let r = Rect::new(
            Pose2::new(self.min.x + radius, self.min.y + radius),
            Pose2::new(self.max.x - radius, self.max.y - radius),
        );
        (r.min.x <= r.max.x && r.min.y <= r.max.y).then_some(r)
    }

    pub fn contains(&self, p: Pose2, tol: f64) -> bool {
        p.x >= self.min.x - tol && p.x <= self.max.x + tol && p.y >= self.min.y - tol && p.y <= self.max.y + tol
    }

    pub fn contains_disc(&self, center: Pose2, radius: f64, tol: f64) -> bool {
        center.x - radius >= self.min.x - tol
            && center.x + radius <= self.max.x + tol
            && center.y - radius >= self.min.y - tol
            && center.y + radius <= self.max.y + tol
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Pose2 {
        let x = self.min.x + rng.random::<f64>() * self.width();
        let y = self.min.y + rng.random::<f64>() * self.height();
        Pose2::new(x, y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Pose2,
    pub b: Pose2,
}

impl Segment {
    pub fn new(a: Pose2, b: Pose2) -> Self {
        Segment { a, b }
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    /// Parameter in `[0, 1]` of the point on the segment closest to `p`.
    pub fn closest_param(&self, p: Pose2) -> f64 {
        let d = self.b - self.a;
        let len2 = d.dot(d);
        if len2 == 0.0 {
            return 0.0;
        }
        ((p - self.a).dot(d) / len2).clamp(0.0, 1.0)
    }

    pub fn point_at(&self, t: f64) -> Pose2 {
        self.a + (self.b - self.a) * t
    }

    pub fn distance_to(&self, p: Pose2) -> f64 {
        self.point_at(self.closest_param(p)).distance(p)
    }

    /// Distance from `a` to the projection of `p` on the segment.
    pub fn along(&self, p: Pose2) -> f64 {
        self.closest_param(p) * self.length()
    }

    pub fn reversed(&self) -> Segment {
        Segment::new(self.b, self.a)
    }
}

/// A straight swept band: everything within `half_width` of the spine.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corridor {
    pub spine: Segment,
    pub half_width: f64,
}

impl Corridor {
    pub fn new(spine: Segment, half_width: f64) -> Self {
        debug_assert!(half_width > 0.0, "corridor half width must be positive");
        Corridor { spine, half_width }
    }
}

/// True iff a disc at `center` with `radius` intrudes into the corridor.
pub fn blocks(corridor: &Corridor, center: Pose2, radius: f64) -> bool {
    corridor.spine.distance_to(center) < corridor.half_width + radius
}

/// Movable objects intruding into `corridor`, ordered by their projection
/// along the spine from its start. Held objects travel with the robot and are
/// never blockers.
pub fn blockers(scenario: &Scenario, corridor: &Corridor, state: &WorldState, ignore: &[EntityId]) -> Vec<EntityId> {
    let mut found: Vec<(f64, EntityId)> = state
        .present_objects()
        .filter(|id| !ignore.contains(id))
        .filter(|&id| blocks(corridor, state.pose(id), scenario.object(id).radius))
        .map(|id| (corridor.spine.along(state.pose(id)), id))
        .collect();
    found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    found.into_iter().map(|(_, id)| id).collect()
}

pub fn count_blockers(scenario: &Scenario, corridor: &Corridor, state: &WorldState, ignore: &[EntityId]) -> usize {
    state
        .present_objects()
        .filter(|id| !ignore.contains(id))
        .filter(|&id| blocks(corridor, state.pose(id), scenario.object(id).radius))
        .count()
}

/// Whether a disc of `radius` at `center` may be put into `region` given the
/// other present objects (all but `exclude`) and the scenario's keep-out discs.
pub fn is_free(
    scenario: &Scenario,
    state: &WorldState,
    region: RegionId,
    center: Pose2,
    radius: f64,
    exclude: Option<EntityId>,
) -> bool {
    let reg = scenario.region(region);
    if !center.is_finite() || !reg.rect.contains_disc(center, radius, 0.0) {
        return false;
    }
    let gap = reg.gap;
    let clear_of_objects = state.present_objects().filter(|&id| Some(id) != exclude).all(|id| {
        let r = scenario.object(id).radius;
        state.pose(id).distance(center) >= radius + r + gap
    });
    clear_of_objects
        && scenario.keepouts().iter().all(|k| k.center.distance(center) >= radius + k.radius)
}

/// Uniform rejection sampling of a free pose in `region`.
pub fn sample_free_pose<R: Rng + ?Sized>(
    scenario: &Scenario,
    region: RegionId,
    state: &WorldState,
    radius: f64,
    exclude: Option<EntityId>,
    rng: &mut R,
    max_tries: usize,
) -> Option<Pose2> {
    sample_free_pose_where(scenario, region, state, radius, exclude, rng, max_tries, |_| true)
}

/// As [`sample_free_pose`], additionally requiring `accept(pose)`.
#[allow(clippy::too_many_arguments)]
pub fn sample_free_pose_where<R: Rng + ?Sized>(
    scenario: &Scenario,
    region: RegionId,
    state: &WorldState,
    radius: f64,
    exclude: Option<EntityId>,
    rng: &mut R,
    max_tries: usize,
    accept: impl Fn(Pose2) -> bool,
) -> Option<Pose2> {
    let inset = scenario.region(region).rect.inset(radius)?;
    for _ in 0..max_tries {
        let p = inset.sample(rng);
        if is_free(scenario, state, region, p, radius, exclude) && accept(p) {
            return Some(p);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::scenario::Scenario;
    use proptest::prelude::*;
    use rand::Rng;

    fn p(x: f64, y: f64) -> Pose2 {
        Pose2::new(x, y)
    }

    #[test]
    fn obstacle_on_spine_midpoint_blocks() {
        let c = Corridor::new(Segment::new(p(0.0, 0.0), p(2.0, 0.0)), 0.3);
        assert!(blocks(&c, p(1.0, 0.0), 0.1));
    }

    #[test]
    fn distant_obstacle_does_not_block() {
        let c = Corridor::new(Segment::new(p(0.0, 0.0), p(2.0, 0.0)), 0.3);
        assert!(!blocks(&c, p(1.0, 0.3 + 0.1 + 1.0), 0.1));
    }

    #[test]
    fn degenerate_segment_is_a_disc() {
        let s = Segment::new(p(1.0, 1.0), p(1.0, 1.0));
        assert_eq!(s.distance_to(p(4.0, 5.0)), 5.0);
    }

    /// Distance to the spine by dense sampling at 1e-3 resolution.
    fn sampled_distance(s: &Segment, q: Pose2) -> f64 {
        let steps = (s.length() / 1e-3).ceil().max(1.0) as usize;
        (0..=steps)
            .map(|i| s.point_at(i as f64 / steps as f64).distance(q))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn blocks_agrees_with_dense_sampling() {
        use rand::Rng as _;
        let mut r = rng::seeded(11);
        let mut disagreements = 0;
        for _ in 0..10_000 {
            let a = p(r.random_range(-2.0..2.0), r.random_range(-2.0..2.0));
            let b = p(r.random_range(-2.0..2.0), r.random_range(-2.0..2.0));
            let c = Corridor::new(Segment::new(a, b), r.random_range(0.05..0.5));
            let q = p(r.random_range(-3.0..3.0), r.random_range(-3.0..3.0));
            let rad = r.random_range(0.05..0.4);
            let threshold = c.half_width + rad;
            let d = sampled_distance(&c.spine, q);
            if (d - threshold).abs() < 1e-3 {
                continue;
            }
            if (d < threshold) != blocks(&c, q, rad) {
                disagreements += 1;
            }
        }
        assert_eq!(disagreements, 0);
    }

    #[test]
    fn empty_state_has_no_blockers() {
        let scn = Scenario::namo_toy(3);
        let mut s = scn.initial_state().unwrap();
        // Move everything far outside a short corridor near home.
        for (i, pose) in s.poses.iter_mut().enumerate() {
            *pose = p(-2.0 + 0.5 * i as f64, 2.0);
        }
        let c = Corridor::new(Segment::new(p(0.0, 0.0), p(0.0, -1.0)), 0.3);
        assert!(blockers(&scn, &c, &s, &[]).is_empty());
    }

    #[test]
    fn straddling_objects_are_listed_in_spine_order() {
        let scn = Scenario::namo_toy(3);
        let mut s = scn.initial_state().unwrap();
        let r = scn.object(EntityId(0)).radius;
        let c = Corridor::new(Segment::new(p(-2.0, 0.0), p(2.0, 0.0)), 0.3);
        s.poses[0] = p(1.0, 0.3 + r - 0.05); // intersects
        s.poses[1] = p(-1.0, -(0.3 + r - 0.01)); // intersects
        s.poses[2] = p(0.0, 0.3 + r + 0.05); // clear
        let brute: Vec<EntityId> = (0..3)
            .map(|i| EntityId(i as u16))
            .filter(|&id| blocks(&c, s.pose(id), r))
            .collect();
        assert_eq!(brute.len(), 2);
        assert_eq!(blockers(&scn, &c, &s, &[]), vec![EntityId(1), EntityId(0)]);
    }

    #[test]
    fn ignore_set_removes_blockers() {
        let scn = Scenario::namo_toy(3);
        let mut s = scn.initial_state().unwrap();
        let c = Corridor::new(Segment::new(p(-2.0, 0.0), p(2.0, 0.0)), 0.3);
        s.poses[0] = p(0.0, 0.0);
        s.poses[1] = p(0.0, 2.0);
        s.poses[2] = p(0.0, -2.0);
        assert_eq!(blockers(&scn, &c, &s, &[EntityId(0)]), Vec::<EntityId>::new());
    }

    #[test]
    fn sampling_in_empty_region_succeeds_first_try() {
        let scn = Scenario::namo_toy(1);
        let mut s = scn.initial_state().unwrap();
        s.poses[0] = p(2.2, 2.2);
        let floor = scn.region_id("floor").unwrap();
        let mut r = rng::seeded(3);
        // One try is enough unless the draw lands on the home keep-out or the lone disc.
        let hits = (0..100)
            .filter(|_| sample_free_pose(&scn, floor, &s, 0.2, None, &mut r, 1).is_some())
            .count();
        assert!(hits > 80, "{hits}");
    }

    #[test]
    fn packed_region_fails_after_max_tries() {
        let scn = Scenario::namo_toy(1);
        let s = scn.initial_state().unwrap();
        let floor = scn.region_id("floor").unwrap();
        let mut r = rng::seeded(3);
        // A disc larger than the floor cannot be placed anywhere.
        assert!(sample_free_pose(&scn, floor, &s, 10.0, None, &mut r, 256).is_none());
    }

    #[test]
    fn accepted_samples_never_overlap() {
        let scn = Scenario::namo_default();
        let floor = scn.region_id("floor").unwrap();
        let mut r = rng::seeded(5);
        let mut s = scn.random_state(&mut r).unwrap();
        let mut accepted = 0;
        for _ in 0..10_000 {
            let id = EntityId(r.random_range(0..s.poses.len() as u16));
            let rad = scn.object(id).radius;
            if let Some(q) = sample_free_pose(&scn, floor, &s, rad, Some(id), &mut r, 256) {
                s.poses[id.index()] = q;
                accepted += 1;
                for i in s.present_objects() {
                    for j in s.present_objects().filter(|&j| j > i) {
                        let min = scn.object(i).radius + scn.object(j).radius;
                        assert!(s.pose(i).distance(s.pose(j)) >= min);
                    }
                }
            }
        }
        assert!(accepted > 9_000);
    }

    proptest! {
        #[test]
        fn blocks_is_symmetric_in_endpoints(
            ax in -3.0..3.0f64, ay in -3.0..3.0f64, bx in -3.0..3.0f64, by in -3.0..3.0f64,
            qx in -3.0..3.0f64, qy in -3.0..3.0f64, hw in 0.01..1.0f64, r in 0.0..1.0f64,
        ) {
            let s = Segment::new(p(ax, ay), p(bx, by));
            let c1 = Corridor::new(s, hw);
            let c2 = Corridor::new(s.reversed(), hw);
            // Exact symmetry can break only at the rounding boundary.
            let d = s.distance_to(p(qx, qy));
            prop_assume!((d - (hw + r)).abs() > 1e-12);
            prop_assert_eq!(blocks(&c1, p(qx, qy), r), blocks(&c2, p(qx, qy), r));
        }

        #[test]
        fn blockers_monotone_in_ignore_set(seed in 0u64..500, mask in 0u16..1024) {
            let scn = Scenario::namo_default();
            let s = scn.random_state(&mut rng::seeded(seed)).unwrap();
            let c = Corridor::new(Segment::new(scn.home, s.poses[0]), 0.3);
            let ignore: Vec<EntityId> = (0..10u16).filter(|i| mask & (1 << i) != 0).map(EntityId).collect();
            let all = blockers(&scn, &c, &s, &[]);
            let some = blockers(&scn, &c, &s, &ignore);
            prop_assert!(some.iter().all(|id| all.contains(id)));
        }
    }
}
