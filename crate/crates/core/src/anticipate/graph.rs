//! Scene-graph encoding of world states.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::cabinet;
use crate::geometry::{count_blockers, Corridor, Segment};
use crate::namo;
use crate::scenario::{Domain, Scenario};
use crate::world::{EntityId, Pose2, WorldState};

/// Number of per-edge features: center distance and obstacle count.
pub const EDGE_DIM: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeRef {
    Robot,
    Container(usize),
    Object(EntityId),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub nodes: Vec<NodeRef>,
    /// One row per node: kind one-hot, x, y, distance to the robot.
    pub node_features: Array2<f64>,
    /// Undirected pairs `(i, j)` with `i < j`.
    pub edges: Vec<(usize, usize)>,
    pub edge_features: Array2<f64>,
}

impl SceneGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_dim(&self) -> usize {
        self.node_features.ncols()
    }
}

/// Node kinds in one-hot order: robot, container (if the scenario has any),
/// then one per object class.
pub fn kind_names(scenario: &Scenario) -> Vec<String> {
    let mut kinds = vec!["robot".to_string()];
    if scenario.regions.iter().any(|r| r.container) {
        kinds.push("container".to_string());
    }
    kinds.extend(scenario.classes.iter().cloned());
    kinds
}

pub fn node_dim(scenario: &Scenario) -> usize {
    kind_names(scenario).len() + 3
}

fn node_position(scenario: &Scenario, state: &WorldState, node: NodeRef) -> Pose2 {
    match node {
        NodeRef::Robot => state.robot,
        NodeRef::Container(r) => scenario.regions[r].rect.center(),
        NodeRef::Object(o) if state.is_held(o) => state.robot,
        NodeRef::Object(o) => state.pose(o),
    }
}

fn kind_index(scenario: &Scenario, node: NodeRef) -> usize {
    let offset = if scenario.regions.iter().any(|r| r.container) { 2 } else { 1 };
    match node {
        NodeRef::Robot => 0,
        NodeRef::Container(_) => 1,
        NodeRef::Object(o) => offset + scenario.class_of(o),
    }
}

/// Movable obstacles between two nodes, per the domain's reach rule.
pub fn obstacle_count(scenario: &Scenario, state: &WorldState, a: NodeRef, b: NodeRef) -> usize {
    use NodeRef::*;
    let held = |n: NodeRef| matches!(n, Object(o) if state.is_held(o));
    if held(a) || held(b) {
        return 0;
    }
    match (scenario.domain, a, b) {
        (_, Container(_), _) | (_, _, Container(_)) => 0,
        (_, Robot, Robot) => 0,
        (Domain::Namo, from, Object(t)) | (Domain::Namo, Object(t), from @ Robot) => {
            let p = node_position(scenario, state, from);
            let corridor = namo::reach_corridor_from(scenario, p, state.pose(t), scenario.object(t).radius);
            let mut ignore = vec![t];
            if let Object(o) = from {
                ignore.push(o);
            }
            count_blockers(scenario, &corridor, state, &ignore)
        }
        (Domain::Cabinet, Robot, Object(o)) | (Domain::Cabinet, Object(o), Robot) => {
            let same = scenario.class_members(scenario.class_of(o));
            cabinet::grasp_obstructors(scenario, o, state, &same).len()
        }
        (Domain::Cabinet, Object(i), Object(j)) => {
            let corridor = Corridor::new(
                Segment::new(state.pose(i), state.pose(j)),
                scenario.object(j).radius + scenario.clearance,
            );
            let mut ignore = scenario.class_members(scenario.class_of(i));
            ignore.extend(scenario.class_members(scenario.class_of(j)));
            count_blockers(scenario, &corridor, state, &ignore)
        }
    }
}

/// Fully connected scene graph: robot first, then containers, then objects by id.
pub fn encode_state(scenario: &Scenario, state: &WorldState) -> SceneGraph {
    let mut nodes = vec![NodeRef::Robot];
    nodes.extend(scenario.regions.iter().enumerate().filter(|(_, r)| r.container).map(|(i, _)| NodeRef::Container(i)));
    nodes.extend(state.objects().map(NodeRef::Object));

    let kinds = kind_names(scenario).len();
    let mut node_features = Array2::zeros((nodes.len(), kinds + 3));
    let positions: Vec<Pose2> = nodes.iter().map(|&n| node_position(scenario, state, n)).collect();
    for (i, &n) in nodes.iter().enumerate() {
        let p = positions[i];
        node_features[[i, kind_index(scenario, n)]] = 1.0;
        node_features[[i, kinds]] = p.x;
        node_features[[i, kinds + 1]] = p.y;
        node_features[[i, kinds + 2]] = p.distance(state.robot);
    }

    let n = nodes.len();
    let edges: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let mut edge_features = Array2::zeros((edges.len(), EDGE_DIM));
    for (e, &(i, j)) in edges.iter().enumerate() {
        edge_features[[e, 0]] = positions[i].distance(positions[j]);
        edge_features[[e, 1]] = obstacle_count(scenario, state, nodes[i], nodes[j]) as f64;
    }
    SceneGraph { nodes, node_features, edges, edge_features }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn brute_force_count(scn: &Scenario, s: &WorldState, a: Pose2, b: Pose2, hw: f64, ignore: &[EntityId]) -> usize {
        // Dense walk along the spine; an obstacle counts if any sample is
        // closer than hw + r.
        s.present_objects()
            .filter(|o| !ignore.contains(o))
            .filter(|&o| {
                let c = s.pose(o);
                let r = scn.object(o).radius;
                (0..=4000).any(|k| {
                    let t = k as f64 / 4000.0;
                    let q = Pose2::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
                    q.distance(c) < hw + r - 1e-3
                })
            })
            .count()
    }

    #[test]
    fn two_objects_give_three_nodes_and_edges() {
        let scn = Scenario::namo_toy(2);
        let g = encode_state(&scn, &scn.initial_state().unwrap());
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edges.len(), 3);
        assert_eq!(g.node_dim(), node_dim(&scn));
        assert_eq!(g.node_features.row(0).to_vec()[..2], [1.0, 0.0]);
    }

    #[test]
    fn cabinet_graph_has_container_nodes() {
        let scn = Scenario::cabinet_default();
        let g = encode_state(&scn, &scn.initial_state().unwrap());
        assert_eq!(g.node_count(), 1 + 2 + 9);
        assert_eq!(g.edges.len(), 12 * 11 / 2);
        for (e, &(i, j)) in g.edges.iter().enumerate() {
            if matches!(g.nodes[i], NodeRef::Container(_)) || matches!(g.nodes[j], NodeRef::Container(_)) {
                assert_eq!(g.edge_features[[e, 1]], 0.0);
            }
        }
    }

    #[test]
    fn translation_keeps_relative_features() {
        let scn = Scenario::namo_default();
        let s = scn.random_state(&mut rng::seeded(3)).unwrap();
        let g = encode_state(&scn, &s);
        let shift = Pose2::new(0.05, -0.03);
        let mut t = s.clone();
        t.robot = t.robot + shift;
        for p in &mut t.poses {
            *p = *p + shift;
        }
        let h = encode_state(&scn, &t);
        let k = kind_names(&scn).len();
        for i in 0..g.node_count() {
            assert!((g.node_features[[i, k + 2]] - h.node_features[[i, k + 2]]).abs() < 1e-12);
            assert!((g.node_features[[i, k]] + 0.05 - h.node_features[[i, k]]).abs() < 1e-12);
        }
        for e in 0..g.edges.len() {
            assert!((g.edge_features[[e, 0]] - h.edge_features[[e, 0]]).abs() < 1e-12);
            assert_eq!(g.edge_features[[e, 1]], h.edge_features[[e, 1]]);
        }
    }

    #[test]
    fn namo_counts_match_brute_force() {
        let scn = Scenario::namo_default();
        let hw0 = scn.robot_radius + 0.2 + scn.clearance;
        for seed in 0..30 {
            let s = scn.random_state(&mut rng::seeded(seed)).unwrap();
            let g = encode_state(&scn, &s);
            for (e, &(i, j)) in g.edges.iter().enumerate() {
                let (NodeRef::Object(t), from) = (g.nodes[j], g.nodes[i]) else { unreachable!() };
                let a = match from {
                    NodeRef::Robot => s.robot,
                    NodeRef::Object(o) => s.pose(o),
                    _ => unreachable!(),
                };
                let b = namo::standoff_from(&scn, a, s.pose(t), 0.2);
                let mut ignore = vec![t];
                if let NodeRef::Object(o) = from {
                    ignore.push(o);
                }
                let exact = g.edge_features[[e, 1]] as usize;
                let slack = brute_force_count(&scn, &s, a, b, hw0, &ignore);
                assert!(exact >= slack, "seed {seed} edge {e}");
                let strict = brute_force_count(&scn, &s, a, b, hw0 + 2e-3, &ignore);
                assert!(exact <= strict, "seed {seed} edge {e}");
            }
        }
    }

    #[test]
    fn cabinet_counts_match_brute_force() {
        let scn = Scenario::cabinet_default();
        for seed in 0..30 {
            let s = scn.random_state(&mut rng::seeded(seed)).unwrap();
            let g = encode_state(&scn, &s);
            for (e, &(i, j)) in g.edges.iter().enumerate() {
                let (NodeRef::Object(a), NodeRef::Object(b)) = (g.nodes[i], g.nodes[j]) else { continue };
                let mut ignore = scn.class_members(scn.class_of(a));
                ignore.extend(scn.class_members(scn.class_of(b)));
                let hw = scn.object(b).radius + scn.clearance;
                let exact = g.edge_features[[e, 1]] as usize;
                assert!(exact >= brute_force_count(&scn, &s, s.pose(a), s.pose(b), hw, &ignore));
                assert!(exact <= brute_force_count(&scn, &s, s.pose(a), s.pose(b), hw + 2e-3, &ignore));
            }
        }
    }

    #[test]
    fn swapping_same_class_objects_keeps_feature_multisets() {
        let scn = Scenario::cabinet_default();
        let s = scn.random_state(&mut rng::seeded(11)).unwrap();
        let mugs = scn.class_members(0);
        let mut t = s.clone();
        t.poses.swap(mugs[0].index(), mugs[1].index());
        t.symbolic.placements.swap(mugs[0].index(), mugs[1].index());
        let key = |g: &SceneGraph| {
            let mut nodes: Vec<Vec<u64>> =
                g.node_features.rows().into_iter().map(|r| r.iter().map(|v| v.to_bits()).collect()).collect();
            nodes.sort();
            let mut edges: Vec<Vec<u64>> =
                g.edge_features.rows().into_iter().map(|r| r.iter().map(|v| v.to_bits()).collect()).collect();
            edges.sort();
            (nodes, edges)
        };
        assert_eq!(key(&encode_state(&scn, &s)), key(&encode_state(&scn, &t)));
    }
}
