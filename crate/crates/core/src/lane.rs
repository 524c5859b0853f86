//! Lane centerlines, the trajectory-to-lane mapping, and a constant-acceleration
//! lane predictor.
//!
//! The lane predictor rolls each observed state forward with the CA model and
//! maps the rollout onto lanes; any other trajectory predictor could be plugged
//! in through [`extract_future_lane`].

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::scene::{AgentState, SceneHistory};

pub type LaneId = i64;

/// Extra lateral tolerance, in meters, beyond a lane's half-width.
pub const DEFAULT_SLACK: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LaneAssignment {
    pub current_lane: Option<LaneId>,
    pub future_lane: Option<LaneId>,
}

impl LaneAssignment {
    pub const fn new(current_lane: Option<LaneId>, future_lane: Option<LaneId>) -> Self {
        Self {
            current_lane,
            future_lane,
        }
    }

    /// True when both lanes are known and differ.
    pub fn is_changing(&self) -> bool {
        lanes_differ(self.future_lane, self.current_lane)
    }
}

/// Lane identity test; an unknown lane never equals anything.
#[inline]
pub fn same_lane(a: Option<LaneId>, b: Option<LaneId>) -> bool {
    matches!((a, b), (Some(x), Some(y)) if x == y)
}

/// Lane difference test; an unknown lane never differs from anything.
#[inline]
pub fn lanes_differ(a: Option<LaneId>, b: Option<LaneId>) -> bool {
    matches!((a, b), (Some(x), Some(y)) if x != y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lane {
    pub lane_id: LaneId,
    pub centerline: Vec<Vec2>,
    pub width: f64,
}

impl Lane {
    pub fn new(lane_id: LaneId, centerline: Vec<Vec2>, width: f64) -> Result<Self> {
        let invalid = |reason: &str| Error::InvalidLane {
            lane_id,
            reason: reason.to_string(),
        };
        if !(width > 0.0) || !width.is_finite() {
            return Err(invalid("width must be positive"));
        }
        if centerline.len() < 2 {
            return Err(invalid("centerline needs at least two points"));
        }
        if centerline.iter().any(|p| !p.is_finite()) {
            return Err(invalid("centerline has a non-finite point"));
        }
        if centerline.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("consecutive centerline points coincide"));
        }
        Ok(Self {
            lane_id,
            centerline,
            width,
        })
    }

    /// Shortest distance from `p` to the centerline polyline.
    pub fn distance_to(&self, p: Vec2) -> f64 {
        self.centerline
            .windows(2)
            .map(|w| point_segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, p: Vec2, slack: f64) -> bool {
        self.distance_to(p) <= self.width / 2.0 + slack
    }
}

/// Distance from `p` to the closed segment `[a, b]`.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.distance(a + ab * t)
}

#[derive(Serialize, Deserialize)]
struct LaneRecord {
    lane_id: LaneId,
    width: f64,
    centerline: Vec<[f64; 2]>,
}

/// Immutable set of lanes keyed by id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<LaneRecord>", into = "Vec<LaneRecord>")]
pub struct LaneGraph {
    lanes: BTreeMap<LaneId, Lane>,
}

impl TryFrom<Vec<LaneRecord>> for LaneGraph {
    type Error = Error;

    fn try_from(records: Vec<LaneRecord>) -> Result<Self> {
        let lanes = records
            .into_iter()
            .map(|r| {
                let pts = r.centerline.iter().map(|&[x, y]| Vec2::new(x, y)).collect();
                Lane::new(r.lane_id, pts, r.width)
            })
            .collect::<Result<Vec<_>>>()?;
        LaneGraph::new(lanes)
    }
}

impl From<LaneGraph> for Vec<LaneRecord> {
    fn from(graph: LaneGraph) -> Self {
        graph
            .lanes
            .into_values()
            .map(|l| LaneRecord {
                lane_id: l.lane_id,
                width: l.width,
                centerline: l.centerline.iter().map(|p| [p.x, p.y]).collect(),
            })
            .collect()
    }
}

impl LaneGraph {
    pub fn new(lanes: impl IntoIterator<Item = Lane>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for lane in lanes {
            let id = lane.lane_id;
            if map.insert(id, lane).is_some() {
                return Err(Error::InvalidLane {
                    lane_id: id,
                    reason: "duplicate lane id".into(),
                });
            }
        }
        Ok(Self { lanes: map })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn is_empty(&self) -> bool {
        self.lanes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.lanes.len()
    }

    pub fn get(&self, id: LaneId) -> Option<&Lane> {
        self.lanes.get(&id)
    }

    /// Lanes in ascending id order.
    pub fn lanes(&self) -> impl Iterator<Item = &Lane> {
        self.lanes.values()
    }

    /// Nearest lane to `p`, or `None` when that lane is farther than its
    /// half-width plus [`DEFAULT_SLACK`]. Equidistant lanes resolve to the
    /// smallest id.
    pub fn map_point(&self, p: Vec2) -> Option<LaneId> {
        self.map_point_with_slack(p, DEFAULT_SLACK)
    }

    pub fn map_point_with_slack(&self, p: Vec2, slack: f64) -> Option<LaneId> {
        let mut best: Option<(&Lane, f64)> = None;
        // Ascending id order, strict comparison: ties keep the smaller id.
        for lane in self.lanes.values() {
            let d = lane.distance_to(p);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((lane, d));
            }
        }
        best.filter(|(lane, d)| *d <= lane.width / 2.0 + slack)
            .map(|(lane, _)| lane.lane_id)
    }
}

/// Free function form of [`LaneGraph::map_point`].
pub fn map_point_to_lane(graph: &LaneGraph, p: Vec2) -> Option<LaneId> {
    graph.map_point(p)
}

/// Current lane of the first point and the next distinct lane reached later.
///
/// Unmapped points are skipped when searching for the future lane. A
/// trajectory that never leaves its lane has `future_lane == current_lane`.
pub fn extract_future_lane(graph: &LaneGraph, trajectory: &[Vec2]) -> LaneAssignment {
    let Some((first, rest)) = trajectory.split_first() else {
        return LaneAssignment::default();
    };
    let current = graph.map_point(*first);
    let future = rest
        .iter()
        .filter_map(|p| graph.map_point(*p))
        .find(|lane| Some(*lane) != current)
        .or(current);
    LaneAssignment::new(current, future)
}

/// Per-step lane assignments for one agent's observed history, obtained by a
/// CA rollout of `rollout_horizon` steps from every observed state.
pub fn predict_lanes(
    graph: &LaneGraph,
    history: &[AgentState],
    rollout_horizon: usize,
    dt: f64,
) -> Vec<LaneAssignment> {
    history
        .iter()
        .map(|s| predict_lane(graph, s, rollout_horizon, dt))
        .collect()
}

pub fn predict_lane(
    graph: &LaneGraph,
    state: &AgentState,
    rollout_horizon: usize,
    dt: f64,
) -> LaneAssignment {
    let kin = state.kinematics();
    let rollout: Vec<Vec2> = (0..=rollout_horizon)
        .map(|k| kin.position_at(k as f64 * dt))
        .collect();
    extract_future_lane(graph, &rollout)
}

/// Fills the lane assignment of every state in the scene using the CA lane
/// predictor against the scene's own lane graph.
pub fn annotate_scene_lanes(scene: &mut SceneHistory, rollout_horizon: usize) {
    let dt = scene.dt;
    let graph = &scene.lane_graph;
    for frame in scene.frames.iter_mut() {
        for state in frame.states.iter_mut() {
            state.lanes = predict_lane(graph, state, rollout_horizon, dt);
        }
    }
}

/// Fraction of samples whose predicted future lane matches the one extracted
/// from the ground-truth future trajectory.
///
/// Each sample is the last observed state and the ground-truth future
/// positions that follow it.
pub fn lane_accuracy(
    graph: &LaneGraph,
    samples: &[(AgentState, Vec<Vec2>)],
    rollout_horizon: usize,
    dt: f64,
) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let hits = samples
        .iter()
        .filter(|(state, future)| {
            let predicted = predict_lane(graph, state, rollout_horizon, dt);
            let mut truth_traj = Vec::with_capacity(future.len() + 1);
            truth_traj.push(state.position);
            truth_traj.extend_from_slice(future);
            let truth = extract_future_lane(graph, &truth_traj);
            predicted.future_lane == truth.future_lane
        })
        .count();
    hits as f64 / samples.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two parallel lanes along +x: id 1 at y=0, id 2 at y=3.5.
    fn two_lanes() -> LaneGraph {
        LaneGraph::new([
            Lane::new(1, vec![Vec2::new(-100., 0.), Vec2::new(100., 0.)], 3.5).unwrap(),
            Lane::new(2, vec![Vec2::new(-100., 3.5), Vec2::new(100., 3.5)], 3.5).unwrap(),
        ])
        .unwrap()
    }

    fn mover(p: (f64, f64), v: (f64, f64)) -> AgentState {
        AgentState {
            agent_id: 0,
            position: Vec2::new(p.0, p.1),
            heading: v.1.atan2(v.0),
            velocity: Vec2::new(v.0, v.1),
            acceleration: Vec2::ZERO,
            lanes: LaneAssignment::default(),
        }
    }

    #[test]
    fn segment_distance() {
        let a = Vec2::new(0., 0.);
        let b = Vec2::new(10., 0.);
        assert_eq!(point_segment_distance(Vec2::new(5., 3.), a, b), 3.0);
        assert_eq!(point_segment_distance(Vec2::new(-3., 4.), a, b), 5.0);
        assert_eq!(point_segment_distance(Vec2::new(13., 4.), a, b), 5.0);
    }

    #[test]
    fn segment_not_vertex_distance() {
        // Far from both vertices but on the segment interior.
        let lane = Lane::new(7, vec![Vec2::new(0., 0.), Vec2::new(100., 0.)], 3.0).unwrap();
        assert_eq!(lane.distance_to(Vec2::new(50., 1.)), 1.0);
    }

    #[test]
    fn point_mapping() {
        let g = two_lanes();
        assert_eq!(g.map_point(Vec2::new(-100., 0.)), Some(1));
        assert_eq!(g.map_point(Vec2::new(3., 3.4)), Some(2));
        // Halfway between centerlines.
        assert_eq!(g.map_point(Vec2::new(0., 1.75)), Some(1));
        assert_eq!(g.map_point(Vec2::new(0., 100.)), None);
        // Just inside and just outside half-width plus slack.
        assert_eq!(g.map_point(Vec2::new(0., -2.25)), Some(1));
        assert_eq!(g.map_point(Vec2::new(0., -2.26)), None);
    }

    #[test]
    fn tie_break_ignores_insertion_order() {
        let lanes = || {
            vec![
                Lane::new(9, vec![Vec2::new(0., 2.), Vec2::new(10., 2.)], 4.0).unwrap(),
                Lane::new(3, vec![Vec2::new(0., -2.), Vec2::new(10., -2.)], 4.0).unwrap(),
            ]
        };
        let fwd = LaneGraph::new(lanes()).unwrap();
        let rev = LaneGraph::new(lanes().into_iter().rev()).unwrap();
        assert_eq!(fwd.map_point(Vec2::new(5., 0.)), Some(3));
        assert_eq!(rev.map_point(Vec2::new(5., 0.)), Some(3));
    }

    #[test]
    fn lane_validation() {
        assert!(Lane::new(1, vec![Vec2::ZERO], 3.0).is_err());
        assert!(Lane::new(1, vec![Vec2::ZERO, Vec2::ZERO], 3.0).is_err());
        assert!(Lane::new(1, vec![Vec2::ZERO, Vec2::new(1., 0.)], 0.0).is_err());
        let l = Lane::new(1, vec![Vec2::ZERO, Vec2::new(1., 0.)], 1.0).unwrap();
        assert!(LaneGraph::new([l.clone(), l]).is_err());
    }

    #[test]
    fn json_schema() {
        let text = r#"[{"lane_id": 5, "width": 3.0, "centerline": [[0, 0], [10, 0]]},
                       {"lane_id": 2, "width": 3.0, "centerline": [[0, 3], [10, 3]]}]"#;
        let g = LaneGraph::from_json_str(text).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.lanes().map(|l| l.lane_id).collect::<Vec<_>>(), vec![2, 5]);
        let again = LaneGraph::from_json_str(&g.to_json_string().unwrap()).unwrap();
        assert_eq!(g, again);

        let bad = r#"[{"lane_id": 5, "width": -1.0, "centerline": [[0, 0], [10, 0]]}]"#;
        assert!(LaneGraph::from_json_str(bad).is_err());
    }

    #[test]
    fn future_lane_extraction() {
        let g = two_lanes();
        let straight: Vec<Vec2> = (0..5).map(|i| Vec2::new(i as f64, 0.0)).collect();
        assert_eq!(extract_future_lane(&g, &straight), LaneAssignment::new(Some(1), Some(1)));

        // Lane sequence 1, 1, none, 2, 2 using a graph with a gap between lanes.
        let gapped = LaneGraph::new([
            Lane::new(3, vec![Vec2::new(-100., 0.), Vec2::new(100., 0.)], 2.0).unwrap(),
            Lane::new(5, vec![Vec2::new(-100., 6.), Vec2::new(100., 6.)], 2.0).unwrap(),
        ])
        .unwrap();
        let crossing = [0.0, 0.5, 3.0, 5.5, 6.0].map(|y| Vec2::new(0.0, y));
        assert_eq!(gapped.map_point(crossing[2]), None);
        assert_eq!(
            extract_future_lane(&gapped, &crossing),
            LaneAssignment::new(Some(3), Some(5))
        );

        let from_offroad = [3.0, 3.0, 6.0].map(|y| Vec2::new(0.0, y));
        assert_eq!(
            extract_future_lane(&gapped, &from_offroad),
            LaneAssignment::new(None, Some(5))
        );
        assert_eq!(extract_future_lane(&gapped, &[]), LaneAssignment::default());
    }

    #[test]
    fn lane_predictor_cases() {
        let g = two_lanes();
        let straight = predict_lanes(&g, &[mover((0., 0.), (15., 0.))], 30, 0.1);
        assert_eq!(straight, vec![LaneAssignment::new(Some(1), Some(1))]);

        // 1.5 m/s lateral over 3 s crosses the boundary at y=1.75.
        let drift = predict_lanes(&g, &[mover((0., 0.), (15., 1.5))], 30, 0.1);
        assert_eq!(drift, vec![LaneAssignment::new(Some(1), Some(2))]);

        let parked = predict_lanes(&g, &[mover((0., 3.5), (0., 0.))], 30, 0.1);
        assert_eq!(parked, vec![LaneAssignment::new(Some(2), Some(2))]);
    }

    #[test]
    fn accuracy_harness() {
        let g = two_lanes();
        let stay = mover((0., 0.), (10., 0.));
        let stay_future: Vec<Vec2> = (1..=10).map(|k| Vec2::new(k as f64, 0.0)).collect();
        // Ground truth changes lane although CA rollout does not.
        let surprise_future: Vec<Vec2> = (1..=10).map(|k| Vec2::new(k as f64, 0.4 * k as f64)).collect();
        let acc = lane_accuracy(
            &g,
            &[(stay.clone(), stay_future), (stay, surprise_future)],
            10,
            0.1,
        );
        assert_eq!(acc, 0.5);
    }
}
