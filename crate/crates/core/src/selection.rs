//! Lane-topology interacting-agent selection and the interaction tensor.
//!
//! At each timestep at most one agent is kept for each of four categories:
//!
//! * `SL` nearest leader in the target's current lane,
//! * `FL` nearest leader in the target's future lane,
//! * `FF` nearest follower (or side-by-side agent) in the target's future lane,
//! * `ML` nearest leader merging into the target's current lane.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::to_relative_frame;
use crate::lane::{lanes_differ, same_lane};
use crate::scene::{AgentId, AgentState, Frame, SceneHistory, STATE_DIM};

/// Number of interacting-agent categories.
pub const NUM_CATEGORIES: usize = 4;
/// Target plus one slot per category.
pub const NUM_SLOTS: usize = NUM_CATEGORIES + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "SL")]
    SameLaneLeading,
    #[serde(rename = "FL")]
    FutureLaneLeading,
    #[serde(rename = "FF")]
    FutureLaneFollowing,
    #[serde(rename = "ML")]
    MergingLeading,
}

impl Category {
    pub const ALL: [Category; NUM_CATEGORIES] = [
        Category::SameLaneLeading,
        Category::FutureLaneLeading,
        Category::FutureLaneFollowing,
        Category::MergingLeading,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Category::SameLaneLeading => "SL",
            Category::FutureLaneLeading => "FL",
            Category::FutureLaneFollowing => "FF",
            Category::MergingLeading => "ML",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

/// Selected agent per category for one timestep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NeighborSet {
    pub sl: Option<AgentId>,
    pub fl: Option<AgentId>,
    pub ff: Option<AgentId>,
    pub ml: Option<AgentId>,
}

impl NeighborSet {
    pub fn get(&self, cat: Category) -> Option<AgentId> {
        self.as_array()[cat.index()]
    }

    pub fn set(&mut self, cat: Category, id: Option<AgentId>) {
        match cat {
            Category::SameLaneLeading => self.sl = id,
            Category::FutureLaneLeading => self.fl = id,
            Category::FutureLaneFollowing => self.ff = id,
            Category::MergingLeading => self.ml = id,
        }
    }

    pub fn as_array(&self) -> [Option<AgentId>; NUM_CATEGORIES] {
        [self.sl, self.fl, self.ff, self.ml]
    }

    pub fn len(&self) -> usize {
        self.as_array().iter().flatten().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, id: AgentId) -> bool {
        self.as_array().contains(&Some(id))
    }
}

/// Runs the four guarded branches over every non-target agent in index order.
///
/// Branches form an if/else-if chain, so an agent lands in at most one
/// category; a nearer earlier agent in a category lets a later one fall
/// through to the next branch. Distances must be strictly below both the
/// threshold and the category's running minimum.
pub fn select_neighbors(frame: &Frame, threshold: f64) -> NeighborSet {
    let mut result = NeighborSet::default();
    let Some(target) = frame.states.first() else {
        return result;
    };
    let (p0, v0) = (target.position, target.velocity);
    let l0 = target.lanes;
    let target_changing = lanes_differ(l0.future_lane, l0.current_lane);

    let mut min_dist = [threshold; NUM_CATEGORIES];

    for other in &frame.states[1..] {
        let pn = other.position;
        let d = (pn - p0).norm();
        let o_n0 = (pn - p0).dot(v0);
        let o_0n = (p0 - pn).dot(other.velocity);
        let ln = other.lanes;

        let cat = if d < min_dist[0] && same_lane(ln.current_lane, l0.current_lane) && o_n0 >= 0.0 {
            Some(Category::SameLaneLeading)
        } else if d < min_dist[1]
            && same_lane(ln.current_lane, l0.future_lane)
            && o_n0 >= 0.0
            && o_0n < 0.0
            && target_changing
        {
            Some(Category::FutureLaneLeading)
        } else if d < min_dist[2]
            && same_lane(ln.current_lane, l0.future_lane)
            && ((o_n0 >= 0.0 && o_0n >= 0.0) || o_n0 < 0.0)
            && target_changing
        {
            Some(Category::FutureLaneFollowing)
        } else if d < min_dist[3]
            && same_lane(l0.current_lane, ln.future_lane)
            && o_n0 >= 0.0
            && lanes_differ(ln.future_lane, ln.current_lane)
        {
            Some(Category::MergingLeading)
        } else {
            None
        };
        if let Some(cat) = cat {
            min_dist[cat.index()] = d;
            result.set(cat, Some(other.agent_id));
        }
    }
    result
}

/// When to run selection over the observation window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    /// Select independently at every observed timestep.
    All,
    /// Select once at the last observed timestep and carry those agents back.
    Current,
}

/// Target and category states over the window, in the target-relative frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionTensor {
    history_len: usize,
    /// Slot-major `NUM_SLOTS x history_len` states; slot 0 is the target.
    slots: Vec<[f64; STATE_DIM]>,
    /// Category-major `NUM_CATEGORIES x history_len` occupancy.
    mask: Vec<bool>,
    /// Agent occupying each category slot at each timestep.
    neighbors: Vec<NeighborSet>,
    timesteps: Vec<i64>,
}

impl InteractionTensor {
    pub fn empty(history_len: usize) -> Self {
        Self {
            history_len,
            slots: vec![[0.0; STATE_DIM]; NUM_SLOTS * history_len],
            mask: vec![false; NUM_CATEGORIES * history_len],
            neighbors: vec![NeighborSet::default(); history_len],
            timesteps: (0..history_len as i64).map(|t| t - history_len as i64 + 1).collect(),
        }
    }

    pub fn history_len(&self) -> usize {
        self.history_len
    }

    pub fn timesteps(&self) -> &[i64] {
        &self.timesteps
    }

    /// State in `slot` (0 = target, 1..=4 = SL, FL, FF, ML) at step `t`.
    pub fn slot(&self, slot: usize, t: usize) -> &[f64; STATE_DIM] {
        &self.slots[slot * self.history_len + t]
    }

    pub fn target(&self, t: usize) -> &[f64; STATE_DIM] {
        self.slot(0, t)
    }

    pub fn category(&self, cat: Category, t: usize) -> &[f64; STATE_DIM] {
        self.slot(cat.index() + 1, t)
    }

    pub fn is_populated(&self, cat: Category, t: usize) -> bool {
        self.mask[cat.index() * self.history_len + t]
    }

    pub fn neighbors(&self) -> &[NeighborSet] {
        &self.neighbors
    }

    pub fn populated_count(&self, t: usize) -> usize {
        Category::ALL.iter().filter(|c| self.is_populated(**c, t)).count()
    }

    /// Sets the target state at step `t`.
    pub fn set_target(&mut self, t: usize, state: [f64; STATE_DIM]) {
        assert!(t < self.history_len);
        self.slots[t] = state;
    }

    /// Places (or with `None` clears) a category occupant at step `t`.
    pub fn set_category(&mut self, cat: Category, t: usize, occupant: Option<(AgentId, [f64; STATE_DIM])>) {
        let h = self.history_len;
        let slot_idx = (cat.index() + 1) * h + t;
        let mask_idx = cat.index() * h + t;
        match occupant {
            Some((id, state)) => {
                self.slots[slot_idx] = state;
                self.mask[mask_idx] = true;
                self.neighbors[t].set(cat, Some(id));
            }
            None => {
                self.slots[slot_idx] = [0.0; STATE_DIM];
                self.mask[mask_idx] = false;
                self.neighbors[t].set(cat, None);
            }
        }
    }

    /// Swaps two category slots (states, mask and ids) at every timestep.
    pub fn swap_categories(&mut self, a: Category, b: Category) {
        for t in 0..self.history_len {
            let sa = self.is_populated(a, t).then(|| (self.neighbors[t].get(a), *self.category(a, t)));
            let sb = self.is_populated(b, t).then(|| (self.neighbors[t].get(b), *self.category(b, t)));
            let fix = |o: Option<(Option<AgentId>, [f64; STATE_DIM])>| {
                o.map(|(id, s)| (id.unwrap_or_default(), s))
            };
            self.set_category(a, t, fix(sb));
            self.set_category(b, t, fix(sa));
        }
    }
}

/// Assembles the interaction tensor for a scene whose lane assignments are
/// already filled in. All states end up in the frame anchored at the target's
/// final observed position and heading.
pub fn build_interaction_tensor(
    scene: &SceneHistory,
    threshold: f64,
    mode: SelectionMode,
) -> InteractionTensor {
    let h = scene.history_len();
    let mut tensor = InteractionTensor::empty(h);
    tensor.timesteps = scene.frames.iter().map(|f| f.timestep).collect();
    let Some(pose) = scene.reference_pose() else {
        return tensor;
    };
    let rel = |s: &AgentState| to_relative_frame(s, &pose).to_array();

    for (t, frame) in scene.frames.iter().enumerate() {
        if let Some(target) = frame.target() {
            tensor.set_target(t, rel(target));
        }
    }

    match mode {
        SelectionMode::All => {
            for (t, frame) in scene.frames.iter().enumerate() {
                let picked = select_neighbors(frame, threshold);
                fill_step(&mut tensor, t, frame, &picked, &rel);
            }
        }
        SelectionMode::Current => {
            let Some(last) = scene.frames.last() else {
                return tensor;
            };
            let picked = select_neighbors(last, threshold);
            for (t, frame) in scene.frames.iter().enumerate() {
                fill_step(&mut tensor, t, frame, &picked, &rel);
            }
        }
    }
    tensor
}

fn fill_step(
    tensor: &mut InteractionTensor,
    t: usize,
    frame: &Frame,
    picked: &NeighborSet,
    rel: &impl Fn(&AgentState) -> [f64; STATE_DIM],
) {
    for cat in Category::ALL {
        let occupant = picked
            .get(cat)
            .and_then(|id| frame.find(id))
            .map(|s| (s.agent_id, rel(s)));
        tensor.set_category(cat, t, occupant);
    }
}

/// Selections for every frame of the scene.
pub fn select_per_frame(scene: &SceneHistory, threshold: f64, mode: SelectionMode) -> Vec<NeighborSet> {
    match mode {
        SelectionMode::All => scene.frames.iter().map(|f| select_neighbors(f, threshold)).collect(),
        SelectionMode::Current => build_interaction_tensor(scene, threshold, mode).neighbors,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;
    use crate::lane::{LaneAssignment, LaneGraph};

    fn agent(id: AgentId, p: (f64, f64), v: (f64, f64), cur: i64, fut: i64) -> AgentState {
        AgentState {
            agent_id: id,
            position: Vec2::new(p.0, p.1),
            heading: v.1.atan2(v.0),
            velocity: Vec2::new(v.0, v.1),
            acceleration: Vec2::ZERO,
            lanes: LaneAssignment::new(Some(cur), Some(fut)),
        }
    }

    fn frame(states: Vec<AgentState>) -> Frame {
        Frame { timestep: 0, states }
    }

    #[test]
    fn single_leader() {
        let f = frame(vec![
            agent(0, (0., 0.), (10., 0.), 1, 1),
            agent(7, (10., 0.), (10., 0.), 1, 1),
        ]);
        let n = select_neighbors(&f, 30.0);
        assert_eq!(n, NeighborSet { sl: Some(7), ..Default::default() });

        let far = frame(vec![
            agent(0, (0., 0.), (10., 0.), 1, 1),
            agent(7, (35., 0.), (10., 0.), 1, 1),
        ]);
        assert!(select_neighbors(&far, 30.0).is_empty());
    }

    #[test]
    fn nearest_leader_wins() {
        let f = frame(vec![
            agent(0, (0., 0.), (10., 0.), 1, 1),
            agent(4, (12., 0.), (10., 0.), 1, 1),
            agent(5, (10., 0.), (10., 0.), 1, 1),
        ]);
        assert_eq!(select_neighbors(&f, 30.0).sl, Some(5));
    }

    #[test]
    fn distance_ties_keep_first() {
        let f = frame(vec![
            agent(0, (0., 0.), (10., 0.), 1, 1),
            agent(4, (10., 0.), (10., 0.), 1, 1),
            agent(5, (10., 0.), (9., 0.), 1, 1),
        ]);
        assert_eq!(select_neighbors(&f, 30.0).sl, Some(4));
    }

    #[test]
    fn follower_in_future_lane() {
        // Target in lane 1 heading to lane 2; agent 3 is behind it in lane 2.
        let f = frame(vec![
            agent(0, (0., 0.), (10., 0.), 1, 2),
            agent(3, (-8., 3.5), (12., 0.), 2, 2),
            agent(6, (15., 3.5), (10., 0.), 2, 2),
        ]);
        let n = select_neighbors(&f, 30.0);
        assert_eq!(n.ff, Some(3));
        assert_eq!(n.fl, Some(6));
        assert_eq!(n.sl, None);
    }

    #[test]
    fn merging_leader() {
        let f = frame(vec![
            agent(0, (0., 0.), (10., 0.), 1, 1),
            agent(8, (20., -3.5), (10., 1.), 9, 1),
        ]);
        assert_eq!(select_neighbors(&f, 30.0).ml, Some(8));
    }

    #[test]
    fn stationary_target_passes_orientation_tests() {
        let f = frame(vec![
            agent(0, (0., 0.), (0., 0.), 1, 1),
            agent(2, (-5., 0.), (0., 0.), 1, 1),
        ]);
        assert_eq!(select_neighbors(&f, 30.0).sl, Some(2));
    }

    #[test]
    fn offroad_agents_never_selected() {
        let mut a = agent(2, (5., 0.), (1., 0.), 1, 1);
        a.lanes = LaneAssignment::default();
        let mut target = agent(0, (0., 0.), (1., 0.), 1, 1);
        let f = frame(vec![target.clone(), a.clone()]);
        assert!(select_neighbors(&f, 30.0).is_empty());
        target.lanes = LaneAssignment::default();
        let f = frame(vec![target, a]);
        assert!(select_neighbors(&f, 30.0).is_empty());
    }

    fn scene_with(frames: Vec<Vec<AgentState>>) -> SceneHistory {
        let n = frames.len() as i64;
        SceneHistory {
            frames: frames
                .into_iter()
                .enumerate()
                .map(|(i, states)| Frame { timestep: i as i64 - n + 1, states })
                .collect(),
            lane_graph: LaneGraph::default(),
            dt: 0.1,
        }
    }

    #[test]
    fn tensor_masks_empty_scene() {
        let scene = scene_with(vec![
            vec![agent(0, (0., 0.), (10., 0.), 1, 1), agent(1, (100., 0.), (1., 0.), 1, 1)],
            vec![agent(0, (1., 0.), (10., 0.), 1, 1), agent(1, (101., 0.), (1., 0.), 1, 1)],
        ]);
        let t = build_interaction_tensor(&scene, 30.0, SelectionMode::All);
        assert_eq!(t.timesteps(), &[-1, 0]);
        for step in 0..2 {
            assert_eq!(t.populated_count(step), 0);
            for cat in Category::ALL {
                assert_eq!(t.category(cat, step), &[0.0; STATE_DIM]);
            }
        }
        // Last target state sits at the origin of the relative frame.
        assert_eq!(t.target(1)[..3], [0.0, 0.0, 0.0]);
        assert_eq!(t.target(0)[0], -1.0);
    }

    #[test]
    fn stable_selection_modes_agree() {
        let step = |k: f64| {
            vec![
                agent(0, (k, 0.), (10., 0.), 1, 2),
                agent(1, (k + 10., 0.), (10., 0.), 1, 1),
                agent(2, (k + 10., 3.5), (10., 0.), 2, 2),
                agent(3, (k - 10., 3.5), (10., 0.), 2, 2),
                agent(4, (k + 15., -3.5), (10., 0.), 0, 1),
            ]
        };
        let scene = scene_with((0..4).map(|k| step(k as f64)).collect());
        let all = build_interaction_tensor(&scene, 30.0, SelectionMode::All);
        let cur = build_interaction_tensor(&scene, 30.0, SelectionMode::Current);
        assert_eq!(all, cur);
        assert_eq!(all.populated_count(0), 4);
    }

    #[test]
    fn current_mode_masks_absent_history() {
        let scene = scene_with(vec![
            vec![agent(0, (0., 0.), (10., 0.), 1, 1)],
            vec![agent(0, (1., 0.), (10., 0.), 1, 1), agent(9, (8., 0.), (5., 0.), 1, 1)],
        ]);
        let cur = build_interaction_tensor(&scene, 30.0, SelectionMode::Current);
        assert!(!cur.is_populated(Category::SameLaneLeading, 0));
        assert!(cur.is_populated(Category::SameLaneLeading, 1));
        assert_eq!(cur.neighbors()[1].sl, Some(9));
    }

    #[test]
    fn swapping_categories_moves_everything() {
        let scene = scene_with(vec![vec![
            agent(0, (0., 0.), (10., 0.), 1, 2),
            agent(1, (10., 0.), (10., 0.), 1, 1),
        ]]);
        let mut t = build_interaction_tensor(&scene, 30.0, SelectionMode::All);
        let before = *t.category(Category::SameLaneLeading, 0);
        t.swap_categories(Category::SameLaneLeading, Category::MergingLeading);
        assert!(!t.is_populated(Category::SameLaneLeading, 0));
        assert!(t.is_populated(Category::MergingLeading, 0));
        assert_eq!(t.neighbors()[0].ml, Some(1));
        assert_eq!(*t.category(Category::MergingLeading, 0), before);
    }
}
