//! Seeded synthetic traffic scenarios.
//!
//! Agent 0 is always the target. Motions are exact constant-velocity or
//! constant-acceleration kinematics, so the matching kinematic predictor
//! reproduces the generated futures.

use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CaState, Vec2};
use crate::ingest::{window_scenes, DatasetConfig, LaneSource, TrackRow, TrackTable, Window};
use crate::lane::{Lane, LaneAssignment, LaneGraph, LaneId};
use crate::scene::{AgentId, AgentState, Frame, SceneHistory};

pub const LANE_WIDTH: f64 = 3.5;
const LANE_HALF_LENGTH: f64 = 2000.0;
const MIN_SEPARATION: f64 = 4.0;
const SLOT_SPACING: f64 = 5.0;
const SLOT_JITTER: f64 = 0.25;
const TARGET_ID: AgentId = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LaneLayout {
    StraightMultilane,
    Merge,
    IntersectionCross,
}

impl FromStr for LaneLayout {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "straight-multilane" | "straight" => Ok(Self::StraightMultilane),
            "merge" => Ok(Self::Merge),
            "intersection-cross" | "intersection" => Ok(Self::IntersectionCross),
            other => Err(Error::InvalidInput(format!("unknown lane layout {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MotionKind {
    Cv,
    Ca,
    LaneChange,
}

impl FromStr for MotionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cv" => Ok(Self::Cv),
            "ca" => Ok(Self::Ca),
            "lane-change" => Ok(Self::LaneChange),
            other => Err(Error::InvalidInput(format!("unknown motion kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub layout: LaneLayout,
    /// Total agents including the target.
    pub n_agents: usize,
    /// Other agents start within this distance of the target, meters.
    pub density_radius: f64,
    pub motion: MotionKind,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            layout: LaneLayout::StraightMultilane,
            n_agents: 8,
            density_radius: 30.0,
            motion: MotionKind::Cv,
        }
    }
}

/// Generated tracks plus the windows cut from them for the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthScenario {
    pub tracks: TrackTable,
    pub lane_graph: LaneGraph,
    pub target_id: AgentId,
    pub windows: Vec<Window>,
}

fn straight(id: LaneId, y: f64) -> Lane {
    Lane::new(
        id,
        vec![Vec2::new(-LANE_HALF_LENGTH, y), Vec2::new(LANE_HALF_LENGTH, y)],
        LANE_WIDTH,
    )
    .expect("valid lane")
}

fn vertical(id: LaneId, x: f64) -> Lane {
    Lane::new(
        id,
        vec![Vec2::new(x, -LANE_HALF_LENGTH), Vec2::new(x, LANE_HALF_LENGTH)],
        LANE_WIDTH,
    )
    .expect("valid lane")
}

/// Lane graph of a layout.
///
/// * straight: lanes 1..=3 along +x at y = 0, 3.5, 7
/// * merge: main lanes 1, 2 at y = 0, 3.5 and on-ramp lane 3 at y = -3.5
/// * intersection: lanes 1, 2 along x at y = 0, 3.5 and lanes 3, 4 along y
///   at x = 20, 23.5
pub fn layout_graph(layout: LaneLayout) -> LaneGraph {
    let lanes = match layout {
        LaneLayout::StraightMultilane => vec![straight(1, 0.0), straight(2, LANE_WIDTH), straight(3, 2.0 * LANE_WIDTH)],
        LaneLayout::Merge => vec![straight(1, 0.0), straight(2, LANE_WIDTH), straight(3, -LANE_WIDTH)],
        LaneLayout::IntersectionCross => vec![
            straight(1, 0.0),
            straight(2, LANE_WIDTH),
            vertical(3, 20.0),
            vertical(4, 20.0 + LANE_WIDTH),
        ],
    };
    LaneGraph::new(lanes).expect("unique ids")
}

/// Lane geometry: a point on the centerline at longitudinal offset `s`, the
/// travel direction and the lateral unit vector towards higher lateral offsets.
fn lane_frame(layout: LaneLayout, lane: LaneId, s: f64) -> (Vec2, Vec2, Vec2) {
    let along_x = |y: f64| (Vec2::new(s, y), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0));
    let along_y = |x: f64| (Vec2::new(x, s), Vec2::new(0.0, 1.0), Vec2::new(1.0, 0.0));
    match (layout, lane) {
        (LaneLayout::Merge, 3) => along_x(-LANE_WIDTH),
        (LaneLayout::IntersectionCross, 3) => along_y(20.0),
        (LaneLayout::IntersectionCross, 4) => along_y(20.0 + LANE_WIDTH),
        (_, l) => along_x((l - 1) as f64 * LANE_WIDTH),
    }
}

fn layout_lanes(layout: LaneLayout) -> &'static [LaneId] {
    match layout {
        LaneLayout::StraightMultilane | LaneLayout::Merge => &[1, 2, 3],
        LaneLayout::IntersectionCross => &[1, 2, 3, 4],
    }
}

/// Lateral direction (+1 / -1) towards an adjacent lane, if one exists.
fn lane_change_direction(layout: LaneLayout, lane: LaneId, rng: &mut impl Rng) -> Option<f64> {
    let options: &[f64] = match (layout, lane) {
        (LaneLayout::StraightMultilane, 1) => &[1.0],
        (LaneLayout::StraightMultilane, 2) => &[1.0, -1.0],
        (LaneLayout::StraightMultilane, 3) => &[-1.0],
        (LaneLayout::Merge, 1) => &[1.0],
        (LaneLayout::Merge, 2) => &[-1.0],
        (LaneLayout::Merge, 3) => &[1.0],
        (LaneLayout::IntersectionCross, 1) | (LaneLayout::IntersectionCross, 3) => &[1.0],
        (LaneLayout::IntersectionCross, 2) | (LaneLayout::IntersectionCross, 4) => &[-1.0],
        _ => &[],
    };
    if options.is_empty() {
        None
    } else {
        Some(options[rng.gen_range(0..options.len())])
    }
}

struct Placement {
    id: AgentId,
    initial: CaState,
}

/// Builds a scenario deterministically from `spec.seed`.
///
/// The track covers exactly one observation window plus its future, sampled
/// at `cfg.dt_raw` with `cfg.downsample_factor` raw frames per step.
pub fn synthesize(spec: &SynthSpec, cfg: &DatasetConfig) -> Result<SynthScenario> {
    if spec.n_agents < 1 {
        return Err(Error::InvalidInput("n_agents must be at least 1".into()));
    }
    if !(spec.density_radius > 0.0) {
        return Err(Error::InvalidInput("density_radius must be positive".into()));
    }
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let graph = layout_graph(spec.layout);
    let raw_frames = (cfg.history_len + cfg.future_len - 1) * cfg.downsample_factor + 1;
    let duration = (raw_frames - 1) as f64 * cfg.dt_raw;
    let lateral_speed = LANE_WIDTH / duration.max(1e-9);

    let mut placements: Vec<Placement> = Vec::with_capacity(spec.n_agents);
    let make_motion = |rng: &mut ChaCha8Rng, lane: LaneId, s: f64, changing: Option<f64>| {
        let (p, dir, lat) = lane_frame(spec.layout, lane, s);
        let speed = rng.gen_range(8.0..16.0);
        let mut v = dir * speed;
        let mut a = Vec2::ZERO;
        if spec.motion == MotionKind::Ca {
            a = dir * rng.gen_range(-1.5..1.5);
        }
        if let Some(side) = changing {
            v += lat * (side * lateral_speed);
        }
        CaState::new(p, v, a)
    };

    // Target on lane 1 at the origin.
    let target_change = match spec.motion {
        MotionKind::LaneChange => lane_change_direction(spec.layout, 1, &mut rng),
        _ => None,
    };
    let target = make_motion(&mut rng, 1, 0.0, target_change);
    placements.push(Placement { id: TARGET_ID, initial: target });

    // Candidate spots every SLOT_SPACING metres along each lane, staggered
    // between neighbouring lanes and jittered, then filled greedily.
    let radius = spec.density_radius;
    let mut spots: Vec<(LaneId, f64)> = Vec::new();
    for (i, &lane) in layout_lanes(spec.layout).iter().enumerate() {
        let stagger = if i % 2 == 1 { 0.5 * SLOT_SPACING } else { 0.0 };
        let mut s = -radius + stagger;
        while s <= radius {
            spots.push((lane, s + rng.gen_range(-SLOT_JITTER..SLOT_JITTER)));
            s += SLOT_SPACING;
        }
    }
    spots.shuffle(&mut rng);
    if spec.layout == LaneLayout::Merge {
        // The first merge agent sits on the ramp ahead of the target.
        if let Some(k) = spots.iter().position(|&(lane, s)| lane == 3 && (5.0..=25.0).contains(&s)) {
            let spot = spots.remove(k);
            spots.insert(0, spot);
        }
    }
    let mut spots = spots.into_iter();
    for id in 1..spec.n_agents as AgentId {
        let (lane, s) = loop {
            let Some((lane, s)) = spots.next() else {
                return Err(Error::InvalidInput(format!(
                    "cannot place {} agents within {radius} m",
                    spec.n_agents
                )));
            };
            let (p, _, _) = lane_frame(spec.layout, lane, s);
            if p.distance(target.position) <= radius
                && placements.iter().all(|q| q.initial.position.distance(p) >= MIN_SEPARATION)
            {
                break (lane, s);
            }
        };
        let change = if spec.layout == LaneLayout::Merge && lane == 3 {
            Some(1.0)
        } else if spec.motion == MotionKind::LaneChange && rng.gen_bool(0.4) {
            lane_change_direction(spec.layout, lane, &mut rng)
        } else {
            None
        };
        placements.push(Placement { id, initial: make_motion(&mut rng, lane, s, change) });
    }

    let mut rows = Vec::with_capacity(raw_frames * placements.len());
    for f in 0..raw_frames {
        let t = f as f64 * cfg.dt_raw;
        for pl in &placements {
            let position = pl.initial.position_at(t);
            let velocity = pl.initial.velocity_at(t);
            rows.push(TrackRow {
                frame: f as i64,
                state: AgentState {
                    agent_id: pl.id,
                    position,
                    heading: velocity.y.atan2(velocity.x),
                    velocity,
                    acceleration: pl.initial.acceleration,
                    lanes: LaneAssignment::default(),
                },
                lane_id: graph.map_point(position),
            });
        }
    }
    let tracks = TrackTable::new(rows)?;
    let windows = window_scenes(&tracks, cfg, TARGET_ID, LaneSource::Predicted(&graph))?;
    Ok(SynthScenario {
        tracks,
        lane_graph: graph,
        target_id: TARGET_ID,
        windows,
    })
}

/// Id of the overtaken vehicle in [`overtake_scene`].
pub const OVERTAKEN_ID: AgentId = 2;

/// Scripted overtake: target `A` (id 1) starts behind `B` (id 2) in lane 1,
/// moves to lane 2, passes and returns to lane 1 ahead of `B`.
///
/// Lanes 1 and 2 run along +x at y = 0 and y = 3.5; `dt` is 0.5 s over ten
/// observed steps, and every lane assignment is scripted.
pub fn overtake_scene() -> SceneHistory {
    // A at 16 m/s, B at 10 m/s along lane 1 from x = 0; A's lateral offset,
    // lateral speed and lanes per step.
    let script: [(f64, f64, (LaneId, LaneId)); 10] = [
        (0.0, 0.0, (1, 1)),
        (0.0, 0.0, (1, 2)),
        (1.0, 2.5, (1, 2)),
        (2.5, 2.5, (2, 1)),
        (3.5, 0.0, (2, 1)),
        (3.5, 0.0, (2, 1)),
        (2.5, -2.5, (2, 1)),
        (1.0, -2.5, (1, 1)),
        (0.0, 0.0, (1, 1)),
        (0.0, 0.0, (1, 1)),
    ];
    let dt = 0.5;
    let (speed_a, speed_b) = (16.0, 10.0);
    let frames = script
        .iter()
        .enumerate()
        .map(|(k, &(ay, avy, (cur, fut)))| {
            let t = k as f64 * dt;
            let a = AgentState {
                agent_id: 1,
                position: Vec2::new(-14.0 + speed_a * t, ay),
                heading: avy.atan2(speed_a),
                velocity: Vec2::new(speed_a, avy),
                acceleration: Vec2::ZERO,
                lanes: LaneAssignment::new(Some(cur), Some(fut)),
            };
            let b = AgentState {
                agent_id: OVERTAKEN_ID,
                position: Vec2::new(speed_b * t, 0.0),
                heading: 0.0,
                velocity: Vec2::new(speed_b, 0.0),
                acceleration: Vec2::ZERO,
                lanes: LaneAssignment::new(Some(1), Some(1)),
            };
            Frame {
                timestep: k as i64 - script.len() as i64 + 1,
                states: vec![a, b],
            }
        })
        .collect();
    SceneHistory {
        frames,
        lane_graph: layout_graph(LaneLayout::StraightMultilane),
        dt,
    }
}
