//! Independent reference implementations shared by the integration suites.
#![allow(dead_code)]

use rand::Rng;

use trajint::geometry::{CaState, Vec2};
use trajint::lane::{LaneAssignment, LaneId};
use trajint::scene::{AgentId, AgentState, Frame, SceneHistory};
use trajint::selection::NeighborSet;

pub const GRID_STEP: f64 = 1e-4;
pub const GRID_HALF_RANGE: f64 = 60.0;

fn sq_dist(dp: Vec2, dv: Vec2, da: Vec2, t: f64) -> f64 {
    let x = dp.x + t * (dv.x + 0.5 * da.x * t);
    let y = dp.y + t * (dv.y + 0.5 * da.y * t);
    x * x + y * y
}

/// Smallest squared distance over a dense grid on `[-60, 60]` s, refined by a
/// parabola through the best grid point and its neighbours. Returns `(tau, q)`.
pub fn grid_oracle(target: &CaState, other: &CaState) -> (f64, f64) {
    grid_oracle_on(target, other, GRID_HALF_RANGE)
}

/// Fujiwara bound on the stationary points of the squared distance: every real
/// root of the derivative lies in `[-bound, bound]`.
pub fn stationary_bound(target: &CaState, other: &CaState) -> f64 {
    let dp = other.position - target.position;
    let dv = other.velocity - target.velocity;
    let da = other.acceleration - target.acceleration;
    let c3 = 0.5 * da.dot(da);
    let c2 = 1.5 * dv.dot(da);
    let c1 = dv.dot(dv) + dp.dot(da);
    let c0 = dp.dot(dv);
    2.0 * [(c2 / c3).abs(), (c1 / c3).abs().sqrt(), (c0 / (2.0 * c3)).abs().cbrt()]
        .into_iter()
        .fold(0.0, f64::max)
}

/// [`grid_oracle`] over `[-half_range, half_range]`.
pub fn grid_oracle_on(target: &CaState, other: &CaState, half_range: f64) -> (f64, f64) {
    const LANES: usize = 8;
    let dp = other.position - target.position;
    let dv = other.velocity - target.velocity;
    let da = other.acceleration - target.acceleration;
    let (hx, hy) = (0.5 * da.x, 0.5 * da.y);
    let n = (2.0 * half_range / GRID_STEP).round() as usize + 1;
    let at = |i: usize| -half_range + i as f64 * GRID_STEP;

    // Independent per-lane minima keep the hot loop vectorisable.
    let mut m = [f64::INFINITY; LANES];
    let mut mi = [0usize; LANES];
    let mut i = 0;
    while i + LANES <= n {
        for j in 0..LANES {
            let t = at(i + j);
            let x = dp.x + t * (dv.x + hx * t);
            let y = dp.y + t * (dv.y + hy * t);
            let q = x * x + y * y;
            let better = q < m[j];
            m[j] = if better { q } else { m[j] };
            mi[j] = if better { i + j } else { mi[j] };
        }
        i += LANES;
    }
    let (mut best, mut bi) = (f64::INFINITY, 0);
    for j in 0..LANES {
        if m[j] < best || (m[j] == best && mi[j] < bi) {
            best = m[j];
            bi = mi[j];
        }
    }
    for k in i..n {
        let q = sq_dist(dp, dv, da, at(k));
        if q < best {
            best = q;
            bi = k;
        }
    }

    let mut tau = at(bi);
    if bi > 0 && bi + 1 < n {
        let (a, c) = (sq_dist(dp, dv, da, tau - GRID_STEP), sq_dist(dp, dv, da, tau + GRID_STEP));
        let denom = a - 2.0 * best + c;
        if denom > 0.0 {
            let tv = tau + 0.5 * GRID_STEP * (a - c) / denom;
            let qv = sq_dist(dp, dv, da, tv);
            if qv < best {
                best = qv;
                tau = tv;
            }
        }
    }
    (tau, best)
}

/// Squared relative distance evaluated directly from both rollouts.
pub fn rollout_sq_distance(target: &CaState, other: &CaState, t: f64) -> f64 {
    let pa = target.position + target.velocity * t + target.acceleration * (0.5 * t * t);
    let pb = other.position + other.velocity * t + other.acceleration * (0.5 * t * t);
    let d = pb - pa;
    d.x * d.x + d.y * d.y
}

pub fn random_ca(rng: &mut impl Rng) -> CaState {
    CaState::new(
        Vec2::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0)),
        Vec2::new(rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)),
        Vec2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)),
    )
}

fn random_lane(rng: &mut impl Rng) -> Option<LaneId> {
    match rng.gen_range(0..5) {
        0 => None,
        k => Some(k),
    }
}

/// Random frame with up to `max_agents` agents, mixed lanes, occasional
/// stationary agents and integer positions that produce distance ties.
pub fn random_frame(rng: &mut impl Rng, max_agents: usize) -> Frame {
    let n = rng.gen_range(1..=max_agents);
    let integer_grid = rng.gen_bool(0.3);
    let states = (0..n)
        .map(|i| {
            let position = if integer_grid {
                Vec2::new(rng.gen_range(-30..=30) as f64, rng.gen_range(-6..=6) as f64)
            } else {
                Vec2::new(rng.gen_range(-45.0..45.0), rng.gen_range(-12.0..12.0))
            };
            let velocity = if rng.gen_bool(0.1) {
                Vec2::ZERO
            } else {
                Vec2::new(rng.gen_range(-5.0..25.0), rng.gen_range(-3.0..3.0))
            };
            let current = random_lane(rng);
            let future = if rng.gen_bool(0.5) { current } else { random_lane(rng) };
            AgentState {
                agent_id: i as AgentId,
                position,
                heading: velocity.y.atan2(velocity.x),
                velocity,
                acceleration: Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-1.0..1.0)),
                lanes: LaneAssignment::new(current, future),
            }
        })
        .collect();
    Frame { timestep: 0, states }
}

#[derive(Debug, Clone, Copy)]
struct Predicates {
    dist: f64,
    sl: bool,
    fl: bool,
    ff: bool,
    ml: bool,
}

fn lane_eq(a: Option<LaneId>, b: Option<LaneId>) -> bool {
    matches!((a, b), (Some(x), Some(y)) if x == y)
}

fn lane_ne(a: Option<LaneId>, b: Option<LaneId>) -> bool {
    matches!((a, b), (Some(x), Some(y)) if x != y)
}

/// Exhaustive selector. Every predicate of every agent is evaluated up front
/// from raw coordinates; assignment then follows the rule "an agent takes the
/// first category whose predicate holds and whose distance is below both the
/// threshold and the distance of every earlier agent that took it".
pub fn brute_force_select(frame: &Frame, threshold: f64) -> NeighborSet {
    let mut out = NeighborSet::default();
    let Some(t) = frame.states.first() else {
        return out;
    };
    let preds: Vec<Predicates> = frame.states[1..]
        .iter()
        .map(|n| {
            let (rx, ry) = (n.position.x - t.position.x, n.position.y - t.position.y);
            let dist = (rx * rx + ry * ry).sqrt();
            let o_n0 = rx * t.velocity.x + ry * t.velocity.y;
            let o_0n = -rx * n.velocity.x - ry * n.velocity.y;
            let target_changes = lane_ne(t.lanes.future_lane, t.lanes.current_lane);
            Predicates {
                dist,
                sl: lane_eq(n.lanes.current_lane, t.lanes.current_lane) && o_n0 >= 0.0,
                fl: lane_eq(n.lanes.current_lane, t.lanes.future_lane) && o_n0 >= 0.0 && o_0n < 0.0 && target_changes,
                ff: lane_eq(n.lanes.current_lane, t.lanes.future_lane)
                    && (o_n0 < 0.0 || o_0n >= 0.0)
                    && target_changes,
                ml: lane_eq(t.lanes.current_lane, n.lanes.future_lane)
                    && o_n0 >= 0.0
                    && lane_ne(n.lanes.future_lane, n.lanes.current_lane),
            }
        })
        .collect();

    let mut assigned: Vec<Option<usize>> = vec![None; preds.len()];
    for i in 0..preds.len() {
        let p = preds[i];
        let holds = [p.sl, p.fl, p.ff, p.ml];
        for (cat, &holds) in holds.iter().enumerate() {
            let bar = (0..i)
                .filter(|&j| assigned[j] == Some(cat))
                .map(|j| preds[j].dist)
                .fold(threshold, f64::min);
            if holds && p.dist < bar {
                assigned[i] = Some(cat);
                break;
            }
        }
    }
    let mut best: [Option<(f64, usize)>; 4] = [None; 4];
    for (i, a) in assigned.iter().enumerate() {
        if let Some(cat) = *a {
            let d = preds[i].dist;
            if best[cat].is_none_or(|(bd, _)| d < bd) {
                best[cat] = Some((d, i));
            }
        }
    }
    out.sl = best[0].map(|(_, i)| frame.states[i + 1].agent_id);
    out.fl = best[1].map(|(_, i)| frame.states[i + 1].agent_id);
    out.ff = best[2].map(|(_, i)| frame.states[i + 1].agent_id);
    out.ml = best[3].map(|(_, i)| frame.states[i + 1].agent_id);
    out
}

/// Rotation by `theta` followed by translation by `shift`, applied to the
/// kinematic state; lanes are kept.
pub fn rigid(s: &AgentState, theta: f64, shift: Vec2) -> AgentState {
    let rot = |v: Vec2| Vec2::new(v.x * theta.cos() - v.y * theta.sin(), v.x * theta.sin() + v.y * theta.cos());
    AgentState {
        position: rot(s.position) + shift,
        velocity: rot(s.velocity),
        acceleration: rot(s.acceleration),
        heading: trajint::geometry::wrap_angle(s.heading + theta),
        ..s.clone()
    }
}

pub fn rigid_frame(f: &Frame, theta: f64, shift: Vec2) -> Frame {
    Frame {
        timestep: f.timestep,
        states: f.states.iter().map(|s| rigid(s, theta, shift)).collect(),
    }
}

pub fn rigid_scene(s: &SceneHistory, theta: f64, shift: Vec2) -> SceneHistory {
    SceneHistory {
        frames: s.frames.iter().map(|f| rigid_frame(f, theta, shift)).collect(),
        lane_graph: s.lane_graph.clone(),
        dt: s.dt,
    }
}

/// Mean of squared displacements by explicit double loop.
pub fn direct_rmse(preds: &[Vec<Vec2>], gts: &[Vec<Vec2>]) -> f64 {
    let mut total = 0.0;
    let mut n = 0.0;
    for s in 0..preds.len() {
        for t in 0..preds[s].len() {
            let dx = preds[s][t].x - gts[s][t].x;
            let dy = preds[s][t].y - gts[s][t].y;
            total += dx * dx + dy * dy;
            n += 1.0;
        }
    }
    (total / n).sqrt()
}
