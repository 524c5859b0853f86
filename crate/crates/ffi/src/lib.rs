//! C interface to `trajint`.
//!
//! Every fallible function returns a [`TrajintStatus`]; on failure the message
//! is available from [`trajint_last_error`] on the same thread. Objects are
//! handed out as opaque pointers and released with their `_free` function.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use trajint::attention::{attention_matrix, closeness, CoefficientConfig, CoefficientVariant};
use trajint::encoder::{encode_interactions, EncoderWeights, EMBED_DIM, MODEL_DIM};
use trajint::error::Error;
use trajint::eval::{min_ade, min_fde, rmse, PredictionSet};
use trajint::geometry::{clamp_tau, closest_approach_time, closest_distance, CaState, Vec2};
use trajint::lane::{annotate_scene_lanes, LaneAssignment, LaneGraph};
use trajint::scene::{AgentState, Frame, SceneHistory};
use trajint::selection::{build_interaction_tensor, select_neighbors, SelectionMode};

/// Lane id meaning "no lane".
pub const TRAJINT_NO_LANE: i64 = i64::MIN;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajintStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Shape = 3,
    Degenerate = 4,
    Parse = 5,
    Invariant = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajintVariant {
    A = 0,
    B = 1,
    Ab = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajintSelectionMode {
    All = 0,
    Current = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajintCaState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub ax: f64,
    pub ay: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajintCoefficients {
    pub horizon: f64,
    pub epsilon: f64,
    pub variant: TrajintVariant,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajintCloseness {
    pub tau: f64,
    pub tau_clamped: f64,
    pub current_distance: f64,
    pub closest_distance: f64,
    pub value: f64,
}

/// One agent at one timestep. Lanes use [`TRAJINT_NO_LANE`] for "none".
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajintAgent {
    pub id: u64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub vx: f64,
    pub vy: f64,
    pub ax: f64,
    pub ay: f64,
    pub current_lane: i64,
    pub future_lane: i64,
}

/// Selected neighbour per category, in the order SL, FL, FF, ML.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrajintNeighbors {
    pub ids: [u64; 4],
    pub present: [bool; 4],
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrajintMetrics {
    pub min_ade: f64,
    pub min_fde: f64,
}

pub struct TrajintLaneGraph {
    inner: LaneGraph,
}

pub struct TrajintScene {
    inner: SceneHistory,
}

pub struct TrajintEncoder {
    inner: EncoderWeights,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> TrajintStatus {
    match e {
        Error::CollocatedAgents | Error::CollocatedAt { .. } => TrajintStatus::Degenerate,
        Error::Shape(_) => TrajintStatus::Shape,
        Error::Invariant(_) => TrajintStatus::Invariant,
        Error::Json(_)
        | Error::Csv(_)
        | Error::MissingColumn(_)
        | Error::NonNumeric { .. }
        | Error::Config(_)
        | Error::Io { .. } => TrajintStatus::Parse,
        _ => TrajintStatus::InvalidInput,
    }
}

struct Fail(TrajintStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(TrajintStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TrajintStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            TrajintStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            TrajintStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn input_slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(TrajintStatus::InvalidInput, format!("{what} is not UTF-8")))
}

fn write_out<T: Copy>(out: *mut T, out_len: usize, values: &[T]) -> Result<(), Fail> {
    if out_len < values.len() {
        return Err(Fail(
            TrajintStatus::BufferTooSmall,
            format!("output needs {} elements, got {out_len}", values.len()),
        ));
    }
    if values.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(null("output buffer"));
    }
    // SAFETY: caller guarantees `out` holds `out_len >= values.len()` elements.
    unsafe { ptr::copy_nonoverlapping(values.as_ptr(), out, values.len()) };
    Ok(())
}

fn ca(s: &TrajintCaState) -> CaState {
    CaState::new(Vec2::new(s.x, s.y), Vec2::new(s.vx, s.vy), Vec2::new(s.ax, s.ay))
}

fn coefficients(c: &TrajintCoefficients) -> Result<CoefficientConfig, Fail> {
    let cfg = CoefficientConfig {
        horizon: c.horizon,
        epsilon: c.epsilon,
        variant: match c.variant {
            TrajintVariant::A => CoefficientVariant::A,
            TrajintVariant::B => CoefficientVariant::B,
            TrajintVariant::Ab => CoefficientVariant::Ab,
        },
    };
    cfg.validate()?;
    Ok(cfg)
}

fn lane(id: i64) -> Option<i64> {
    (id != TRAJINT_NO_LANE).then_some(id)
}

fn agent_state(a: &TrajintAgent) -> AgentState {
    AgentState {
        agent_id: a.id,
        position: Vec2::new(a.x, a.y),
        heading: a.heading,
        velocity: Vec2::new(a.vx, a.vy),
        acceleration: Vec2::new(a.ax, a.ay),
        lanes: LaneAssignment::new(lane(a.current_lane), lane(a.future_lane)),
    }
}

fn frame_of(agents: &[TrajintAgent], timestep: i64) -> Result<Frame, Fail> {
    let frame = Frame {
        timestep,
        states: agents.iter().map(agent_state).collect(),
    };
    frame.validate()?;
    if !frame.states.iter().all(AgentState::is_finite) {
        return Err(Fail(TrajintStatus::InvalidInput, "non-finite agent state".into()));
    }
    Ok(frame)
}

fn selection_mode(m: TrajintSelectionMode) -> SelectionMode {
    match m {
        TrajintSelectionMode::All => SelectionMode::All,
        TrajintSelectionMode::Current => SelectionMode::Current,
    }
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn trajint_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Time of closest approach between two constant-acceleration agents, the
/// same time clamped to `[0, horizon]`, and the distance at the clamped time.
///
/// # Safety
/// `target` and `other` must be valid for reads; the out pointers must be
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn trajint_closest_approach(
    target: *const TrajintCaState,
    other: *const TrajintCaState,
    horizon: f64,
    tau_out: *mut f64,
    tau_clamped_out: *mut f64,
    distance_out: *mut f64,
) -> TrajintStatus {
    guard(|| {
        let (t, o) = (ca(deref(target, "target")?), ca(deref(other, "other")?));
        if !t.is_finite() || !o.is_finite() {
            return Err(Fail(TrajintStatus::InvalidInput, "non-finite state".into()));
        }
        if !(horizon > 0.0) {
            return Err(Fail(TrajintStatus::InvalidInput, "horizon must be positive".into()));
        }
        let tau_out = deref_mut(tau_out, "tau_out")?;
        let tau_clamped_out = deref_mut(tau_clamped_out, "tau_clamped_out")?;
        let distance_out = deref_mut(distance_out, "distance_out")?;
        let tau = closest_approach_time(&t, &o);
        let clamped = clamp_tau(tau, horizon);
        *tau_out = tau;
        *tau_clamped_out = clamped;
        *distance_out = closest_distance(&t, &o, clamped);
        Ok(())
    })
}

/// Closeness index of `other` with respect to `target`.
///
/// # Safety
/// All pointers must be valid; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn trajint_closeness(
    target: *const TrajintCaState,
    other: *const TrajintCaState,
    coefficients: *const TrajintCoefficients,
    out: *mut TrajintCloseness,
) -> TrajintStatus {
    guard(|| {
        let cfg = self::coefficients(deref(coefficients, "coefficients")?)?;
        let c = closeness(&ca(deref(target, "target")?), &ca(deref(other, "other")?), &cfg)?;
        *deref_mut(out, "out")? = TrajintCloseness {
            tau: c.tau,
            tau_clamped: c.tau_clamped,
            current_distance: c.current_distance,
            closest_distance: c.closest_distance,
            value: c.value,
        };
        Ok(())
    })
}

/// Picks up to four neighbours of `agents[0]` within `threshold`.
///
/// # Safety
/// `agents` must point to `n_agents` readable elements; `out` must be valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn trajint_select_neighbors(
    agents: *const TrajintAgent,
    n_agents: usize,
    threshold: f64,
    out: *mut TrajintNeighbors,
) -> TrajintStatus {
    guard(|| {
        let agents = input_slice(agents, n_agents, "agents")?;
        let out = deref_mut(out, "out")?;
        let frame = frame_of(agents, 0)?;
        let picked = select_neighbors(&frame, threshold);
        let mut result = TrajintNeighbors::default();
        for (i, id) in picked.as_array().into_iter().enumerate() {
            if let Some(id) = id {
                result.ids[i] = id;
                result.present[i] = true;
            }
        }
        *out = result;
        Ok(())
    })
}

/// Parses a lane graph from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for writes.
/// The returned handle must be released with [`trajint_lane_graph_free`].
#[no_mangle]
pub unsafe extern "C" fn trajint_lane_graph_from_json(
    json: *const c_char,
    out: *mut *mut TrajintLaneGraph,
) -> TrajintStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let inner = LaneGraph::from_json_str(c_str(json, "json")?)?;
        *out = Box::into_raw(Box::new(TrajintLaneGraph { inner }));
        Ok(())
    })
}

/// # Safety
/// `graph` must be null or a handle from [`trajint_lane_graph_from_json`]
/// that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn trajint_lane_graph_free(graph: *mut TrajintLaneGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Lane containing the point, or [`TRAJINT_NO_LANE`].
///
/// # Safety
/// `graph` must be a live handle; `lane_out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn trajint_lane_graph_map_point(
    graph: *const TrajintLaneGraph,
    x: f64,
    y: f64,
    lane_out: *mut i64,
) -> TrajintStatus {
    guard(|| {
        let g = deref(graph, "graph")?;
        *deref_mut(lane_out, "lane_out")? = g.inner.map_point(Vec2::new(x, y)).unwrap_or(TRAJINT_NO_LANE);
        Ok(())
    })
}

/// Empty scene sampled every `dt` seconds.
///
/// # Safety
/// `out` must be valid for writes. The handle must be released with
/// [`trajint_scene_free`].
#[no_mangle]
pub unsafe extern "C" fn trajint_scene_new(dt: f64, out: *mut *mut TrajintScene) -> TrajintStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        if !(dt > 0.0) {
            return Err(Fail(TrajintStatus::InvalidInput, "dt must be positive".into()));
        }
        let inner = SceneHistory { frames: Vec::new(), lane_graph: LaneGraph::default(), dt };
        *out = Box::into_raw(Box::new(TrajintScene { inner }));
        Ok(())
    })
}

/// # Safety
/// `scene` must be null or a live handle from [`trajint_scene_new`].
#[no_mangle]
pub unsafe extern "C" fn trajint_scene_free(scene: *mut TrajintScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// Appends a frame; the target must be `agents[0]` in every frame and
/// timesteps must increase.
///
/// # Safety
/// `scene` must be a live handle; `agents` must point to `n_agents` elements.
#[no_mangle]
pub unsafe extern "C" fn trajint_scene_push_frame(
    scene: *mut TrajintScene,
    timestep: i64,
    agents: *const TrajintAgent,
    n_agents: usize,
) -> TrajintStatus {
    guard(|| {
        let scene = deref_mut(scene, "scene")?;
        let frame = frame_of(input_slice(agents, n_agents, "agents")?, timestep)?;
        let mut candidate = scene.inner.clone();
        candidate.frames.push(frame);
        candidate.validate()?;
        scene.inner = candidate;
        Ok(())
    })
}

/// Replaces every lane assignment in the scene with the prediction of a
/// `rollout_steps`-step constant-acceleration rollout against `graph`.
///
/// # Safety
/// Both handles must be live.
#[no_mangle]
pub unsafe extern "C" fn trajint_scene_annotate_lanes(
    scene: *mut TrajintScene,
    graph: *const TrajintLaneGraph,
    rollout_steps: usize,
) -> TrajintStatus {
    guard(|| {
        let scene = deref_mut(scene, "scene")?;
        scene.inner.lane_graph = deref(graph, "graph")?.inner.clone();
        annotate_scene_lanes(&mut scene.inner, rollout_steps);
        Ok(())
    })
}

/// Number of frames in the scene.
///
/// # Safety
/// `scene` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn trajint_scene_len(scene: *const TrajintScene) -> usize {
    scene.as_ref().map_or(0, |s| s.inner.frames.len())
}

/// Attention weights as a row-major `4 x frames` matrix (rows SL, FL, FF, ML).
///
/// # Safety
/// `scene` and `coefficients` must be valid; `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn trajint_scene_attention(
    scene: *const TrajintScene,
    threshold: f64,
    mode: TrajintSelectionMode,
    coefficients: *const TrajintCoefficients,
    out: *mut f64,
    out_len: usize,
) -> TrajintStatus {
    guard(|| {
        let scene = &deref(scene, "scene")?.inner;
        let cfg = self::coefficients(deref(coefficients, "coefficients")?)?;
        let tensor = build_interaction_tensor(scene, threshold, selection_mode(mode));
        let alpha = attention_matrix(&tensor, &cfg)?;
        write_out(out, out_len, alpha.as_slice())
    })
}

/// Encoder with seeded random weights.
///
/// # Safety
/// `out` must be valid for writes. Release with [`trajint_encoder_free`].
#[no_mangle]
pub unsafe extern "C" fn trajint_encoder_seeded(seed: u64, out: *mut *mut TrajintEncoder) -> TrajintStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let inner = EncoderWeights::seeded(seed, EMBED_DIM, MODEL_DIM);
        *out = Box::into_raw(Box::new(TrajintEncoder { inner }));
        Ok(())
    })
}

/// Encoder from serialized weights.
///
/// # Safety
/// `json` must be NUL-terminated; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn trajint_encoder_from_json(
    json: *const c_char,
    out: *mut *mut TrajintEncoder,
) -> TrajintStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let inner = EncoderWeights::from_json_str(c_str(json, "json")?)?;
        *out = Box::into_raw(Box::new(TrajintEncoder { inner }));
        Ok(())
    })
}

/// # Safety
/// `encoder` must be null or a live encoder handle.
#[no_mangle]
pub unsafe extern "C" fn trajint_encoder_free(encoder: *mut TrajintEncoder) {
    if !encoder.is_null() {
        drop(Box::from_raw(encoder));
    }
}

/// Width of one embedding row, or 0 for a null handle.
///
/// # Safety
/// `encoder` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn trajint_encoder_model_dim(encoder: *const TrajintEncoder) -> usize {
    encoder.as_ref().map_or(0, |e| e.inner.model_dim())
}

/// Interaction embedding as a row-major `frames x model_dim` matrix.
///
/// # Safety
/// Handles and `coefficients` must be valid; `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn trajint_scene_encode(
    scene: *const TrajintScene,
    encoder: *const TrajintEncoder,
    threshold: f64,
    mode: TrajintSelectionMode,
    coefficients: *const TrajintCoefficients,
    out: *mut f64,
    out_len: usize,
) -> TrajintStatus {
    guard(|| {
        let scene = &deref(scene, "scene")?.inner;
        let weights = &deref(encoder, "encoder")?.inner;
        let cfg = self::coefficients(deref(coefficients, "coefficients")?)?;
        let tensor = build_interaction_tensor(scene, threshold, selection_mode(mode));
        let alpha = attention_matrix(&tensor, &cfg)?;
        let emb = encode_interactions(&tensor, &alpha, weights)?;
        let flat: Vec<f64> = emb.rows.into_iter().flatten().collect();
        write_out(out, out_len, &flat)
    })
}

fn points(xy: &[f64]) -> Vec<Vec2> {
    xy.chunks_exact(2).map(|p| Vec2::new(p[0], p[1])).collect()
}

/// minADE and minFDE of one sample. `pred_xy` holds `modes x horizon` points
/// as interleaved x, y; `gt_xy` holds `horizon` points.
///
/// # Safety
/// Buffers must hold the stated number of doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trajint_metrics(
    pred_xy: *const f64,
    gt_xy: *const f64,
    modes: usize,
    horizon: usize,
    out: *mut TrajintMetrics,
) -> TrajintStatus {
    guard(|| {
        let n = horizon.checked_mul(2).ok_or_else(|| Fail(TrajintStatus::InvalidInput, "horizon too large".into()))?;
        let total = n
            .checked_mul(modes)
            .ok_or_else(|| Fail(TrajintStatus::InvalidInput, "modes too large".into()))?;
        let pred = input_slice(pred_xy, total, "pred_xy")?;
        let gt = points(input_slice(gt_xy, n, "gt_xy")?);
        let out = deref_mut(out, "out")?;
        let set = PredictionSet::new(pred.chunks(n.max(1)).map(points).collect())?;
        *out = TrajintMetrics { min_ade: min_ade(&set, &gt)?, min_fde: min_fde(&set, &gt)? };
        Ok(())
    })
}

/// Root mean squared error over `samples` single-mode predictions of
/// `horizon` points each, interleaved x, y.
///
/// # Safety
/// Both buffers must hold `samples * horizon * 2` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trajint_rmse(
    pred_xy: *const f64,
    gt_xy: *const f64,
    samples: usize,
    horizon: usize,
    out: *mut f64,
) -> TrajintStatus {
    guard(|| {
        let n = horizon
            .checked_mul(2)
            .and_then(|n| n.checked_mul(samples))
            .ok_or_else(|| Fail(TrajintStatus::InvalidInput, "size overflow".into()))?;
        let pred = input_slice(pred_xy, n, "pred_xy")?;
        let gt = input_slice(gt_xy, n, "gt_xy")?;
        let out = deref_mut(out, "out")?;
        let step = (2 * horizon).max(1);
        let preds: Vec<PredictionSet> = pred.chunks(step).map(|c| PredictionSet::single(points(c))).collect();
        let gts: Vec<Vec<Vec2>> = gt.chunks(step).map(points).collect();
        *out = rmse(&preds, &gts)?;
        Ok(())
    })
}
