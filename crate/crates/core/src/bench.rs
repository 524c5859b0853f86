//! Stage latency of the lane-aware pipeline against radius and k-nearest
//! neighbour selection.
//!
//! Stages: lane prediction (LP), agent selection and tensor assembly (AS),
//! and trajectory prediction (TP: attention, encoding and a CV rollout).
//! The baselines have no LP stage and weight their neighbours uniformly.

use std::fmt::Write as _;
use std::hint::black_box;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::attention::{attention_matrix, CoefficientConfig};
use crate::encoder::{encode_interactions, EncoderWeights, EMBED_DIM, MODEL_DIM};
use crate::error::{Error, Result};
use crate::eval::predict_cv;
use crate::geometry::to_relative_frame;
use crate::ingest::DatasetConfig;
use crate::lane::annotate_scene_lanes;
use crate::scene::{AgentState, SceneHistory, STATE_DIM};
use crate::selection::{build_interaction_tensor, SelectionMode};
use crate::synth::{synthesize, LaneLayout, MotionKind, SynthSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    LaneAware,
    RadiusAll,
    KNearest(usize),
}

impl Strategy {
    pub fn name(&self) -> String {
        match self {
            Strategy::LaneAware => "lane_aware".into(),
            Strategy::RadiusAll => "radius_all".into(),
            Strategy::KNearest(k) => format!("k_nearest_{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub scenes: usize,
    /// Agents around the target, excluding it.
    pub agents: usize,
    pub radius: f64,
    pub repetitions: usize,
    pub seed: u64,
    pub k_nearest: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            scenes: 20,
            agents: 25,
            radius: 30.0,
            repetitions: 20,
            seed: 7,
            k_nearest: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub median_ms: f64,
    pub p95_ms: f64,
}

impl Stats {
    /// Median and nearest-rank 95th percentile of the samples, in milliseconds.
    pub fn from_samples(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        let median = if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) };
        let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
        Some(Self {
            median_ms: median,
            p95_ms: s[rank - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRow {
    pub strategy: String,
    pub lp: Option<Stats>,
    pub selection: Stats,
    pub prediction: Stats,
    pub total: Stats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub rows: Vec<StageRow>,
}

impl BenchReport {
    pub fn row(&self, strategy: Strategy) -> Option<&StageRow> {
        let name = strategy.name();
        self.rows.iter().find(|r| r.strategy == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "strategy,lp_median_ms,lp_p95_ms,as_median_ms,as_p95_ms,tp_median_ms,tp_p95_ms,total_median_ms,total_p95_ms\n",
        );
        for r in &self.rows {
            let (lpm, lpp) = r
                .lp
                .map(|s| (s.median_ms.to_string(), s.p95_ms.to_string()))
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{lpm},{lpp},{},{},{},{},{},{}",
                r.strategy,
                r.selection.median_ms,
                r.selection.p95_ms,
                r.prediction.median_ms,
                r.prediction.p95_ms,
                r.total.median_ms,
                r.total.p95_ms
            );
        }
        out
    }
}

/// Dense `T_h x n` neighbour tensor used by the baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNeighbors {
    pub width: usize,
    pub target: Vec<[f64; STATE_DIM]>,
    pub slots: Vec<[f64; STATE_DIM]>,
    pub mask: Vec<bool>,
}

impl DenseNeighbors {
    pub fn populated(&self, t: usize) -> impl Iterator<Item = &[f64; STATE_DIM]> {
        let row = t * self.width..(t + 1) * self.width;
        self.slots[row.clone()]
            .iter()
            .zip(&self.mask[row])
            .filter(|(_, m)| **m)
            .map(|(s, _)| s)
    }
}

/// Every agent within `radius` of the target (`k = None`) or only the `k`
/// nearest of them, per frame, nearest first.
pub fn dense_neighbors(scene: &SceneHistory, radius: f64, k: Option<usize>) -> DenseNeighbors {
    let Some(pose) = scene.reference_pose() else {
        return DenseNeighbors { width: 0, target: Vec::new(), slots: Vec::new(), mask: Vec::new() };
    };
    let mut per_frame: Vec<Vec<&AgentState>> = Vec::with_capacity(scene.frames.len());
    let mut targets = Vec::with_capacity(scene.frames.len());
    for frame in &scene.frames {
        let Some(target) = frame.target() else {
            per_frame.push(Vec::new());
            targets.push([0.0; STATE_DIM]);
            continue;
        };
        targets.push(to_relative_frame(target, &pose).to_array());
        let mut near: Vec<(f64, &AgentState)> = frame.states[1..]
            .iter()
            .map(|s| (s.position.distance(target.position), s))
            .filter(|(d, _)| *d < radius)
            .collect();
        near.sort_by(|a, b| a.0.total_cmp(&b.0));
        if let Some(k) = k {
            near.truncate(k);
        }
        per_frame.push(near.into_iter().map(|(_, s)| s).collect());
    }
    let width = k.unwrap_or_else(|| per_frame.iter().map(Vec::len).max().unwrap_or(0));
    let h = scene.frames.len();
    let mut slots = vec![[0.0; STATE_DIM]; h * width];
    let mut mask = vec![false; h * width];
    for (t, agents) in per_frame.iter().enumerate() {
        for (j, s) in agents.iter().enumerate() {
            slots[t * width + j] = to_relative_frame(s, &pose).to_array();
            mask[t * width + j] = true;
        }
    }
    DenseNeighbors { width, target: targets, slots, mask }
}

/// Uniformly weighted embedding of every populated neighbour.
pub fn encode_uniform(dense: &DenseNeighbors, weights: &EncoderWeights) -> Vec<Vec<f64>> {
    (0..dense.target.len())
        .map(|t| {
            let n = dense.populated(t).count();
            let alpha = if n == 0 { 0.0 } else { 1.0 / n as f64 };
            let agg = weights.aggregate(&dense.target[t], dense.populated(t).map(|s| (alpha, s)));
            weights.project(&agg)
        })
        .collect()
}

fn target_track(scene: &SceneHistory) -> Vec<AgentState> {
    scene.frames.iter().filter_map(|f| f.target().cloned()).collect()
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Synthetic dense highway scenes: `cfg.agents` vehicles around the target.
pub fn bench_scenes(cfg: &BenchConfig, dataset: &DatasetConfig) -> Result<Vec<SceneHistory>> {
    (0..cfg.scenes)
        .map(|i| {
            let spec = SynthSpec {
                seed: cfg.seed.wrapping_add(i as u64),
                layout: LaneLayout::StraightMultilane,
                n_agents: cfg.agents + 1,
                density_radius: cfg.radius,
                motion: MotionKind::Ca,
            };
            let sc = synthesize(&spec, dataset)?;
            sc.windows
                .into_iter()
                .next()
                .map(|w| w.scene)
                .ok_or_else(|| Error::InvalidInput("synthetic scenario produced no window".into()))
        })
        .collect()
}

struct Samples {
    lp: Vec<f64>,
    selection: Vec<f64>,
    prediction: Vec<f64>,
    total: Vec<f64>,
}

fn time_strategy(
    strategy: Strategy,
    scenes: &[SceneHistory],
    cfg: &BenchConfig,
    dataset: &DatasetConfig,
    coeff: &CoefficientConfig,
    weights: &EncoderWeights,
) -> Result<Samples> {
    let mut s = Samples { lp: Vec::new(), selection: Vec::new(), prediction: Vec::new(), total: Vec::new() };
    for _ in 0..cfg.repetitions {
        for scene in scenes {
            let track = target_track(scene);
            let (lp, sel, pred) = match strategy {
                Strategy::LaneAware => {
                    let mut scene = scene.clone();
                    let t0 = Instant::now();
                    annotate_scene_lanes(&mut scene, dataset.future_len);
                    let lp = elapsed_ms(t0);

                    let t0 = Instant::now();
                    let tensor = build_interaction_tensor(&scene, cfg.radius, SelectionMode::All);
                    let sel = elapsed_ms(t0);

                    let t0 = Instant::now();
                    let alpha = attention_matrix(&tensor, coeff)?;
                    let emb = encode_interactions(&tensor, &alpha, weights)?;
                    let traj = predict_cv(&track, dataset.future_len, scene.dt)?;
                    black_box((emb, traj));
                    (Some(lp), sel, elapsed_ms(t0))
                }
                Strategy::RadiusAll | Strategy::KNearest(_) => {
                    let k = match strategy {
                        Strategy::KNearest(k) => Some(k),
                        _ => None,
                    };
                    let t0 = Instant::now();
                    let dense = dense_neighbors(scene, cfg.radius, k);
                    let sel = elapsed_ms(t0);

                    let t0 = Instant::now();
                    let emb = encode_uniform(&dense, weights);
                    let traj = predict_cv(&track, dataset.future_len, scene.dt)?;
                    black_box((emb, traj));
                    (None, sel, elapsed_ms(t0))
                }
            };
            if let Some(lp) = lp {
                s.lp.push(lp);
            }
            s.selection.push(sel);
            s.prediction.push(pred);
            s.total.push(lp.unwrap_or(0.0) + sel + pred);
        }
    }
    Ok(s)
}

/// Times every strategy over the same scenes.
pub fn run_bench(cfg: &BenchConfig, dataset: &DatasetConfig, coeff: &CoefficientConfig) -> Result<BenchReport> {
    if cfg.scenes == 0 || cfg.repetitions == 0 {
        return Err(Error::InvalidInput("bench needs at least one scene and one repetition".into()));
    }
    let scenes = bench_scenes(cfg, dataset)?;
    let weights = EncoderWeights::seeded(cfg.seed, EMBED_DIM, MODEL_DIM);
    let strategies = [Strategy::LaneAware, Strategy::RadiusAll, Strategy::KNearest(cfg.k_nearest)];
    let mut rows = Vec::with_capacity(strategies.len());
    for strategy in strategies {
        let s = time_strategy(strategy, &scenes, cfg, dataset, coeff, &weights)?;
        let stats = |v: &[f64]| Stats::from_samples(v).expect("non-empty samples");
        rows.push(StageRow {
            strategy: strategy.name(),
            lp: Stats::from_samples(&s.lp),
            selection: stats(&s.selection),
            prediction: stats(&s.prediction),
            total: stats(&s.total),
        });
    }
    Ok(BenchReport { config: *cfg, rows })
}
