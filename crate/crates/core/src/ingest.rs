//! Trajectory CSV ingestion and windowing into observation scenes.
//!
//! Expected columns: `frame, id, x, y, heading, vx, vy, ax, ay, lane_id`, with
//! a header row. `heading` and `lane_id` are optional. No interpolation or
//! smoothing is applied; rows are taken as given.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{SanityLimits, Vec2};
use crate::lane::{predict_lane, LaneAssignment, LaneGraph, LaneId};
use crate::scene::{AgentId, AgentState, Frame, SceneHistory};

const REQUIRED: [&str; 8] = ["frame", "id", "x", "y", "vx", "vy", "ax", "ay"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    /// Sampling interval of the raw file, seconds.
    pub dt_raw: f64,
    pub downsample_factor: usize,
    /// Observed steps `T_h`.
    pub history_len: usize,
    /// Predicted steps `T_f`.
    pub future_len: usize,
    /// Selection range `D`, meters.
    pub threshold: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self::interaction()
    }
}

impl DatasetConfig {
    /// 10 Hz, 1 s observed, 3 s predicted, 30 m range.
    pub fn interaction() -> Self {
        Self {
            dt_raw: 0.1,
            downsample_factor: 1,
            history_len: 10,
            future_len: 30,
            threshold: 30.0,
        }
    }

    /// 25 Hz downsampled to 5 Hz, 3 s observed, 5 s predicted, 200 m range.
    pub fn highd() -> Self {
        Self {
            dt_raw: 0.04,
            downsample_factor: 5,
            history_len: 15,
            future_len: 25,
            threshold: 200.0,
        }
    }

    /// 30 Hz, 2 s observed, 6 s predicted, 45 m range.
    pub fn citysim() -> Self {
        Self {
            dt_raw: 1.0 / 30.0,
            downsample_factor: 1,
            history_len: 60,
            future_len: 180,
            threshold: 45.0,
        }
    }

    /// Interval between consecutive windowed steps.
    pub fn dt(&self) -> f64 {
        self.dt_raw * self.downsample_factor as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.downsample_factor < 1 {
            return Err(Error::Config("downsample_factor must be at least 1".into()));
        }
        if self.history_len < 1 || self.future_len < 1 {
            return Err(Error::Config("history and future lengths must be at least 1".into()));
        }
        if !(self.dt_raw > 0.0) || !self.dt_raw.is_finite() {
            return Err(Error::Config("dt_raw must be positive".into()));
        }
        if !(self.threshold > 0.0) {
            return Err(Error::Config("threshold must be positive".into()));
        }
        Ok(())
    }
}

/// One parsed CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRow {
    pub frame: i64,
    pub state: AgentState,
    pub lane_id: Option<LaneId>,
}

/// A row rejected during loading.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// 1-based line number in the file (the header is line 1).
    pub line: u64,
    pub message: String,
}

/// Rows sorted by `(frame, id)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrackTable {
    rows: Vec<TrackRow>,
}

impl TrackTable {
    pub fn new(mut rows: Vec<TrackRow>) -> Result<Self> {
        rows.sort_by_key(|r| (r.frame, r.state.agent_id));
        if let Some(w) = rows
            .windows(2)
            .find(|w| (w[0].frame, w[0].state.agent_id) == (w[1].frame, w[1].state.agent_id))
        {
            return Err(Error::DuplicateRow {
                row: 0,
                frame: w[0].frame,
                id: w[0].state.agent_id,
            });
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[TrackRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn agent_ids(&self) -> Vec<AgentId> {
        let mut ids: Vec<AgentId> = self.rows.iter().map(|r| r.state.agent_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Writes the table in the CSV schema read by [`load_trajectories`].
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["frame", "id", "x", "y", "heading", "vx", "vy", "ax", "ay", "lane_id"])?;
        for r in &self.rows {
            let s = &r.state;
            w.write_record([
                r.frame.to_string(),
                s.agent_id.to_string(),
                s.position.x.to_string(),
                s.position.y.to_string(),
                s.heading.to_string(),
                s.velocity.x.to_string(),
                s.velocity.y.to_string(),
                s.acceleration.x.to_string(),
                s.acceleration.y.to_string(),
                r.lane_id.map(|l| l.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

pub fn load_trajectories(path: impl AsRef<Path>, limits: &SanityLimits) -> Result<(TrackTable, Vec<Diagnostic>)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_trajectories(file, limits)
}

/// Parses trajectory CSV. Rows breaking the sanity limits are dropped and
/// reported as diagnostics; schema, parse and duplicate problems are errors.
pub fn read_trajectories<R: Read>(reader: R, limits: &SanityLimits) -> Result<(TrackTable, Vec<Diagnostic>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    for name in REQUIRED {
        if !col.contains_key(name) {
            return Err(Error::MissingColumn(name.to_string()));
        }
    }
    let heading_col = col.get("heading").copied();
    let lane_col = col.get("lane_id").copied();

    let mut raw = Vec::new();
    let mut diagnostics = Vec::new();
    let mut seen = HashSet::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let row = line as usize;
        let cell = |name: &str| record.get(col[name]).unwrap_or("");
        let num = |name: &str| -> Result<f64> {
            let v = cell(name);
            v.parse::<f64>().map_err(|_| Error::NonNumeric {
                row,
                column: name.to_string(),
                value: v.to_string(),
            })
        };
        let int = |name: &str, v: &str| -> Result<i64> {
            v.parse::<i64>().map_err(|_| Error::NonNumeric {
                row,
                column: name.to_string(),
                value: v.to_string(),
            })
        };

        let frame = int("frame", cell("frame"))?;
        let id_text = cell("id");
        let id = id_text.parse::<u64>().map_err(|_| Error::NonNumeric {
            row,
            column: "id".into(),
            value: id_text.to_string(),
        })?;
        let position = Vec2::new(num("x")?, num("y")?);
        let velocity = Vec2::new(num("vx")?, num("vy")?);
        let acceleration = Vec2::new(num("ax")?, num("ay")?);
        let heading = match heading_col.map(|c| record.get(c).unwrap_or("")) {
            Some(v) if !v.is_empty() => Some(num("heading")?),
            _ => None,
        };
        let lane_id = match lane_col.map(|c| record.get(c).unwrap_or("")) {
            Some(v) if !v.is_empty() => Some(int("lane_id", v)?),
            _ => None,
        };

        if !seen.insert((frame, id)) {
            return Err(Error::DuplicateRow { row, frame, id });
        }

        let state = AgentState {
            agent_id: id,
            position,
            heading: heading.unwrap_or(f64::NAN),
            velocity,
            acceleration,
            lanes: LaneAssignment::default(),
        };
        let finite_heading = heading.is_none_or(f64::is_finite);
        let check = state.kinematics().validate(limits).and_then(|_| {
            if finite_heading {
                Ok(())
            } else {
                Err(Error::InvalidInput("non-finite heading".into()))
            }
        });
        match check {
            Ok(()) => raw.push((TrackRow { frame, state, lane_id }, heading.is_some())),
            Err(e) => diagnostics.push(Diagnostic {
                line,
                message: format!("rejected (frame={frame}, id={id}): {e}"),
            }),
        }
    }

    // Missing headings follow the velocity; stationary rows keep the agent's
    // previous heading.
    raw.sort_by_key(|(r, _)| (r.state.agent_id, r.frame));
    let mut last_heading: HashMap<AgentId, f64> = HashMap::new();
    let rows = raw
        .into_iter()
        .map(|(mut r, has_heading)| {
            let id = r.state.agent_id;
            if !has_heading {
                let v = r.state.velocity;
                r.state.heading = if v.x == 0.0 && v.y == 0.0 {
                    last_heading.get(&id).copied().unwrap_or(0.0)
                } else {
                    v.y.atan2(v.x)
                };
            }
            last_heading.insert(id, r.state.heading);
            r
        })
        .collect();
    Ok((TrackTable::new(rows)?, diagnostics))
}

/// One observation window and the target's future positions after it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub scene: SceneHistory,
    pub future: Vec<Vec2>,
}

/// How lane assignments are filled in while windowing.
#[derive(Debug, Clone, Copy)]
pub enum LaneSource<'a> {
    /// CA lane predictor against a lane graph.
    Predicted(&'a LaneGraph),
    /// The `lane_id` column: current lane as recorded, future lane as the next
    /// different recorded lane of the same agent within the prediction horizon.
    Recorded,
}

/// Downsampled grid of frames: every `k`-th frame from the first one.
fn downsampled_frames(tracks: &TrackTable, k: usize) -> (Vec<i64>, BTreeMap<i64, Vec<&TrackRow>>) {
    let mut by_frame: BTreeMap<i64, Vec<&TrackRow>> = BTreeMap::new();
    for r in tracks.rows() {
        by_frame.entry(r.frame).or_default().push(r);
    }
    let (Some(&first), Some(&last)) = (by_frame.keys().next(), by_frame.keys().next_back()) else {
        return (Vec::new(), by_frame);
    };
    let grid = (first..=last).step_by(k).collect();
    (grid, by_frame)
}

/// Sliding windows of `history_len + future_len` downsampled frames in which
/// `target` is present throughout.
pub fn window_scenes(
    tracks: &TrackTable,
    cfg: &DatasetConfig,
    target: AgentId,
    lanes: LaneSource<'_>,
) -> Result<Vec<Window>> {
    cfg.validate()?;
    let k = cfg.downsample_factor;
    let (grid, by_frame) = downsampled_frames(tracks, k);
    let span = cfg.history_len + cfg.future_len;
    if grid.len() < span {
        return Ok(Vec::new());
    }
    let dt = cfg.dt();
    let empty = Vec::new();
    let rows_at = |f: i64| by_frame.get(&f).unwrap_or(&empty);
    let has_target = |f: i64| rows_at(f).iter().any(|r| r.state.agent_id == target);

    let recorded_lane: HashMap<(i64, AgentId), Option<LaneId>> = match lanes {
        LaneSource::Recorded => tracks
            .rows()
            .iter()
            .map(|r| ((r.frame, r.state.agent_id), r.lane_id))
            .collect(),
        LaneSource::Predicted(_) => HashMap::new(),
    };
    let assign = |row: &TrackRow| -> LaneAssignment {
        match lanes {
            LaneSource::Predicted(graph) => predict_lane(graph, &row.state, cfg.future_len, dt),
            LaneSource::Recorded => {
                let current = row.lane_id;
                let future = (1..=cfg.future_len as i64)
                    .filter_map(|j| {
                        recorded_lane
                            .get(&(row.frame + j * k as i64, row.state.agent_id))
                            .copied()
                            .flatten()
                    })
                    .find(|l| Some(*l) != current)
                    .or(current);
                LaneAssignment::new(current, future)
            }
        }
    };
    let lane_graph = match lanes {
        LaneSource::Predicted(g) => g.clone(),
        LaneSource::Recorded => LaneGraph::default(),
    };

    let mut windows = Vec::new();
    for start in 0..=grid.len() - span {
        let frames_idx = &grid[start..start + span];
        if !frames_idx.iter().all(|f| has_target(*f)) {
            continue;
        }
        let frames = frames_idx[..cfg.history_len]
            .iter()
            .enumerate()
            .map(|(j, &f)| {
                let rows = rows_at(f);
                let mut states = Vec::with_capacity(rows.len());
                let target_row = rows.iter().find(|r| r.state.agent_id == target).expect("checked");
                states.push(AgentState { lanes: assign(target_row), ..target_row.state.clone() });
                states.extend(
                    rows.iter()
                        .filter(|r| r.state.agent_id != target)
                        .map(|r| AgentState { lanes: assign(r), ..r.state.clone() }),
                );
                Frame {
                    timestep: j as i64 - cfg.history_len as i64 + 1,
                    states,
                }
            })
            .collect();
        let future = frames_idx[cfg.history_len..]
            .iter()
            .map(|&f| {
                rows_at(f)
                    .iter()
                    .find(|r| r.state.agent_id == target)
                    .expect("checked")
                    .state
                    .position
            })
            .collect();
        windows.push(Window {
            scene: SceneHistory {
                frames,
                lane_graph: lane_graph.clone(),
                dt,
            },
            future,
        });
    }
    Ok(windows)
}

/// Windows for every agent in the table, in ascending id order.
pub fn window_all_targets(tracks: &TrackTable, cfg: &DatasetConfig, lanes: LaneSource<'_>) -> Result<Vec<Window>> {
    let mut out = Vec::new();
    for id in tracks.agent_ids() {
        out.extend(window_scenes(tracks, cfg, id, lanes)?);
    }
    Ok(out)
}
