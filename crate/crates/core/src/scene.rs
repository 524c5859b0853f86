//! Agent states, per-timestep frames and observation windows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CaState, Pose, Vec2};
use crate::lane::{LaneAssignment, LaneGraph};

pub type AgentId = u64;

/// Width of the per-agent state vector: x, y, heading, vx, vy, ax, ay.
pub const STATE_DIM: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub agent_id: AgentId,
    pub position: Vec2,
    pub heading: f64,
    pub velocity: Vec2,
    pub acceleration: Vec2,
    #[serde(default)]
    pub lanes: LaneAssignment,
}

impl AgentState {
    pub fn kinematics(&self) -> CaState {
        CaState::new(self.position, self.velocity, self.acceleration)
    }

    pub fn to_array(&self) -> [f64; STATE_DIM] {
        [
            self.position.x,
            self.position.y,
            self.heading,
            self.velocity.x,
            self.velocity.y,
            self.acceleration.x,
            self.acceleration.y,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn pose(&self) -> Pose {
        Pose::new(self.position, self.heading)
    }
}

/// Kinematics stored in an interaction slot.
pub fn kinematics_from_array(s: &[f64; STATE_DIM]) -> CaState {
    CaState::new(
        Vec2::new(s[0], s[1]),
        Vec2::new(s[3], s[4]),
        Vec2::new(s[5], s[6]),
    )
}

/// All agents observed at one timestep. Index 0 is the target agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub timestep: i64,
    pub states: Vec<AgentState>,
}

impl Frame {
    pub fn target(&self) -> Option<&AgentState> {
        self.states.first()
    }

    pub fn find(&self, id: AgentId) -> Option<&AgentState> {
        self.states.iter().find(|s| s.agent_id == id)
    }

    pub fn validate(&self) -> Result<()> {
        if self.states.is_empty() {
            return Err(Error::InvalidInput(format!(
                "frame t={} has no target agent",
                self.timestep
            )));
        }
        let mut ids: Vec<AgentId> = self.states.iter().map(|s| s.agent_id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput(format!(
                "frame t={} repeats an agent id",
                self.timestep
            )));
        }
        Ok(())
    }
}

/// `T_h` consecutive frames ending at timestep 0, plus the map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneHistory {
    pub frames: Vec<Frame>,
    pub lane_graph: LaneGraph,
    pub dt: f64,
}

impl SceneHistory {
    pub fn history_len(&self) -> usize {
        self.frames.len()
    }

    pub fn target_id(&self) -> Option<AgentId> {
        self.frames.first()?.target().map(|s| s.agent_id)
    }

    /// Target state in the last observed frame.
    pub fn current_target(&self) -> Option<&AgentState> {
        self.frames.last()?.target()
    }

    /// Frame anchored at the target's final observed position and heading.
    pub fn reference_pose(&self) -> Option<Pose> {
        self.current_target().map(AgentState::pose)
    }

    /// One agent's states over the window, `None` where it is unobserved.
    pub fn track_of(&self, id: AgentId) -> Vec<Option<&AgentState>> {
        self.frames.iter().map(|f| f.find(id)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::InvalidInput("scene has no frames".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidInput(format!("dt must be positive, got {}", self.dt)));
        }
        let target = self.target_id();
        for (i, frame) in self.frames.iter().enumerate() {
            frame.validate()?;
            if i > 0 && frame.timestep <= self.frames[i - 1].timestep {
                return Err(Error::InvalidInput("frames are not ordered by timestep".into()));
            }
            if frame.target().map(|s| s.agent_id) != target {
                return Err(Error::InvalidInput(format!(
                    "target agent missing from frame t={}",
                    frame.timestep
                )));
            }
        }
        Ok(())
    }
}
