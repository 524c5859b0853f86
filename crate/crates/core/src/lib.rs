//! Lane-aware interaction modelling for vehicle trajectory prediction.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`lane`]: every agent gets a current and a predicted future lane.
//! 2. [`selection`]: up to four semantically relevant neighbours are picked per
//!    frame (same-lane leader, future-lane leader and follower, merging leader).
//! 3. [`attention`]: each selected neighbour is weighted by a closeness index
//!    derived from constant-acceleration closest approach ([`geometry`]).
//! 4. [`encoder`]: weighted neighbour embeddings are merged into a per-step
//!    interaction embedding.
//!
//! [`ingest`] and [`synth`] produce scenes, [`eval`] scores predictions and
//! [`bench`] times the stages against simpler neighbour selection baselines.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attention;
pub mod bench;
pub mod config;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod ingest;
pub mod lane;
pub mod scene;
pub mod selection;
pub mod synth;

pub use attention::{attention_matrix, closeness, closeness_index, AttentionMatrix, CoefficientConfig, CoefficientVariant};
pub use encoder::{encode_interactions, EncoderWeights, InteractionEmbedding};
pub use error::{Error, Result};
pub use geometry::{ca_propagate, clamp_tau, closest_approach_time, closest_distance, CaState, Pose, Vec2};
pub use lane::{LaneAssignment, LaneGraph, LaneId};
pub use scene::{AgentId, AgentState, Frame, SceneHistory};
pub use selection::{build_interaction_tensor, select_neighbors, Category, InteractionTensor, NeighborSet, SelectionMode};
