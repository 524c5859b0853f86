//! Forward pass of the physical-attention interaction encoder.
//!
//! Per observed timestep:
//!
//! ```text
//! z_s   = fc_embed(state_s)                 for the target and each category
//! z     = fc_merge(z_0 + sum_s alpha_s * z_s)
//! e_int = ln_post(ffn(ln_pre(z))) + z
//! ```
//!
//! `fc_embed` is shared by all five slots and `ffn` is two linear layers with
//! a ReLU in between. No training happens here; weights are loaded from JSON
//! or drawn from a seeded initializer.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention::AttentionMatrix;
use crate::error::{Error, Result};
use crate::scene::STATE_DIM;
use crate::selection::{Category, InteractionTensor};

pub const EMBED_DIM: usize = 32;
pub const MODEL_DIM: usize = 256;
pub const LN_EPS: f64 = 1e-5;

/// Dense layer `y = W x + b` with `W` stored as `out x in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearLayer {
    #[serde(rename = "w")]
    pub weights: Vec<Vec<f64>>,
    #[serde(rename = "b")]
    pub bias: Vec<f64>,
}

impl LinearLayer {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            weights: vec![vec![0.0; in_dim]; out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    fn uniform(in_dim: usize, out_dim: usize, rng: &mut impl Rng, bound: f64) -> Self {
        let weights = (0..out_dim)
            .map(|_| (0..in_dim).map(|_| rng.gen_range(-bound..bound)).collect())
            .collect();
        let bias = (0..out_dim).map(|_| rng.gen_range(-bound..bound)).collect();
        Self { weights, bias }
    }

    pub fn out_dim(&self) -> usize {
        self.bias.len()
    }

    pub fn in_dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    fn validate(&self, name: &str, in_dim: usize, out_dim: usize) -> Result<()> {
        if self.weights.len() != out_dim || self.bias.len() != out_dim {
            return Err(Error::Shape(format!(
                "{name}: expected {out_dim} output rows, got {} weight rows and {} biases",
                self.weights.len(),
                self.bias.len()
            )));
        }
        if let Some(row) = self.weights.iter().find(|r| r.len() != in_dim) {
            return Err(Error::Shape(format!(
                "{name}: expected {in_dim} inputs per row, got {}",
                row.len()
            )));
        }
        let finite = self.weights.iter().flatten().chain(&self.bias).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Shape(format!("{name}: non-finite parameter")));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerNormParams {
    pub scale: Vec<f64>,
    pub shift: Vec<f64>,
}

impl LayerNormParams {
    pub fn identity(dim: usize) -> Self {
        Self {
            scale: vec![1.0; dim],
            shift: vec![0.0; dim],
        }
    }

    fn validate(&self, name: &str, dim: usize) -> Result<()> {
        if self.scale.len() != dim || self.shift.len() != dim {
            return Err(Error::Shape(format!(
                "{name}: expected dimension {dim}, got scale {} and shift {}",
                self.scale.len(),
                self.shift.len()
            )));
        }
        if !self.scale.iter().chain(&self.shift).all(|v| v.is_finite()) {
            return Err(Error::Shape(format!("{name}: non-finite parameter")));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        layer_norm(x, &self.scale, &self.shift)
    }
}

/// Standardises `x` with its population variance (plus [`LN_EPS`]) and applies
/// the affine `scale`/`shift`.
pub fn layer_norm(x: &[f64], scale: &[f64], shift: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let inv = 1.0 / (var + LN_EPS).sqrt();
    x.iter()
        .zip(scale.iter().zip(shift))
        .map(|(v, (g, b))| (v - mean) * inv * g + b)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderWeights {
    pub fc_embed: LinearLayer,
    pub fc_merge: LinearLayer,
    pub ffn_in: LinearLayer,
    pub ffn_out: LinearLayer,
    pub ln_pre: LayerNormParams,
    pub ln_post: LayerNormParams,
}

impl EncoderWeights {
    /// Weights drawn from uniform(-0.1, 0.1); layer-norm scales are
    /// `1 + u` and shifts `u`.
    pub fn seeded(seed: u64, embed_dim: usize, model_dim: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 0.1;
        let fc_embed = LinearLayer::uniform(STATE_DIM, embed_dim, &mut rng, bound);
        let fc_merge = LinearLayer::uniform(embed_dim, model_dim, &mut rng, bound);
        let ffn_in = LinearLayer::uniform(model_dim, model_dim, &mut rng, bound);
        let ffn_out = LinearLayer::uniform(model_dim, model_dim, &mut rng, bound);
        let mut ln = || LayerNormParams {
            scale: (0..model_dim).map(|_| 1.0 + rng.gen_range(-bound..bound)).collect(),
            shift: (0..model_dim).map(|_| rng.gen_range(-bound..bound)).collect(),
        };
        let ln_pre = ln();
        let ln_post = ln();
        Self {
            fc_embed,
            fc_merge,
            ffn_in,
            ffn_out,
            ln_pre,
            ln_post,
        }
    }

    pub fn zeros(embed_dim: usize, model_dim: usize) -> Self {
        Self {
            fc_embed: LinearLayer::zeros(STATE_DIM, embed_dim),
            fc_merge: LinearLayer::zeros(embed_dim, model_dim),
            ffn_in: LinearLayer::zeros(model_dim, model_dim),
            ffn_out: LinearLayer::zeros(model_dim, model_dim),
            ln_pre: LayerNormParams {
                scale: vec![0.0; model_dim],
                shift: vec![0.0; model_dim],
            },
            ln_post: LayerNormParams {
                scale: vec![0.0; model_dim],
                shift: vec![0.0; model_dim],
            },
        }
    }

    pub fn embed_dim(&self) -> usize {
        self.fc_embed.out_dim()
    }

    pub fn model_dim(&self) -> usize {
        self.fc_merge.out_dim()
    }

    /// Checks that the layer shapes chain together.
    pub fn validate(&self) -> Result<()> {
        let e = self.embed_dim();
        let m = self.model_dim();
        if e == 0 || m == 0 {
            return Err(Error::Shape("empty layer".into()));
        }
        self.fc_embed.validate("fc_embed", STATE_DIM, e)?;
        self.fc_merge.validate("fc_merge", e, m)?;
        self.ffn_in.validate("ffn_in", m, m)?;
        self.ffn_out.validate("ffn_out", m, m)?;
        self.ln_pre.validate("ln_pre", m)?;
        self.ln_post.validate("ln_post", m)?;
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let w: Self = serde_json::from_str(s)?;
        w.validate()?;
        Ok(w)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Shared per-slot embedding.
    pub fn embed(&self, state: &[f64; STATE_DIM]) -> Vec<f64> {
        self.fc_embed.forward(state)
    }

    /// Merge projection, layer norms and feed-forward block for one
    /// aggregated embedding.
    pub fn project(&self, aggregated: &[f64]) -> Vec<f64> {
        let z = self.fc_merge.forward(aggregated);
        let normed = self.ln_pre.forward(&z);
        let hidden: Vec<f64> = self.ffn_in.forward(&normed).into_iter().map(|v| v.max(0.0)).collect();
        let ffn = self.ffn_out.forward(&hidden);
        let post = self.ln_post.forward(&ffn);
        post.iter().zip(&z).map(|(a, b)| a + b).collect()
    }

    /// Target embedding plus weighted neighbour embeddings.
    pub fn aggregate<'a>(
        &self,
        target: &[f64; STATE_DIM],
        neighbors: impl IntoIterator<Item = (f64, &'a [f64; STATE_DIM])>,
    ) -> Vec<f64> {
        let mut acc = self.embed(target);
        for (alpha, state) in neighbors {
            if alpha == 0.0 {
                continue;
            }
            for (a, z) in acc.iter_mut().zip(self.embed(state)) {
                *a += alpha * z;
            }
        }
        acc
    }
}

/// `T_h x model_dim` interaction embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionEmbedding {
    pub rows: Vec<Vec<f64>>,
}

impl InteractionEmbedding {
    pub fn is_finite(&self) -> bool {
        self.rows.iter().flatten().all(|v| v.is_finite())
    }
}

fn check_inputs(tensor: &InteractionTensor, attention: &AttentionMatrix) -> Result<()> {
    if tensor.history_len() != attention.history_len() {
        return Err(Error::Shape(format!(
            "tensor covers {} steps but attention covers {}",
            tensor.history_len(),
            attention.history_len()
        )));
    }
    for t in 0..tensor.history_len() {
        for cat in Category::ALL {
            if !tensor.is_populated(cat, t) && attention.get(cat, t) != 0.0 {
                return Err(Error::Shape(format!("attention weights masked {cat} at step {t}")));
            }
        }
    }
    Ok(())
}

/// Aggregated (pre-merge) embedding at step `t`.
pub fn aggregate_step(
    tensor: &InteractionTensor,
    attention: &AttentionMatrix,
    weights: &EncoderWeights,
    t: usize,
) -> Vec<f64> {
    weights.aggregate(
        tensor.target(t),
        Category::ALL
            .into_iter()
            .filter(|c| tensor.is_populated(*c, t))
            .map(|c| (attention.get(c, t), tensor.category(c, t))),
    )
}

pub fn encode_interactions(
    tensor: &InteractionTensor,
    attention: &AttentionMatrix,
    weights: &EncoderWeights,
) -> Result<InteractionEmbedding> {
    weights.validate()?;
    check_inputs(tensor, attention)?;
    let rows = (0..tensor.history_len())
        .map(|t| weights.project(&aggregate_step(tensor, attention, weights, t)))
        .collect();
    Ok(InteractionEmbedding { rows })
}
