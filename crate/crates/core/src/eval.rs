//! Kinematic baseline predictors, the reparameterised decode, training losses
//! and displacement metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::scene::AgentState;

/// Weight of the diversity term in the combined loss.
pub const DEFAULT_LAMBDA: f64 = 0.02;

/// `K` predicted trajectories of `T_f` points each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub trajectories: Vec<Vec<Vec2>>,
}

impl PredictionSet {
    pub fn new(trajectories: Vec<Vec<Vec2>>) -> Result<Self> {
        let set = Self { trajectories };
        set.validate()?;
        Ok(set)
    }

    pub fn single(trajectory: Vec<Vec2>) -> Self {
        Self {
            trajectories: vec![trajectory],
        }
    }

    pub fn modes(&self) -> usize {
        self.trajectories.len()
    }

    pub fn horizon(&self) -> usize {
        self.trajectories.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trajectories.is_empty() {
            return Err(Error::InvalidInput("prediction set has no modes".into()));
        }
        let h = self.horizon();
        if self.trajectories.iter().any(|m| m.len() != h) {
            return Err(Error::Shape("modes have different horizons".into()));
        }
        if !self.trajectories.iter().flatten().all(|p| p.is_finite()) {
            return Err(Error::InvalidInput("non-finite predicted point".into()));
        }
        Ok(())
    }

    /// The same set with its modes repeated until there are `k` of them.
    pub fn repeated_to(&self, k: usize) -> Self {
        let trajectories = self.trajectories.iter().cycle().take(k.max(1)).cloned().collect();
        Self { trajectories }
    }

    fn check_against(&self, gt: &[Vec2]) -> Result<()> {
        self.validate()?;
        if gt.len() != self.horizon() || gt.is_empty() {
            return Err(Error::Shape(format!(
                "prediction horizon {} does not match ground truth length {}",
                self.horizon(),
                gt.len()
            )));
        }
        Ok(())
    }
}

/// Mean, standard deviation and sample for `mu + sigma * z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub mu: Vec<Vec<Vec2>>,
    pub sigma: Vec<Vec<f64>>,
    pub z: Vec<Vec<Vec2>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParams {
    pub lambda: f64,
}

impl Default for LossParams {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
        }
    }
}

fn last_state(history: &[AgentState]) -> Result<&AgentState> {
    history
        .last()
        .ok_or_else(|| Error::InvalidInput("empty history".into()))
}

/// Constant-velocity rollout of the last observed state.
pub fn predict_cv(history: &[AgentState], horizon: usize, dt: f64) -> Result<PredictionSet> {
    let last = last_state(history)?;
    let traj = (1..=horizon)
        .map(|k| last.position + last.velocity * (k as f64 * dt))
        .collect();
    Ok(PredictionSet::single(traj))
}

/// Constant-acceleration rollout of the last observed state.
pub fn predict_ca(history: &[AgentState], horizon: usize, dt: f64) -> Result<PredictionSet> {
    let kin = last_state(history)?.kinematics();
    let traj = (1..=horizon).map(|k| kin.position_at(k as f64 * dt)).collect();
    Ok(PredictionSet::single(traj))
}

/// `mu + sigma * z`, with `sigma` shared by both coordinates.
pub fn reparameterize(g: &GaussianParams) -> Result<PredictionSet> {
    if g.mu.len() != g.sigma.len() || g.mu.len() != g.z.len() {
        return Err(Error::Shape("mu, sigma and z disagree on the number of modes".into()));
    }
    let mut trajectories = Vec::with_capacity(g.mu.len());
    for ((mu, sigma), z) in g.mu.iter().zip(&g.sigma).zip(&g.z) {
        if mu.len() != sigma.len() || mu.len() != z.len() {
            return Err(Error::Shape("mu, sigma and z disagree on the horizon".into()));
        }
        if sigma.iter().any(|s| *s < 0.0) {
            return Err(Error::InvalidInput("negative sigma".into()));
        }
        trajectories.push(
            mu.iter()
                .zip(sigma)
                .zip(z)
                .map(|((m, s), z)| *m + *z * *s)
                .collect(),
        );
    }
    PredictionSet::new(trajectories)
}

fn mode_errors<'a>(mode: &'a [Vec2], gt: &'a [Vec2]) -> impl Iterator<Item = f64> + 'a {
    mode.iter().zip(gt.iter()).map(|(p, y)| p.distance(*y))
}

/// Winner-takes-all reconstruction loss: smallest summed error over modes,
/// divided by the horizon.
pub fn loss_distance(pred: &PredictionSet, gt: &[Vec2]) -> Result<f64> {
    pred.check_against(gt)?;
    let best = pred
        .trajectories
        .iter()
        .map(|m| mode_errors(m, gt).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    Ok(best / gt.len() as f64)
}

/// Diversity loss `sum_k sum_t |y_hat - y| / (sigma^2 K T_f) + ln sigma^2`,
/// with `sigma` supplied by the caller.
pub fn loss_diversity(pred: &PredictionSet, gt: &[Vec2], sigma: f64) -> Result<f64> {
    pred.check_against(gt)?;
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidInput(format!("sigma must be positive, got {sigma}")));
    }
    let total: f64 = pred.trajectories.iter().map(|m| mode_errors(m, gt).sum::<f64>()).sum();
    let var = sigma * sigma;
    Ok(total / (var * pred.modes() as f64 * gt.len() as f64) + var.ln())
}

/// `loss_distance + lambda * loss_diversity`.
pub fn loss_total(pred: &PredictionSet, gt: &[Vec2], sigma: f64, params: &LossParams) -> Result<f64> {
    if !(params.lambda >= 0.0) {
        return Err(Error::InvalidInput("lambda must be non-negative".into()));
    }
    Ok(loss_distance(pred, gt)? + params.lambda * loss_diversity(pred, gt, sigma)?)
}

pub fn min_ade(pred: &PredictionSet, gt: &[Vec2]) -> Result<f64> {
    pred.check_against(gt)?;
    let n = gt.len() as f64;
    Ok(pred
        .trajectories
        .iter()
        .map(|m| mode_errors(m, gt).sum::<f64>() / n)
        .fold(f64::INFINITY, f64::min))
}

pub fn min_fde(pred: &PredictionSet, gt: &[Vec2]) -> Result<f64> {
    pred.check_against(gt)?;
    let last = gt[gt.len() - 1];
    Ok(pred
        .trajectories
        .iter()
        .map(|m| m[m.len() - 1].distance(last))
        .fold(f64::INFINITY, f64::min))
}

fn check_unimodal(preds: &[PredictionSet], gts: &[Vec<Vec2>]) -> Result<()> {
    if preds.len() != gts.len() {
        return Err(Error::Shape(format!("{} predictions for {} ground truths", preds.len(), gts.len())));
    }
    if preds.is_empty() {
        return Err(Error::InvalidInput("no samples".into()));
    }
    for (p, g) in preds.iter().zip(gts) {
        p.check_against(g)?;
        if p.modes() != 1 {
            return Err(Error::InvalidInput("RMSE expects unimodal predictions".into()));
        }
    }
    Ok(())
}

/// Root mean squared displacement over all samples and steps.
pub fn rmse(preds: &[PredictionSet], gts: &[Vec<Vec2>]) -> Result<f64> {
    check_unimodal(preds, gts)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (p, g) in preds.iter().zip(gts) {
        for (a, b) in p.trajectories[0].iter().zip(g) {
            sum += (*a - *b).norm_squared();
            count += 1;
        }
    }
    Ok((sum / count as f64).sqrt())
}

/// RMSE evaluated at each whole-second horizon `1 s, 2 s, ...` that the
/// prediction reaches, using the step whose time is closest to that horizon.
pub fn rmse_by_horizon(preds: &[PredictionSet], gts: &[Vec<Vec2>], dt: f64) -> Result<Vec<(f64, f64)>> {
    check_unimodal(preds, gts)?;
    if !(dt > 0.0) {
        return Err(Error::InvalidInput("dt must be positive".into()));
    }
    let horizon = preds[0].horizon();
    let seconds = (horizon as f64 * dt + 1e-9).floor() as usize;
    let mut out = Vec::with_capacity(seconds);
    for s in 1..=seconds {
        let step = ((s as f64 / dt).round() as usize).clamp(1, horizon) - 1;
        let mut sum = 0.0;
        for (p, g) in preds.iter().zip(gts) {
            sum += (p.trajectories[0][step] - g[step]).norm_squared();
        }
        out.push((s as f64, (sum / preds.len() as f64).sqrt()));
    }
    Ok(out)
}
