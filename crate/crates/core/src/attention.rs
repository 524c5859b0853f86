//! Closeness index between two agents and the per-timestep physical attention
//! weights derived from it.
//!
//! For a target and one neighbour, both rolled out with the CA model:
//!
//! ```text
//! tau*  = argmin_tau |CA(target, tau) - CA(other, tau)|
//! tau_c = clamp(tau*, 0, T)
//! d_f   = |CA(target, tau_c) - CA(other, tau_c)|
//! c     = (1 / d) * (d - d_f + eps) / (tau_c + eps)
//! ```
//!
//! where `d` is the current distance. Closeness values of the populated
//! categories are normalised per timestep to sum to one.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{clamp_tau, closest_approach_time, closest_distance, CaState};
use crate::scene::kinematics_from_array;
use crate::selection::{Category, InteractionTensor, NUM_CATEGORIES};

/// Which factors of the closeness index are used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefficientVariant {
    /// Inverse current distance only.
    A,
    /// Normalised approach rate only.
    B,
    /// Product of both.
    #[default]
    Ab,
}

impl std::str::FromStr for CoefficientVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Self::A),
            "b" => Ok(Self::B),
            "ab" => Ok(Self::Ab),
            other => Err(Error::InvalidInput(format!(
                "unknown coefficient variant {other:?} (expected a, b or ab)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientConfig {
    /// Upper bound on the time to closest approach, seconds.
    pub horizon: f64,
    pub epsilon: f64,
    pub variant: CoefficientVariant,
}

impl Default for CoefficientConfig {
    fn default() -> Self {
        Self {
            horizon: 30.0,
            epsilon: 1.0,
            variant: CoefficientVariant::Ab,
        }
    }
}

impl CoefficientConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Intermediate quantities of one closeness evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Closeness {
    pub tau: f64,
    pub tau_clamped: f64,
    pub current_distance: f64,
    pub closest_distance: f64,
    pub value: f64,
}

pub fn closeness(target: &CaState, other: &CaState, cfg: &CoefficientConfig) -> Result<Closeness> {
    if !target.is_finite() || !other.is_finite() {
        return Err(Error::InvalidInput("non-finite kinematic state".into()));
    }
    let current_distance = target.position.distance(other.position);
    if current_distance == 0.0 {
        return Err(Error::CollocatedAgents);
    }
    let tau = closest_approach_time(target, other);
    let tau_clamped = clamp_tau(tau, cfg.horizon);
    let closest = closest_distance(target, other, tau_clamped);

    let part_a = 1.0 / current_distance;
    let part_b = (current_distance - closest + cfg.epsilon) / (tau_clamped + cfg.epsilon);
    let value = match cfg.variant {
        CoefficientVariant::A => part_a,
        CoefficientVariant::B => part_b,
        CoefficientVariant::Ab => part_a * part_b,
    };
    Ok(Closeness {
        tau,
        tau_clamped,
        current_distance,
        closest_distance: closest,
        value,
    })
}

/// Closeness index of `other` with respect to `target`. May be negative for
/// agents receding faster than `epsilon` allows for.
pub fn closeness_index(target: &CaState, other: &CaState, cfg: &CoefficientConfig) -> Result<f64> {
    closeness(target, other, cfg).map(|c| c.value)
}

/// Normalises per-category closeness values; `None` marks an empty category.
///
/// If nothing is populated or every populated value is zero, all weights
/// are zero.
pub fn normalize_scores(c: [Option<f64>; NUM_CATEGORIES]) -> Result<[f64; NUM_CATEGORIES]> {
    let mut sum = 0.0;
    for v in c.iter().flatten() {
        if !(*v >= 0.0) || !v.is_finite() {
            return Err(Error::InvalidInput(format!(
                "closeness must be finite and non-negative, got {v}"
            )));
        }
        sum += v;
    }
    let mut alpha = [0.0; NUM_CATEGORIES];
    if sum > 0.0 {
        for (a, v) in alpha.iter_mut().zip(c) {
            *a = v.map_or(0.0, |v| v / sum);
        }
    }
    Ok(alpha)
}

/// Physical attention weights, one row per category (SL, FL, FF, ML) and one
/// column per observed timestep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionMatrix {
    history_len: usize,
    /// Row-major `NUM_CATEGORIES x history_len`.
    alpha: Vec<f64>,
}

impl AttentionMatrix {
    pub fn zeros(history_len: usize) -> Self {
        Self {
            history_len,
            alpha: vec![0.0; NUM_CATEGORIES * history_len],
        }
    }

    pub fn history_len(&self) -> usize {
        self.history_len
    }

    pub fn get(&self, cat: Category, t: usize) -> f64 {
        self.alpha[cat.index() * self.history_len + t]
    }

    pub fn set(&mut self, cat: Category, t: usize, v: f64) {
        self.alpha[cat.index() * self.history_len + t] = v;
    }

    pub fn row(&self, cat: Category) -> &[f64] {
        let start = cat.index() * self.history_len;
        &self.alpha[start..start + self.history_len]
    }

    pub fn column(&self, t: usize) -> [f64; NUM_CATEGORIES] {
        Category::ALL.map(|c| self.get(c, t))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.alpha
    }

    pub fn swap_rows(&mut self, a: Category, b: Category) {
        for t in 0..self.history_len {
            let (va, vb) = (self.get(a, t), self.get(b, t));
            self.set(a, t, vb);
            self.set(b, t, va);
        }
    }

    /// Checks that populated columns of `tensor` sum to one within `tol` and
    /// masked entries are zero.
    pub fn check_stochastic(&self, tensor: &InteractionTensor, tol: f64) -> Result<()> {
        for t in 0..self.history_len {
            let col = self.column(t);
            if col.iter().any(|v| *v < 0.0 || !v.is_finite()) {
                return Err(Error::Invariant(format!("column {t} has an invalid weight")));
            }
            for cat in Category::ALL {
                if !tensor.is_populated(cat, t) && self.get(cat, t) != 0.0 {
                    return Err(Error::Invariant(format!("masked {cat} at column {t} has weight")));
                }
            }
            let sum: f64 = col.iter().sum();
            if sum != 0.0 && (sum - 1.0).abs() > tol {
                return Err(Error::Invariant(format!("column {t} sums to {sum}")));
            }
        }
        Ok(())
    }

    /// CSV with one row per category and one column per timestep.
    pub fn to_csv(&self, timesteps: &[i64]) -> String {
        let mut out = String::from("category");
        for t in timesteps {
            out.push_str(&format!(",{t}"));
        }
        out.push('\n');
        for cat in Category::ALL {
            out.push_str(cat.short_name());
            for v in self.row(cat) {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Attention weights for every timestep of an interaction tensor.
///
/// Negative closeness (a strongly receding neighbour) is clamped to zero
/// before normalisation.
pub fn attention_matrix(tensor: &InteractionTensor, cfg: &CoefficientConfig) -> Result<AttentionMatrix> {
    cfg.validate()?;
    let h = tensor.history_len();
    let mut out = AttentionMatrix::zeros(h);
    for t in 0..h {
        let target = kinematics_from_array(tensor.target(t));
        let mut c = [None; NUM_CATEGORIES];
        for cat in Category::ALL {
            if !tensor.is_populated(cat, t) {
                continue;
            }
            let other = kinematics_from_array(tensor.category(cat, t));
            let value = closeness_index(&target, &other, cfg).map_err(|e| match e {
                Error::CollocatedAgents => Error::CollocatedAt {
                    timestep: tensor.timesteps()[t],
                    category: cat,
                },
                e => e,
            })?;
            if value < 0.0 {
                debug!("clamping negative closeness {value} for {cat} at step {t}");
            }
            c[cat.index()] = Some(value.max(0.0));
        }
        for (cat, a) in Category::ALL.into_iter().zip(normalize_scores(c)?) {
            out.set(cat, t, a);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;
    use approx::assert_abs_diff_eq;

    fn still(x: f64, y: f64) -> CaState {
        CaState::new(Vec2::new(x, y), Vec2::ZERO, Vec2::ZERO)
    }

    #[test]
    fn edge_case_distance_dominates() {
        // Static pair at distance 2: tau = 0, d_f = d.
        let c = closeness(&still(0., 0.), &still(2., 0.), &CoefficientConfig::default()).unwrap();
        assert_eq!(c.tau_clamped, 0.0);
        assert_eq!(c.closest_distance, 2.0);
        assert_abs_diff_eq!(c.value, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn head_on_closure() {
        let other = CaState::new(Vec2::new(10., 0.), Vec2::new(-1., 0.), Vec2::ZERO);
        let c = closeness(&still(0., 0.), &other, &CoefficientConfig::default()).unwrap();
        assert_abs_diff_eq!(c.tau_clamped, 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.value, 0.1, epsilon = 1e-12);
    }

    #[test]
    fn receding_pair() {
        // dp=(10,0), dv=(1,0): tau* = -10 -> 0, d_f = 10, c = (1/10)(1/1).
        let other = CaState::new(Vec2::new(10., 0.), Vec2::new(1., 0.), Vec2::ZERO);
        let c = closeness(&still(0., 0.), &other, &CoefficientConfig::default()).unwrap();
        assert_eq!(c.tau, -10.0);
        assert_eq!(c.tau_clamped, 0.0);
        assert_abs_diff_eq!(c.value, 0.1, epsilon = 1e-12);
    }

    #[test]
    fn receding_with_acceleration_can_go_negative() {
        // Global closest approach near t=209.5 s, clamped to T=30, where the
        // offset is (10 + 30 - 4.5, -2.095 + 0.3).
        let other = CaState::new(Vec2::new(10., -2.095), Vec2::new(1., 0.01), Vec2::new(-0.01, 0.));
        let c = closeness(&still(0., 0.), &other, &CoefficientConfig::default()).unwrap();
        assert!(c.tau > 200.0);
        assert_eq!(c.tau_clamped, 30.0);
        let d: f64 = 10f64.hypot(-2.095);
        let d_f: f64 = 35.5f64.hypot(-1.795);
        assert_abs_diff_eq!(c.closest_distance, d_f, epsilon = 1e-9);
        assert_abs_diff_eq!(c.value, (1.0 / d) * (d - d_f + 1.0) / 31.0, epsilon = 1e-12);
        assert!(c.value < 0.0);
    }

    #[test]
    fn collocated_is_an_error() {
        let r = closeness_index(&still(1., 1.), &still(1., 1.), &CoefficientConfig::default());
        assert!(matches!(r, Err(Error::CollocatedAgents)));
    }

    #[test]
    fn variants() {
        let other = CaState::new(Vec2::new(10., 0.), Vec2::new(-1., 0.), Vec2::ZERO);
        let mut cfg = CoefficientConfig { variant: CoefficientVariant::A, ..Default::default() };
        assert_abs_diff_eq!(closeness_index(&still(0., 0.), &other, &cfg).unwrap(), 0.1);
        cfg.variant = CoefficientVariant::B;
        assert_abs_diff_eq!(closeness_index(&still(0., 0.), &other, &cfg).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!("AB".parse::<CoefficientVariant>().unwrap(), CoefficientVariant::Ab);
        assert!("c".parse::<CoefficientVariant>().is_err());
    }

    #[test]
    fn normalization() {
        assert_eq!(
            normalize_scores([Some(1.0); 4]).unwrap(),
            [0.25, 0.25, 0.25, 0.25]
        );
        assert_eq!(
            normalize_scores([Some(3.0), Some(1.0), None, None]).unwrap(),
            [0.75, 0.25, 0.0, 0.0]
        );
        assert_eq!(normalize_scores([None; 4]).unwrap(), [0.0; 4]);
        assert_eq!(normalize_scores([Some(0.0), None, Some(0.0), None]).unwrap(), [0.0; 4]);
        assert!(normalize_scores([Some(-0.1), None, None, None]).is_err());
    }

    #[test]
    fn distance_monotonicity() {
        let cfg = CoefficientConfig::default();
        let near = closeness_index(&still(0., 0.), &still(5., 0.), &cfg).unwrap();
        let far = closeness_index(&still(0., 0.), &still(8., 0.), &cfg).unwrap();
        assert!(near > far);
    }

    #[test]
    fn faster_approach_beats_proximity() {
        let cfg = CoefficientConfig::default();
        let target = still(0., 0.);
        let near_slow = CaState::new(Vec2::new(10., 0.), Vec2::new(-0.5, 0.), Vec2::ZERO);
        let far_fast = CaState::new(Vec2::new(0., 12.), Vec2::new(0., -6.), Vec2::ZERO);
        let a = closeness_index(&target, &near_slow, &cfg).unwrap();
        let b = closeness_index(&target, &far_fast, &cfg).unwrap();
        assert!(b > a, "fast {b} vs slow {a}");
    }

    #[test]
    fn csv_layout() {
        let mut m = AttentionMatrix::zeros(2);
        m.set(Category::SameLaneLeading, 1, 1.0);
        let csv = m.to_csv(&[-1, 0]);
        assert_eq!(csv, "category,-1,0\nSL,0,1\nFL,0,0\nFF,0,0\nML,0,0\n");
    }
}
