//! Planar vectors, the constant-acceleration motion model, closest point of
//! approach between two CA rollouts, and rigid frame transforms.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::AgentState;

/// Below this squared relative acceleration the closest-approach problem is
/// treated as linear; below it for the squared relative velocity as static.
pub const DEGENERATE_EPS: f64 = 1e-12;

/// Stationary points whose squared distances differ by less than this, relative
/// to the current squared distance, count as equally close.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    /// Counter-clockwise rotation by `angle` radians.
    #[inline]
    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    #[inline]
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

/// Upper bounds used to reject corrupted kinematic rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SanityLimits {
    pub max_speed: f64,
    pub max_accel: f64,
}

impl Default for SanityLimits {
    fn default() -> Self {
        Self {
            max_speed: 100.0,
            max_accel: 50.0,
        }
    }
}

/// Position, velocity and acceleration of one agent: the input of the
/// constant-acceleration model.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CaState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub acceleration: Vec2,
}

impl CaState {
    pub const fn new(position: Vec2, velocity: Vec2, acceleration: Vec2) -> Self {
        Self {
            position,
            velocity,
            acceleration,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite() && self.velocity.is_finite() && self.acceleration.is_finite()
    }

    /// Checks finiteness and the speed/acceleration magnitude limits.
    pub fn validate(&self, limits: &SanityLimits) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::InvalidInput("non-finite kinematic state".into()));
        }
        let speed = self.velocity.norm();
        if speed > limits.max_speed {
            return Err(Error::InvalidInput(format!(
                "speed {speed} m/s exceeds limit {} m/s",
                limits.max_speed
            )));
        }
        let accel = self.acceleration.norm();
        if accel > limits.max_accel {
            return Err(Error::InvalidInput(format!(
                "acceleration {accel} m/s^2 exceeds limit {} m/s^2",
                limits.max_accel
            )));
        }
        Ok(())
    }

    /// Position after `tau` seconds without validation.
    #[inline]
    pub fn position_at(&self, tau: f64) -> Vec2 {
        self.position + self.velocity * tau + self.acceleration * (0.5 * tau * tau)
    }

    /// Velocity after `tau` seconds under constant acceleration.
    #[inline]
    pub fn velocity_at(&self, tau: f64) -> Vec2 {
        self.velocity + self.acceleration * tau
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(angle: f64) -> f64 {
    let w = angle.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Origin and x-axis direction of a target-centred coordinate frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub origin: Vec2,
    heading: f64,
}

impl Pose {
    pub fn new(origin: Vec2, heading: f64) -> Self {
        Self {
            origin,
            heading: wrap_angle(heading),
        }
    }

    pub fn heading(&self) -> f64 {
        self.heading
    }
}

/// Constant-acceleration rollout: `p + v*tau + a*tau^2/2`.
pub fn ca_propagate(state: &CaState, tau: f64) -> Result<Vec2> {
    if !state.is_finite() {
        return Err(Error::InvalidInput("non-finite CA state".into()));
    }
    if !tau.is_finite() || tau < 0.0 {
        return Err(Error::InvalidInput(format!(
            "propagation time must be finite and non-negative, got {tau}"
        )));
    }
    Ok(state.position_at(tau))
}

/// Squared distance between the two CA rollouts after `tau` seconds.
#[inline]
pub fn relative_sq_distance(target: &CaState, other: &CaState, tau: f64) -> f64 {
    (other.position_at(tau) - target.position_at(tau)).norm_squared()
}

/// Real roots of `c3*t^3 + c2*t^2 + c1*t + c0` with `c3 != 0`, ascending.
///
/// Trigonometric form for three real roots, Cardano otherwise, each root
/// polished by Newton steps on the undepressed polynomial.
pub fn real_cubic_roots(c3: f64, c2: f64, c1: f64, c0: f64) -> Vec<f64> {
    debug_assert!(c3 != 0.0);
    let b = c2 / c3;
    let c = c1 / c3;
    let d = c0 / c3;

    // t = x + b/3 gives t^3 + p t + q = 0.
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);

    let mut roots = Vec::with_capacity(3);
    if p == 0.0 && q == 0.0 {
        roots.push(-shift);
    } else if disc > 0.0 {
        let s = disc.sqrt();
        let a = -q.signum() * (q.abs() / 2.0 + s).cbrt();
        let t = if a != 0.0 { a - p / (3.0 * a) } else { 0.0 };
        roots.push(t - shift);
    } else {
        // p < 0 here.
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = ((3.0 * q) / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        for k in 0..3 {
            let t = m * (theta - 2.0 * PI * k as f64 / 3.0).cos();
            roots.push(t - shift);
        }
    }

    for r in roots.iter_mut() {
        *r = newton_polish(*r, c3, c2, c1, c0);
    }
    roots.sort_by(f64::total_cmp);
    roots
}

fn newton_polish(mut x: f64, c3: f64, c2: f64, c1: f64, c0: f64) -> f64 {
    let eval = |x: f64| ((c3 * x + c2) * x + c1) * x + c0;
    for _ in 0..4 {
        let f = eval(x);
        let df = (3.0 * c3 * x + 2.0 * c2) * x + c1;
        if df == 0.0 || !f.is_finite() {
            break;
        }
        let next = x - f / df;
        // Only accept steps that do not increase the residual.
        if !next.is_finite() || eval(next).abs() > f.abs() {
            break;
        }
        x = next;
    }
    x
}

/// Unconstrained global minimiser over all real `tau` of the squared distance
/// between the two CA rollouts.
///
/// With `dp, dv, da` the relative position, velocity and acceleration
/// (other minus target), the stationary points of the quartic distance are
/// the real roots of
/// `|da|^2/2 t^3 + 3/2 (dv.da) t^2 + (|dv|^2 + dp.da) t + dp.dv`.
/// A pair whose distance never changes returns 0. Equally close minima resolve
/// to the earliest non-negative one, otherwise to the latest negative one.
pub fn closest_approach_time(target: &CaState, other: &CaState) -> f64 {
    let dp = other.position - target.position;
    let dv = other.velocity - target.velocity;
    let da = other.acceleration - target.acceleration;

    let aa = da.norm_squared();
    let vv = dv.norm_squared();
    if aa < DEGENERATE_EPS {
        if vv < DEGENERATE_EPS {
            return 0.0;
        }
        return -dp.dot(dv) / vv;
    }

    let roots = real_cubic_roots(0.5 * aa, 1.5 * dv.dot(da), vv + dp.dot(da), dp.dot(dv));
    let q = |t: f64| (dp + dv * t + da * (0.5 * t * t)).norm_squared();
    let best_q = roots.iter().map(|&r| q(r)).fold(f64::INFINITY, f64::min);
    // Collinear approaches cross zero distance twice; such ties go to the
    // earliest non-negative time, else the one nearest to now.
    let tie = TIE_TOLERANCE * dp.norm_squared().max(1.0);
    roots
        .iter()
        .copied()
        .filter(|&r| q(r) <= best_q + tie)
        .min_by(|a, b| (*a < 0.0, a.abs()).partial_cmp(&(*b < 0.0, b.abs())).expect("finite roots"))
        .expect("a cubic has a real root")
}

/// Restricts `tau` to `[0, horizon]`.
pub fn clamp_tau(tau: f64, horizon: f64) -> f64 {
    if tau < 0.0 {
        0.0
    } else if tau > horizon {
        horizon
    } else {
        tau
    }
}

/// Distance between both CA rollouts after `tau_clamped` seconds.
pub fn closest_distance(target: &CaState, other: &CaState, tau_clamped: f64) -> f64 {
    relative_sq_distance(target, other, tau_clamped).sqrt()
}

/// Expresses `state` in the frame whose origin and x-axis are given by `frame`.
pub fn to_relative_frame(state: &AgentState, frame: &Pose) -> AgentState {
    let rot = -frame.heading();
    AgentState {
        position: (state.position - frame.origin).rotated(rot),
        velocity: state.velocity.rotated(rot),
        acceleration: state.acceleration.rotated(rot),
        heading: wrap_angle(state.heading + rot),
        ..state.clone()
    }
}

/// Inverse of [`to_relative_frame`].
pub fn from_relative_frame(state: &AgentState, frame: &Pose) -> AgentState {
    let rot = frame.heading();
    AgentState {
        position: state.position.rotated(rot) + frame.origin,
        velocity: state.velocity.rotated(rot),
        acceleration: state.acceleration.rotated(rot),
        heading: wrap_angle(state.heading + rot),
        ..state.clone()
    }
}
