use serde::{Deserialize, Serialize};

use crate::error::EnvError;
use crate::geom::{wrap_angle, Vec2};

use super::RobotState;

/// Reported distance when there is no obstacle at all (m).
pub const NO_OBSTACLE_DISTANCE: f64 = 10.0;

/// Any contact force norm above this counts as contact (N).
pub const CONTACT_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: Vec2,
    pub radius: f64,
}

impl Obstacle {
    pub fn new(center: Vec2, radius: f64) -> Self {
        Self { center, radius }
    }
}

/// Unsigned sensor magnitudes, `[A, B, C, D]` per rigid body, head first.
///
/// A is front-left, B front-right, C rear-right, D rear-left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorReadings {
    pub per_body: Vec<[f64; 4]>,
}

impl SensorReadings {
    pub fn zeros(n_bodies: usize) -> Self {
        Self {
            per_body: vec![[0.0; 4]; n_bodies],
        }
    }

    /// Element-wise accumulation, used to average over a control period.
    pub fn accumulate(&mut self, other: &SensorReadings, scale: f64) {
        for (a, b) in self.per_body.iter_mut().zip(&other.per_body) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }
}

/// Signed diagonal-difference contact forces, `2 * n_bodies` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactForceVector(pub Vec<f64>);

impl ContactForceVector {
    pub fn zeros(n_bodies: usize) -> Self {
        Self(vec![0.0; 2 * n_bodies])
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|f| f * f).sum::<f64>().sqrt()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// `f[2i] = B - C` and `f[2i + 1] = D - A` for body `i` (zero-based).
pub fn sense_contacts(raw: &SensorReadings) -> Result<ContactForceVector, EnvError> {
    let mut f = Vec::with_capacity(2 * raw.per_body.len());
    for (body, &[a, b, c, d]) in raw.per_body.iter().enumerate() {
        if let Some(&value) = [a, b, c, d].iter().find(|v| !(**v >= 0.0)) {
            return Err(EnvError::NegativeReading { body, value });
        }
        f.push(b - c);
        f.push(d - a);
    }
    Ok(ContactForceVector(f))
}

/// Distance from the head centre to the nearest obstacle surface (clamped at
/// zero) and its bearing in the head frame, counter-clockwise positive.
pub fn nearest_obstacle(state: &RobotState, obstacles: &[Obstacle]) -> (f64, f64) {
    let head = state.head();
    obstacles
        .iter()
        .map(|o| ((o.center - head).norm() - o.radius, o))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(d, o)| {
            let bearing = wrap_angle((o.center - head).angle() - state.head_heading());
            (d.clamp(0.0, NO_OBSTACLE_DISTANCE), bearing)
        })
        .unwrap_or((NO_OBSTACLE_DISTANCE, 0.0))
}

/// True when any contact is sensed or an obstacle is closer than `range`.
pub fn event_trigger(f: &ContactForceVector, d_o: f64, range: f64) -> bool {
    f.norm() > CONTACT_EPSILON || d_o < range
}
