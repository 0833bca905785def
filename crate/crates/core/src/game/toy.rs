//! Small games with known answers, used to check the learning machinery.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ControlMemory, GameEnv, JointControl, Transition};
use crate::error::GameError;
use crate::geom::Vec2;
use crate::reward::{step_reward, FieldParams};

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// One-shot 2x2 game. Each player picks action 1 when the first component
/// of its raw action is positive, so with a Gaussian head of mean `mu` and
/// deviation `sigma` the marginal probability of action 1 is
/// `normal_cdf(mu / sigma)`. The regulator always acts.
#[derive(Debug, Clone)]
pub struct MatrixGame {
    /// `payoff[controller][regulator]`.
    pub payoff: [[f64; 2]; 2],
    done: bool,
}

impl MatrixGame {
    pub fn new(payoff: [[f64; 2]; 2]) -> Self {
        Self { payoff, done: false }
    }

    /// Both players are paid only when both choose action 1.
    pub fn coordination() -> Self {
        Self::new([[0.0, 0.0], [0.0, 1.0]])
    }

    pub fn choice(action: &[f64]) -> usize {
        usize::from(action[0] > 0.0)
    }
}

impl GameEnv for MatrixGame {
    fn observation_width(&self) -> usize {
        1
    }

    fn controller_width(&self) -> usize {
        1
    }

    fn action_width(&self) -> usize {
        1
    }

    fn observe(&self, _: &ControlMemory) -> Vec<f64> {
        vec![1.0]
    }

    fn triggered(&self) -> bool {
        true
    }

    fn step(&mut self, control: &JointControl<'_>) -> Result<Transition, GameError> {
        if self.done {
            return Err(GameError::InvalidConfig("matrix game already played".into()));
        }
        self.done = true;
        let c = Self::choice(control.controller);
        let r = control.regulator.map_or(0, Self::choice);
        Ok(Transition {
            reward: self.payoff[c][r],
            terminal: true,
            truncated: false,
        })
    }
}

/// Velocity-commanded point in the plane, rewarded by the potential-field
/// reward on its way to a goal. Observation `[dx, dy, vx, vy]` with `d` the
/// offset to the goal. There are no obstacles, so the regulator never acts.
#[derive(Debug, Clone)]
pub struct PointMass {
    pub position: Vec2,
    pub velocity: Vec2,
    pub goal: Vec2,
    pub field: FieldParams,
    pub max_speed: f64,
    pub dt: f64,
    pub max_steps: usize,
    pub accept_radius: f64,
    steps: usize,
}

impl PointMass {
    /// Start at the origin, goal 1 m away in a direction drawn from `seed`.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let angle: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        Self {
            position: Vec2::ZERO,
            velocity: Vec2::ZERO,
            goal: Vec2::new(angle.cos(), angle.sin()),
            field: FieldParams::default(),
            max_speed: 0.5,
            dt: 0.1,
            max_steps: 100,
            accept_radius: 0.1,
            steps: 0,
        }
    }

    fn command(action: &[f64], max_speed: f64) -> Vec2 {
        Vec2::new(action[0].tanh(), action[1].tanh()) * max_speed
    }
}

impl GameEnv for PointMass {
    fn observation_width(&self) -> usize {
        4
    }

    fn controller_width(&self) -> usize {
        4
    }

    fn action_width(&self) -> usize {
        2
    }

    fn observe(&self, _: &ControlMemory) -> Vec<f64> {
        let d = self.goal - self.position;
        vec![d.x, d.y, self.velocity.x, self.velocity.y]
    }

    fn triggered(&self) -> bool {
        false
    }

    fn step(&mut self, control: &JointControl<'_>) -> Result<Transition, GameError> {
        let mut v = Self::command(control.controller, self.max_speed);
        if let Some(a2) = control.regulator {
            v = v * control.w1 + Self::command(a2, self.max_speed) * control.w2;
        }
        self.velocity = v;
        self.position += v * self.dt;
        self.steps += 1;
        let to_goal = self.goal - self.position;
        let theta = if v.norm() > 0.0 && to_goal.norm() > 0.0 {
            v.cross(to_goal).atan2(v.dot(to_goal))
        } else {
            0.0
        };
        let reward = step_reward(v, self.position, self.goal, theta, &[], &self.field)
            .map_err(|e| GameError::InvalidConfig(e.to_string()))?;
        let terminal = to_goal.norm() < self.accept_radius;
        Ok(Transition {
            reward,
            terminal,
            truncated: !terminal && self.steps >= self.max_steps,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.6448536269514722) - 0.95).abs() < 1e-12);
        assert!((normal_cdf(-1.0) + normal_cdf(1.0) - 1.0).abs() < 1e-15);
    }
}
