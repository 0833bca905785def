//! Obstacle mazes between a spawn pose and a goal.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env::{overlapping_obstacle, BodyPose, Obstacle, RobotConfig, RobotState};
use crate::error::ScenarioError;
use crate::geom::Vec2;

pub const SPAWN_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub obstacles: Vec<Obstacle>,
    pub goal: Vec2,
    pub accept_radius: f64,
    pub spawn: BodyPose,
    pub seed: u64,
}

/// Grid maze description. Rows run perpendicular to the spawn-goal segment
/// and the grid is centred on its midpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MazeLayout {
    pub rows: usize,
    pub cols: usize,
    /// Base distance between neighbouring obstacle centres (m).
    pub spacing: f64,
    pub radius: f64,
    pub goal_distance: f64,
    /// Initial heading is drawn uniformly from `[0, max_deviation]` (deg)
    /// relative to the direction of the goal.
    pub max_deviation_deg: f64,
    /// Placement noise is a standard normal truncated to `(-bound, bound)`.
    pub noise_bound: f64,
    pub accept_radius: f64,
}

impl Default for MazeLayout {
    fn default() -> Self {
        Self::training()
    }
}

impl MazeLayout {
    pub fn training() -> Self {
        Self {
            rows: 3,
            cols: 3,
            spacing: 0.08,
            radius: 0.02,
            goal_distance: 1.5,
            max_deviation_deg: 60.0,
            noise_bound: 0.01,
            accept_radius: 0.1,
        }
    }

    pub fn test() -> Self {
        Self {
            rows: 5,
            cols: 6,
            goal_distance: 2.0,
            max_deviation_deg: 90.0,
            ..Self::training()
        }
    }

    /// Same spawn and goal geometry as the training maze, no obstacles.
    pub fn free() -> Self {
        Self {
            rows: 0,
            cols: 0,
            ..Self::training()
        }
    }

    pub fn grid_points(&self) -> Vec<Vec2> {
        let mid = Vec2::new(0.5 * self.goal_distance, 0.0);
        let mut pts = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                let x = (r as f64 - 0.5 * (self.rows as f64 - 1.0)) * self.spacing;
                let y = (c as f64 - 0.5 * (self.cols as f64 - 1.0)) * self.spacing;
                pts.push(mid + Vec2::new(x, y));
            }
        }
        pts
    }
}

fn truncated_normal(rng: &mut ChaCha8Rng, bound: f64) -> f64 {
    if bound <= 0.0 {
        return 0.0;
    }
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() < bound {
            return z;
        }
    }
}

/// Draws a maze from `seed`. Spawn collisions trigger a fresh draw, up to
/// [`SPAWN_ATTEMPTS`] times.
pub fn generate_scenario(layout: &MazeLayout, robot: &RobotConfig, seed: u64) -> Result<Scenario, ScenarioError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let goal = Vec2::new(layout.goal_distance, 0.0);
    for _ in 0..SPAWN_ATTEMPTS {
        let obstacles: Vec<Obstacle> = layout
            .grid_points()
            .into_iter()
            .map(|p| {
                let dx = truncated_normal(&mut rng, layout.noise_bound);
                let dy = truncated_normal(&mut rng, layout.noise_bound);
                Obstacle::new(p + Vec2::new(dx, dy), layout.radius)
            })
            .collect();
        let heading = rng.random_range(0.0..=layout.max_deviation_deg).to_radians();
        let spawn = BodyPose {
            position: Vec2::ZERO,
            heading,
        };
        let body = RobotState::straight(robot, spawn.position, spawn.heading);
        let goal_clear = obstacles.iter().all(|o| (goal - o.center).norm() > o.radius);
        if goal_clear && overlapping_obstacle(robot, &body, &obstacles).is_none() {
            return Ok(Scenario {
                obstacles,
                goal,
                accept_radius: layout.accept_radius,
                spawn,
                seed,
            });
        }
    }
    Err(ScenarioError::SpawnExhausted(SPAWN_ATTEMPTS))
}

pub fn generate_training_scenario(robot: &RobotConfig, seed: u64) -> Result<Scenario, ScenarioError> {
    generate_scenario(&MazeLayout::training(), robot, seed)
}

pub fn generate_test_scenario(robot: &RobotConfig, seed: u64) -> Result<Scenario, ScenarioError> {
    generate_scenario(&MazeLayout::test(), robot, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn training_maze_properties() {
        let robot = RobotConfig::default();
        let layout = MazeLayout::training();
        let a = generate_training_scenario(&robot, 11).unwrap();
        assert_eq!(a, generate_training_scenario(&robot, 11).unwrap());
        assert_ne!(a, generate_training_scenario(&robot, 12).unwrap());
        assert_eq!(a.obstacles.len(), 9);
        assert_eq!((a.goal - a.spawn.position).norm(), 1.5);
        for (o, p) in a.obstacles.iter().zip(layout.grid_points()) {
            let d = o.center - p;
            assert!(d.x.abs() < 0.01 && d.y.abs() < 0.01);
        }
        assert!((0.0..=60f64.to_radians()).contains(&a.spawn.heading));
    }

    #[test]
    fn test_maze_properties() {
        let robot = RobotConfig::default();
        let s = generate_test_scenario(&robot, 3).unwrap();
        assert_eq!(s.obstacles.len(), 30);
        assert!(s.obstacles.iter().all(|o| o.radius == 0.02));
        assert_eq!((s.goal - s.spawn.position).norm(), 2.0);
        assert!((0.0..=90f64.to_radians()).contains(&s.spawn.heading));
    }

    #[test]
    fn impossible_layout_exhausts_attempts() {
        let robot = RobotConfig::default();
        let layout = MazeLayout {
            rows: 1,
            cols: 1,
            goal_distance: 0.0,
            radius: 0.5,
            ..MazeLayout::training()
        };
        assert_eq!(
            generate_scenario(&layout, &robot, 0).unwrap_err(),
            ScenarioError::SpawnExhausted(SPAWN_ATTEMPTS)
        );
    }
}
