//! Artificial potential field and the shared three-term reward.
//!
//! The attracting well is `U_att = k_att/2 * |p - p_g|^2`; every obstacle
//! within `rho_0` of the robot contributes the bounded-support FIRAS term
//! `U_rep = k_rep/2 * (1/rho - 1/rho_0)^2`, with `rho` the distance to the
//! obstacle surface. The step reward credits the robot for moving along the
//! field and adds a goal bonus inside concentric shells around the goal.

use serde::{Deserialize, Serialize};

use crate::env::Obstacle;
use crate::error::RewardError;
use crate::geom::Vec2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldParams {
    pub k_att: f64,
    pub k_rep: f64,
    /// Repulsion cutoff distance (m).
    pub rho_0: f64,
    /// Goal shell radii, strictly descending (m).
    pub levels: Vec<f64>,
    /// Weights of the goal, attracting and repulsive terms.
    pub omega: [f64; 3],
    /// Surface distance below which the reward evaluates repulsion as if
    /// the robot were this far away (m). Zero disables the floor.
    pub min_clearance: f64,
}

impl Default for FieldParams {
    fn default() -> Self {
        Self {
            k_att: 1.0,
            k_rep: 0.01,
            rho_0: 0.2,
            levels: vec![0.2, 0.1, 0.05],
            omega: [100.0, 1.0, 1.0],
            min_clearance: 0.01,
        }
    }
}

impl FieldParams {
    pub fn validate(&self) -> Result<(), RewardError> {
        if !(self.k_att > 0.0 && self.k_rep > 0.0 && self.rho_0 > 0.0) {
            return Err(RewardError::InvalidParams("gains and cutoff must be positive".into()));
        }
        if self.levels.iter().any(|l| !(*l > 0.0)) || self.levels.windows(2).any(|w| w[1] >= w[0]) {
            return Err(RewardError::InvalidParams(
                "levels must be positive and strictly descending".into(),
            ));
        }
        if !(self.min_clearance >= 0.0 && self.min_clearance < self.rho_0) {
            return Err(RewardError::InvalidParams("min_clearance must lie in [0, rho_0)".into()));
        }
        if self.omega.iter().any(|w| !(*w >= 0.0)) {
            return Err(RewardError::InvalidParams("weights must be nonnegative".into()));
        }
        Ok(())
    }

    /// Largest possible magnitude of the goal term.
    pub fn goal_bound(&self) -> f64 {
        self.levels.iter().map(|l| 1.0 / l).sum()
    }
}

pub fn attract_potential(p: Vec2, goal: Vec2, k_att: f64) -> f64 {
    0.5 * k_att * (p - goal).norm_sq()
}

/// `-grad U_att = -k_att (p - p_g)`.
pub fn attract_force(p: Vec2, goal: Vec2, k_att: f64) -> Vec2 {
    (p - goal) * -k_att
}

fn surface_distance(p: Vec2, o: &Obstacle) -> (f64, Vec2) {
    let d = p - o.center;
    (d.norm() - o.radius, d)
}

/// Summed FIRAS potential of every obstacle within `rho_0`.
pub fn repulse_potential(p: Vec2, obstacles: &[Obstacle], k_rep: f64, rho_0: f64) -> Result<f64, RewardError> {
    let mut u = 0.0;
    for (index, o) in obstacles.iter().enumerate() {
        let (rho, _) = surface_distance(p, o);
        if rho <= 0.0 {
            return Err(RewardError::SingularRepulsion { index });
        }
        if rho <= rho_0 {
            let g = 1.0 / rho - 1.0 / rho_0;
            u += 0.5 * k_rep * g * g;
        }
    }
    Ok(u)
}

/// Summed FIRAS repulsion, pointing away from every obstacle within `rho_0`.
pub fn repulse_force(p: Vec2, obstacles: &[Obstacle], k_rep: f64, rho_0: f64) -> Result<Vec2, RewardError> {
    let mut f = Vec2::ZERO;
    for (index, o) in obstacles.iter().enumerate() {
        let (rho, d) = surface_distance(p, o);
        if rho <= 0.0 {
            return Err(RewardError::SingularRepulsion { index });
        }
        if rho <= rho_0 {
            // (p - p_o) scaled to length rho along the outward normal.
            let dir = d * (rho / d.norm());
            f += dir * (k_rep * (1.0 / rho - 1.0 / rho_0) / (rho * rho * rho));
        }
    }
    Ok(f)
}

/// `cos(theta_g) * sum_k 1/l_k * [rho_g < l_k]`.
pub fn goal_reward(theta_g: f64, rho_g: f64, levels: &[f64]) -> f64 {
    let shells: f64 = levels.iter().filter(|&&l| rho_g < l).map(|l| 1.0 / l).sum();
    theta_g.cos() * shells
}

/// The three reward components before weighting.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardTerms {
    pub goal: f64,
    pub attract: f64,
    pub repulse: f64,
}

impl RewardTerms {
    pub fn weighted(&self, omega: &[f64; 3]) -> f64 {
        omega[0] * self.goal + omega[1] * self.attract + omega[2] * self.repulse
    }
}

pub fn reward_terms(
    v: Vec2,
    p: Vec2,
    goal: Vec2,
    theta_g: f64,
    obstacles: &[Obstacle],
    params: &FieldParams,
) -> Result<RewardTerms, RewardError> {
    let rho_g = (p - goal).norm();
    Ok(RewardTerms {
        goal: goal_reward(theta_g, rho_g, &params.levels),
        attract: v.dot(attract_force(p, goal, params.k_att)),
        repulse: v.dot(floored_repulse_force(p, obstacles, params)?),
    })
}

/// Repulsion with every surface distance raised to at least `min_clearance`,
/// keeping each obstacle's direction. Penalty contact lets the head get
/// arbitrarily close to a surface, where the exact field is unbounded.
fn floored_repulse_force(p: Vec2, obstacles: &[Obstacle], params: &FieldParams) -> Result<Vec2, RewardError> {
    let mut f = Vec2::ZERO;
    for (index, o) in obstacles.iter().enumerate() {
        let d = p - o.center;
        let r = d.norm();
        if r == 0.0 {
            return Err(RewardError::SingularRepulsion { index });
        }
        let q = if r - o.radius < params.min_clearance {
            o.center + d * ((o.radius + params.min_clearance) / r)
        } else {
            p
        };
        f += repulse_force(q, std::slice::from_ref(o), params.k_rep, params.rho_0)
            .map_err(|_| RewardError::SingularRepulsion { index })?;
    }
    Ok(f)
}

/// `omega_1 R_goal + omega_2 v.F_att + omega_3 v.F_rep`, shared by both players.
pub fn step_reward(
    v: Vec2,
    p: Vec2,
    goal: Vec2,
    theta_g: f64,
    obstacles: &[Obstacle],
    params: &FieldParams,
) -> Result<f64, RewardError> {
    Ok(reward_terms(v, p, goal, theta_g, obstacles, params)?.weighted(&params.omega))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(x: f64, y: f64) -> Obstacle {
        Obstacle::new(Vec2::new(x, y), 0.0)
    }

    #[test]
    fn attract_examples() {
        let g = Vec2::new(0.3, -0.2);
        assert_eq!(attract_force(g, g, 2.0), Vec2::ZERO);
        assert_eq!(attract_force(Vec2::new(1.0, 0.0), Vec2::ZERO, 1.0), Vec2::new(-1.0, 0.0));
        let p = Vec2::new(0.7, 0.1);
        assert_eq!(attract_force(p, g, 2.0), attract_force(p, g, 1.0) * 2.0);
    }

    #[test]
    fn repulse_examples() {
        let f = repulse_force(Vec2::ZERO, &[point(0.5, 0.0)], 1.0, 1.0).unwrap();
        assert!((f.x + 4.0).abs() < 1e-12 && f.y == 0.0, "{f:?}");
        let far = repulse_force(Vec2::ZERO, &[point(2.0, 0.0), point(0.0, -3.0)], 1.0, 1.0).unwrap();
        assert_eq!(far, Vec2::ZERO);
        let sym = repulse_force(Vec2::ZERO, &[point(0.5, 0.0), point(-0.5, 0.0)], 1.0, 1.0).unwrap();
        assert!(sym.norm() < 1e-12);
        assert!(matches!(
            repulse_force(Vec2::ZERO, &[point(2.0, 0.0), point(0.0, 0.0)], 1.0, 1.0),
            Err(RewardError::SingularRepulsion { index: 1 })
        ));
    }

    #[test]
    fn goal_examples() {
        assert_eq!(goal_reward(0.0, 0.5, &[0.2, 0.1]), 0.0);
        assert!((goal_reward(0.0, 0.05, &[0.1]) - 10.0).abs() < 1e-12);
        assert!(goal_reward(std::f64::consts::FRAC_PI_2, 0.05, &[0.1]).abs() < 1e-12);
    }

    #[test]
    fn step_reward_examples() {
        let params = FieldParams::default();
        let goal = Vec2::new(1.0, 0.0);
        let p = Vec2::new(0.99, 0.0);
        let r = step_reward(Vec2::ZERO, p, goal, 0.2, &[], &params).unwrap();
        let expect = params.omega[0] * goal_reward(0.2, 0.01, &params.levels);
        assert!((r - expect).abs() < 1e-12);

        // Aligned with the attracting force, far from goal shells.
        let p = Vec2::new(-2.0, 0.0);
        let v = Vec2::new(0.3, 0.0);
        let r = step_reward(v, p, goal, 0.0, &[], &params).unwrap();
        let fa = attract_force(p, goal, params.k_att);
        assert!((r - params.omega[1] * v.norm() * fa.norm()).abs() < 1e-12);
        assert!(r > 0.0);

        // Heading into an obstacle inside the cutoff.
        let unit = FieldParams {
            k_rep: 1.0,
            rho_0: 1.0,
            min_clearance: 0.0,
            ..FieldParams::default()
        };
        let t = reward_terms(Vec2::new(1.0, 0.0), Vec2::ZERO, Vec2::new(0.0, 10.0), 0.0, &[point(0.5, 0.0)], &unit)
            .unwrap();
        assert!((t.repulse + 4.0).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(FieldParams::default().validate().is_ok());
        let bad = FieldParams {
            levels: vec![0.1, 0.2],
            ..FieldParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = FieldParams {
            min_clearance: 0.3,
            ..FieldParams::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn clearance_floor_bounds_the_reward() {
        let params = FieldParams::default();
        let o = Obstacle::new(Vec2::ZERO, 0.02);
        let v = Vec2::new(-0.1, 0.0);
        let goal = Vec2::new(5.0, 0.0);
        let at_floor = reward_terms(v, Vec2::new(0.03, 0.0), goal, 0.0, &[o], &params).unwrap();
        for x in [0.0201, 0.021, 0.025, 0.02 + 1e-9] {
            let t = reward_terms(v, Vec2::new(x, 0.0), goal, 0.0, &[o], &params).unwrap();
            assert!((t.repulse - at_floor.repulse).abs() <= 1e-12 * at_floor.repulse.abs());
        }
        // Beyond the floor the exact field applies.
        let far = reward_terms(v, Vec2::new(0.1, 0.0), goal, 0.0, &[o], &params).unwrap();
        let exact = v.dot(repulse_force(Vec2::new(0.1, 0.0), &[o], params.k_rep, params.rho_0).unwrap());
        assert_eq!(far.repulse, exact);
        // Inside the body the floor still gives a finite value.
        let inside = reward_terms(v, Vec2::new(0.005, 0.0), goal, 0.0, &[o], &params).unwrap();
        assert!((inside.repulse - at_floor.repulse).abs() <= 1e-12 * at_floor.repulse.abs());
    }
}
