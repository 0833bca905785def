use serde::{Deserialize, Serialize};

use crate::geom::{wrap_angle, Vec2};

use super::{ContactForceVector, RobotState};

/// Observation width for a robot with `n_links` soft links (26 for four).
pub const fn observation_width(n_links: usize) -> usize {
    4 + n_links + (n_links + 2) + 2 * (n_links + 1) + 2
}

/// Width of the proprioceptive prefix the controller sees (14 for four links).
pub const fn controller_width(n_links: usize) -> usize {
    4 + n_links + (n_links + 2)
}

/// Distance and signed bearing of the goal relative to the locomotion
/// direction.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GoalFrame {
    pub rho: f64,
    pub theta: f64,
}

/// Direction the robot is travelling in: from its centre of mass to the head.
pub fn locomotion_heading(state: &RobotState) -> f64 {
    (state.head() - state.center_of_mass()).angle()
}

pub fn goal_frame(state: &RobotState, goal: Vec2) -> GoalFrame {
    let to_goal = goal - state.head();
    let rho = to_goal.norm();
    let theta = if rho > 0.0 {
        wrap_angle(to_goal.angle() - locomotion_heading(state))
    } else {
        0.0
    };
    GoalFrame { rho, theta }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationVector(pub Vec<f64>);

impl ObservationVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The proprioceptive prefix: goal frame, curvatures, previous action,
    /// option and termination probability.
    pub fn controller_part(&self, n_links: usize) -> &[f64] {
        &self.0[..controller_width(n_links)]
    }
}

pub struct ObservationInputs<'a> {
    pub state: &'a RobotState,
    pub goal: Vec2,
    /// Goal frame one control period earlier, if any.
    pub previous: Option<GoalFrame>,
    pub dt: f64,
    pub prev_action: &'a [f64],
    /// Previous option encoded as `K_f / max(O)`.
    pub prev_option: f64,
    pub prev_beta: f64,
    pub contact: &'a ContactForceVector,
    pub nearest: (f64, f64),
}

/// Layout: goal frame `[rho, rho_dot, theta, theta_dot]`, link curvatures,
/// previous action, previous option, termination probability, contact
/// forces, nearest obstacle `[d_o, phi_o]`.
pub fn observe(inp: &ObservationInputs<'_>) -> ObservationVector {
    let now = goal_frame(inp.state, inp.goal);
    let (rho_dot, theta_dot) = match inp.previous {
        Some(prev) if inp.dt > 0.0 => (
            (now.rho - prev.rho) / inp.dt,
            wrap_angle(now.theta - prev.theta) / inp.dt,
        ),
        _ => (0.0, 0.0),
    };
    let mut z = Vec::with_capacity(observation_width(inp.state.kappa.len()));
    z.extend([now.rho, rho_dot, now.theta, theta_dot]);
    z.extend(&inp.state.kappa);
    z.extend(inp.prev_action);
    z.push(inp.prev_option);
    z.push(inp.prev_beta);
    z.extend(inp.contact.as_slice());
    z.push(inp.nearest.0);
    z.push(inp.nearest.1);
    ObservationVector(z)
}
