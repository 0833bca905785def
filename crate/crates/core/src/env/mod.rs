//! Snake robot environment: planar chain physics, contact sensing,
//! observations and episode termination, advanced at control rate with the
//! CPG network in the loop.

mod episode;
mod observation;
mod robot;
mod sensing;

pub use episode::{
    episode_status, jam_detector, EpisodeMonitor, EpisodeStatus, StatusSample, TerminationParams,
};
pub use observation::{
    controller_width, goal_frame, locomotion_heading, observation_width, observe, GoalFrame,
    ObservationInputs, ObservationVector,
};
pub use robot::{overlapping_obstacle, step, BodyPose, BodyVelocity, RobotConfig, RobotState};
pub use sensing::{
    event_trigger, nearest_obstacle, sense_contacts, ContactForceVector, Obstacle, SensorReadings,
    CONTACT_EPSILON, NO_OBSTACLE_DISTANCE,
};

use serde::{Deserialize, Serialize};

use crate::cpg::{self, CpgCommand, OscillatorNetworkState, OscillatorParams};
use crate::error::EnvError;
use crate::geom::Vec2;
use crate::reward::{reward_terms, FieldParams, RewardTerms};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub robot: RobotConfig,
    pub cpg: OscillatorParams,
    pub field: FieldParams,
    pub termination: TerminationParams,
    /// Physics and CPG integration step (s).
    pub sim_dt: f64,
    /// Policy period (s).
    pub control_dt: f64,
    /// Obstacle detection range `D` of the event trigger (m).
    pub detection_range: f64,
    /// Episode time limit (s).
    pub max_time: f64,
    /// Pay the goal term only on the step that reaches the goal, instead of
    /// on every step spent inside a goal shell.
    pub goal_on_arrival: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            robot: RobotConfig::default(),
            cpg: OscillatorParams::default(),
            field: FieldParams::default(),
            termination: TerminationParams::default(),
            sim_dt: 1e-3,
            control_dt: 0.05,
            detection_range: 0.15,
            max_time: 60.0,
            goal_on_arrival: true,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        self.robot.validate()?;
        self.cpg.validate()?;
        self.field.validate()?;
        if self.cpg.n != self.robot.n_links {
            return Err(EnvError::InvalidConfig(format!(
                "{} oscillators for {} links",
                self.cpg.n, self.robot.n_links
            )));
        }
        if !(self.sim_dt > 0.0 && self.control_dt >= self.sim_dt && self.max_time > 0.0) {
            return Err(EnvError::InvalidConfig("bad time steps".into()));
        }
        if !(self.detection_range > 0.0) {
            return Err(EnvError::InvalidConfig("detection range must be positive".into()));
        }
        Ok(())
    }

    pub fn substeps(&self) -> usize {
        (self.control_dt / self.sim_dt).round().max(1.0) as usize
    }

    pub fn max_steps(&self) -> usize {
        (self.max_time / self.control_dt).ceil() as usize
    }
}

/// What one control period produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub reward: f64,
    pub terms: RewardTerms,
    pub status: EpisodeStatus,
    /// Time limit hit while still running.
    pub truncated: bool,
    /// Mean head velocity over the period.
    pub head_velocity: Vec2,
    /// Mean centre-of-mass velocity over the period.
    pub body_velocity: Vec2,
    pub jammed: bool,
    /// CPG output at the end of the period.
    pub psi: Vec<f64>,
}

impl StepOutcome {
    pub fn done(&self) -> bool {
        self.status.is_terminal() || self.truncated
    }
}

#[derive(Clone, Copy)]
enum Drive<'a> {
    Cpg(&'a CpgCommand),
    Direct(&'a [f64]),
}

#[derive(Debug, Clone)]
pub struct SnakeEnv {
    config: EnvConfig,
    obstacles: Vec<Obstacle>,
    goal: Vec2,
    robot: RobotState,
    cpg: OscillatorNetworkState,
    monitor: EpisodeMonitor,
    contact: ContactForceVector,
    previous_frame: Option<GoalFrame>,
    time: f64,
    steps: usize,
    path_length: f64,
}

impl SnakeEnv {
    pub fn new(config: EnvConfig, obstacles: Vec<Obstacle>, goal: Vec2, spawn: BodyPose) -> Result<Self, EnvError> {
        config.validate()?;
        let robot = RobotState::straight(&config.robot, spawn.position, spawn.heading);
        if let Some(index) = overlapping_obstacle(&config.robot, &robot, &obstacles) {
            return Err(EnvError::SpawnOverlap { index });
        }
        let n = config.robot.n_links;
        Ok(Self {
            monitor: EpisodeMonitor::new(config.termination, config.control_dt),
            contact: ContactForceVector::zeros(n + 1),
            cpg: OscillatorNetworkState::kicked(n),
            config,
            obstacles,
            goal,
            robot,
            previous_frame: None,
            time: 0.0,
            steps: 0,
            path_length: 0.0,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn robot(&self) -> &RobotState {
        &self.robot
    }

    pub fn cpg_state(&self) -> &OscillatorNetworkState {
        &self.cpg
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    pub fn goal(&self) -> Vec2 {
        self.goal
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn status(&self) -> EpisodeStatus {
        self.monitor.status()
    }

    pub fn jam_time(&self) -> f64 {
        self.monitor.jam_time()
    }

    /// Distance travelled by the centre of mass so far (m).
    pub fn path_length(&self) -> f64 {
        self.path_length
    }

    /// Contact forces averaged over the last control period.
    pub fn contact(&self) -> &ContactForceVector {
        &self.contact
    }

    pub fn nearest(&self) -> (f64, f64) {
        nearest_obstacle(&self.robot, &self.obstacles)
    }

    pub fn goal_frame(&self) -> GoalFrame {
        goal_frame(&self.robot, self.goal)
    }

    pub fn triggered(&self) -> bool {
        event_trigger(&self.contact, self.nearest().0, self.config.detection_range)
    }

    pub fn observe(&self, prev_action: &[f64], prev_option: f64, prev_beta: f64) -> ObservationVector {
        observe(&ObservationInputs {
            state: &self.robot,
            goal: self.goal,
            previous: self.previous_frame,
            dt: self.config.control_dt,
            prev_action,
            prev_option,
            prev_beta,
            contact: &self.contact,
            nearest: self.nearest(),
        })
    }

    /// Runs one control period under a constant CPG command.
    pub fn step(&mut self, cmd: &CpgCommand) -> Result<StepOutcome, EnvError> {
        self.advance(Drive::Cpg(cmd))
    }

    /// Runs one control period holding the curvature command `psi` fixed,
    /// bypassing the oscillator network.
    pub fn step_direct(&mut self, psi: &[f64]) -> Result<StepOutcome, EnvError> {
        if psi.len() != self.config.robot.n_links {
            return Err(EnvError::DimensionMismatch {
                expected: self.config.robot.n_links,
                got: psi.len(),
            });
        }
        self.advance(Drive::Direct(psi))
    }

    fn advance(&mut self, drive: Drive<'_>) -> Result<StepOutcome, EnvError> {
        let cfg = &self.config;
        let sub = cfg.substeps();
        let dt = cfg.sim_dt;
        let period = sub as f64 * dt;
        self.previous_frame = Some(goal_frame(&self.robot, self.goal));
        let head_before = self.robot.head();
        let com_before = self.robot.center_of_mass();
        let mut readings = SensorReadings::zeros(cfg.robot.n_bodies());
        let mut psi = Vec::new();
        for _ in 0..sub {
            psi = match drive {
                Drive::Cpg(cmd) => {
                    self.cpg = cpg::step_network(&self.cpg, &cfg.cpg, cmd, dt)?;
                    cpg::network_output(&self.cpg)
                }
                Drive::Direct(psi) => psi.to_vec(),
            };
            let (next, raw) = step(&cfg.robot, &self.robot, &psi, &self.obstacles, dt)?;
            readings.accumulate(&raw, 1.0 / sub as f64);
            self.robot = next;
        }
        self.contact = sense_contacts(&readings)?;
        self.time += period;
        self.steps += 1;
        let head_velocity = (self.robot.head() - head_before) * (1.0 / period);
        let com_shift = self.robot.center_of_mass() - com_before;
        self.path_length += com_shift.norm();
        let body_velocity = com_shift * (1.0 / period);
        let frame = goal_frame(&self.robot, self.goal);
        let mut terms = reward_terms(
            head_velocity,
            self.robot.head(),
            self.goal,
            frame.theta,
            &self.obstacles,
            &cfg.field,
        )?;
        let status = self.monitor.update(
            StatusSample {
                head: self.robot.head(),
                velocity: body_velocity,
            },
            self.goal,
        );
        if cfg.goal_on_arrival && status != EpisodeStatus::GoalReached {
            terms.goal = 0.0;
        }
        let truncated = !status.is_terminal() && self.time >= cfg.max_time - 1e-9;
        Ok(StepOutcome {
            reward: terms.weighted(&cfg.field.omega),
            terms,
            status,
            truncated,
            head_velocity,
            body_velocity,
            jammed: self.monitor.jammed(),
            psi,
        })
    }
}
