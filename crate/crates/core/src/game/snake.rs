use serde::{Deserialize, Serialize};

use super::{ControlMemory, GameEnv, JointControl, Transition};
use crate::cpg::{compose_tonic, decode_action, CpgCommand};
use crate::env::{controller_width, observation_width, EnvConfig, EpisodeStatus, SnakeEnv};
use crate::error::GameError;
use crate::geom::Vec2;
use crate::metrics::EpisodeMetrics;
use crate::reward::RewardTerms;
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Actuation {
    /// Actions are tonic inputs of the oscillator network.
    #[default]
    Cpg,
    /// Actions set joint curvature directly as `0.5 * tanh(a)`; the option
    /// is ignored.
    Direct,
}

/// One control step of an exported trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub head: Vec2,
    pub heading: f64,
    pub com: Vec2,
    pub kappa: Vec<f64>,
    /// Averaged contact force per body.
    pub f: Vec<f64>,
    pub reward: f64,
    pub terms: RewardTerms,
    pub triggered: bool,
    pub k_f: f64,
    /// Tonic imbalance actually applied (empty under direct actuation).
    pub tonic_delta: Vec<f64>,
    pub status: EpisodeStatus,
}

/// The snake environment seen as a two-player game.
#[derive(Debug, Clone)]
pub struct SnakeGame {
    env: SnakeEnv,
    actuation: Actuation,
    trigger_count: usize,
    records: Option<Vec<StepRecord>>,
}

impl SnakeGame {
    pub fn new(env: SnakeEnv, actuation: Actuation) -> Self {
        Self {
            env,
            actuation,
            trigger_count: 0,
            records: None,
        }
    }

    pub fn from_scenario(mut config: EnvConfig, scenario: &Scenario, actuation: Actuation) -> Result<Self, GameError> {
        config.termination.accept_radius = scenario.accept_radius;
        let env = SnakeEnv::new(config, scenario.obstacles.clone(), scenario.goal, scenario.spawn)?;
        Ok(Self::new(env, actuation))
    }

    /// Keeps a [`StepRecord`] for every step from now on.
    pub fn recording(mut self) -> Self {
        self.records = Some(Vec::new());
        self
    }

    pub fn env(&self) -> &SnakeEnv {
        &self.env
    }

    pub fn records(&self) -> &[StepRecord] {
        self.records.as_deref().unwrap_or(&[])
    }

    pub fn metrics(&self) -> EpisodeMetrics {
        let env = &self.env;
        let success = env.status() == EpisodeStatus::GoalReached;
        let t = env.time();
        EpisodeMetrics {
            success,
            status: env.status(),
            time_to_goal: success.then_some(t),
            jam_time: env.jam_time(),
            task_time: t,
            path_length: env.path_length(),
            mean_speed: if t > 0.0 { env.path_length() / t } else { 0.0 },
            event_trigger_fraction: if env.steps() > 0 {
                self.trigger_count as f64 / env.steps() as f64
            } else {
                0.0
            },
        }
    }
}

fn curvature(action: &[f64]) -> Vec<f64> {
    action.iter().map(|a| 0.5 * a.tanh()).collect()
}

impl GameEnv for SnakeGame {
    fn observation_width(&self) -> usize {
        observation_width(self.env.config().robot.n_links)
    }

    fn controller_width(&self) -> usize {
        controller_width(self.env.config().robot.n_links)
    }

    fn action_width(&self) -> usize {
        self.env.config().robot.n_links
    }

    fn observe(&self, memory: &ControlMemory) -> Vec<f64> {
        self.env.observe(&memory.action, memory.option_code, memory.beta).0
    }

    fn triggered(&self) -> bool {
        self.env.triggered()
    }

    fn step(&mut self, control: &JointControl<'_>) -> Result<Transition, GameError> {
        let triggered = control.regulator.is_some();
        let (out, k_f, tonic_delta) = match self.actuation {
            Actuation::Cpg => {
                let own = decode_action(control.controller)?;
                let tonic = match control.regulator {
                    Some(a2) => compose_tonic(&own, &decode_action(a2)?, control.w1, control.w2)?,
                    None => own,
                };
                let delta = tonic.delta();
                let out = self.env.step(&CpgCommand { tonic, k_f: control.k_f })?;
                (out, control.k_f, delta)
            }
            Actuation::Direct => {
                let mut psi = curvature(control.controller);
                if let Some(a2) = control.regulator {
                    for (p, q) in psi.iter_mut().zip(curvature(a2)) {
                        *p = control.w1 * *p + control.w2 * q;
                    }
                }
                (self.env.step_direct(&psi)?, 0.0, Vec::new())
            }
        };
        if triggered {
            self.trigger_count += 1;
        }
        if let Some(records) = self.records.as_mut() {
            let robot = self.env.robot();
            records.push(StepRecord {
                t: self.env.time(),
                head: robot.head(),
                heading: robot.head_heading(),
                com: robot.center_of_mass(),
                kappa: robot.kappa.clone(),
                f: self.env.contact().0.clone(),
                reward: out.reward,
                terms: out.terms,
                triggered,
                k_f,
                tonic_delta,
                status: out.status,
            });
        }
        Ok(Transition {
            reward: out.reward,
            terminal: out.status.is_terminal(),
            truncated: out.truncated,
        })
    }
}
