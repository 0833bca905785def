use serde::{Deserialize, Serialize};

use crate::policy::Player;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Frozen policies, critics being fitted.
    Evaluation,
    Learning,
}

/// One inner episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub iteration: usize,
    pub phase: Phase,
    pub learner: Option<Player>,
    /// Index of the update batch within the macro-iteration.
    pub update: usize,
    pub episode: usize,
    pub reward: f64,
    pub discounted_return: f64,
    pub length: usize,
    pub trigger_rate: f64,
    /// Short digests of each player's actor, so frozen phases can be audited.
    pub controller_actor: String,
    pub regulator_actor: String,
}

/// One macro-iteration (iteration 0 is the initial evaluation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroRecord {
    pub iteration: usize,
    pub learner: Option<Player>,
    /// Mean discounted Monte-Carlo return over the evaluation episodes.
    pub value: f64,
    /// Mean controller critic estimate at the initial states.
    pub critic_value: f64,
    pub mean_episode_reward: f64,
    pub inner_updates: usize,
    pub inner_converged: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub episodes: Vec<EpisodeRecord>,
    pub macros: Vec<MacroRecord>,
}

impl TrainingLog {
    pub fn phase_rewards(&self, phase: Phase) -> Vec<f64> {
        self.episodes.iter().filter(|e| e.phase == phase).map(|e| e.reward).collect()
    }

    /// Episode rewards of one macro-iteration.
    pub fn iteration_rewards(&self, iteration: usize) -> Vec<f64> {
        self.episodes.iter().filter(|e| e.iteration == iteration).map(|e| e.reward).collect()
    }
}
