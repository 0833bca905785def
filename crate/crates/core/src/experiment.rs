//! Experiment orchestration shared by the command line and the acceptance
//! suite: free-space pretraining, maze training by fictitious play, and
//! fixed-seed evaluation on the test maze.

use serde::{Deserialize, Serialize};

use crate::env::EnvConfig;
use crate::error::GameError;
use crate::game::{
    fictitious_play, mix_seed, ppo_learning, run_episodes, Actuation, GameConfig, GameOutcome, JointPolicy, MacroRecord,
    RolloutConfig, SnakeGame, TrainingLog,
};
use crate::metrics::{compute_metrics, AggregateMetrics, EpisodeMetrics};
use crate::policy::{LearnerConfig, Player, PolicyParameters, PpoLearner};
use crate::scenario::{generate_scenario, MazeLayout};

/// Single-player PPO of the controller in a maze without obstacles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainConfig {
    pub updates: usize,
    pub episodes_per_update: usize,
    pub max_steps: usize,
    pub seed: u64,
    pub actuation: Actuation,
    pub learner: LearnerConfig,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            updates: 200,
            episodes_per_update: 16,
            max_steps: 1200,
            seed: 0,
            actuation: Actuation::Cpg,
            learner: snake_learner(),
        }
    }
}

/// Learner settings used for the snake: smaller trunks than the library
/// default to fit a desk-scale budget, and rewards scaled down so critic
/// targets stay near unit size.
pub fn snake_learner() -> LearnerConfig {
    LearnerConfig {
        hidden: 64,
        reward_scale: 0.01,
        ..LearnerConfig::default()
    }
}

/// Game settings used for the snake maze.
pub fn snake_game() -> GameConfig {
    GameConfig {
        epsilon: 50.0,
        n_max: 4,
        min_iterations: 2,
        eval_episodes: 32,
        episodes_per_update: 16,
        inner_epsilon: 25.0,
        inner_min_updates: 10,
        inner_max_updates: 40,
        max_steps: 1200,
        learner: snake_learner(),
        ..GameConfig::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub episodes: usize,
    pub seed: u64,
    /// Mean actions instead of samples.
    pub greedy: bool,
    pub max_steps: usize,
    pub layout: MazeLayout,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            episodes: 30,
            seed: 7,
            greedy: false,
            max_steps: 1200,
            layout: MazeLayout::test(),
        }
    }
}

impl EvalConfig {
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.episodes as u64).map(|k| mix_seed(self.seed, 0x7e57_0000 + k)).collect()
    }
}

/// Everything a full run needs, one section per module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub pretrain: PretrainConfig,
    /// Maze used for pretraining; normally without obstacles.
    pub free_layout: MazeLayout,
    pub train_layout: MazeLayout,
    pub game: GameConfig,
    pub eval: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::default(),
            pretrain: PretrainConfig::default(),
            free_layout: MazeLayout::free(),
            train_layout: MazeLayout::training(),
            game: snake_game(),
            eval: EvalConfig::default(),
        }
    }
}

/// Builds snake games from seeds: the seed selects the maze.
pub fn maze_factory(env: &EnvConfig, layout: &MazeLayout, actuation: Actuation) -> impl Fn(u64) -> Result<SnakeGame, GameError> + Sync {
    let env = env.clone();
    let layout = layout.clone();
    move |seed| {
        let scenario = generate_scenario(&layout, &env.robot, seed)?;
        SnakeGame::from_scenario(env.clone(), &scenario, actuation)
    }
}

/// A fresh joint policy sized for the snake.
pub fn init_joint(env: &EnvConfig, learner: &LearnerConfig, seed: u64) -> Result<JointPolicy, GameError> {
    let probe = maze_factory(env, &MazeLayout::free(), Actuation::Cpg)(0)?;
    JointPolicy::init(&probe, learner, seed)
}

/// Trains the controller alone in `layout`; the returned regulator is the
/// untouched initial one.
pub fn pretrain_free(env: &EnvConfig, layout: &MazeLayout, cfg: &PretrainConfig) -> Result<(JointPolicy, TrainingLog), GameError> {
    let factory = maze_factory(env, layout, cfg.actuation);
    let game = GameConfig {
        episodes_per_update: cfg.episodes_per_update,
        inner_epsilon: f64::MIN_POSITIVE,
        inner_min_updates: cfg.updates,
        inner_max_updates: cfg.updates,
        max_steps: cfg.max_steps,
        w1: 1.0,
        w2: 0.0,
        seed: cfg.seed,
        learner: cfg.learner.clone(),
        ..GameConfig::default()
    };
    game.validate()?;
    let mut joint = init_joint(env, &cfg.learner, cfg.seed)?;
    let mut learner = PpoLearner::new(cfg.learner.clone(), &joint.controller, mix_seed(cfg.seed, 1))?;
    let mut log = TrainingLog::default();
    ppo_learning(&factory, &mut joint, Player::Controller, &mut learner, &game, 1, &mut log)?;
    Ok((joint, log))
}

/// Fictitious play in `layout`, starting from a pretrained controller and a
/// fresh regulator.
pub fn train_game(
    env: &EnvConfig,
    layout: &MazeLayout,
    cfg: &GameConfig,
    controller: PolicyParameters,
    on_iteration: &mut dyn FnMut(&MacroRecord, &JointPolicy) -> Result<(), GameError>,
) -> Result<GameOutcome, GameError> {
    let factory = maze_factory(env, layout, Actuation::Cpg);
    let regulator = init_joint(env, &cfg.learner, mix_seed(cfg.seed, 0x7e9))?.regulator;
    fictitious_play(controller, regulator, cfg, &factory, on_iteration)
}

/// One policy to evaluate, with the weights its players are composed with.
#[derive(Debug, Clone)]
pub struct Contender {
    pub name: String,
    pub joint: JointPolicy,
    pub w1: f64,
    pub w2: f64,
    pub actuation: Actuation,
}

impl Contender {
    /// The controller on its own.
    pub fn controller_only(name: &str, joint: JointPolicy, actuation: Actuation) -> Self {
        Self {
            name: name.into(),
            joint,
            w1: 1.0,
            w2: 0.0,
            actuation,
        }
    }
}

/// Runs the contender on the evaluation mazes; results are in seed order.
pub fn evaluate(env: &EnvConfig, eval: &EvalConfig, contender: &Contender, options: &[f64]) -> Result<Vec<EpisodeMetrics>, GameError> {
    let factory = maze_factory(env, &eval.layout, contender.actuation);
    let rc = RolloutConfig {
        w1: contender.w1,
        w2: contender.w2,
        options: options.to_vec(),
        greedy: eval.greedy,
        max_steps: eval.max_steps,
    };
    Ok(run_episodes(&factory, &contender.joint, &rc, &eval.seeds(), |g, _| g.metrics())?
        .into_iter()
        .map(|(_, m)| m)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub metrics: AggregateMetrics,
}

/// Evaluates every contender on the same seeds.
pub fn compare(env: &EnvConfig, eval: &EvalConfig, contenders: &[Contender], options: &[f64]) -> Result<Vec<ComparisonRow>, GameError> {
    contenders
        .iter()
        .map(|c| {
            let episodes = evaluate(env, eval, c, options)?;
            Ok(ComparisonRow {
                method: c.name.clone(),
                metrics: compute_metrics(&episodes)?,
            })
        })
        .collect()
}
