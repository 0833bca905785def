//! Fictitious cooperative game between the controller and the regulator.
//! Both players share the environment reward; they take turns computing a
//! best response by PPO while the partner's parameters stay frozen.

mod log;
mod snake;
mod toy;

pub use log::{EpisodeRecord, MacroRecord, Phase, TrainingLog};
pub use snake::{Actuation, SnakeGame, StepRecord};
pub use toy::{normal_cdf, MatrixGame, PointMass};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::GameError;
use crate::parallel;
use crate::policy::{
    forward_c1, forward_r2, greedy_step, sample_action, sample_step, LearnerConfig, PolicyParameters, PolicySample,
    PolicyShape, PpoLearner, Player, Trajectory, TrajectoryStep,
};

/// The controller's previous decision as it appears in the observation.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlMemory {
    pub action: Vec<f64>,
    pub option_code: f64,
    pub beta: f64,
}

impl ControlMemory {
    pub fn initial(action_width: usize) -> Self {
        Self {
            action: vec![0.0; action_width],
            option_code: 0.0,
            beta: 0.0,
        }
    }
}

/// Both players' outputs for one control step.
#[derive(Debug, Clone, Copy)]
pub struct JointControl<'a> {
    pub controller: &'a [f64],
    /// Present only when the event trigger fired.
    pub regulator: Option<&'a [f64]>,
    pub k_f: f64,
    pub w1: f64,
    pub w2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub reward: f64,
    pub terminal: bool,
    pub truncated: bool,
}

/// An environment both players act in.
pub trait GameEnv {
    fn observation_width(&self) -> usize;
    /// The controller sees only this many leading observation entries.
    fn controller_width(&self) -> usize;
    fn action_width(&self) -> usize;
    fn observe(&self, memory: &ControlMemory) -> Vec<f64>;
    fn triggered(&self) -> bool;
    fn step(&mut self, control: &JointControl<'_>) -> Result<Transition, GameError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPolicy {
    pub controller: PolicyParameters,
    pub regulator: PolicyParameters,
    /// The player that learns next.
    pub flag: Player,
}

impl JointPolicy {
    /// Fresh random players sized for `env`; the regulator learns first.
    pub fn init<E: GameEnv>(env: &E, learner: &LearnerConfig, seed: u64) -> Result<Self, GameError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let controller = PolicyParameters::init(
            PolicyShape::controller(env.controller_width(), env.action_width(), learner.hidden, learner.options.len()),
            learner.init_log_std,
            &mut rng,
        )?;
        let regulator = PolicyParameters::init(
            PolicyShape::regulator(env.observation_width(), env.action_width(), learner.hidden),
            learner.init_log_std,
            &mut rng,
        )?;
        Ok(Self {
            controller,
            regulator,
            flag: Player::Regulator,
        })
    }

    pub fn params(&self, player: Player) -> &PolicyParameters {
        match player {
            Player::Controller => &self.controller,
            Player::Regulator => &self.regulator,
        }
    }

    pub fn params_mut(&mut self, player: Player) -> &mut PolicyParameters {
        match player {
            Player::Controller => &mut self.controller,
            Player::Regulator => &mut self.regulator,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutConfig {
    pub w1: f64,
    pub w2: f64,
    pub options: Vec<f64>,
    /// Mean actions and most likely options instead of sampling.
    pub greedy: bool,
    pub max_steps: usize,
}

impl RolloutConfig {
    fn option_code(&self, k: usize) -> f64 {
        let max = self.options.iter().cloned().fold(f64::MIN, f64::max);
        self.options[k] / max
    }
}

/// Derives an independent seed from a base seed and a salt.
pub fn mix_seed(base: u64, salt: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    splitmix(base ^ splitmix(salt))
}

/// Plays one episode. Each player draws from its own random stream, so the
/// controller's samples do not depend on whether the regulator acted.
pub fn rollout<E: GameEnv>(env: &mut E, joint: &JointPolicy, cfg: &RolloutConfig, seed: u64) -> Result<Trajectory, GameError> {
    let mut c_rng = ChaCha8Rng::seed_from_u64(seed);
    c_rng.set_stream(1);
    let mut r_rng = ChaCha8Rng::seed_from_u64(seed);
    r_rng.set_stream(2);
    let cw = env.controller_width();
    let mut memory = ControlMemory::initial(env.action_width());
    let mut previous = None;
    let mut traj = Trajectory::default();
    loop {
        let obs = env.observe(&memory);
        let c_out = forward_c1(&obs[..cw], &joint.controller)?;
        let decision = if cfg.greedy {
            greedy_step(&c_out, previous)
        } else {
            sample_step(&c_out, previous, &mut c_rng)
        };
        let triggered = env.triggered();
        let (reg_action, reg_lp, reg_value) = if triggered {
            let r_out = forward_r2(&obs, &joint.regulator)?;
            let (a, lp) = if cfg.greedy {
                let lp = r_out.action.log_prob(&r_out.action.mean);
                (r_out.action.mean.clone(), lp)
            } else {
                sample_action(&r_out.action, &mut r_rng)
            };
            (Some(a), lp, r_out.value)
        } else {
            (None, 0.0, joint.regulator.value(&obs)?)
        };
        let option = decision.event.option;
        let tr = env.step(&JointControl {
            controller: &decision.action,
            regulator: reg_action.as_deref(),
            k_f: cfg.options[option],
            w1: cfg.w1,
            w2: cfg.w2,
        })?;
        if !tr.reward.is_finite() {
            return Err(GameError::InvalidConfig(format!("non-finite reward at step {}", traj.len())));
        }
        memory = ControlMemory {
            action: decision.action.clone(),
            option_code: cfg.option_code(option),
            beta: c_out.beta,
        };
        previous = Some(option);
        traj.steps.push(TrajectoryStep {
            observation: obs,
            controller_action: decision.action,
            option: decision.event,
            beta: c_out.beta,
            controller_log_prob: decision.log_prob,
            regulator_action: reg_action,
            regulator_log_prob: reg_lp,
            reward: tr.reward,
            controller_value: c_out.value,
            regulator_value: reg_value,
            triggered,
            terminal: tr.terminal,
        });
        if tr.terminal {
            break;
        }
        if tr.truncated || traj.len() >= cfg.max_steps {
            let obs = env.observe(&memory);
            traj.controller_bootstrap = joint.controller.value(&obs[..cw])?;
            traj.regulator_bootstrap = joint.regulator.value(&obs)?;
            break;
        }
    }
    Ok(traj)
}

/// Runs one episode per seed (in parallel when enabled) and hands each
/// finished environment to `finish`. Results come back in seed order.
pub fn run_episodes<E, F, T, G>(
    factory: &F,
    joint: &JointPolicy,
    cfg: &RolloutConfig,
    seeds: &[u64],
    finish: G,
) -> Result<Vec<(Trajectory, T)>, GameError>
where
    E: GameEnv,
    F: Fn(u64) -> Result<E, GameError> + Sync,
    T: Send,
    G: Fn(&E, &Trajectory) -> T + Sync,
{
    parallel::map_slice(seeds, |&seed| {
        let mut env = factory(seed)?;
        let traj = rollout(&mut env, joint, cfg, mix_seed(seed, 0x5eed))?;
        let extra = finish(&env, &traj);
        Ok((traj, extra))
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GameConfig {
    /// Outer convergence threshold on the evaluated value.
    pub epsilon: f64,
    /// Macro-iteration cap.
    pub n_max: usize,
    /// Macro-iterations always run before the convergence test may stop.
    pub min_iterations: usize,
    /// Best-response temperature; the entropy weight is at least `1/lambda`.
    pub lambda_br: f64,
    pub w1: f64,
    pub w2: f64,
    pub eval_episodes: usize,
    pub episodes_per_update: usize,
    /// Inner stop: change of mean episode reward between update batches.
    pub inner_epsilon: f64,
    pub inner_min_updates: usize,
    pub inner_max_updates: usize,
    pub max_steps: usize,
    pub seed: u64,
    pub learner: LearnerConfig,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self {
            epsilon: 2.0,
            n_max: 6,
            min_iterations: 2,
            lambda_br: 100.0,
            w1: 0.5,
            w2: 0.5,
            eval_episodes: 8,
            episodes_per_update: 8,
            inner_epsilon: 1.0,
            inner_min_updates: 3,
            inner_max_updates: 12,
            max_steps: 1200,
            seed: 0,
            learner: LearnerConfig::default(),
        }
    }
}

impl GameConfig {
    pub fn validate(&self) -> Result<(), GameError> {
        let bad = |m: &str| Err(GameError::InvalidConfig(m.into()));
        if !(self.epsilon > 0.0 && self.inner_epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if self.n_max == 0 || self.eval_episodes == 0 || self.episodes_per_update == 0 || self.inner_max_updates == 0 {
            return bad("iteration and episode counts must be positive");
        }
        if !(self.w1 >= 0.0 && self.w2 >= 0.0 && (self.w1 + self.w2 - 1.0).abs() <= 1e-12) {
            return bad("composition weights must be nonnegative and sum to one");
        }
        if !(self.lambda_br > 0.0) {
            return bad("lambda must be positive");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive");
        }
        self.learner.validate()?;
        Ok(())
    }

    pub fn rollout(&self) -> RolloutConfig {
        RolloutConfig {
            w1: self.w1,
            w2: self.w2,
            options: self.learner.options.clone(),
            greedy: false,
            max_steps: self.max_steps,
        }
    }

    /// Learner settings with the best-response entropy floor applied.
    pub fn smoothed_learner(&self) -> LearnerConfig {
        LearnerConfig {
            entropy_coef: self.learner.entropy_coef.max(1.0 / self.lambda_br),
            ..self.learner.clone()
        }
    }

    pub fn eval_seeds(&self) -> Vec<u64> {
        (0..self.eval_episodes as u64).map(|k| mix_seed(self.seed, 0xe7a1_0000 + k)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Mean discounted return.
    pub value: f64,
    pub mean_reward: f64,
    /// Mean controller critic estimate at the first state.
    pub critic_value: f64,
    pub trajectories: Vec<Trajectory>,
}

/// Mean discounted return of the frozen joint policy over the given seeds.
pub fn policy_eval<E, F>(joint: &JointPolicy, factory: &F, seeds: &[u64], cfg: &RolloutConfig, gamma: f64) -> Result<Evaluation, GameError>
where
    E: GameEnv,
    F: Fn(u64) -> Result<E, GameError> + Sync,
{
    if seeds.is_empty() {
        return Err(GameError::InvalidConfig("policy evaluation needs at least one episode".into()));
    }
    let trajectories: Vec<Trajectory> = run_episodes(factory, joint, cfg, seeds, |_, _| ())?
        .into_iter()
        .map(|(t, _)| t)
        .collect();
    let n = trajectories.len() as f64;
    Ok(Evaluation {
        value: trajectories.iter().map(|t| t.discounted_return(gamma)).sum::<f64>() / n,
        mean_reward: trajectories.iter().map(|t| t.total_reward()).sum::<f64>() / n,
        critic_value: trajectories.iter().map(|t| t.steps[0].controller_value).sum::<f64>() / n,
        trajectories,
    })
}

/// Regresses both critics onto the observed returns; actors are untouched.
pub fn fit_critics(joint: &mut JointPolicy, trajectories: &[Trajectory], learner: &LearnerConfig, seed: u64) -> Result<(), GameError> {
    for player in [Player::Controller, Player::Regulator] {
        let params = joint.params_mut(player);
        let width = params.shape.input_width;
        let mut samples: Vec<PolicySample> = Vec::new();
        for t in trajectories {
            samples.extend(t.samples(player, width, learner)?.into_iter().map(|s| PolicySample {
                action: None,
                option: None,
                ..s
            }));
        }
        // A fresh optimizer has no momentum, so the zero actor gradient
        // leaves the actor bit-identical.
        PpoLearner::new(learner.clone(), params, seed)?.update(params, samples)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerOutcome {
    /// Mean episode reward of the last batch.
    pub value: f64,
    pub updates: usize,
    pub converged: bool,
}

fn episode_record(iteration: usize, phase: Phase, learner: Option<Player>, update: usize, index: usize, t: &Trajectory, joint: &JointPolicy, gamma: f64) -> EpisodeRecord {
    EpisodeRecord {
        iteration,
        phase,
        learner,
        update,
        episode: index,
        reward: t.total_reward(),
        discounted_return: t.discounted_return(gamma),
        length: t.len(),
        trigger_rate: t.trigger_fraction(),
        controller_actor: joint.controller.actor_digest(),
        regulator_actor: joint.regulator.actor_digest(),
    }
}

/// Best response of `learner` against its frozen partner: rollout and update
/// cycles until the mean episode reward settles or the update cap is hit.
pub fn ppo_learning<E, F>(
    factory: &F,
    joint: &mut JointPolicy,
    learner: Player,
    optimizer: &mut PpoLearner,
    cfg: &GameConfig,
    iteration: usize,
    log: &mut TrainingLog,
) -> Result<InnerOutcome, GameError>
where
    E: GameEnv,
    F: Fn(u64) -> Result<E, GameError> + Sync,
{
    let rc = cfg.rollout();
    let gamma = optimizer.config.gamma;
    let mut last: Option<f64> = None;
    let mut value = 0.0;
    for update in 0..cfg.inner_max_updates {
        let first = log.episodes.len() as u64;
        let seeds: Vec<u64> = (0..cfg.episodes_per_update as u64).map(|k| mix_seed(cfg.seed, first + k)).collect();
        let trajs: Vec<Trajectory> = run_episodes(factory, joint, &rc, &seeds, |_, _| ())?.into_iter().map(|(t, _)| t).collect();
        for t in &trajs {
            let index = log.episodes.len();
            log.episodes.push(episode_record(iteration, Phase::Learning, Some(learner), update, index, t, joint, gamma));
        }
        value = trajs.iter().map(|t| t.total_reward()).sum::<f64>() / trajs.len() as f64;
        let params = joint.params_mut(learner);
        let width = params.shape.input_width;
        let mut samples = Vec::new();
        for t in &trajs {
            samples.extend(t.samples(learner, width, &optimizer.config)?);
        }
        optimizer.update(params, samples)?;
        if let Some(prev) = last {
            if update + 1 >= cfg.inner_min_updates && (value - prev).abs() <= cfg.inner_epsilon {
                return Ok(InnerOutcome {
                    value,
                    updates: update + 1,
                    converged: true,
                });
            }
        }
        last = Some(value);
    }
    Ok(InnerOutcome {
        value,
        updates: cfg.inner_max_updates,
        converged: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameOutcome {
    pub joint: JointPolicy,
    pub converged: bool,
    /// The iteration cap was exhausted without convergence.
    pub max_iterations: bool,
    pub iterations: usize,
    pub log: TrainingLog,
}

/// Alternating best responses, regulator first, until the evaluated value
/// changes by at most `epsilon` or `n_max` macro-iterations have run.
/// `on_iteration` sees every macro-iteration boundary, e.g. to checkpoint.
pub fn fictitious_play<E, F>(
    controller: PolicyParameters,
    regulator: PolicyParameters,
    cfg: &GameConfig,
    factory: &F,
    on_iteration: &mut dyn FnMut(&MacroRecord, &JointPolicy) -> Result<(), GameError>,
) -> Result<GameOutcome, GameError>
where
    E: GameEnv,
    F: Fn(u64) -> Result<E, GameError> + Sync,
{
    cfg.validate()?;
    let learner_cfg = cfg.smoothed_learner();
    let gamma = learner_cfg.gamma;
    let rc = cfg.rollout();
    let eval_seeds = cfg.eval_seeds();
    let mut joint = JointPolicy {
        controller,
        regulator,
        flag: Player::Regulator,
    };
    let mut log = TrainingLog::default();

    let ev = policy_eval(&joint, factory, &eval_seeds, &rc, gamma)?;
    for t in &ev.trajectories {
        let index = log.episodes.len();
        log.episodes.push(episode_record(0, Phase::Evaluation, None, 0, index, t, &joint, gamma));
    }
    fit_critics(&mut joint, &ev.trajectories, &learner_cfg, mix_seed(cfg.seed, 0xc417))?;
    let record = MacroRecord {
        iteration: 0,
        learner: None,
        value: ev.value,
        critic_value: ev.critic_value,
        mean_episode_reward: ev.mean_reward,
        inner_updates: 0,
        inner_converged: false,
    };
    on_iteration(&record, &joint)?;
    log.macros.push(record);

    let mut optimizers = [
        PpoLearner::new(learner_cfg.clone(), &joint.controller, mix_seed(cfg.seed, 1))?,
        PpoLearner::new(learner_cfg.clone(), &joint.regulator, mix_seed(cfg.seed, 2))?,
    ];
    let mut previous = ev.value;
    let mut converged = false;
    let mut iterations = 0;
    for i in 1..=cfg.n_max {
        let learner = joint.flag;
        let opt = &mut optimizers[usize::from(learner == Player::Regulator)];
        let inner = ppo_learning(factory, &mut joint, learner, opt, cfg, i, &mut log)?;
        let ev = policy_eval(&joint, factory, &eval_seeds, &rc, gamma)?;
        let record = MacroRecord {
            iteration: i,
            learner: Some(learner),
            value: ev.value,
            critic_value: ev.critic_value,
            mean_episode_reward: ev.mean_reward,
            inner_updates: inner.updates,
            inner_converged: inner.converged,
        };
        on_iteration(&record, &joint)?;
        log.macros.push(record);
        joint.flag = learner.other();
        iterations = i;
        if i >= cfg.min_iterations && (ev.value - previous).abs() <= cfg.epsilon {
            converged = true;
            break;
        }
        previous = ev.value;
    }
    Ok(GameOutcome {
        joint,
        converged,
        max_iterations: !converged,
        iterations,
        log,
    })
}
