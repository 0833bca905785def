use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{log_sigmoid, log_softmax, sigmoid, softmax, PolicyParameters, Player};
use crate::error::PolicyError;
use crate::parallel;

/// Option bookkeeping for one controller step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionEvent {
    /// Option running before this step, if any.
    pub previous: Option<usize>,
    pub terminated: bool,
    /// Option in force after this step.
    pub option: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Objective {
    /// Clipped probability-ratio surrogate.
    Clip { epsilon: f64 },
    /// Ratio surrogate with a KL penalty whose weight adapts toward `target`.
    AdaptiveKl { target: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub objective: Objective,
    pub learning_rate: f64,
    pub minibatch: usize,
    pub epochs: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub normalize_advantages: bool,
    /// Rewards are multiplied by this before advantages and critic targets
    /// are computed.
    pub reward_scale: f64,
    /// Frequency-ratio values the controller's options select from.
    pub options: Vec<f64>,
    pub hidden: usize,
    pub init_log_std: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.96,
            objective: Objective::Clip { epsilon: 0.2 },
            learning_rate: 5e-4,
            minibatch: 256,
            epochs: 4,
            value_coef: 0.5,
            entropy_coef: 0.01,
            max_grad_norm: 0.5,
            normalize_advantages: true,
            reward_scale: 1.0,
            options: vec![0.5, 1.0, 2.0, 4.0],
            hidden: 128,
            init_log_std: 0.5f64.ln(),
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let bad = |m: &str| Err(PolicyError::InvalidConfig(m.into()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must lie in [0, 1]");
        }
        match self.objective {
            Objective::Clip { epsilon } if !(epsilon > 0.0) => return bad("clip epsilon must be positive"),
            Objective::AdaptiveKl { target } if !(target > 0.0) => return bad("KL target must be positive"),
            _ => {}
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return bad("reward_scale must be positive");
        }
        if !(self.learning_rate > 0.0 && self.max_grad_norm > 0.0) {
            return bad("rates must be positive");
        }
        if !(self.value_coef >= 0.0 && self.entropy_coef >= 0.0) {
            return bad("loss weights must be nonnegative");
        }
        if self.minibatch == 0 || self.epochs == 0 || self.hidden == 0 {
            return bad("minibatch, epochs and hidden must be positive");
        }
        if self.options.is_empty() || self.options.iter().any(|k| !(*k > 0.0)) {
            return bad("options must be a nonempty set of positive ratios");
        }
        Ok(())
    }

    /// Option `k` encoded as it appears in the observation.
    pub fn option_code(&self, k: usize) -> f64 {
        let max = self.options.iter().cloned().fold(f64::MIN, f64::max);
        self.options[k] / max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub observation: Vec<f64>,
    pub controller_action: Vec<f64>,
    pub option: OptionEvent,
    pub beta: f64,
    pub controller_log_prob: f64,
    /// Present only on steps where the regulator acted.
    pub regulator_action: Option<Vec<f64>>,
    pub regulator_log_prob: f64,
    pub reward: f64,
    pub controller_value: f64,
    pub regulator_value: f64,
    pub triggered: bool,
    pub terminal: bool,
}

impl TrajectoryStep {
    pub fn value(&self, player: Player) -> f64 {
        match player {
            Player::Controller => self.controller_value,
            Player::Regulator => self.regulator_value,
        }
    }
}

/// One episode. The bootstrap values estimate the return after the last
/// step and are zero when the episode ended in a terminal state.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
    pub controller_bootstrap: f64,
    pub regulator_bootstrap: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn discounted_return(&self, gamma: f64) -> f64 {
        self.steps.iter().rev().fold(0.0, |acc, s| s.reward + gamma * acc)
    }

    pub fn trigger_fraction(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.steps.iter().filter(|s| s.triggered).count() as f64 / self.steps.len() as f64
    }

    pub fn bootstrap(&self, player: Player) -> f64 {
        match player {
            Player::Controller => self.controller_bootstrap,
            Player::Regulator => self.regulator_bootstrap,
        }
    }

    /// Training samples for `player` with advantages from its own critic.
    pub fn samples(&self, player: Player, input_width: usize, config: &LearnerConfig) -> Result<Vec<PolicySample>, PolicyError> {
        let values: Vec<f64> = self.steps.iter().map(|s| s.value(player)).collect();
        let rewards: Vec<f64> = self.steps.iter().map(|s| s.reward * config.reward_scale).collect();
        let adv = gae_advantages(&rewards, &values, self.bootstrap(player), config.gamma, config.gae_lambda)?;
        Ok(self
            .steps
            .iter()
            .zip(adv.advantages.iter().zip(&adv.returns))
            .map(|(s, (&advantage, &ret))| {
                let input = s.observation[..input_width].to_vec();
                match player {
                    Player::Controller => PolicySample {
                        input,
                        action: Some(s.controller_action.clone()),
                        option: Some(s.option),
                        old_log_prob: s.controller_log_prob,
                        advantage,
                        ret,
                    },
                    Player::Regulator => PolicySample {
                        input,
                        action: s.regulator_action.clone(),
                        option: None,
                        old_log_prob: s.regulator_log_prob,
                        advantage,
                        ret,
                    },
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Advantages {
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

/// Generalized advantage estimation over one episode. `bootstrap` is the
/// value after the final step (zero if it was terminal).
pub fn gae_advantages(rewards: &[f64], values: &[f64], bootstrap: f64, gamma: f64, lambda: f64) -> Result<Advantages, PolicyError> {
    if rewards.is_empty() {
        return Err(PolicyError::EmptyTrajectory);
    }
    if values.len() != rewards.len() {
        return Err(PolicyError::WidthMismatch {
            expected: rewards.len(),
            got: values.len(),
        });
    }
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next_value = bootstrap;
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let delta = rewards[t] + gamma * next_value - values[t];
        acc = delta + gamma * lambda * acc;
        adv[t] = acc;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok(Advantages { advantages: adv, returns })
}

/// One input to the learner. Samples without an action only train the
/// critic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySample {
    pub input: Vec<f64>,
    pub action: Option<Vec<f64>>,
    pub option: Option<OptionEvent>,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub ret: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub kl_coef: f64,
}

#[derive(Default)]
struct Partial {
    grad: Vec<f64>,
    policy: f64,
    value: f64,
    entropy: f64,
    kl: f64,
    clipped: f64,
}

const CHUNK: usize = 16;

/// Loss on a minibatch and its exact gradient with respect to every
/// parameter. Advantages are used as given.
pub fn loss_and_gradient(
    params: &PolicyParameters,
    batch: &[PolicySample],
    config: &LearnerConfig,
    kl_coef: f64,
) -> Result<(f64, UpdateStats, Vec<f64>), PolicyError> {
    if batch.is_empty() {
        return Err(PolicyError::EmptyTrajectory);
    }
    let n_policy = batch.iter().filter(|s| s.action.is_some()).count().max(1) as f64;
    let n_all = batch.len() as f64;
    let chunks: Vec<&[PolicySample]> = batch.chunks(CHUNK).collect();
    let parts = parallel::map_slice(&chunks, |chunk| {
        let mut p = Partial {
            grad: vec![0.0; params.theta.len()],
            ..Partial::default()
        };
        for s in chunk.iter() {
            accumulate(params, s, config, kl_coef, 1.0 / n_policy, 1.0 / n_all, &mut p);
        }
        p
    });
    let mut total = Partial {
        grad: vec![0.0; params.theta.len()],
        ..Partial::default()
    };
    for p in parts {
        total.grad.iter_mut().zip(&p.grad).for_each(|(a, b)| *a += b);
        total.policy += p.policy;
        total.value += p.value;
        total.entropy += p.entropy;
        total.kl += p.kl;
        total.clipped += p.clipped;
    }
    let loss = total.policy + config.value_coef * total.value - config.entropy_coef * total.entropy;
    if !loss.is_finite() || total.grad.iter().any(|g| !g.is_finite()) {
        return Err(PolicyError::NonFinite(format!(
            "loss or gradient (policy {}, value {}, entropy {})",
            total.policy, total.value, total.entropy
        )));
    }
    let stats = UpdateStats {
        policy_loss: total.policy,
        value_loss: total.value,
        entropy: total.entropy,
        approx_kl: total.kl,
        clip_fraction: total.clipped,
        kl_coef,
    };
    Ok((loss, stats, total.grad))
}

fn accumulate(
    params: &PolicyParameters,
    s: &PolicySample,
    cfg: &LearnerConfig,
    kl_coef: f64,
    w_pol: f64,
    w_val: f64,
    out: &mut Partial,
) {
    let shape = &params.shape;
    let [actor_r, std_r, critic_r] = shape.layout();

    let critic = shape.critic();
    let c_cache = critic.forward(&params.theta[critic_r.clone()], &s.input);
    let err = c_cache.output()[0] - s.ret;
    out.value += w_val * err * err;
    let d_v = [cfg.value_coef * w_val * 2.0 * err];
    critic.backward(&params.theta[critic_r.clone()], &c_cache, &d_v, &mut out.grad[critic_r]);

    let Some(action) = &s.action else { return };
    let actor = shape.actor();
    let a_cache = actor.forward(&params.theta[actor_r.clone()], &s.input);
    let head = a_cache.output();
    let n_a = shape.action_width;
    let log_std = &params.theta[std_r.clone()];

    // Log-probability of the stored decision and its gradient w.r.t. the
    // head outputs and the log-std block.
    let mut lp = 0.0;
    let mut d_head = vec![0.0; head.len()];
    let mut d_std = vec![0.0; n_a];
    for i in 0..n_a {
        let inv_var = (-2.0 * log_std[i]).exp();
        let diff = action[i] - head[i];
        lp += -0.5 * diff * diff * inv_var - log_std[i] - 0.5 * super::LN_2PI;
        d_head[i] = diff * inv_var;
        d_std[i] = diff * diff * inv_var - 1.0;
    }
    let mut entropy: f64 = log_std.iter().map(|ls| ls + 0.5 * (1.0 + super::LN_2PI)).sum();
    let mut d_ent_head = vec![0.0; head.len()];
    let d_ent_std = vec![1.0; n_a];
    if let (Player::Controller, Some(ev)) = (shape.player, s.option) {
        let n_o = shape.n_options;
        let logits = &head[n_a..n_a + n_o];
        let bl = head[n_a + n_o];
        let beta = sigmoid(bl);
        if ev.previous.is_some() {
            if ev.terminated {
                lp += log_sigmoid(bl);
                d_head[n_a + n_o] = 1.0 - beta;
            } else {
                lp += log_sigmoid(-bl);
                d_head[n_a + n_o] = -beta;
            }
        }
        let probs = softmax(logits);
        if ev.terminated {
            lp += log_softmax(logits)[ev.option];
            for k in 0..n_o {
                d_head[n_a + k] = f64::from(k == ev.option) - probs[k];
            }
        }
        let log_p = log_softmax(logits);
        let h_opt: f64 = -probs.iter().zip(&log_p).map(|(p, l)| p * l).sum::<f64>();
        for k in 0..n_o {
            d_ent_head[n_a + k] = -probs[k] * (log_p[k] + h_opt);
        }
        let h_beta = -(beta * beta.max(1e-300).ln() + (1.0 - beta) * (1.0 - beta).max(1e-300).ln());
        d_ent_head[n_a + n_o] = beta * (1.0 - beta) * ((1.0 - beta).max(1e-300).ln() - beta.max(1e-300).ln());
        entropy += h_opt + h_beta;
    }

    let log_ratio = lp - s.old_log_prob;
    let ratio = log_ratio.exp();
    let a = s.advantage;
    let (loss, d_lp) = match cfg.objective {
        Objective::Clip { epsilon } => {
            let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
            let active = !((a > 0.0 && ratio > 1.0 + epsilon) || (a < 0.0 && ratio < 1.0 - epsilon));
            if !active {
                out.clipped += w_pol;
            }
            (-(ratio * a).min(clipped * a), if active { -a * ratio } else { 0.0 })
        }
        Objective::AdaptiveKl { .. } => {
            let kl = (ratio - 1.0) - log_ratio;
            (-ratio * a + kl_coef * kl, -a * ratio + kl_coef * (ratio - 1.0))
        }
    };
    out.policy += w_pol * loss;
    out.entropy += w_pol * entropy;
    out.kl += w_pol * ((ratio - 1.0) - log_ratio);

    let g_pol = w_pol * d_lp;
    let g_ent = -cfg.entropy_coef * w_pol;
    let d_out: Vec<f64> = d_head.iter().zip(&d_ent_head).map(|(h, e)| g_pol * h + g_ent * e).collect();
    actor.backward(&params.theta[actor_r.clone()], &a_cache, &d_out, &mut out.grad[actor_r]);
    for (i, g) in out.grad[std_r].iter_mut().enumerate() {
        *g += g_pol * d_std[i] + g_ent * d_ent_std[i];
    }
}

/// Adam optimizer state for one parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..theta.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            theta[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}

/// PPO learner for one player: optimizer state, minibatch shuffling and the
/// adaptive KL weight persist across updates.
#[derive(Debug, Clone)]
pub struct PpoLearner {
    pub config: LearnerConfig,
    adam: Adam,
    kl_coef: f64,
    rng: ChaCha8Rng,
}

impl PpoLearner {
    pub fn new(config: LearnerConfig, params: &PolicyParameters, seed: u64) -> Result<Self, PolicyError> {
        config.validate()?;
        Ok(Self {
            adam: Adam::new(params.theta.len(), config.learning_rate),
            config,
            kl_coef: 1.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Several epochs of minibatch steps. On a non-finite loss or gradient
    /// the parameters are left untouched and the error is returned.
    pub fn update(&mut self, params: &mut PolicyParameters, mut samples: Vec<PolicySample>) -> Result<UpdateStats, PolicyError> {
        if samples.is_empty() {
            return Err(PolicyError::EmptyTrajectory);
        }
        if self.config.normalize_advantages {
            normalize(&mut samples);
        }
        let mut work = params.clone();
        let mut adam = self.adam.clone();
        let mut order: Vec<usize> = (0..samples.len()).collect();
        let mut stats = UpdateStats::default();
        let mut n_batches = 0.0;
        for _ in 0..self.config.epochs {
            order.shuffle(&mut self.rng);
            for idx in order.chunks(self.config.minibatch) {
                let batch: Vec<PolicySample> = idx.iter().map(|&i| samples[i].clone()).collect();
                let (_, s, mut grad) = loss_and_gradient(&work, &batch, &self.config, self.kl_coef)?;
                let [actor, log_std, critic] = work.shape.layout();
                clip_norm(&mut grad[actor.start..log_std.end], self.config.max_grad_norm);
                clip_norm(&mut grad[critic], self.config.max_grad_norm);
                adam.step(&mut work.theta, &grad);
                stats.policy_loss += s.policy_loss;
                stats.value_loss += s.value_loss;
                stats.entropy += s.entropy;
                stats.approx_kl += s.approx_kl;
                stats.clip_fraction += s.clip_fraction;
                n_batches += 1.0;
            }
        }
        if !work.is_finite() {
            return Err(PolicyError::NonFinite("parameters after update".into()));
        }
        stats.policy_loss /= n_batches;
        stats.value_loss /= n_batches;
        stats.entropy /= n_batches;
        stats.approx_kl /= n_batches;
        stats.clip_fraction /= n_batches;
        if let Objective::AdaptiveKl { target } = self.config.objective {
            if stats.approx_kl > 1.5 * target {
                self.kl_coef *= 2.0;
            } else if stats.approx_kl < target / 1.5 {
                self.kl_coef *= 0.5;
            }
        }
        stats.kl_coef = self.kl_coef;
        *params = work;
        self.adam = adam;
        Ok(stats)
    }
}

/// Actor and critic are separate networks, so each gradient block is
/// clipped on its own and large value errors cannot starve the actor.
fn clip_norm(grad: &mut [f64], max: f64) {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max {
        let k = max / norm;
        grad.iter_mut().for_each(|g| *g *= k);
    }
}

fn normalize(samples: &mut [PolicySample]) {
    let adv: Vec<f64> = samples.iter().filter(|s| s.action.is_some()).map(|s| s.advantage).collect();
    if adv.len() < 2 {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    for s in samples.iter_mut() {
        s.advantage = if std > 1e-8 { (s.advantage - mean) / std } else { s.advantage - mean };
    }
}

/// Stateless convenience wrapper: a fresh learner, one update.
pub fn ppo_update(
    params: &PolicyParameters,
    samples: Vec<PolicySample>,
    config: &LearnerConfig,
    seed: u64,
) -> Result<(PolicyParameters, UpdateStats), PolicyError> {
    let mut out = params.clone();
    let stats = PpoLearner::new(config.clone(), params, seed)?.update(&mut out, samples)?;
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gae_reductions() {
        let a = gae_advantages(&[2.0], &[0.5], 0.0, 0.9, 1.0).unwrap();
        assert_eq!(a.advantages, vec![1.5]);
        assert_eq!(a.returns, vec![2.0]);

        let a = gae_advantages(&[0.0; 5], &[0.0; 5], 0.0, 0.9, 0.95).unwrap();
        assert!(a.advantages.iter().all(|&x| x == 0.0));

        let r = [1.0, -0.5, 2.0];
        let v = [0.3, 0.1, -0.2];
        let a = gae_advantages(&r, &v, 0.7, 0.9, 0.0).unwrap();
        let next = [0.1, -0.2, 0.7];
        for t in 0..3 {
            assert_eq!(a.advantages[t], r[t] + 0.9 * next[t] - v[t]);
        }
        assert_eq!(gae_advantages(&[], &[], 0.0, 0.9, 0.9).unwrap_err(), PolicyError::EmptyTrajectory);
    }

    #[test]
    fn config_validation() {
        assert!(LearnerConfig::default().validate().is_ok());
        let bad = LearnerConfig {
            gamma: 1.0,
            ..LearnerConfig::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!(LearnerConfig::default().option_code(1), 0.25);
    }
}
