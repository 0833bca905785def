//! Actor-critic networks for the controller (C1, with an option head that
//! picks the CPG frequency ratio and a termination gate) and the regulator
//! (R2, action only), together with the PPO learner that trains them.

mod checkpoint;
mod mlp;
mod ppo;

pub use checkpoint::{config_digest, load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use mlp::{MlpCache, MlpShape};
pub use ppo::{
    gae_advantages, loss_and_gradient, ppo_update, Adam, Advantages, LearnerConfig, Objective, OptionEvent,
    PolicySample, PpoLearner, Trajectory, TrajectoryStep, UpdateStats,
};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::PolicyError;

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Player {
    Controller,
    Regulator,
}

impl Player {
    pub fn other(self) -> Self {
        match self {
            Player::Controller => Player::Regulator,
            Player::Regulator => Player::Controller,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Player::Controller => "C1",
            Player::Regulator => "R2",
        }
    }
}

/// Network sizes for one player.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyShape {
    pub player: Player,
    pub input_width: usize,
    pub action_width: usize,
    pub hidden: usize,
    /// Size of the option set; zero for the regulator.
    pub n_options: usize,
}

impl PolicyShape {
    pub fn controller(input_width: usize, action_width: usize, hidden: usize, n_options: usize) -> Self {
        Self {
            player: Player::Controller,
            input_width,
            action_width,
            hidden,
            n_options,
        }
    }

    pub fn regulator(input_width: usize, action_width: usize, hidden: usize) -> Self {
        Self {
            player: Player::Regulator,
            input_width,
            action_width,
            hidden,
            n_options: 0,
        }
    }

    fn head_width(&self) -> usize {
        match self.player {
            Player::Controller => self.action_width + self.n_options + 1,
            Player::Regulator => self.action_width,
        }
    }

    pub fn actor(&self) -> MlpShape {
        MlpShape::new(vec![self.input_width, self.hidden, self.hidden, self.head_width()])
    }

    pub fn critic(&self) -> MlpShape {
        MlpShape::new(vec![self.input_width, self.hidden, self.hidden, 1])
    }

    /// Offsets of the actor, log-std and critic blocks in the flat vector.
    pub fn layout(&self) -> [std::ops::Range<usize>; 3] {
        let a = self.actor().n_params();
        let s = a + self.action_width;
        [0..a, a..s, s..s + self.critic().n_params()]
    }

    pub fn n_params(&self) -> usize {
        self.layout()[2].end
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.input_width == 0 || self.action_width == 0 || self.hidden == 0 {
            return Err(PolicyError::InvalidConfig("network widths must be positive".into()));
        }
        if (self.player == Player::Controller) != (self.n_options > 0) {
            return Err(PolicyError::InvalidConfig(
                "only the controller has options, and it needs at least one".into(),
            ));
        }
        Ok(())
    }
}

/// Weights of one player's actor, exploration scale and critic, stored flat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParameters {
    pub shape: PolicyShape,
    pub theta: Vec<f64>,
}

impl PolicyParameters {
    pub fn init<R: Rng + ?Sized>(shape: PolicyShape, log_std: f64, rng: &mut R) -> Result<Self, PolicyError> {
        shape.validate()?;
        let mut theta = shape.actor().init(rng, 0.01);
        theta.extend(std::iter::repeat_n(log_std, shape.action_width));
        theta.extend(shape.critic().init(rng, 1.0));
        Ok(Self { shape, theta })
    }

    /// All weights zero, unit exploration scale.
    pub fn zeros(shape: PolicyShape) -> Self {
        let theta = vec![0.0; shape.n_params()];
        Self { shape, theta }
    }

    pub fn player(&self) -> Player {
        self.shape.player
    }

    pub fn actor_params(&self) -> &[f64] {
        &self.theta[self.shape.layout()[0].clone()]
    }

    pub fn log_std(&self) -> &[f64] {
        &self.theta[self.shape.layout()[1].clone()]
    }

    pub fn critic_params(&self) -> &[f64] {
        &self.theta[self.shape.layout()[2].clone()]
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().all(|v| v.is_finite())
    }

    /// Short hex digest of the actor and exploration blocks.
    pub fn actor_digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let end = self.shape.layout()[1].end;
        let mut h = Sha256::new();
        for v in &self.theta[..end] {
            h.update(v.to_le_bytes());
        }
        h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Little-endian bytes of the parameter vector, for freeze checks.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.theta.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    fn check_input(&self, x: &[f64]) -> Result<(), PolicyError> {
        if x.len() != self.shape.input_width {
            return Err(PolicyError::WidthMismatch {
                expected: self.shape.input_width,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(PolicyError::NonFinite("network input".into()));
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> Result<f64, PolicyError> {
        self.check_input(x)?;
        Ok(self.shape.critic().forward(self.critic_params(), x).output()[0])
    }
}

/// Diagonal Gaussian over actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagGaussian {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
}

impl DiagGaussian {
    pub fn log_prob(&self, a: &[f64]) -> f64 {
        self.mean
            .iter()
            .zip(&self.log_std)
            .zip(a)
            .map(|((m, ls), x)| {
                let z = (x - m) * (-ls).exp();
                -0.5 * z * z - ls - 0.5 * LN_2PI
            })
            .sum()
    }

    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|ls| ls + 0.5 * (1.0 + LN_2PI)).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.log_std)
            .map(|(m, ls)| {
                let z: f64 = rng.sample(StandardNormal);
                m + ls.exp() * z
            })
            .collect()
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln sigmoid(x)`, stable for large `|x|`.
pub(crate) fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerOutput {
    pub action: DiagGaussian,
    pub option_logits: Vec<f64>,
    pub beta_logit: f64,
    pub beta: f64,
    pub value: f64,
}

impl ControllerOutput {
    pub fn option_probs(&self) -> Vec<f64> {
        softmax(&self.option_logits)
    }

    /// Log-probability of one controller decision: the action, the
    /// termination draw (when there was an option to terminate) and, after a
    /// termination, the newly drawn option.
    pub fn log_prob(&self, action: &[f64], event: &OptionEvent) -> f64 {
        let mut lp = self.action.log_prob(action);
        if event.previous.is_some() {
            lp += if event.terminated {
                log_sigmoid(self.beta_logit)
            } else {
                log_sigmoid(-self.beta_logit)
            };
        }
        if event.terminated {
            lp += log_softmax(&self.option_logits)[event.option];
        }
        lp
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegulatorOutput {
    pub action: DiagGaussian,
    pub value: f64,
}

/// Controller forward pass over `zeta[..14]`.
pub fn forward_c1(zeta: &[f64], params: &PolicyParameters) -> Result<ControllerOutput, PolicyError> {
    if params.player() != Player::Controller {
        return Err(PolicyError::InvalidConfig("regulator parameters given to controller".into()));
    }
    params.check_input(zeta)?;
    let s = &params.shape;
    let head = s.actor().forward(params.actor_params(), zeta);
    let out = head.output();
    let n_a = s.action_width;
    let beta_logit = out[n_a + s.n_options];
    let value = s.critic().forward(params.critic_params(), zeta).output()[0];
    Ok(ControllerOutput {
        action: DiagGaussian {
            mean: out[..n_a].to_vec(),
            log_std: params.log_std().to_vec(),
        },
        option_logits: out[n_a..n_a + s.n_options].to_vec(),
        beta_logit,
        beta: sigmoid(beta_logit),
        value,
    })
}

/// Regulator forward pass over the full observation.
pub fn forward_r2(zeta: &[f64], params: &PolicyParameters) -> Result<RegulatorOutput, PolicyError> {
    if params.player() != Player::Regulator {
        return Err(PolicyError::InvalidConfig("controller parameters given to regulator".into()));
    }
    params.check_input(zeta)?;
    let s = &params.shape;
    let mean = s.actor().forward(params.actor_params(), zeta).output().to_vec();
    let value = s.critic().forward(params.critic_params(), zeta).output()[0];
    Ok(RegulatorOutput {
        action: DiagGaussian {
            mean,
            log_std: params.log_std().to_vec(),
        },
        value,
    })
}

/// A sampled controller decision.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerDecision {
    pub action: Vec<f64>,
    pub event: OptionEvent,
    pub log_prob: f64,
}

fn draw_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Samples the action, then with probability `beta` ends the running option
/// and draws a new one. Without a running option a new one is always drawn.
pub fn sample_step<R: Rng + ?Sized>(out: &ControllerOutput, previous: Option<usize>, rng: &mut R) -> ControllerDecision {
    let action = out.action.sample(rng);
    let terminated = match previous {
        None => true,
        Some(_) => rng.random::<f64>() < out.beta,
    };
    let option = if terminated {
        draw_categorical(&out.option_probs(), rng)
    } else {
        previous.expect("kept option exists")
    };
    let event = OptionEvent {
        previous,
        terminated,
        option,
    };
    let log_prob = out.log_prob(&action, &event);
    ControllerDecision { action, event, log_prob }
}

/// Deterministic decision: mean action, terminate when `beta > 1/2`, most
/// likely option.
pub fn greedy_step(out: &ControllerOutput, previous: Option<usize>) -> ControllerDecision {
    let terminated = previous.is_none() || out.beta > 0.5;
    let option = if terminated {
        out.option_logits
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0)
    } else {
        previous.unwrap()
    };
    let event = OptionEvent {
        previous,
        terminated,
        option,
    };
    let action = out.action.mean.clone();
    let log_prob = out.log_prob(&action, &event);
    ControllerDecision { action, event, log_prob }
}

/// Samples a regulator action and its log-probability.
pub fn sample_action<R: Rng + ?Sized>(dist: &DiagGaussian, rng: &mut R) -> (Vec<f64>, f64) {
    let a = dist.sample(rng);
    let lp = dist.log_prob(&a);
    (a, lp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ctrl_shape() -> PolicyShape {
        PolicyShape::controller(14, 4, 8, 4)
    }

    #[test]
    fn zero_network_outputs() {
        let p = PolicyParameters::zeros(ctrl_shape());
        let out = forward_c1(&[0.0; 14], &p).unwrap();
        assert_eq!(out.action.mean, vec![0.0; 4]);
        assert_eq!(out.beta, 0.5);
        assert_eq!(out.option_probs(), vec![0.25; 4]);
        assert_eq!(out.value, 0.0);
        let r = PolicyParameters::zeros(PolicyShape::regulator(26, 4, 8));
        let out = forward_r2(&[0.0; 26], &r).unwrap();
        assert_eq!(out.action.mean, vec![0.0; 4]);
        assert_eq!(out.value, 0.0);
    }

    #[test]
    fn width_and_role_checks() {
        let p = PolicyParameters::zeros(ctrl_shape());
        assert_eq!(
            forward_c1(&[0.0; 26], &p).unwrap_err(),
            PolicyError::WidthMismatch { expected: 14, got: 26 }
        );
        assert!(forward_r2(&[0.0; 14], &p).is_err());
        assert!(forward_c1(&[f64::NAN; 14], &p).is_err());
    }

    #[test]
    fn forward_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = PolicyParameters::init(ctrl_shape(), 0.5f64.ln(), &mut rng).unwrap();
        let x: Vec<f64> = (0..14).map(|i| (i as f64 * 0.37).sin()).collect();
        assert_eq!(forward_c1(&x, &p).unwrap(), forward_c1(&x, &p).unwrap());
    }

    #[test]
    fn gaussian_density_closed_form() {
        let d = DiagGaussian {
            mean: vec![0.3, -1.0],
            log_std: vec![0.2f64.ln(), 1.5f64.ln()],
        };
        let a = [0.5, 0.0];
        let mut expect = 1.0;
        for ((m, s), x) in [(0.3, 0.2), (-1.0, 1.5)].iter().zip(a) {
            let z: f64 = (x - m) / s;
            expect *= (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
        }
        assert!((d.log_prob(&a) - f64::ln(expect)).abs() < 1e-12);
    }

    #[test]
    fn beta_gate_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut out = forward_c1(&[0.0; 14], &PolicyParameters::zeros(ctrl_shape())).unwrap();
        out.beta = 0.0;
        for _ in 0..200 {
            let d = sample_step(&out, Some(2), &mut rng);
            assert!(!d.event.terminated && d.event.option == 2);
        }
        out.beta = 1.0;
        for _ in 0..200 {
            assert!(sample_step(&out, Some(2), &mut rng).event.terminated);
        }
    }

    #[test]
    fn numerically_stable_helpers() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!(log_sigmoid(-800.0).is_finite());
        let p = softmax(&[1000.0, 1000.0]);
        assert!((p[0] - 0.5).abs() < 1e-15);
        assert!((softmax(&[0.1, 2.0, -3.0]).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
