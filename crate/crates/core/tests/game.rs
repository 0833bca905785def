
use snakebench::env::EnvConfig;
use snakebench::error::GameError;
use snakebench::game::{
    fictitious_play, fit_critics, mix_seed, normal_cdf, policy_eval, rollout, GameConfig, GameEnv, JointPolicy,
    MatrixGame, Phase, PointMass, RolloutConfig, SnakeGame, Actuation, ppo_learning, TrainingLog,
};
use snakebench::policy::{forward_c1, forward_r2, LearnerConfig, Player, PolicyParameters, PpoLearner};
use snakebench::scenario::{generate_training_scenario, MazeLayout, generate_scenario};

fn matrix_config(seed: u64) -> GameConfig {
    GameConfig {
        epsilon: 1e-3,
        n_max: 20,
        min_iterations: 2,
        eval_episodes: 64,
        episodes_per_update: 64,
        inner_epsilon: 1e-3,
        inner_min_updates: 5,
        inner_max_updates: 40,
        max_steps: 1,
        seed,
        learner: LearnerConfig {
            hidden: 8,
            minibatch: 64,
            learning_rate: 3e-3,
            entropy_coef: 0.0,
            ..LearnerConfig::default()
        },
        ..GameConfig::default()
    }
}

fn marginal(params: &PolicyParameters) -> f64 {
    let (mean, log_std) = match params.player() {
        Player::Controller => {
            let out = forward_c1(&[1.0], params).unwrap();
            (out.action.mean[0], out.action.log_std[0])
        }
        Player::Regulator => {
            let out = forward_r2(&[1.0], params).unwrap();
            (out.action.mean[0], out.action.log_std[0])
        }
    };
    normal_cdf(mean / log_std.exp())
}

fn matrix_factory(_: u64) -> Result<MatrixGame, GameError> {
    Ok(MatrixGame::coordination())
}

#[test]
fn matrix_game_reaches_the_cooperative_profile() {
    let mut solved = 0;
    for seed in 0..10 {
        let cfg = matrix_config(seed);
        let joint = JointPolicy::init(&MatrixGame::coordination(), &cfg.learner, seed).unwrap();
        let out = fictitious_play(joint.controller, joint.regulator, &cfg, &matrix_factory, &mut |_, _| Ok(())).unwrap();
        let (p1, p2) = (marginal(&out.joint.controller), marginal(&out.joint.regulator));
        println!("seed {seed}: iterations {} p1 {p1:.4} p2 {p2:.4}", out.iterations);
        if p1 > 0.95 && p2 > 0.95 && out.iterations <= 20 {
            solved += 1;
        }
    }
    assert_eq!(solved, 10);
}

fn point_config(seed: u64) -> GameConfig {
    GameConfig {
        episodes_per_update: 16,
        inner_epsilon: 1e-12,
        inner_min_updates: 1,
        inner_max_updates: 60,
        max_steps: 100,
        seed,
        learner: LearnerConfig {
            hidden: 32,
            minibatch: 128,
            learning_rate: 1e-3,
            ..LearnerConfig::default()
        },
        ..GameConfig::default()
    }
}

fn decile_means(rewards: &[f64]) -> (f64, f64) {
    let k = rewards.len() / 10;
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    (mean(&rewards[..k]), mean(&rewards[rewards.len() - k..]))
}

#[test]
fn ppo_improves_point_mass_reward() {
    for seed in 0..3 {
        let cfg = point_config(seed);
        let factory = |s: u64| Ok::<_, GameError>(PointMass::random(s));
        let mut joint = JointPolicy::init(&PointMass::random(0), &cfg.learner, seed).unwrap();
        let mut learner = PpoLearner::new(cfg.learner.clone(), &joint.controller, seed).unwrap();
        let mut log = TrainingLog::default();
        ppo_learning(&factory, &mut joint, Player::Controller, &mut learner, &cfg, 1, &mut log).unwrap();
        let (first, last) = decile_means(&log.phase_rewards(Phase::Learning));
        println!("seed {seed}: first decile {first:.2} last decile {last:.2}");
        assert!(last > first);
    }
}

/// Pays 1 per step and ends after `len` steps.
struct Constant {
    len: usize,
    t: usize,
}

impl GameEnv for Constant {
    fn observation_width(&self) -> usize {
        2
    }
    fn controller_width(&self) -> usize {
        1
    }
    fn action_width(&self) -> usize {
        1
    }
    fn observe(&self, _: &snakebench::game::ControlMemory) -> Vec<f64> {
        vec![self.t as f64 / self.len as f64, 1.0]
    }
    fn triggered(&self) -> bool {
        self.t % 2 == 0
    }
    fn step(&mut self, _: &snakebench::game::JointControl<'_>) -> Result<snakebench::game::Transition, GameError> {
        self.t += 1;
        Ok(snakebench::game::Transition {
            reward: 1.0,
            terminal: self.t == self.len,
            truncated: false,
        })
    }
}

#[test]
fn evaluation_of_constant_reward_is_a_geometric_series() {
    let learner = LearnerConfig {
        hidden: 4,
        ..LearnerConfig::default()
    };
    let joint = JointPolicy::init(&Constant { len: 1, t: 0 }, &learner, 3).unwrap();
    let rc = RolloutConfig {
        w1: 0.5,
        w2: 0.5,
        options: learner.options.clone(),
        greedy: false,
        max_steps: 1000,
    };
    let gamma = 0.99;
    for len in [1usize, 7, 50] {
        let factory = move |_: u64| Ok::<_, GameError>(Constant { len, t: 0 });
        let ev = policy_eval(&joint, &factory, &[1, 2, 3], &rc, gamma).unwrap();
        // Independent closed form of sum_{t<T} gamma^t.
        let expected = (1.0 - gamma.powi(len as i32)) / (1.0 - gamma);
        assert!((ev.value - expected).abs() < 1e-12 * expected, "{len}: {} vs {expected}", ev.value);
        assert!(ev.trajectories.iter().all(|t| t.len() == len));
    }
}

#[test]
fn critic_fit_leaves_actors_untouched() {
    let learner = LearnerConfig {
        hidden: 4,
        ..LearnerConfig::default()
    };
    let mut joint = JointPolicy::init(&Constant { len: 1, t: 0 }, &learner, 4).unwrap();
    let before = joint.clone();
    let factory = |_: u64| Ok::<_, GameError>(Constant { len: 20, t: 0 });
    let rc = RolloutConfig {
        w1: 0.5,
        w2: 0.5,
        options: learner.options.clone(),
        greedy: false,
        max_steps: 1000,
    };
    let ev = policy_eval(&joint, &factory, &[1, 2], &rc, 0.99).unwrap();
    fit_critics(&mut joint, &ev.trajectories, &learner, 9).unwrap();
    for p in [Player::Controller, Player::Regulator] {
        let (a, b) = (joint.params(p), before.params(p));
        let end = a.shape.layout()[1].end;
        assert_eq!(a.theta[..end], b.theta[..end]);
        assert_ne!(a.critic_params(), b.critic_params());
    }
}

fn snake_rollout_config(w1: f64, w2: f64) -> RolloutConfig {
    RolloutConfig {
        w1,
        w2,
        options: LearnerConfig::default().options,
        greedy: false,
        max_steps: 60,
    }
}

#[test]
fn zero_regulator_weight_reproduces_the_controller_alone() {
    let robot = EnvConfig::default().robot;
    let scenario = generate_training_scenario(&robot, 5).unwrap();
    let make = || SnakeGame::from_scenario(EnvConfig::default(), &scenario, Actuation::Cpg).unwrap();
    let learner = LearnerConfig {
        hidden: 16,
        ..LearnerConfig::default()
    };
    let a = JointPolicy::init(&make(), &learner, 1).unwrap();
    let mut b = a.clone();
    b.regulator = JointPolicy::init(&make(), &learner, 2).unwrap().regulator;
    let rc = snake_rollout_config(1.0, 0.0);
    let ta = rollout(&mut make(), &a, &rc, 77).unwrap();
    let tb = rollout(&mut make(), &b, &rc, 77).unwrap();
    assert_eq!(ta.len(), tb.len());
    for (x, y) in ta.steps.iter().zip(&tb.steps) {
        assert_eq!(x.controller_action, y.controller_action);
        assert_eq!(x.option, y.option);
        assert_eq!(x.reward, y.reward);
        assert_eq!(x.observation, y.observation);
    }

    // Without obstacles the regulator never acts, whatever its weight.
    let free = generate_scenario(&MazeLayout::free(), &robot, 5).unwrap();
    let make_free = || SnakeGame::from_scenario(EnvConfig::default(), &free, Actuation::Cpg).unwrap();
    let ta = rollout(&mut make_free(), &a, &snake_rollout_config(0.5, 0.5), 8).unwrap();
    let tb = rollout(&mut make_free(), &b, &snake_rollout_config(1.0, 0.0), 8).unwrap();
    assert!(ta.steps.iter().all(|s| !s.triggered && s.regulator_action.is_none()));
    assert_eq!(ta.rewards(), tb.rewards());
}

#[test]
fn rollouts_are_deterministic_and_share_the_reward() {
    let robot = EnvConfig::default().robot;
    let scenario = generate_training_scenario(&robot, 6).unwrap();
    let make = || SnakeGame::from_scenario(EnvConfig::default(), &scenario, Actuation::Cpg).unwrap();
    let learner = LearnerConfig {
        hidden: 16,
        ..LearnerConfig::default()
    };
    let joint = JointPolicy::init(&make(), &learner, 1).unwrap();
    let rc = snake_rollout_config(0.5, 0.5);
    let t1 = rollout(&mut make(), &joint, &rc, 3).unwrap();
    assert_eq!(t1, rollout(&mut make(), &joint, &rc, 3).unwrap());
    assert_ne!(t1, rollout(&mut make(), &joint, &rc, 4).unwrap());

    // Both players see the same reward: with zero critics their returns agree.
    let mut zeroed = t1.clone();
    for s in &mut zeroed.steps {
        s.controller_value = 0.0;
        s.regulator_value = 0.0;
    }
    zeroed.controller_bootstrap = 0.0;
    zeroed.regulator_bootstrap = 0.0;
    let c = zeroed.samples(Player::Controller, 14, &LearnerConfig::default()).unwrap();
    let r = zeroed.samples(Player::Regulator, 26, &LearnerConfig::default()).unwrap();
    for (x, y) in c.iter().zip(&r) {
        assert_eq!(x.ret, y.ret);
    }
}

#[test]
fn training_log_records_frozen_phases() {
    let cfg = GameConfig {
        n_max: 4,
        epsilon: 1e-9,
        ..matrix_config(2)
    };
    let joint = JointPolicy::init(&MatrixGame::coordination(), &cfg.learner, 2).unwrap();
    let (c0, r0) = (joint.controller.actor_digest(), joint.regulator.actor_digest());
    let mut seen = Vec::new();
    let out = fictitious_play(joint.controller, joint.regulator, &cfg, &matrix_factory, &mut |m, j| {
        seen.push((m.iteration, j.controller.actor_digest(), j.regulator.actor_digest()));
        Ok(())
    })
    .unwrap();
    let log = &out.log;
    assert_eq!(log.macros[0].learner, None);
    let learners: Vec<_> = log.macros[1..].iter().map(|m| m.learner.unwrap()).collect();
    assert!(learners.len() >= 2 && learners.len() <= 4);
    for (i, p) in learners.iter().enumerate() {
        assert_eq!(*p, if i % 2 == 0 { Player::Regulator } else { Player::Controller });
    }
    assert_eq!(out.iterations, learners.len());
    assert_eq!(out.max_iterations, !out.converged);

    // Evaluation leaves both actors as they were.
    let eval: Vec<_> = log.episodes.iter().filter(|e| e.phase == Phase::Evaluation).collect();
    assert_eq!(eval.len(), cfg.eval_episodes);
    assert!(eval.iter().all(|e| e.controller_actor == c0 && e.regulator_actor == r0));
    assert_eq!(seen[0], (0, c0, r0));

    // While one player learns, the other's actor never changes.
    for m in &log.macros[1..] {
        let eps: Vec<_> = log.episodes.iter().filter(|e| e.iteration == m.iteration).collect();
        let frozen = |e: &&snakebench::game::EpisodeRecord| match m.learner.unwrap() {
            Player::Controller => e.regulator_actor.clone(),
            Player::Regulator => e.controller_actor.clone(),
        };
        assert!(eps.iter().all(|e| frozen(e) == frozen(&eps[0])));
        let (_, c, r) = &seen[m.iteration];
        assert_eq!(&frozen(&eps[0]), if m.learner == Some(Player::Controller) { r } else { c });
    }
}

#[test]
fn seeds_are_mixed() {
    assert_ne!(mix_seed(0, 0), mix_seed(0, 1));
    assert_ne!(mix_seed(1, 0), mix_seed(0, 1));
    assert_eq!(mix_seed(5, 9), mix_seed(5, 9));
}

#[test]
fn invalid_weights_are_rejected() {
    let cfg = GameConfig {
        w1: 0.7,
        w2: 0.7,
        ..GameConfig::default()
    };
    assert!(matches!(cfg.validate(), Err(GameError::InvalidConfig(_))));
}
