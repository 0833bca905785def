use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snakebench::policy::*;

fn random_sample(rng: &mut ChaCha8Rng, params: &PolicyParameters, with_action: bool) -> PolicySample {
    let s = &params.shape;
    let input: Vec<f64> = (0..s.input_width).map(|_| rng.random_range(-1.5..1.5)).collect();
    let action: Vec<f64> = (0..s.action_width).map(|_| rng.random_range(-1.0..1.0)).collect();
    let option = (s.player == Player::Controller).then(|| {
        let previous = rng.random_bool(0.7).then(|| rng.random_range(0..s.n_options));
        let terminated = previous.is_none() || rng.random_bool(0.5);
        OptionEvent {
            previous,
            terminated,
            option: if terminated { rng.random_range(0..s.n_options) } else { previous.unwrap() },
        }
    });
    // Keep the ratio near one so the clipped surrogate is smooth here.
    let lp = match option {
        Some(ev) => forward_c1(&input, params).unwrap().log_prob(&action, &ev),
        None => forward_r2(&input, params).unwrap().action.log_prob(&action),
    };
    PolicySample {
        input,
        action: with_action.then_some(action),
        option,
        old_log_prob: lp + rng.random_range(-0.05..0.05),
        advantage: rng.random_range(-2.0..2.0),
        ret: rng.random_range(-3.0..3.0),
    }
}

fn check_gradient(params: &PolicyParameters, batch: &[PolicySample], cfg: &LearnerConfig, kl_coef: f64) -> f64 {
    let (_, _, grad) = loss_and_gradient(params, batch, cfg, kl_coef).unwrap();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..params.theta.len() {
        let mut up = params.clone();
        let mut dn = params.clone();
        up.theta[i] += h;
        dn.theta[i] -= h;
        let fd = (loss_and_gradient(&up, batch, cfg, kl_coef).unwrap().0 - loss_and_gradient(&dn, batch, cfg, kl_coef).unwrap().0) / (2.0 * h);
        let scale = fd.abs().max(grad[i].abs());
        let err = if scale > 1e-5 { (fd - grad[i]).abs() / scale } else { (fd - grad[i]).abs() / 1e-5 };
        worst = worst.max(err);
    }
    worst
}

#[test]
fn loss_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let cfg = LearnerConfig {
        entropy_coef: 0.05,
        ..LearnerConfig::default()
    };
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let shape = if trial % 2 == 0 {
            PolicyShape::controller(5, 3, 2, 4)
        } else {
            PolicyShape::regulator(6, 3, 2)
        };
        let params = PolicyParameters::init(shape, rng.random_range(-1.0..0.0), &mut rng).unwrap();
        let mut params = params;
        for v in params.theta.iter_mut() {
            *v += rng.random_range(-0.5..0.5);
        }
        let batch: Vec<PolicySample> = (0..6).map(|k| random_sample(&mut rng, &params, k != 5)).collect();
        worst = worst.max(check_gradient(&params, &batch, &cfg, 0.0));
    }
    assert!(worst <= 1e-4, "worst relative error {worst}");
}

#[test]
fn kl_objective_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = LearnerConfig {
        objective: Objective::AdaptiveKl { target: 0.02 },
        ..LearnerConfig::default()
    };
    for _ in 0..10 {
        let params = PolicyParameters::init(PolicyShape::controller(4, 2, 3, 3), -0.3, &mut rng).unwrap();
        let batch: Vec<PolicySample> = (0..5).map(|_| random_sample(&mut rng, &params, true)).collect();
        let worst = check_gradient(&params, &batch, &cfg, 0.7);
        assert!(worst <= 1e-4, "worst relative error {worst}");
    }
}

#[test]
fn zero_advantage_moves_only_the_critic() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let params = PolicyParameters::init(PolicyShape::controller(5, 3, 4, 4), -0.5, &mut rng).unwrap();
    let cfg = LearnerConfig {
        entropy_coef: 0.0,
        ..LearnerConfig::default()
    };
    let batch: Vec<PolicySample> = (0..8)
        .map(|_| PolicySample {
            advantage: 0.0,
            ..random_sample(&mut rng, &params, true)
        })
        .collect();
    let (_, _, grad) = loss_and_gradient(&params, &batch, &cfg, 0.0).unwrap();
    let [actor, log_std, critic] = params.shape.layout();
    assert!(grad[actor].iter().chain(&grad[log_std]).all(|&g| g == 0.0));
    assert!(grad[critic].iter().any(|&g| g != 0.0));
}

#[test]
fn clipped_samples_carry_no_policy_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let params = PolicyParameters::init(PolicyShape::regulator(3, 2, 4), -0.5, &mut rng).unwrap();
    let cfg = LearnerConfig {
        entropy_coef: 0.0,
        value_coef: 0.0,
        ..LearnerConfig::default()
    };
    let mut s = random_sample(&mut rng, &params, true);
    s.advantage = 1.0;
    s.old_log_prob -= 1.0; // ratio e > 1 + epsilon
    let (_, stats, grad) = loss_and_gradient(&params, &[s], &cfg, 0.0).unwrap();
    assert!(grad.iter().all(|&g| g == 0.0));
    assert_eq!(stats.clip_fraction, 1.0);
}

#[test]
fn sampled_log_probs_match_density() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let params = PolicyParameters::init(PolicyShape::controller(14, 4, 8, 4), 0.5f64.ln(), &mut rng).unwrap();
    let x: Vec<f64> = (0..14).map(|_| rng.random_range(-1.0..1.0)).collect();
    let out = forward_c1(&x, &params).unwrap();
    for _ in 0..100 {
        let d = sample_step(&out, Some(1), &mut rng);
        let mut expect = out.action.log_prob(&d.action);
        expect += if d.event.terminated { out.beta.ln() } else { (1.0 - out.beta).ln() };
        if d.event.terminated {
            expect += out.option_probs()[d.event.option].ln();
        }
        assert!((d.log_prob - expect).abs() < 1e-10);
    }
    let p = out.option_probs();
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!((0.0..=1.0).contains(&out.beta));
}

/// One-step bandit: action "right" (first coordinate positive) pays 1, "left"
/// pays 0. The rewarded action has probability `Phi(mean / std)`, so it is
/// monotone in `mean / std` and exceeds 0.9 once that passes 1.2816.
#[test]
fn bandit_probability_rises_monotonically() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let cfg = LearnerConfig {
        minibatch: 64,
        learning_rate: 1e-3,
        entropy_coef: 0.0,
        ..LearnerConfig::default()
    };
    let mut params = PolicyParameters::init(PolicyShape::regulator(1, 1, 8), cfg.init_log_std, &mut rng).unwrap();
    let mut learner = PpoLearner::new(cfg.clone(), &params, 5).unwrap();
    let z = |p: &PolicyParameters| {
        let out = forward_r2(&[1.0], p).unwrap();
        out.action.mean[0] / out.action.log_std[0].exp()
    };
    let mut prev = z(&params);
    let start = prev;
    for _ in 0..100 {
        let out = forward_r2(&[1.0], &params).unwrap();
        let samples: Vec<PolicySample> = (0..256)
            .map(|_| {
                let (a, lp) = sample_action(&out.action, &mut rng);
                let r = if a[0] > 0.0 { 1.0 } else { 0.0 };
                PolicySample {
                    input: vec![1.0],
                    action: Some(a),
                    option: None,
                    old_log_prob: lp,
                    advantage: r - out.value,
                    ret: r,
                }
            })
            .collect();
        learner.update(&mut params, samples).unwrap();
        let now = z(&params);
        assert!(now >= prev, "probability dropped: {prev} -> {now}");
        prev = now;
    }
    assert!(prev > 1.2816 && prev > start, "final mean/std {prev}");
}

#[test]
fn learner_only_touches_its_own_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = LearnerConfig::default();
    let frozen = PolicyParameters::init(PolicyShape::controller(14, 4, 8, 4), cfg.init_log_std, &mut rng).unwrap();
    let before = frozen.to_bytes();
    let mut learner_params = PolicyParameters::init(PolicyShape::regulator(26, 4, 8), cfg.init_log_std, &mut rng).unwrap();
    let probe = PolicyParameters::zeros(PolicyShape::regulator(26, 4, 8));
    let batch: Vec<PolicySample> = (0..32).map(|_| random_sample(&mut rng, &probe, true)).collect();
    let mut learner = PpoLearner::new(cfg, &learner_params, 0).unwrap();
    let old = learner_params.to_bytes();
    learner.update(&mut learner_params, batch).unwrap();
    assert_ne!(learner_params.to_bytes(), old);
    assert_eq!(frozen.to_bytes(), before);
}
