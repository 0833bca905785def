//! Rollout and evaluation throughput on the rayon pool versus one thread.
//! The single-thread case runs the same code inside a one-thread pool, which
//! is what the sequential build does without the pool overhead.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use snakebench::env::EnvConfig;
use snakebench::experiment::{evaluate, init_joint, maze_factory, snake_learner, Contender, EvalConfig};
use snakebench::game::{run_episodes, Actuation, RolloutConfig};
use snakebench::scenario::MazeLayout;

const EPISODES: usize = 8;
const STEPS: usize = 200;

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    let all = std::thread::available_parallelism().map_or(1, |n| n.get());
    let build = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    vec![("sequential", build(1)), ("parallel", build(all))]
}

fn rollouts(c: &mut Criterion) {
    let env = EnvConfig::default();
    let joint = init_joint(&env, &snake_learner(), 3).unwrap();
    let factory = maze_factory(&env, &MazeLayout::training(), Actuation::Cpg);
    let cfg = RolloutConfig {
        w1: 0.5,
        w2: 0.5,
        options: snake_learner().options,
        greedy: false,
        max_steps: STEPS,
    };
    let seeds: Vec<u64> = (0..EPISODES as u64).collect();
    let mut group = c.benchmark_group("rollouts");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new(name, EPISODES), |b| {
            b.iter(|| pool.install(|| run_episodes(&factory, &joint, &cfg, &seeds, |_, t| t.len()).unwrap()))
        });
    }
    group.finish();
}

fn evaluation(c: &mut Criterion) {
    let env = EnvConfig::default();
    let joint = init_joint(&env, &snake_learner(), 5).unwrap();
    let contender = Contender::controller_only("untrained", joint, Actuation::Cpg);
    let eval = EvalConfig {
        episodes: EPISODES,
        max_steps: STEPS,
        ..EvalConfig::default()
    };
    let options = snake_learner().options;
    let mut group = c.benchmark_group("evaluation");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new(name, EPISODES), |b| {
            b.iter(|| pool.install(|| evaluate(&env, &eval, &contender, &options).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, rollouts, evaluation);
criterion_main!(benches);
