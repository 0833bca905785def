//! Command-line workbench: pretraining, fictitious-play training,
//! evaluation, trajectory export, comparison tables and plots.

mod bundle;
mod config;
mod plot;
mod tables;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use snakebench::experiment::{
    compare, evaluate, init_joint, maze_factory, pretrain_free, train_game, Contender, ExperimentConfig,
};
use snakebench::game::{mix_seed, rollout, Actuation, RolloutConfig};
use snakebench::metrics::compute_metrics;
use snakebench::policy::config_digest;
use snakebench::scenario::{generate_scenario, MazeLayout};

use bundle::PolicyBundle;

#[derive(Parser)]
#[command(name = "snakebench", version, about = "Snake robot locomotion workbench")]
struct Cli {
    /// Experiment file (TOML, one section per module).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the controller alone without obstacles.
    PretrainFree(PretrainArgs),
    /// Fictitious play between controller and regulator in the training maze.
    Train(TrainArgs),
    /// Metric table over fixed-seed test mazes.
    Evaluate(EvaluateArgs),
    /// One episode with its full trajectory.
    Rollout(RolloutArgs),
    /// Several policies on the same test mazes, one table row each.
    Compare(CompareArgs),
    /// Figures from exported trajectories or training logs.
    Plot(PlotArgs),
}

#[derive(Args)]
struct PretrainArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    updates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Drive curvature directly instead of through the oscillators.
    #[arg(long)]
    no_cpg: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    out: PathBuf,
    /// Bundle whose controller starts training (from `pretrain-free`).
    #[arg(long)]
    init: PathBuf,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvalSelection {
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Mean actions instead of samples.
    #[arg(long)]
    greedy: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    policy: PathBuf,
    #[command(flatten)]
    sel: EvalSelection,
    /// Directory for the aggregate and per-episode tables; stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RolloutArgs {
    #[arg(long)]
    policy: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use the evaluation layout without obstacles.
    #[arg(long)]
    no_obstacles: bool,
    #[arg(long)]
    greedy: bool,
    /// Line-delimited JSON trajectory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Policy bundles, one table row each, in order.
    #[arg(long = "policy", required = true)]
    policies: Vec<PathBuf>,
    /// Add a row for a freshly initialised controller.
    #[arg(long)]
    untrained: bool,
    #[command(flatten)]
    sel: EvalSelection,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[command(subcommand)]
    kind: PlotKind,
}

#[derive(Subcommand)]
enum PlotKind {
    /// Head path coloured by step reward.
    Path {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Episode reward over training.
    Curve {
        /// `episodes.csv` from `train`.
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value_t = 32)]
        window: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tonic input, option, curvature and contact over one episode.
    Events {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn apply_selection(cfg: &mut ExperimentConfig, sel: &EvalSelection) {
    if let Some(n) = sel.episodes {
        cfg.eval.episodes = n;
    }
    if let Some(s) = sel.seed {
        cfg.eval.seed = s;
    }
    cfg.eval.greedy |= sel.greedy;
}

fn prepare_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// `<dir>/<name>` for a directory output, `<file>.<name>` next to a file.
fn sibling(out: &Path, name: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".");
    s.push(name);
    PathBuf::from(s)
}

fn pretrain(mut cfg: ExperimentConfig, args: &PretrainArgs) -> Result<()> {
    if let Some(n) = args.updates {
        cfg.pretrain.updates = n;
    }
    if let Some(s) = args.seed {
        cfg.pretrain.seed = s;
    }
    if args.no_cpg {
        cfg.pretrain.actuation = Actuation::Direct;
    }
    config::validate(&cfg)?;
    prepare_dir(&args.out)?;
    config::write_resolved(&cfg, &args.out.join("config.toml"))?;
    let (joint, log) = pretrain_free(&cfg.env, &cfg.free_layout, &cfg.pretrain)?;
    let name = match cfg.pretrain.actuation {
        Actuation::Cpg => "obstacle-free PPOC-CPG",
        Actuation::Direct => "Vanilla PPO",
    };
    let digest = config_digest(&cfg);
    PolicyBundle::new(name, &joint, cfg.pretrain.actuation, (1.0, 0.0), &cfg.pretrain.learner.options, &digest)
        .save(&args.out.join("policy.json"))?;
    tables::write_records(&args.out.join("episodes.csv"), &log.episodes)?;
    eprintln!("pretrained over {} episodes", log.episodes.len());
    Ok(())
}

fn train(mut cfg: ExperimentConfig, args: &TrainArgs) -> Result<()> {
    if let Some(n) = args.iterations {
        cfg.game.n_max = n;
    }
    if let Some(s) = args.seed {
        cfg.game.seed = s;
    }
    config::validate(&cfg)?;
    let init = PolicyBundle::load(&args.init)?;
    if init.controller.params.shape.hidden != cfg.game.learner.hidden {
        bail!("initial controller has {} hidden units, config asks for {}", init.controller.params.shape.hidden, cfg.game.learner.hidden);
    }
    prepare_dir(&args.out)?;
    config::write_resolved(&cfg, &args.out.join("config.toml"))?;
    let digest = config_digest(&cfg);
    let weights = (cfg.game.w1, cfg.game.w2);
    let options = cfg.game.learner.options.clone();
    let out = train_game(&cfg.env, &cfg.train_layout, &cfg.game, init.controller.params.clone(), &mut |m, joint| {
        let path = args.out.join(format!("iteration-{:02}.json", m.iteration));
        PolicyBundle::new("obstacle-aware PPOC-CPG", joint, Actuation::Cpg, weights, &options, &digest)
            .save(&path)
            .map_err(|e| snakebench::error::GameError::InvalidConfig(e.to_string()))?;
        eprintln!(
            "iteration {} ({}): value {:.1}, mean episode reward {:.1}",
            m.iteration,
            m.learner.map_or("evaluation", |p| p.label()),
            m.value,
            m.mean_episode_reward
        );
        Ok(())
    })?;
    PolicyBundle::new("obstacle-aware PPOC-CPG", &out.joint, Actuation::Cpg, weights, &options, &digest).save(&args.out.join("policy.json"))?;
    tables::write_records(&args.out.join("episodes.csv"), &out.log.episodes)?;
    tables::write_records(&args.out.join("iterations.csv"), &out.log.macros)?;
    eprintln!(
        "{} after {} iterations",
        if out.converged { "converged" } else { "stopped at the iteration cap" },
        out.iterations
    );
    Ok(())
}

fn run_evaluate(mut cfg: ExperimentConfig, args: &EvaluateArgs) -> Result<()> {
    apply_selection(&mut cfg, &args.sel);
    config::validate(&cfg)?;
    let bundle = PolicyBundle::load(&args.policy)?;
    let episodes = evaluate(&cfg.env, &cfg.eval, &bundle.contender(), &bundle.options)?;
    let row = snakebench::experiment::ComparisonRow {
        method: bundle.name.clone(),
        metrics: compute_metrics(&episodes)?,
    };
    match &args.out {
        Some(dir) => {
            prepare_dir(dir)?;
            config::write_resolved(&cfg, &dir.join("config.toml"))?;
            tables::write_comparison(&[row], std::fs::File::create(dir.join("metrics.csv"))?)?;
            tables::write_episodes(&cfg.eval.seeds(), &episodes, std::fs::File::create(dir.join("episodes.csv"))?)?;
        }
        None => tables::write_comparison(&[row], std::io::stdout().lock())?,
    }
    Ok(())
}

fn run_rollout(mut cfg: ExperimentConfig, args: &RolloutArgs) -> Result<()> {
    config::validate(&cfg)?;
    let bundle = PolicyBundle::load(&args.policy)?;
    if args.no_obstacles {
        cfg.eval.layout = MazeLayout {
            rows: 0,
            cols: 0,
            ..cfg.eval.layout
        };
    }
    let scenario = generate_scenario(&cfg.eval.layout, &cfg.env.robot, args.seed)?;
    let mut game = maze_factory(&cfg.env, &cfg.eval.layout, bundle.actuation)(args.seed)?.recording();
    let rc = RolloutConfig {
        w1: bundle.w1,
        w2: bundle.w2,
        options: bundle.options.clone(),
        greedy: args.greedy || cfg.eval.greedy,
        max_steps: cfg.eval.max_steps,
    };
    rollout(&mut game, &bundle.joint(), &rc, mix_seed(args.seed, 0x5eed))?;
    let metrics = game.metrics();
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        prepare_dir(dir)?;
    }
    tables::write_trace(&args.out, &scenario, game.records(), &metrics)?;
    config::write_resolved(&cfg, &sibling(&args.out, "config.toml"))?;
    eprintln!(
        "{:?} after {:.2} s, trigger fraction {:.3}",
        metrics.status, metrics.task_time, metrics.event_trigger_fraction
    );
    Ok(())
}

fn run_compare(mut cfg: ExperimentConfig, args: &CompareArgs) -> Result<()> {
    apply_selection(&mut cfg, &args.sel);
    config::validate(&cfg)?;
    let bundles: Vec<PolicyBundle> = args.policies.iter().map(|p| PolicyBundle::load(p)).collect::<Result<_>>()?;
    let options = bundles[0].options.clone();
    let mut contenders: Vec<Contender> = bundles.iter().map(PolicyBundle::contender).collect();
    if args.untrained {
        let learner = &cfg.pretrain.learner;
        let joint = init_joint(&cfg.env, learner, mix_seed(cfg.eval.seed, 0x0417))?;
        contenders.push(Contender::controller_only("untrained", joint, Actuation::Cpg));
    }
    let rows = compare(&cfg.env, &cfg.eval, &contenders, &options)?;
    match &args.out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                prepare_dir(dir)?;
            }
            tables::write_comparison(&rows, std::fs::File::create(path)?)?;
            config::write_resolved(&cfg, &sibling(path, "config.toml"))?;
        }
        None => tables::write_comparison(&rows, std::io::stdout().lock())?,
    }
    Ok(())
}

fn run_plot(args: &PlotArgs) -> Result<()> {
    match &args.kind {
        PlotKind::Path { trace, out } => plot::path(&tables::read_trace(trace)?, out, &out.with_extension("csv")),
        PlotKind::Curve { log, window, out } => {
            plot::curve(&tables::read_episode_log(log)?, *window, out, &out.with_extension("csv"))
        }
        PlotKind::Events { trace, out } => plot::events(&tables::read_trace(trace)?, out, &out.with_extension("csv")),
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = config::load(cli.config.as_deref())?;
    match &cli.command {
        Command::PretrainFree(a) => pretrain(cfg, a),
        Command::Train(a) => train(cfg, a),
        Command::Evaluate(a) => run_evaluate(cfg, a),
        Command::Rollout(a) => run_rollout(cfg, a),
        Command::Compare(a) => run_compare(cfg, a),
        Command::Plot(a) => run_plot(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
