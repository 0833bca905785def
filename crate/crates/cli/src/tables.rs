use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use snakebench::experiment::ComparisonRow;
use snakebench::game::{EpisodeRecord, StepRecord};
use snakebench::metrics::EpisodeMetrics;
use snakebench::scenario::Scenario;

pub const TABLE_HEADER: [&str; 5] = [
    "Method",
    "Jam ratio",
    "Avg. linear velocity (m/s)",
    "Success rate",
    "Avg. time per goal (s)",
];

fn num(x: f64) -> String {
    format!("{x:.4}")
}

/// Table I layout. A method with no successes has no time per goal.
pub fn write_comparison<W: Write>(rows: &[ComparisonRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TABLE_HEADER)?;
    for r in rows {
        let m = &r.metrics;
        w.write_record([
            r.method.clone(),
            num(m.jam_ratio),
            num(m.avg_linear_velocity),
            num(m.success_rate),
            m.avg_time_per_goal.map_or_else(|| "n/a".into(), |t| format!("{t:.2}")),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_episodes<W: Write>(seeds: &[u64], episodes: &[EpisodeMetrics], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "episode",
        "scenario_seed",
        "success",
        "status",
        "time_to_goal",
        "jam_time",
        "task_time",
        "path_length",
        "mean_speed",
        "event_trigger_fraction",
    ])?;
    for (i, (seed, m)) in seeds.iter().zip(episodes).enumerate() {
        w.write_record([
            i.to_string(),
            seed.to_string(),
            m.success.to_string(),
            format!("{:?}", m.status),
            m.time_to_goal.map_or_else(String::new, |t| t.to_string()),
            m.jam_time.to_string(),
            m.task_time.to_string(),
            m.path_length.to_string(),
            m.mean_speed.to_string(),
            m.event_trigger_fraction.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_episode_log(path: &Path) -> Result<Vec<EpisodeRecord>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.deserialize().map(|x| x.map_err(Into::into)).collect()
}

/// One line of an exported trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceLine {
    Scenario(Scenario),
    Step(StepRecord),
    Episode(EpisodeMetrics),
}

pub fn write_trace(path: &Path, scenario: &Scenario, steps: &[StepRecord], metrics: &EpisodeMetrics) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).with_context(|| format!("writing {}", path.display()))?);
    let mut line = |l: TraceLine| -> Result<()> {
        serde_json::to_writer(&mut f, &l)?;
        f.write_all(b"\n")?;
        Ok(())
    };
    line(TraceLine::Scenario(scenario.clone()))?;
    for s in steps {
        line(TraceLine::Step(s.clone()))?;
    }
    line(TraceLine::Episode(metrics.clone()))?;
    f.flush()?;
    Ok(())
}

pub struct Trace {
    pub scenario: Scenario,
    pub steps: Vec<StepRecord>,
    pub episode: EpisodeMetrics,
}

pub fn read_trace(path: &Path) -> Result<Trace> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let (mut scenario, mut episode, mut steps) = (None, None, Vec::new());
    for (i, l) in text.lines().enumerate() {
        match serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1))? {
            TraceLine::Scenario(s) => scenario = Some(s),
            TraceLine::Step(s) => steps.push(s),
            TraceLine::Episode(e) => episode = Some(e),
        }
    }
    Ok(Trace {
        scenario: scenario.context("trace has no scenario line")?,
        steps,
        episode: episode.context("trace has no episode line")?,
    })
}
