//! Per-episode and aggregate performance figures.

use serde::{Deserialize, Serialize};

use crate::env::EpisodeStatus;
use crate::error::ScenarioError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub success: bool,
    pub status: EpisodeStatus,
    pub time_to_goal: Option<f64>,
    pub jam_time: f64,
    pub task_time: f64,
    /// Distance covered by the body (m).
    pub path_length: f64,
    pub mean_speed: f64,
    pub event_trigger_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub episodes: usize,
    pub jam_ratio: f64,
    pub avg_linear_velocity: f64,
    pub success_rate: f64,
    /// Mean time among successful episodes; absent when none succeeded.
    pub avg_time_per_goal: Option<f64>,
}

/// Jam ratio is total jam time over total task time; the average velocity
/// is total distance over total time, i.e. the time-weighted mean speed.
pub fn compute_metrics(episodes: &[EpisodeMetrics]) -> Result<AggregateMetrics, ScenarioError> {
    if episodes.is_empty() {
        return Err(ScenarioError::NoEpisodes);
    }
    let task: f64 = episodes.iter().map(|e| e.task_time).sum();
    let jam: f64 = episodes.iter().map(|e| e.jam_time).sum();
    let dist: f64 = episodes.iter().map(|e| e.path_length).sum();
    let wins: Vec<f64> = episodes.iter().filter_map(|e| e.time_to_goal.filter(|_| e.success)).collect();
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    Ok(AggregateMetrics {
        episodes: episodes.len(),
        jam_ratio: ratio(jam, task),
        avg_linear_velocity: ratio(dist, task),
        success_rate: wins.len() as f64 / episodes.len() as f64,
        avg_time_per_goal: (!wins.is_empty()).then(|| wins.iter().sum::<f64>() / wins.len() as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ep(success: bool, task: f64, jam: f64, dist: f64) -> EpisodeMetrics {
        EpisodeMetrics {
            success,
            status: if success { EpisodeStatus::GoalReached } else { EpisodeStatus::Starved },
            time_to_goal: success.then_some(task),
            jam_time: jam,
            task_time: task,
            path_length: dist,
            mean_speed: dist / task,
            event_trigger_fraction: 0.0,
        }
    }

    #[test]
    fn definitions() {
        let m = compute_metrics(&[ep(true, 40.0, 10.0, 4.0), ep(false, 60.0, 20.0, 2.0)]).unwrap();
        assert!((m.jam_ratio - 0.3).abs() < 1e-15);
        assert_eq!(m.success_rate, 0.5);
        assert_eq!(m.avg_time_per_goal, Some(40.0));
        assert!((m.avg_linear_velocity - 0.06).abs() < 1e-15);

        let hundred: Vec<EpisodeMetrics> = (0..100).map(|i| ep(i < 91, 10.0, 0.0, 1.0)).collect();
        assert_eq!(compute_metrics(&hundred).unwrap().success_rate, 0.91);

        let m = compute_metrics(&[ep(false, 5.0, 0.0, 0.0)]).unwrap();
        assert_eq!(m.success_rate, 0.0);
        assert_eq!(m.avg_time_per_goal, None);
        assert_eq!(compute_metrics(&[]).unwrap_err(), ScenarioError::NoEpisodes);
    }
}
