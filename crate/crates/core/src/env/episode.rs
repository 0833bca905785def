use serde::{Deserialize, Serialize};

use crate::geom::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeStatus {
    Running,
    GoalReached,
    Starved,
    MissedGoal,
}

impl EpisodeStatus {
    pub fn is_terminal(self) -> bool {
        self != EpisodeStatus::Running
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TerminationParams {
    /// Low-speed threshold (m/s).
    pub v0: f64,
    /// Time below `v0` before the robot counts as jammed (s).
    pub t_jam: f64,
    /// How long the jam must persist before the episode starves (s).
    pub starvation: f64,
    /// Consecutive control steps of negative goal-ward velocity that count
    /// as missing the goal.
    pub miss_steps: usize,
    pub accept_radius: f64,
}

impl Default for TerminationParams {
    fn default() -> Self {
        Self {
            v0: 0.02,
            t_jam: 0.3,
            starvation: 0.9,
            miss_steps: 60,
            accept_radius: 0.1,
        }
    }
}

const TIME_EPS: f64 = 1e-9;

/// True iff the trailing run of speeds below `v0` spans at least `t_jam`.
pub fn jam_detector(speeds: &[f64], dt: f64, v0: f64, t_jam: f64) -> bool {
    let run = speeds.iter().rev().take_while(|&&s| s < v0).count();
    run as f64 * dt >= t_jam - TIME_EPS
}

/// One control-rate sample of the quantities termination depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatusSample {
    pub head: Vec2,
    /// Body (centre-of-mass) velocity over the sample period.
    pub velocity: Vec2,
}

/// Streaming termination logic; also accumulates jam time.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeMonitor {
    params: TerminationParams,
    dt: f64,
    slow_run: usize,
    backward_run: usize,
    jam_time: f64,
    status: EpisodeStatus,
}

impl EpisodeMonitor {
    pub fn new(params: TerminationParams, dt: f64) -> Self {
        Self {
            params,
            dt,
            slow_run: 0,
            backward_run: 0,
            jam_time: 0.0,
            status: EpisodeStatus::Running,
        }
    }

    pub fn status(&self) -> EpisodeStatus {
        self.status
    }

    /// Whether the current low-speed run already counts as a jam.
    pub fn jammed(&self) -> bool {
        self.slow_run as f64 * self.dt >= self.params.t_jam - TIME_EPS
    }

    /// Total jam time so far, including a jam still in progress.
    pub fn jam_time(&self) -> f64 {
        self.jam_time + if self.jammed() { self.slow_run as f64 * self.dt } else { 0.0 }
    }

    pub fn update(&mut self, sample: StatusSample, goal: Vec2) -> EpisodeStatus {
        if self.status.is_terminal() {
            return self.status;
        }
        if sample.velocity.norm() < self.params.v0 {
            self.slow_run += 1;
        } else {
            if self.jammed() {
                self.jam_time += self.slow_run as f64 * self.dt;
            }
            self.slow_run = 0;
        }
        let to_goal = goal - sample.head;
        let dist = to_goal.norm();
        if dist > 0.0 && sample.velocity.dot(to_goal) < 0.0 {
            self.backward_run += 1;
        } else {
            self.backward_run = 0;
        }
        let jam_duration = self.slow_run as f64 * self.dt - self.params.t_jam;
        self.status = if dist < self.params.accept_radius {
            EpisodeStatus::GoalReached
        } else if self.jammed() && jam_duration >= self.params.starvation - TIME_EPS {
            EpisodeStatus::Starved
        } else if self.backward_run > self.params.miss_steps {
            EpisodeStatus::MissedGoal
        } else {
            EpisodeStatus::Running
        };
        self.status
    }
}

/// Replays a history of control-rate samples through [`EpisodeMonitor`].
pub fn episode_status(
    history: &[StatusSample],
    goal: Vec2,
    params: TerminationParams,
    dt: f64,
) -> EpisodeStatus {
    let mut monitor = EpisodeMonitor::new(params, dt);
    for s in history {
        if monitor.update(*s, goal).is_terminal() {
            break;
        }
    }
    monitor.status()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jam_detector_cases() {
        let dt = 1e-3;
        assert!(jam_detector(&[0.01; 300], dt, 0.02, 0.3));
        assert!(!jam_detector(&[0.5; 1000], dt, 0.02, 0.3));
        let mut dip = vec![0.5; 100];
        dip.extend(vec![0.01; 299]);
        assert!(!jam_detector(&dip, dt, 0.02, 0.3));
        dip.extend(vec![0.5; 50]);
        assert!(!jam_detector(&dip, dt, 0.02, 0.3));
    }

    fn sample(head: Vec2, v: Vec2) -> StatusSample {
        StatusSample { head, velocity: v }
    }

    #[test]
    fn goal_reached_immediately() {
        let p = TerminationParams::default();
        let goal = Vec2::new(1.0, 0.0);
        let h = vec![
            sample(Vec2::ZERO, Vec2::new(0.1, 0.0)),
            sample(Vec2::new(0.95, 0.0), Vec2::new(0.1, 0.0)),
        ];
        assert_eq!(episode_status(&h[..1], goal, p, 0.05), EpisodeStatus::Running);
        assert_eq!(episode_status(&h, goal, p, 0.05), EpisodeStatus::GoalReached);
    }

    #[test]
    fn missed_goal_after_sixty_steps() {
        let p = TerminationParams::default();
        let goal = Vec2::new(1.0, 0.0);
        let back = sample(Vec2::ZERO, Vec2::new(-0.1, 0.0));
        assert_eq!(episode_status(&vec![back; 60], goal, p, 0.05), EpisodeStatus::Running);
        assert_eq!(episode_status(&vec![back; 61], goal, p, 0.05), EpisodeStatus::MissedGoal);
    }

    #[test]
    fn starves_after_persistent_jam() {
        let p = TerminationParams::default();
        let goal = Vec2::new(1.0, 0.0);
        let dt = 0.05;
        let stuck = sample(Vec2::ZERO, Vec2::new(0.0, 0.01));
        // 300 ms to become jammed, then 900 ms jammed.
        let n = ((p.t_jam + p.starvation) / dt).round() as usize;
        assert_eq!(episode_status(&vec![stuck; n - 1], goal, p, dt), EpisodeStatus::Running);
        assert_eq!(episode_status(&vec![stuck; n], goal, p, dt), EpisodeStatus::Starved);
    }

    #[test]
    fn jam_time_accumulates_whole_runs() {
        let p = TerminationParams::default();
        let goal = Vec2::new(5.0, 0.0);
        let mut m = EpisodeMonitor::new(p, 0.05);
        let slow = sample(Vec2::ZERO, Vec2::new(0.01, 0.0));
        let fast = sample(Vec2::ZERO, Vec2::new(0.1, 0.0));
        for _ in 0..6 {
            m.update(slow, goal);
        }
        m.update(fast, goal);
        // Too short to count.
        for _ in 0..4 {
            m.update(slow, goal);
        }
        m.update(fast, goal);
        assert!((m.jam_time() - 0.3).abs() < 1e-12);
    }
}
