//! Snake-robot locomotion in obstacle mazes: a Matsuoka oscillator network
//! drives a planar soft-snake proxy, and two PPO agents (a goal-tracking
//! controller and an event-triggered regulator) are trained as a
//! cooperative game by fictitious play.

pub mod cpg;
pub mod env;
pub mod error;
pub mod experiment;
pub mod game;
pub mod geom;
pub mod metrics;
pub mod parallel;
pub mod policy;
pub mod reward;
pub mod scenario;
