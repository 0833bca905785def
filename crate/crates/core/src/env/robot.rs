//! Planar rigid-chain proxy of the soft snake.
//!
//! `n_links + 1` rigid bodies (head first) are joined by constant-curvature
//! soft links. The body shape is prescribed by the link curvatures, which
//! track `kappa_gain * psi` through a first-order lag. The free coordinates
//! are the head pose; they follow from momentum balance under anisotropic
//! viscous wheel friction and penalty contact with circular obstacles.
//! Friction is integrated implicitly, contact explicitly.

use serde::{Deserialize, Serialize};

use crate::error::EnvError;
use crate::geom::{closest_on_segment, solve3, Vec2};

use super::{Obstacle, SensorReadings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotConfig {
    pub n_links: usize,
    /// Arc length of one soft link (m).
    pub link_length: f64,
    /// Length of one rigid body (m).
    pub body_length: f64,
    /// Half-width of bodies and links for contact (m).
    pub body_radius: f64,
    /// Mass of one rigid body (kg).
    pub body_mass: f64,
    /// Tangential wheel friction (N s/m).
    pub c_t: f64,
    /// Normal wheel friction (N s/m).
    pub c_n: f64,
    /// Link curvature per unit CPG output (1/m).
    pub kappa_gain: f64,
    /// Actuation lag (s).
    pub tau_act: f64,
    /// Penalty stiffness (N/m).
    pub contact_stiffness: f64,
    /// Longitudinal offset of the front/rear sensor patches from the body
    /// centre (m). Lateral offset is `body_radius`.
    pub sensor_offset: f64,
}

impl Default for RobotConfig {
    fn default() -> Self {
        Self {
            n_links: 4,
            link_length: 0.1,
            body_length: 0.04,
            body_radius: 0.01,
            body_mass: 0.05,
            c_t: 0.05,
            c_n: 1.0,
            kappa_gain: 30.0,
            tau_act: 0.15,
            contact_stiffness: 500.0,
            sensor_offset: 0.01,
        }
    }
}

impl RobotConfig {
    pub fn n_bodies(&self) -> usize {
        self.n_links + 1
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.n_links < 4 {
            return Err(EnvError::InvalidConfig(format!(
                "n_links = {} (need at least 4)",
                self.n_links
            )));
        }
        let positive = [
            ("link_length", self.link_length),
            ("body_length", self.body_length),
            ("body_radius", self.body_radius),
            ("body_mass", self.body_mass),
            ("c_t", self.c_t),
            ("c_n", self.c_n),
            ("kappa_gain", self.kappa_gain),
            ("tau_act", self.tau_act),
            ("contact_stiffness", self.contact_stiffness),
            ("sensor_offset", self.sensor_offset),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return Err(EnvError::InvalidConfig(format!("{name} = {v} must be positive")));
        }
        if self.c_n <= self.c_t {
            return Err(EnvError::InvalidConfig("c_n must exceed c_t".into()));
        }
        Ok(())
    }

    fn inertia(&self) -> f64 {
        let w = 2.0 * self.body_radius;
        self.body_mass * (self.body_length * self.body_length + w * w) / 12.0
    }

    fn rot_drag(&self) -> f64 {
        self.c_n * self.body_length * self.body_length / 12.0
    }

    /// Body offsets and relative headings in the head frame.
    fn shape(&self, kappa: &[f64]) -> Vec<(Vec2, f64)> {
        let half = 0.5 * self.body_length;
        let mut out = Vec::with_capacity(self.n_bodies());
        let (mut c, mut h) = (Vec2::ZERO, 0.0);
        out.push((c, h));
        for &k in kappa {
            let rear = c - Vec2::from_angle(h) * half;
            let turn = k * self.link_length;
            let front = rear - Vec2::from_angle(h + 0.5 * turn) * (self.link_length * sinc(0.5 * turn));
            h += turn;
            c = front - Vec2::from_angle(h) * half;
            out.push((c, h));
        }
        out
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BodyPose {
    pub position: Vec2,
    pub heading: f64,
}

impl BodyPose {
    pub fn axis(&self) -> Vec2 {
        Vec2::from_angle(self.heading)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BodyVelocity {
    pub linear: Vec2,
    pub angular: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    /// Head first.
    pub poses: Vec<BodyPose>,
    pub kappa: Vec<f64>,
    pub velocities: Vec<BodyVelocity>,
    pub head_velocity: Vec2,
}

impl RobotState {
    /// Straight robot at rest with its head centre at `head`.
    pub fn straight(config: &RobotConfig, head: Vec2, heading: f64) -> Self {
        let kappa = vec![0.0; config.n_links];
        Self::with_shape(config, head, heading, kappa)
    }

    pub fn with_shape(config: &RobotConfig, head: Vec2, heading: f64, kappa: Vec<f64>) -> Self {
        let poses = place(config, head, heading, &kappa);
        Self {
            velocities: vec![BodyVelocity::default(); poses.len()],
            poses,
            kappa,
            head_velocity: Vec2::ZERO,
        }
    }

    pub fn head(&self) -> Vec2 {
        self.poses[0].position
    }

    pub fn head_heading(&self) -> f64 {
        self.poses[0].heading
    }

    pub fn center_of_mass(&self) -> Vec2 {
        let n = self.poses.len() as f64;
        self.poses.iter().fold(Vec2::ZERO, |acc, p| acc + p.position) * (1.0 / n)
    }

    pub fn kinetic_energy(&self, config: &RobotConfig) -> f64 {
        let j = config.inertia();
        self.velocities
            .iter()
            .map(|v| 0.5 * config.body_mass * v.linear.norm_sq() + 0.5 * j * v.angular * v.angular)
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.poses.iter().all(|p| p.position.is_finite() && p.heading.is_finite())
            && self.kappa.iter().all(|k| k.is_finite())
            && self
                .velocities
                .iter()
                .all(|v| v.linear.is_finite() && v.angular.is_finite())
    }

    /// Rear attachment point of body `i`.
    pub fn rear(&self, config: &RobotConfig, i: usize) -> Vec2 {
        self.poses[i].position - self.poses[i].axis() * (0.5 * config.body_length)
    }

    /// Front attachment point of body `i`.
    pub fn front(&self, config: &RobotConfig, i: usize) -> Vec2 {
        self.poses[i].position + self.poses[i].axis() * (0.5 * config.body_length)
    }

    /// Largest deviation of every link chord from its arc-length prediction.
    pub fn connectivity_error(&self, config: &RobotConfig) -> f64 {
        (0..config.n_links)
            .map(|j| {
                let chord = (self.front(config, j + 1) - self.rear(config, j)).norm();
                let expect = config.link_length * sinc(0.5 * self.kappa[j] * config.link_length).abs();
                (chord - expect).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Collision segments of link `j`: rear of body `j`, arc midpoint,
    /// front of body `j + 1`.
    fn link_points(&self, config: &RobotConfig, j: usize) -> [Vec2; 3] {
        let rear = self.rear(config, j);
        let h = self.poses[j].heading;
        let turn = self.kappa[j] * config.link_length;
        let mid = rear
            - Vec2::from_angle(h + 0.25 * turn) * (0.5 * config.link_length * sinc(0.25 * turn));
        [rear, mid, self.front(config, j + 1)]
    }
}

fn place(config: &RobotConfig, head: Vec2, heading: f64, kappa: &[f64]) -> Vec<BodyPose> {
    config
        .shape(kappa)
        .into_iter()
        .map(|(off, rel)| BodyPose {
            position: head + off.rotate(heading),
            heading: heading + rel,
        })
        .collect()
}

/// Planar force and torque on one body (about its centre).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Wrench {
    force: Vec2,
    torque: f64,
}

/// Penalty contacts at the current configuration, as body wrenches and
/// per-sensor readings.
pub(crate) fn contacts(
    config: &RobotConfig,
    state: &RobotState,
    obstacles: &[Obstacle],
) -> (Vec<(Vec2, f64)>, SensorReadings) {
    let nb = config.n_bodies();
    let mut wrenches = vec![Wrench::default(); nb];
    let mut readings = SensorReadings::zeros(nb);
    let half = 0.5 * config.body_length;
    let reach = config.link_length + config.body_length + config.body_radius;
    let k = config.contact_stiffness;
    let apply = |w: &mut Wrench, centre: Vec2, at: Vec2, f: Vec2| {
        w.force += f;
        w.torque += (at - centre).cross(f);
    };
    for obs in obstacles {
        let limit = obs.radius + config.body_radius;
        for i in 0..nb {
            let pose = state.poses[i];
            if (obs.center - pose.position).norm() > reach + obs.radius {
                continue;
            }
            let axis = pose.axis();
            let (q, _) = closest_on_segment(obs.center, pose.position + axis * half, pose.position - axis * half);
            let gap = q - obs.center;
            let dist = gap.norm();
            if dist < limit && dist > 0.0 {
                let depth = limit - dist;
                let normal = gap * (1.0 / dist);
                let f = normal * (k * depth);
                apply(&mut wrenches[i], pose.position, q, f);
                // Surface point facing the obstacle, in the body frame.
                let local = (q - normal * config.body_radius - pose.position).rotate(-pose.heading);
                readings.per_body[i][nearest_patch(config, local)] += k * depth;
            }
            if i + 1 < nb {
                let pts = state.link_points(config, i);
                for (s, seg) in pts.windows(2).enumerate() {
                    let (q, t) = closest_on_segment(obs.center, seg[0], seg[1]);
                    let gap = q - obs.center;
                    let dist = gap.norm();
                    if dist < limit && dist > 0.0 {
                        let f = gap * (k * (limit - dist) / dist);
                        // Split along the whole link between its two bodies.
                        let along = 0.5 * (s as f64 + t);
                        let rear = pts[0];
                        let front = pts[2];
                        apply(&mut wrenches[i], pose.position, rear, f * (1.0 - along));
                        apply(&mut wrenches[i + 1], state.poses[i + 1].position, front, f * along);
                    }
                }
            }
        }
    }
    (
        wrenches.into_iter().map(|w| (w.force, w.torque)).collect(),
        readings,
    )
}

/// Sensor patch index (A front-left, B front-right, C rear-right, D rear-left)
/// nearest to a body-frame point.
fn nearest_patch(config: &RobotConfig, local: Vec2) -> usize {
    let s = config.sensor_offset;
    let r = config.body_radius;
    let patches = [Vec2::new(s, r), Vec2::new(s, -r), Vec2::new(-s, -r), Vec2::new(-s, r)];
    patches
        .iter()
        .enumerate()
        .min_by(|a, b| (*a.1 - local).norm_sq().total_cmp(&(*b.1 - local).norm_sq()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Index of the first obstacle that overlaps the robot, if any.
pub fn overlapping_obstacle(config: &RobotConfig, state: &RobotState, obstacles: &[Obstacle]) -> Option<usize> {
    let half = 0.5 * config.body_length;
    obstacles.iter().position(|obs| {
        let limit = obs.radius + config.body_radius;
        let hit_body = state.poses.iter().any(|p| {
            let a = p.axis() * half;
            let (q, _) = closest_on_segment(obs.center, p.position + a, p.position - a);
            (q - obs.center).norm() < limit
        });
        let hit_link = (0..config.n_links).any(|j| {
            state.link_points(config, j).windows(2).any(|seg| {
                let (q, _) = closest_on_segment(obs.center, seg[0], seg[1]);
                (q - obs.center).norm() < limit
            })
        });
        hit_body || hit_link
    })
}

/// One physics step of length `dt` under CPG outputs `psi`.
pub fn step(
    config: &RobotConfig,
    state: &RobotState,
    psi: &[f64],
    obstacles: &[Obstacle],
    dt: f64,
) -> Result<(RobotState, SensorReadings), EnvError> {
    if psi.len() != config.n_links {
        return Err(EnvError::DimensionMismatch {
            expected: config.n_links,
            got: psi.len(),
        });
    }
    if !(dt > 0.0) || !state.is_finite() || psi.iter().any(|p| !p.is_finite()) {
        return Err(EnvError::NonFinite);
    }
    let nb = config.n_bodies();
    let (wrenches, readings) = contacts(config, state, obstacles);

    // Exact first-order lag of the curvatures.
    let decay = (-dt / config.tau_act).exp();
    let kappa: Vec<f64> = state
        .kappa
        .iter()
        .zip(psi)
        .map(|(&k, &p)| {
            let target = config.kappa_gain * p;
            target + (k - target) * decay
        })
        .collect();

    let head = state.poses[0];
    let old_shape = config.shape(&state.kappa);
    let new_shape = config.shape(&kappa);

    let m = config.body_mass;
    let j_rot = config.inertia();
    let c_rot = config.rot_drag();
    let mut lhs = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    let mut arms = Vec::with_capacity(nb);
    let mut shape_vel = Vec::with_capacity(nb);
    for i in 0..nb {
        let (off, rel) = new_shape[i];
        let (off_old, rel_old) = old_shape[i];
        let arm = off.rotate(head.heading);
        let s_lin = (off - off_old).rotate(head.heading) * (1.0 / dt);
        let s_ang = (rel - rel_old) / dt;
        let heading = head.heading + rel;
        let t = Vec2::from_angle(heading);
        let n = t.perp();
        // Mass plus implicit drag, translational block.
        let b = |u: Vec2, v: Vec2| -> f64 {
            m * u.dot(v) + dt * (config.c_t * t.dot(u) * t.dot(v) + config.c_n * n.dot(u) * n.dot(v))
        };
        let ex = Vec2::new(1.0, 0.0);
        let ey = Vec2::new(0.0, 1.0);
        let col_theta = arm.perp();
        let cols = [ex, ey, col_theta];
        let b_rot = j_rot + dt * c_rot;
        for r in 0..3 {
            for c in 0..3 {
                lhs[r][c] += b(cols[r], cols[c]);
            }
        }
        lhs[2][2] += b_rot;

        let v_old = state.velocities[i];
        let (f_c, tau_c) = wrenches[i];
        // Momentum plus contact impulse minus the shape-velocity drag/inertia.
        let lin = v_old.linear * m + f_c * dt;
        let ang = j_rot * v_old.angular + dt * tau_c;
        for r in 0..3 {
            rhs[r] += cols[r].dot(lin) - b(cols[r], s_lin);
        }
        rhs[2] += ang - b_rot * s_ang;
        arms.push(arm);
        shape_vel.push((s_lin, s_ang));
    }
    let qdot = solve3(lhs, rhs).ok_or(EnvError::NonFinite)?;
    let v_head = Vec2::new(qdot[0], qdot[1]);
    let w_head = qdot[2];

    let velocities: Vec<BodyVelocity> = (0..nb)
        .map(|i| BodyVelocity {
            linear: v_head + arms[i].perp() * w_head + shape_vel[i].0,
            angular: w_head + shape_vel[i].1,
        })
        .collect();
    let next_head = head.position + v_head * dt;
    let next_heading = head.heading + w_head * dt;
    let next = RobotState {
        poses: place(config, next_head, next_heading, &kappa),
        kappa,
        head_velocity: velocities[0].linear,
        velocities,
    };
    if !next.is_finite() {
        return Err(EnvError::NonFinite);
    }
    Ok((next, readings))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rest_stays_at_rest() {
        let cfg = RobotConfig::default();
        let mut s = RobotState::straight(&cfg, Vec2::ZERO, 0.3);
        let start = s.clone();
        for _ in 0..200 {
            s = step(&cfg, &s, &[0.0; 4], &[], 1e-3).unwrap().0;
        }
        assert_eq!(s.poses, start.poses);
        assert!(s.velocities.iter().all(|v| v.linear == Vec2::ZERO && v.angular == 0.0));
    }

    #[test]
    fn curvature_lag_response() {
        let cfg = RobotConfig::default();
        let mut s = RobotState::straight(&cfg, Vec2::ZERO, 0.0);
        let c = 0.1;
        let dt = 1e-3;
        let steps = (3.0 * cfg.tau_act / dt).round() as usize;
        for _ in 0..steps {
            s = step(&cfg, &s, &[c; 4], &[], dt).unwrap().0;
        }
        let target = cfg.kappa_gain * c;
        for k in &s.kappa {
            assert!(((k - target) / target).abs() < 0.05, "{k} vs {target}");
        }
    }

    #[test]
    fn shape_is_connected() {
        let cfg = RobotConfig::default();
        let s = RobotState::with_shape(&cfg, Vec2::new(1.0, 2.0), 0.7, vec![3.0, -5.0, 0.0, 8.0]);
        assert!(s.connectivity_error(&cfg) < 1e-12);
        // Straight: body spacing is body_length + link_length.
        let st = RobotState::straight(&cfg, Vec2::ZERO, 0.0);
        let gap = (st.poses[1].position - st.poses[0].position).norm();
        assert!((gap - cfg.body_length - cfg.link_length).abs() < 1e-15);
        assert!(st.poses[1].position.x < 0.0);
    }

    #[test]
    fn right_side_contact_hits_b_or_c() {
        let cfg = RobotConfig::default();
        let s = RobotState::straight(&cfg, Vec2::ZERO, 0.0);
        let depth = 0.002;
        // Head axis along +x; right is -y. Obstacle just below body 2.
        let body = 2;
        let p = s.poses[body].position;
        let radius = 0.02;
        let obs = Obstacle::new(p + Vec2::new(0.005, -(cfg.body_radius + radius - depth)), radius);
        let (_, readings) = contacts(&cfg, &s, &[obs]);
        let r = readings.per_body[body];
        assert!((r[1] - cfg.contact_stiffness * depth).abs() < 1e-9, "{r:?}");
        assert_eq!(r[0], 0.0);
        assert_eq!(r[2], 0.0);
        assert_eq!(r[3], 0.0);
        for (i, other) in readings.per_body.iter().enumerate() {
            if i != body {
                assert_eq!(other, &[0.0; 4]);
            }
        }
        let obs = Obstacle::new(p + Vec2::new(-0.005, -(cfg.body_radius + radius - depth)), radius);
        let (_, readings) = contacts(&cfg, &s, &[obs]);
        assert!((readings.per_body[body][2] - cfg.contact_stiffness * depth).abs() < 1e-9);
    }

    #[test]
    fn spawn_overlap_detected() {
        let cfg = RobotConfig::default();
        let s = RobotState::straight(&cfg, Vec2::ZERO, 0.0);
        assert_eq!(overlapping_obstacle(&cfg, &s, &[Obstacle::new(Vec2::new(-0.1, 0.0), 0.02)]), Some(0));
        assert_eq!(overlapping_obstacle(&cfg, &s, &[Obstacle::new(Vec2::new(0.5, 0.0), 0.02)]), None);
    }

    #[test]
    fn rejects_bad_config() {
        let mut cfg = RobotConfig::default();
        cfg.n_links = 3;
        assert!(cfg.validate().is_err());
        let mut cfg = RobotConfig::default();
        cfg.c_n = cfg.c_t;
        assert!(cfg.validate().is_err());
        assert!(RobotConfig::default().validate().is_ok());
    }
}
