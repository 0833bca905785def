//! Matsuoka central pattern generator network.
//!
//! Each primitive oscillator is a pair of mutually inhibiting neurons
//! (extensor `e`, flexor `f`) with self-adaptation. Neighbouring oscillators
//! inhibit each other through the adaptation states `y`. The network is
//! advanced with a fixed-step fourth-order Runge-Kutta scheme.
//!
//! Tonic inputs come from policy actions through a logistic decoder so that
//! `u_e + u_f = 1`, and two decoded commands may be blended convexly. Because
//! the oscillation bias is (close to) linear in `u_e - u_f`, blending the
//! tonic inputs blends the steering bias.

use serde::{Deserialize, Serialize};

use crate::error::CpgError;

/// How the frequency ratio `K_f` rescales the neuron time constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyScaling {
    /// Both time constants are multiplied by `sqrt(K_f)`, so the oscillation
    /// frequency follows `1/sqrt(K_f)` exactly.
    #[default]
    Sqrt,
    /// Both time constants are multiplied by `K_f` itself; frequency then
    /// follows `1/K_f`.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OscillatorParams {
    pub tau_r: f64,
    pub tau_a: f64,
    /// Mutual inhibition between the extensor and flexor of one oscillator.
    pub a: f64,
    /// Self-inhibition (adaptation) weight.
    pub b: f64,
    /// Row-major `n x n` coupling, entry `[j * n + i]` is `w_ji`, the
    /// inhibition oscillator `j` exerts on oscillator `i`.
    pub weights: Vec<f64>,
    pub n: usize,
    pub scaling: FrequencyScaling,
}

impl Default for OscillatorParams {
    fn default() -> Self {
        Self::tail_driven(4, 0.25, 0.5, 1.5, 2.5, 1.0)
    }
}

impl OscillatorParams {
    /// Nearest-neighbour chain coupling with uniform weight `w`.
    pub fn chain(n: usize, tau_r: f64, tau_a: f64, a: f64, b: f64, w: f64) -> Self {
        let mut weights = vec![0.0; n * n];
        for i in 0..n.saturating_sub(1) {
            weights[i * n + i + 1] = w;
            weights[(i + 1) * n + i] = w;
        }
        Self {
            tau_r,
            tau_a,
            a,
            b,
            weights,
            n,
            scaling: FrequencyScaling::default(),
        }
    }

    /// Each oscillator inhibits only its head-side neighbour. A driven unit
    /// settles ahead of its driver in phase, so the wave travels from head to
    /// tail.
    pub fn tail_driven(n: usize, tau_r: f64, tau_a: f64, a: f64, b: f64, w: f64) -> Self {
        let mut p = Self::chain(n, tau_r, tau_a, a, b, 0.0);
        for i in 0..n.saturating_sub(1) {
            p.weights[(i + 1) * n + i] = w;
        }
        p
    }

    pub fn validate(&self) -> Result<(), CpgError> {
        if !(self.tau_r > 0.0 && self.tau_a > 0.0) {
            return Err(CpgError::InvalidParams("time constants must be positive".into()));
        }
        if self.n == 0 {
            return Err(CpgError::InvalidParams("need at least one oscillator".into()));
        }
        if self.weights.len() != self.n * self.n {
            return Err(CpgError::InvalidParams(format!(
                "coupling matrix has {} entries, expected {}",
                self.weights.len(),
                self.n * self.n
            )));
        }
        if ![self.a, self.b].iter().chain(&self.weights).all(|v| v.is_finite()) {
            return Err(CpgError::InvalidParams("non-finite weight".into()));
        }
        Ok(())
    }

    /// Time-constant multiplier applied for frequency ratio `k_f`.
    pub fn time_scale(&self, k_f: f64) -> f64 {
        match self.scaling {
            FrequencyScaling::Sqrt => k_f.sqrt(),
            FrequencyScaling::Linear => k_f,
        }
    }

    /// Effective `(tau_r, tau_a)` under frequency ratio `k_f`.
    pub fn time_constants(&self, k_f: f64) -> (f64, f64) {
        let s = self.time_scale(k_f);
        (s * self.tau_r, s * self.tau_a)
    }

    /// Largest step accepted by [`step_network`] at frequency ratio `k_f`:
    /// a fifth of the smaller of `K_f * tau_r` and the effective `tau_r`.
    pub fn max_dt(&self, k_f: f64) -> f64 {
        k_f.min(self.time_scale(k_f)) * self.tau_r / 5.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillatorNetworkState {
    pub x_e: Vec<f64>,
    pub y_e: Vec<f64>,
    pub x_f: Vec<f64>,
    pub y_f: Vec<f64>,
}

impl OscillatorNetworkState {
    pub fn zeros(n: usize) -> Self {
        Self {
            x_e: vec![0.0; n],
            y_e: vec![0.0; n],
            x_f: vec![0.0; n],
            y_f: vec![0.0; n],
        }
    }

    /// Small asymmetric kick on the first extensor so that symmetric inputs
    /// leave the unstable equilibrium.
    pub fn kicked(n: usize) -> Self {
        let mut s = Self::zeros(n);
        s.x_e.fill(0.1);
        s
    }

    pub fn len(&self) -> usize {
        self.x_e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_e.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(f64::is_finite)
    }

    /// Every state entry in `x_e, y_e, x_f, y_f` order.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.x_e
            .iter()
            .chain(&self.y_e)
            .chain(&self.x_f)
            .chain(&self.y_f)
            .copied()
    }

    fn axpy(&self, h: f64, d: &Self) -> Self {
        let f = |s: &[f64], t: &[f64]| s.iter().zip(t).map(|(s, t)| s + h * t).collect();
        Self {
            x_e: f(&self.x_e, &d.x_e),
            y_e: f(&self.y_e, &d.y_e),
            x_f: f(&self.x_f, &d.x_f),
            y_f: f(&self.y_f, &d.y_f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TonicInput {
    pub u_e: Vec<f64>,
    pub u_f: Vec<f64>,
}

impl TonicInput {
    pub fn uniform(n: usize, u_e: f64, u_f: f64) -> Self {
        Self {
            u_e: vec![u_e; n],
            u_f: vec![u_f; n],
        }
    }

    /// Tonic imbalance `u_e - u_f` per oscillator.
    pub fn delta(&self) -> Vec<f64> {
        self.u_e.iter().zip(&self.u_f).map(|(e, f)| e - f).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpgCommand {
    pub tonic: TonicInput,
    pub k_f: f64,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Maps raw actions to tonic inputs with `u_e = sigmoid(a)`, `u_f = 1 - u_e`.
pub fn decode_action(action: &[f64]) -> Result<TonicInput, CpgError> {
    if let Some(bad) = action.iter().find(|v| !v.is_finite()) {
        return Err(CpgError::NonFinite(format!("action component {bad}")));
    }
    let u_e: Vec<f64> = action.iter().map(|&a| logistic(a)).collect();
    let u_f = u_e.iter().map(|e| 1.0 - e).collect();
    Ok(TonicInput { u_e, u_f })
}

/// Convex blend `w1 * u1 + w2 * u2` of two tonic inputs.
pub fn compose_tonic(
    u1: &TonicInput,
    u2: &TonicInput,
    w1: f64,
    w2: f64,
) -> Result<TonicInput, CpgError> {
    if !(w1 >= 0.0 && w2 >= 0.0 && ((w1 + w2) - 1.0).abs() <= 1e-12) {
        return Err(CpgError::InvalidWeights { w1, w2 });
    }
    if u1.u_e.len() != u2.u_e.len() || u1.u_f.len() != u2.u_f.len() {
        return Err(CpgError::DimensionMismatch {
            expected: u1.u_e.len(),
            got: u2.u_e.len(),
        });
    }
    let mix = |a: &[f64], b: &[f64]| -> Vec<f64> {
        a.iter()
            .zip(b)
            .map(|(x, y)| (w1 * x + w2 * y).clamp(0.0, 1.0))
            .collect()
    };
    Ok(TonicInput {
        u_e: mix(&u1.u_e, &u2.u_e),
        u_f: mix(&u1.u_f, &u2.u_f),
    })
}

fn derivative(
    s: &OscillatorNetworkState,
    p: &OscillatorParams,
    u: &TonicInput,
    tau_r: f64,
    tau_a: f64,
) -> OscillatorNetworkState {
    let n = p.n;
    let mut d = OscillatorNetworkState::zeros(n);
    for i in 0..n {
        let z_e = s.x_e[i].max(0.0);
        let z_f = s.x_f[i].max(0.0);
        let (mut inh_e, mut inh_f) = (0.0, 0.0);
        for j in 0..n {
            let w = p.weights[j * n + i];
            if w != 0.0 {
                inh_e += w * s.y_e[j];
                inh_f += w * s.y_f[j];
            }
        }
        d.x_e[i] = (-s.x_e[i] - p.a * z_f - p.b * s.y_e[i] - inh_e + u.u_e[i]) / tau_r;
        d.y_e[i] = (z_e - s.y_e[i]) / tau_a;
        d.x_f[i] = (-s.x_f[i] - p.a * z_e - p.b * s.y_f[i] - inh_f + u.u_f[i]) / tau_r;
        d.y_f[i] = (z_f - s.y_f[i]) / tau_a;
    }
    d
}

/// Advances the network by one RK4 step of length `dt`.
pub fn step_network(
    s: &OscillatorNetworkState,
    p: &OscillatorParams,
    cmd: &CpgCommand,
    dt: f64,
) -> Result<OscillatorNetworkState, CpgError> {
    if !(cmd.k_f > 0.0) {
        return Err(CpgError::InvalidParams(format!("frequency ratio {} must be positive", cmd.k_f)));
    }
    if !(dt > 0.0 && dt <= p.max_dt(cmd.k_f)) {
        return Err(CpgError::UnstableStep {
            dt,
            max: p.max_dt(cmd.k_f),
        });
    }
    if s.len() != p.n || cmd.tonic.u_e.len() != p.n || cmd.tonic.u_f.len() != p.n {
        return Err(CpgError::DimensionMismatch {
            expected: p.n,
            got: s.len().min(cmd.tonic.u_e.len()),
        });
    }
    if !s.is_finite() {
        return Err(CpgError::NonFinite("oscillator state".into()));
    }
    let (tau_r, tau_a) = p.time_constants(cmd.k_f);
    let u = &cmd.tonic;
    let k1 = derivative(s, p, u, tau_r, tau_a);
    let k2 = derivative(&s.axpy(0.5 * dt, &k1), p, u, tau_r, tau_a);
    let k3 = derivative(&s.axpy(0.5 * dt, &k2), p, u, tau_r, tau_a);
    let k4 = derivative(&s.axpy(dt, &k3), p, u, tau_r, tau_a);
    let comb = |s: &[f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
        (0..s.len())
            .map(|i| s[i] + dt / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]))
            .collect()
    };
    Ok(OscillatorNetworkState {
        x_e: comb(&s.x_e, &k1.x_e, &k2.x_e, &k3.x_e, &k4.x_e),
        y_e: comb(&s.y_e, &k1.y_e, &k2.y_e, &k3.y_e, &k4.y_e),
        x_f: comb(&s.x_f, &k1.x_f, &k2.x_f, &k3.x_f, &k4.x_f),
        y_f: comb(&s.y_f, &k1.y_f, &k2.y_f, &k3.y_f, &k4.y_f),
    })
}

/// Antagonist output `psi_i = max(0, x_e) - max(0, x_f)`.
pub fn network_output(s: &OscillatorNetworkState) -> Vec<f64> {
    s.x_e
        .iter()
        .zip(&s.x_f)
        .map(|(e, f)| e.max(0.0) - f.max(0.0))
        .collect()
}

/// Peak-to-peak below this counts as no oscillation.
pub const OSCILLATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasEstimate {
    pub bias: f64,
    pub oscillatory: bool,
}

fn upward_crossings(signal: &[f64]) -> (Vec<usize>, f64) {
    let mean = signal.iter().sum::<f64>() / signal.len() as f64;
    let ups = signal
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] - mean < 0.0 && w[1] - mean >= 0.0)
        .map(|(i, _)| i)
        .collect();
    (ups, mean)
}

fn peak_to_peak(signal: &[f64]) -> f64 {
    let (lo, hi) = signal
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi - lo
}

/// Upward mean-crossing instant, linearly interpolated between samples.
fn crossing_time(signal: &[f64], mean: f64, i: usize) -> f64 {
    let (a, b) = (signal[i] - mean, signal[i + 1] - mean);
    i as f64 + a / (a - b)
}

/// Mean of the signal over a whole number of periods.
pub fn measure_bias(signal: &[f64]) -> BiasEstimate {
    if signal.is_empty() {
        return BiasEstimate {
            bias: 0.0,
            oscillatory: false,
        };
    }
    let plain = signal.iter().sum::<f64>() / signal.len() as f64;
    if peak_to_peak(signal) < OSCILLATION_TOLERANCE {
        return BiasEstimate {
            bias: plain,
            oscillatory: false,
        };
    }
    let (ups, mean) = upward_crossings(signal);
    if ups.len() < 2 {
        return BiasEstimate {
            bias: plain,
            oscillatory: false,
        };
    }
    // Trapezoidal mean between the first and last interpolated crossing.
    let t0 = crossing_time(signal, mean, ups[0]);
    let t1 = crossing_time(signal, mean, *ups.last().unwrap());
    let value_at = |t: f64| {
        let i = (t.floor() as usize).min(signal.len() - 2);
        let frac = t - i as f64;
        signal[i] + frac * (signal[i + 1] - signal[i])
    };
    let (i0, i1) = (t0.ceil() as usize, t1.floor() as usize);
    let mut area = 0.0;
    let mut prev_t = t0;
    let mut prev_v = value_at(t0);
    for (k, &v) in signal.iter().enumerate().take(i1 + 1).skip(i0) {
        let t = k as f64;
        area += 0.5 * (prev_v + v) * (t - prev_t);
        prev_t = t;
        prev_v = v;
    }
    area += 0.5 * (prev_v + value_at(t1)) * (t1 - prev_t);
    BiasEstimate {
        bias: area / (t1 - t0),
        oscillatory: true,
    }
}

/// Frequency in Hz from the mean spacing of upward mean-crossings.
pub fn measure_frequency(signal: &[f64], dt: f64) -> Result<f64, CpgError> {
    if signal.len() < 2 || peak_to_peak(signal) < OSCILLATION_TOLERANCE {
        return Err(CpgError::InsufficientCycles(0));
    }
    let (ups, mean) = upward_crossings(signal);
    if ups.len() < 3 {
        return Err(CpgError::InsufficientCycles(ups.len()));
    }
    let first = crossing_time(signal, mean, ups[0]);
    let last = crossing_time(signal, mean, *ups.last().unwrap());
    let period = (last - first) / (ups.len() - 1) as f64 * dt;
    Ok(1.0 / period)
}

/// Runs the network under a constant command and records `psi` for every
/// oscillator after discarding `transient` seconds.
pub fn simulate_output(
    params: &OscillatorParams,
    cmd: &CpgCommand,
    dt: f64,
    transient: f64,
    duration: f64,
) -> Result<Vec<Vec<f64>>, CpgError> {
    let mut s = OscillatorNetworkState::kicked(params.n);
    let skip = (transient / dt).round() as usize;
    let keep = (duration / dt).round() as usize;
    let mut out = vec![Vec::with_capacity(keep); params.n];
    for k in 0..skip + keep {
        s = step_network(&s, params, cmd, dt)?;
        if k >= skip {
            for (trace, psi) in out.iter_mut().zip(network_output(&s)) {
                trace.push(psi);
            }
        }
    }
    Ok(out)
}
