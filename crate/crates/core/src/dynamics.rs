//! Stochastic kinematic bicycle with acceleration and steering-rate inputs.
//!
//! State `[p_x, p_y, theta, v, delta_s]`, input `[accel, steer_rate]`. Noise
//! enters the drift, `x' = x + (f(x, u) + w) dt` with `w ~ N(0, diag(gamma))`,
//! so the per-step state increment has variance `gamma * dt^2`.

use nalgebra::{Matrix2x5, Matrix5, Matrix5x2, Vector2, Vector5};
use serde::{Deserialize, Serialize};

use crate::world::RngStream;

pub const STATE_DIM: usize = 5;
pub const INPUT_DIM: usize = 2;

pub type StateMatrix = Matrix5<f64>;
pub type InputMatrix = Matrix5x2<f64>;
pub type GainMatrix = Matrix2x5<f64>;

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 5]", into = "[f64; 5]")]
pub struct AgentState(pub Vector5<f64>);

impl AgentState {
    pub fn new(px: f64, py: f64, theta: f64, v: f64, delta: f64) -> Self {
        Self(Vector5::new(px, py, theta, v, delta))
    }

    pub fn px(&self) -> f64 {
        self.0[0]
    }
    pub fn py(&self) -> f64 {
        self.0[1]
    }
    pub fn theta(&self) -> f64 {
        self.0[2]
    }
    pub fn v(&self) -> f64 {
        self.0[3]
    }
    pub fn delta(&self) -> f64 {
        self.0[4]
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.0[0], self.0[1])
    }

    /// Planar velocity `[v cos(theta), v sin(theta)]`.
    pub fn planar_velocity(&self) -> Vector2<f64> {
        let (s, c) = self.0[2].sin_cos();
        Vector2::new(self.0[3] * c, self.0[3] * s)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl From<[f64; 5]> for AgentState {
    fn from(a: [f64; 5]) -> Self {
        Self(Vector5::from(a))
    }
}

impl From<AgentState> for [f64; 5] {
    fn from(s: AgentState) -> Self {
        s.0.into()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct ControlInput(pub Vector2<f64>);

impl ControlInput {
    pub fn new(accel: f64, steer_rate: f64) -> Self {
        Self(Vector2::new(accel, steer_rate))
    }
    pub fn accel(&self) -> f64 {
        self.0[0]
    }
    pub fn steer_rate(&self) -> f64 {
        self.0[1]
    }
}

impl From<[f64; 2]> for ControlInput {
    fn from(a: [f64; 2]) -> Self {
        Self(Vector2::from(a))
    }
}

impl From<ControlInput> for [f64; 2] {
    fn from(u: ControlInput) -> Self {
        u.0.into()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BicycleParams {
    pub wheel_base: f64,
    /// Per-state drift-noise variances (diagonal of the process covariance).
    pub process_cov: [f64; 5],
    pub dt: f64,
    pub accel_limits: [f64; 2],
    pub steer_rate_limits: [f64; 2],
    pub speed_limits: [f64; 2],
    pub steer_limits: [f64; 2],
}

impl Default for BicycleParams {
    fn default() -> Self {
        Self {
            wheel_base: 0.33,
            process_cov: [0.001, 0.001, 0.1, 0.2, 0.001],
            dt: 0.1,
            accel_limits: [-1.0, 1.0],
            steer_rate_limits: [-1.0, 1.0],
            speed_limits: [-0.5, 2.0],
            steer_limits: [-0.4, 0.4],
        }
    }
}

impl BicycleParams {
    pub fn noiseless(&self) -> Self {
        Self {
            process_cov: [0.0; 5],
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.wheel_base > 0.0) {
            return Err("wheel_base must be positive".into());
        }
        if !(self.dt > 0.0) {
            return Err("dt must be positive".into());
        }
        if self.process_cov.iter().any(|g| !(*g >= 0.0)) {
            return Err("process_cov entries must be non-negative".into());
        }
        Ok(())
    }

    pub fn clamp_input(&self, u: ControlInput) -> ControlInput {
        ControlInput::new(
            u.0[0].clamp(self.accel_limits[0], self.accel_limits[1]),
            u.0[1].clamp(self.steer_rate_limits[0], self.steer_rate_limits[1]),
        )
    }

    /// Clamps speed and steering angle; position and heading are unbounded.
    pub fn clamp_state(&self, mut x: AgentState) -> AgentState {
        x.0[3] = x.0[3].clamp(self.speed_limits[0], self.speed_limits[1]);
        x.0[4] = x.0[4].clamp(self.steer_limits[0], self.steer_limits[1]);
        x
    }
}

/// Continuous-time drift `f(x, u)`. Inputs are taken as given.
pub fn drift(x: &AgentState, u: &ControlInput, params: &BicycleParams) -> Vector5<f64> {
    let (s, c) = x.theta().sin_cos();
    let v = x.v();
    Vector5::new(
        v * c,
        v * s,
        v * x.delta().tan() / params.wheel_base,
        u.accel(),
        u.steer_rate(),
    )
}

fn integrate(x: &AgentState, u: ControlInput, noise: &Vector5<f64>, params: &BicycleParams) -> AgentState {
    let u = params.clamp_input(u);
    let f = drift(x, &u, params);
    params.clamp_state(AgentState(x.0 + (f + noise) * params.dt))
}

/// One Euler step: clamp the input, integrate, clamp speed and steering.
pub fn step_deterministic(x: &AgentState, u: ControlInput, params: &BicycleParams) -> AgentState {
    integrate(x, u, &Vector5::zeros(), params)
}

/// Euler step with Gaussian drift noise. Always consumes five normal draws.
pub fn step_stochastic(
    x: &AgentState,
    u: ControlInput,
    params: &BicycleParams,
    rng: &mut RngStream,
) -> AgentState {
    let mut w = Vector5::zeros();
    for k in 0..STATE_DIM {
        w[k] = params.process_cov[k].sqrt() * rng.standard_normal();
    }
    integrate(x, u, &w, params)
}

/// Discrete-time Jacobians `A = I + dt df/dx`, `B = dt df/du` of the
/// unclamped Euler map.
pub fn linearize(x: &AgentState, _u: &ControlInput, params: &BicycleParams) -> (StateMatrix, InputMatrix) {
    let dt = params.dt;
    let (s, c) = x.theta().sin_cos();
    let v = x.v();
    let d = x.delta();
    let l = params.wheel_base;
    let cd = d.cos();

    let mut a = StateMatrix::identity();
    a[(0, 2)] = -dt * v * s;
    a[(0, 3)] = dt * c;
    a[(1, 2)] = dt * v * c;
    a[(1, 3)] = dt * s;
    a[(2, 3)] = dt * d.tan() / l;
    a[(2, 4)] = dt * v / (l * cd * cd);

    let mut b = InputMatrix::zeros();
    b[(3, 0)] = dt;
    b[(4, 1)] = dt;
    (a, b)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<AgentState>,
    pub inputs: Vec<ControlInput>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.inputs.len()
    }

    pub fn terminal(&self) -> &AgentState {
        self.states.last().expect("trajectory has at least one state")
    }

    pub fn is_well_formed(&self) -> bool {
        self.states.len() == self.inputs.len() + 1
            && self.states.iter().all(AgentState::is_finite)
            && self.inputs.iter().all(|u| u.0.iter().all(|v| v.is_finite()))
    }
}

/// Deterministic rollout of a nominal input sequence. The returned inputs are
/// the clamped inputs actually applied.
pub fn rollout_nominal(x0: &AgentState, inputs: &[ControlInput], params: &BicycleParams) -> Trajectory {
    let mut states = Vec::with_capacity(inputs.len() + 1);
    let mut applied = Vec::with_capacity(inputs.len());
    let mut x = *x0;
    states.push(x);
    for u in inputs {
        let uc = params.clamp_input(*u);
        x = step_deterministic(&x, uc, params);
        states.push(x);
        applied.push(uc);
    }
    Trajectory {
        states,
        inputs: applied,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{Purpose, RngStream};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn p() -> BicycleParams {
        BicycleParams::default()
    }

    #[test]
    fn drift_examples() {
        let f = drift(&AgentState::new(0.0, 0.0, 0.0, 1.0, 0.0), &ControlInput::new(0.0, 0.0), &p());
        assert_eq!(f, Vector5::new(1.0, 0.0, 0.0, 0.0, 0.0));

        let f = drift(&AgentState::new(0.0, 0.0, FRAC_PI_2, 2.0, 0.2), &ControlInput::new(1.0, 1.0), &p());
        assert_abs_diff_eq!(f[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f[1], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f[2], 2.0 * 0.2f64.tan() / 0.33, epsilon = 1e-12);
        assert_abs_diff_eq!(f[2], 1.2285, epsilon = 1e-4);
        assert_eq!((f[3], f[4]), (1.0, 1.0));

        let f = drift(&AgentState::new(5.0, -3.0, PI, 0.0, 0.0), &ControlInput::default(), &p());
        assert_eq!(f, Vector5::zeros());
    }

    #[test]
    fn deterministic_step_examples() {
        let x = step_deterministic(&AgentState::new(0.0, 0.0, 0.0, 1.0, 0.0), ControlInput::default(), &p());
        assert_abs_diff_eq!(x.0, Vector5::new(0.1, 0.0, 0.0, 1.0, 0.0), epsilon = 1e-15);

        let x = step_deterministic(&AgentState::new(0.0, 0.0, 0.0, 2.0, 0.0), ControlInput::new(1.0, 0.0), &p());
        assert_eq!(x.v(), 2.0);

        let x = step_deterministic(&AgentState::new(0.0, 0.0, 0.0, 1.0, 0.4), ControlInput::new(0.0, 1.0), &p());
        assert_eq!(x.delta(), 0.4);
    }

    #[test]
    fn clamping_is_idempotent() {
        let params = p();
        let x = params.clamp_state(AgentState::new(1.0, 2.0, 9.0, 7.0, -3.0));
        assert_eq!(params.clamp_state(x), x);
        let u = params.clamp_input(ControlInput::new(-5.0, 0.3));
        assert_eq!(params.clamp_input(u), u);
    }

    #[test]
    fn zero_noise_matches_deterministic_bitwise() {
        let params = p().noiseless();
        let mut rng = RngStream::new(3, 0);
        let x0 = AgentState::new(0.3, -1.0, 0.7, 1.2, 0.1);
        let u = ControlInput::new(0.4, -0.2);
        let a = step_stochastic(&x0, u, &params, &mut rng);
        let b = step_deterministic(&x0, u, &params);
        for k in 0..5 {
            assert_eq!(a.0[k].to_bits(), b.0[k].to_bits());
        }
    }

    #[test]
    fn stochastic_step_is_deterministic_in_seed() {
        let x0 = AgentState::new(0.0, 0.0, 0.0, 1.0, 0.0);
        let a = step_stochastic(&x0, ControlInput::default(), &p(), &mut RngStream::new(9, 1));
        let b = step_stochastic(&x0, ControlInput::default(), &p(), &mut RngStream::new(9, 1));
        assert_eq!(a, b);
    }

    #[test]
    fn heading_increment_variance_matches_gamma_dt2() {
        // v = 0 so the heading drift is zero and only noise moves theta.
        let params = p();
        let mut rng = RngStream::for_purpose(11, Purpose::Test, 0, 0);
        let x0 = AgentState::new(0.0, 0.0, 0.0, 0.0, 0.0);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let d = step_stochastic(&x0, ControlInput::default(), &params, &mut rng).theta();
            sum += d;
            sum2 += d * d;
        }
        let mean = sum / n as f64;
        let var = sum2 / n as f64 - mean * mean;
        let expected = 0.1 * params.dt * params.dt;
        assert!((var / expected - 1.0).abs() < 0.05, "var {var} expected {expected}");
    }

    fn unclamped_step(x: &Vector5<f64>, u: &Vector2<f64>, params: &BicycleParams) -> Vector5<f64> {
        x + drift(&AgentState(*x), &ControlInput(*u), params) * params.dt
    }

    #[test]
    fn jacobian_example() {
        let (a, b) = linearize(&AgentState::new(0.0, 0.0, 0.0, 1.0, 0.0), &ControlInput::default(), &p());
        assert_abs_diff_eq!(a[(0, 2)], 0.0);
        assert_abs_diff_eq!(a[(2, 4)], 0.1 / 0.33, epsilon = 1e-12);
        assert_abs_diff_eq!(a[(2, 4)] / 0.1, 3.0303, epsilon = 1e-4);
        let mut expected_b = InputMatrix::zeros();
        expected_b[(3, 0)] = 0.1;
        expected_b[(4, 1)] = 0.1;
        assert_eq!(b, expected_b);
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let params = p();
        let mut rng = RngStream::for_purpose(5, Purpose::Test, 0, 1);
        let h = 1e-5;
        for _ in 0..100 {
            let x = Vector5::new(
                rng.uniform(-10.0, 10.0),
                rng.uniform(-10.0, 10.0),
                rng.uniform(-PI, PI),
                rng.uniform(-0.5, 2.0),
                rng.uniform(-0.4, 0.4),
            );
            let u = Vector2::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
            let (a, b) = linearize(&AgentState(x), &ControlInput(u), &params);
            for j in 0..5 {
                let mut e = Vector5::zeros();
                e[j] = h;
                let col = (unclamped_step(&(x + e), &u, &params) - unclamped_step(&(x - e), &u, &params)) / (2.0 * h);
                for i in 0..5 {
                    assert!((a[(i, j)] - col[i]).abs() <= 1e-6, "A[{i},{j}]");
                }
            }
            for j in 0..2 {
                let mut e = Vector2::zeros();
                e[j] = h;
                let col = (unclamped_step(&x, &(u + e), &params) - unclamped_step(&x, &(u - e), &params)) / (2.0 * h);
                for i in 0..5 {
                    assert!((b[(i, j)] - col[i]).abs() <= 1e-6, "B[{i},{j}]");
                }
            }
        }
    }

    #[test]
    fn nominal_rollout_examples() {
        let params = p();
        let rest = AgentState::new(1.0, 2.0, 0.3, 0.0, 0.0);
        let traj = rollout_nominal(&rest, &vec![ControlInput::default(); 20], &params);
        assert!(traj.states.iter().all(|s| *s == rest));

        let traj = rollout_nominal(&AgentState::new(0.0, 0.0, 0.0, 1.0, 0.0), &vec![ControlInput::default(); 20], &params);
        assert_eq!(traj.states.len(), traj.inputs.len() + 1);
        assert_eq!(traj.states[0], AgentState::new(0.0, 0.0, 0.0, 1.0, 0.0));
        assert_abs_diff_eq!(traj.terminal().px(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn euler_error_halves_with_dt() {
        let endpoint = |dt: f64| {
            let params = BicycleParams { dt, ..p() };
            let steps = (2.0 / dt).round() as usize;
            let inputs = vec![ControlInput::new(0.3, 0.15); steps];
            rollout_nominal(&AgentState::new(0.0, 0.0, 0.0, 1.0, 0.0), &inputs, &params)
                .terminal()
                .position()
        };
        let e1 = (endpoint(0.02) - endpoint(0.01)).norm();
        let e2 = (endpoint(0.01) - endpoint(0.005)).norm();
        let ratio = e1 / e2;
        assert!((ratio - 2.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn wrap_angle_range() {
        assert_abs_diff_eq!(wrap_angle(PI), PI);
        assert_abs_diff_eq!(wrap_angle(-PI), PI);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI / 2.0), -FRAC_PI_2, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(0.1), 0.1);
    }
}
