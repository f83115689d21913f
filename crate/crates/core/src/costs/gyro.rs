//! Gyroscopic desired terminal velocity.
//!
//! The go-to velocity `-k p~` is rotated (never scaled down) around nearby
//! obstacles. Relative vectors `d` point from the agent to the obstacle, so
//! `theta = -d'(k p~) / (|d| |k p~|)` is the cosine between the obstacle
//! bearing and the go-to direction: 1 when the obstacle is dead ahead.

use nalgebra::{Matrix2, Vector2};

use super::CostParams;

/// Logistic beyond which an obstacle's gain is below ~1e-6 of its scale.
pub const DETECTION_MARGIN: f64 = 14.0;

const PENETRATION_GUARD: f64 = 1e-6;
const ZERO_VECTOR: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObstacleKind {
    Static,
    Agent,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObstacleEntry {
    pub position: Vector2<f64>,
    pub velocity: Vector2<f64>,
    pub radius: f64,
    pub kind: ObstacleKind,
}

impl ObstacleEntry {
    pub fn fixed(position: Vector2<f64>, radius: f64) -> Self {
        Self {
            position,
            velocity: Vector2::zeros(),
            radius,
            kind: ObstacleKind::Static,
        }
    }

    pub fn agent(position: Vector2<f64>, velocity: Vector2<f64>, radius: f64) -> Self {
        Self {
            position,
            velocity,
            radius,
            kind: ObstacleKind::Agent,
        }
    }
}

/// Obstacles visible to the terminal cost: static circles plus teammates'
/// predicted terminal positions and velocities.
pub type ObstacleView = [ObstacleEntry];

/// Rotation generator `[[0, -1], [1, 0]]`.
pub fn rotation_generator() -> Matrix2<f64> {
    Matrix2::new(0.0, -1.0, 1.0, 0.0)
}

pub fn smooth_sign(s: f64) -> f64 {
    1.0 / (1.0 + (-s).exp())
}

/// Attraction weighting `exp(k_att (theta - 1))`.
pub fn k1(theta: f64, k_att: f64) -> f64 {
    (k_att * (theta - 1.0)).exp()
}

/// Proximity weighting `k_obs S(r_d + r - |d| - eps) / (|d| - r)`.
pub fn k2(d_norm: f64, r: f64, k_obs: f64, params: &CostParams) -> f64 {
    let gap = (d_norm - r).max(PENETRATION_GUARD);
    k_obs * smooth_sign(params.r_d + r - d_norm - params.epsilon) / gap
}

/// Unsigned angle in `[0, pi]`.
fn angle_between(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    (a.dot(b) / (a.norm() * b.norm())).clamp(-1.0, 1.0).acos()
}

/// Give-way direction from the C1-C4 rule. Returns 0 when no case applies or
/// any input is (numerically) the zero vector.
pub fn give_way(d: &Vector2<f64>, v_i: &Vector2<f64>, v_j: &Vector2<f64>) -> i8 {
    if d.norm() < ZERO_VECTOR || v_i.norm() < ZERO_VECTOR || v_j.norm() < ZERO_VECTOR {
        return 0;
    }
    let di = d.dot(v_i);
    let dj = d.dot(v_j);
    if di >= 0.0 && dj >= 0.0 {
        // C1
        if angle_between(d, v_i) - angle_between(d, v_j) >= 0.0 {
            1
        } else {
            -1
        }
    } else if di >= 0.0 && dj < 0.0 {
        // C2
        if angle_between(d, v_i) - angle_between(v_j, d) >= 0.0 {
            1
        } else {
            -1
        }
    } else if di < 0.0 && dj < 0.0 {
        // C3
        if angle_between(d, v_i) - angle_between(d, v_j) > 0.0 {
            1
        } else {
            -1
        }
    } else {
        0
    }
}

/// Rotation sign for a stationary obstacle: turn away from the side the
/// obstacle is on, to the right when it is dead ahead.
pub fn static_give_way(d: &Vector2<f64>, v_i: &Vector2<f64>) -> i8 {
    if d.norm() < ZERO_VECTOR || v_i.norm() < ZERO_VECTOR {
        return 0;
    }
    let cross = v_i.x * d.y - v_i.y * d.x;
    if cross >= 0.0 {
        -1
    } else {
        1
    }
}

/// Cosine between the obstacle bearing `d` and the go-to direction `-k p~`.
pub fn bearing_cosine(d: &Vector2<f64>, p_tilde: &Vector2<f64>, k: f64) -> f64 {
    let kp = p_tilde * k;
    let denom = d.norm() * kp.norm();
    if denom < ZERO_VECTOR * ZERO_VECTOR {
        return 1.0;
    }
    (-d.dot(&kp) / denom).clamp(-1.0, 1.0)
}

/// `G = k1(theta) k2(|d|) e E` for one obstacle.
#[allow(clippy::too_many_arguments)]
pub fn gyro_matrix_term(
    d: &Vector2<f64>,
    p_tilde: &Vector2<f64>,
    v_i: &Vector2<f64>,
    v_j: &Vector2<f64>,
    r: f64,
    k_att: f64,
    k_obs: f64,
    kind: ObstacleKind,
    params: &CostParams,
) -> Matrix2<f64> {
    if p_tilde.norm() < ZERO_VECTOR {
        return Matrix2::zeros();
    }
    let e = match kind {
        ObstacleKind::Agent => give_way(d, v_i, v_j),
        ObstacleKind::Static => static_give_way(d, v_i),
    };
    if e == 0 {
        return Matrix2::zeros();
    }
    let theta = bearing_cosine(d, p_tilde, params.k);
    let gain = k1(theta, k_att) * k2(d.norm(), r, k_obs, params) * f64::from(e);
    rotation_generator() * gain
}

/// Gyroscopic desired terminal velocity, capped at `v_max`.
pub fn desired_velocity(
    p_terminal: &Vector2<f64>,
    goal: &Vector2<f64>,
    obstacles: &ObstacleView,
    params: &CostParams,
) -> Vector2<f64> {
    let p_tilde = p_terminal - goal;
    if p_tilde.norm() < ZERO_VECTOR {
        return Vector2::zeros();
    }
    let go_to = -p_tilde * params.k;
    let mut g_sum = Matrix2::zeros();
    for ob in obstacles {
        let d = ob.position - p_terminal;
        let d_norm = d.norm();
        if d_norm - ob.radius >= params.r_d + DETECTION_MARGIN {
            continue;
        }
        let (k_att, k_obs) = match ob.kind {
            ObstacleKind::Static => (params.k_att_static, params.k_obs_static),
            ObstacleKind::Agent => (params.k_att_agent, params.k_obs_agent),
        };
        g_sum += gyro_matrix_term(&d, &p_tilde, &go_to, &ob.velocity, ob.radius, k_att, k_obs, ob.kind, params);
    }
    let v = (g_sum + Matrix2::identity()) * go_to;
    let n = v.norm();
    if n > params.v_max {
        v * (params.v_max / n)
    } else {
        v
    }
}
