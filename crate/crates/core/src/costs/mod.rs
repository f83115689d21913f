//! Per-agent trajectory cost and the binary constraint indicator.
//!
//! Running cost shapes speed toward `min(k |p~|, v_max)` and penalizes input
//! effort; the terminal cost pulls the final planar velocity toward the
//! gyroscopic desired velocity (see [`gyro`]).

pub mod gyro;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::dynamics::{AgentState, ControlInput, Trajectory};
use crate::world::ObstacleField;
pub use gyro::{
    desired_velocity, give_way, gyro_matrix_term, k1, k2, smooth_sign, ObstacleEntry, ObstacleKind, ObstacleView,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostParams {
    /// Speed-shaping weight.
    pub omega1: f64,
    /// Input-effort weight.
    pub omega_u: f64,
    /// Proportional gain of the go-to velocity `-k p~`.
    pub k: f64,
    pub k_att_static: f64,
    pub k_obs_static: f64,
    pub k_att_agent: f64,
    pub k_obs_agent: f64,
    /// Diagonal of the terminal velocity weight.
    pub qf: [f64; 2],
    pub v_max: f64,
    /// Detection radius.
    pub r_d: f64,
    pub epsilon: f64,
    /// Inter-agent collision radius.
    pub collision_radius: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            omega1: 0.5,
            omega_u: 0.1,
            k: 3.0,
            k_att_static: 8.0,
            k_obs_static: 1.0,
            k_att_agent: 0.5,
            k_obs_agent: 0.5,
            qf: [1.0, 1.0],
            v_max: 2.0,
            r_d: 3.0,
            epsilon: 0.5,
            collision_radius: 0.5,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<(), String> {
        let weights = [
            self.omega1,
            self.omega_u,
            self.k,
            self.k_att_static,
            self.k_obs_static,
            self.k_att_agent,
            self.k_obs_agent,
            self.qf[0],
            self.qf[1],
        ];
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err("cost weights must be non-negative".into());
        }
        if !(self.v_max > 0.0 && self.r_d > 0.0 && self.collision_radius > 0.0) {
            return Err("v_max, r_d and collision_radius must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoalSpec {
    #[serde(with = "vec2")]
    pub p_goal: Vector2<f64>,
    /// Overrides the gyroscopic desired terminal velocity when present.
    #[serde(default, with = "opt_vec2", skip_serializing_if = "Option::is_none")]
    pub v_desired_terminal: Option<Vector2<f64>>,
}

impl GoalSpec {
    pub fn at(p_goal: Vector2<f64>) -> Self {
        Self {
            p_goal,
            v_desired_terminal: None,
        }
    }
}

/// Box bounds on the full state, checked strictly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateBounds {
    pub lo: [f64; 5],
    pub hi: [f64; 5],
}

impl Default for StateBounds {
    fn default() -> Self {
        Self {
            lo: [-50.0, -50.0, -1e9, -0.5, -0.4],
            hi: [50.0, 50.0, 1e9, 2.0, 0.4],
        }
    }
}

impl StateBounds {
    pub fn contains(&self, x: &AgentState) -> bool {
        (0..5).all(|k| x.0[k] >= self.lo[k] && x.0[k] <= self.hi[k])
    }
}

pub fn running_cost(x: &AgentState, u: &ControlInput, goal: &GoalSpec, params: &CostParams) -> f64 {
    let target = ((x.position() - goal.p_goal).norm() * params.k).min(params.v_max);
    let speed_err = target - x.v().abs();
    params.omega1 * speed_err * speed_err + params.omega_u * u.0.norm_squared()
}

pub fn terminal_cost(x_n: &AgentState, goal: &GoalSpec, obstacles: &ObstacleView, params: &CostParams) -> f64 {
    let v_d = goal
        .v_desired_terminal
        .unwrap_or_else(|| desired_velocity(&x_n.position(), &goal.p_goal, obstacles, params));
    let e = v_d - x_n.planar_velocity();
    params.qf[0] * e.x * e.x + params.qf[1] * e.y * e.y
}

pub fn running_cost_sum(traj: &Trajectory, goal: &GoalSpec, params: &CostParams) -> f64 {
    traj.inputs
        .iter()
        .zip(&traj.states)
        .map(|(u, x)| running_cost(x, u, goal, params))
        .sum()
}

pub fn trajectory_cost(traj: &Trajectory, goal: &GoalSpec, obstacles: &ObstacleView, params: &CostParams) -> f64 {
    running_cost_sum(traj, goal, params) + terminal_cost(traj.terminal(), goal, obstacles, params)
}

/// True if at any timestep the state leaves its bounds, enters an inflated
/// static obstacle, or comes strictly closer than `collision_radius` to any
/// teammate prediction at the same timestep. Each entry of `others` is one
/// predicted position sequence on the same time grid as `traj`.
pub fn constraint_violation<'a, I>(
    traj: &Trajectory,
    field: &ObstacleField,
    others: I,
    bounds: &StateBounds,
    collision_radius: f64,
) -> bool
where
    I: IntoIterator<Item = &'a [Vector2<f64>]> + Clone,
{
    let l2 = collision_radius * collision_radius;
    for (t, x) in traj.states.iter().enumerate() {
        if !bounds.contains(x) {
            return true;
        }
        let p = x.position();
        if field.collides(&p) {
            return true;
        }
        for path in others.clone() {
            if let Some(q) = path.get(t) {
                if (p - q).norm_squared() < l2 {
                    return true;
                }
            }
        }
    }
    false
}

pub(crate) mod vec2 {
    use nalgebra::Vector2;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vector2<f64>, s: S) -> Result<S::Ok, S::Error> {
        [v.x, v.y].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector2<f64>, D::Error> {
        let a = <[f64; 2]>::deserialize(d)?;
        Ok(Vector2::new(a[0], a[1]))
    }
}

pub(crate) mod opt_vec2 {
    use nalgebra::Vector2;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vector2<f64>>, s: S) -> Result<S::Ok, S::Error> {
        v.map(|v| [v.x, v.y]).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vector2<f64>>, D::Error> {
        Ok(Option::<[f64; 2]>::deserialize(d)?.map(|a| Vector2::new(a[0], a[1])))
    }
}
