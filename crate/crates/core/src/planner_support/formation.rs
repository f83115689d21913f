use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::{rrt_plan, Path, RrtConfig};
use crate::dynamics::{rollout_nominal, BicycleParams};
use crate::coordinator::AgentMessage;
use crate::world::{ObstacleField, RngStream};
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormationPattern {
    Wedge,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormationSpec {
    /// Distance behind the leader along its heading.
    pub l: f64,
    /// Lateral distance.
    pub h: f64,
    pub pattern: FormationPattern,
}

impl Default for FormationSpec {
    fn default() -> Self {
        Self {
            l: 1.0,
            h: 1.0,
            pattern: FormationPattern::Wedge,
        }
    }
}

/// `p - [[cos, +-sin], [sin, -+cos]] [l, h]'`: upper signs for the first
/// follower, lower for the second.
pub fn wedge_points(leader_p: &Vector2<f64>, leader_theta: f64, spec: &FormationSpec) -> [Vector2<f64>; 2] {
    let (s, c) = leader_theta.sin_cos();
    let lh = Vector2::new(spec.l, spec.h);
    let upper = Matrix2::new(c, s, s, -c);
    let lower = Matrix2::new(c, -s, s, c);
    [leader_p - upper * lh, leader_p - lower * lh]
}

/// Formation slot of follower `k` (0-based). Followers beyond the first two
/// repeat the wedge further back.
pub fn follower_slot(leader_p: &Vector2<f64>, leader_theta: f64, spec: &FormationSpec, k: usize) -> Vector2<f64> {
    let rank = (k / 2 + 1) as f64;
    let scaled = FormationSpec {
        l: spec.l * rank,
        h: spec.h * rank,
        pattern: spec.pattern,
    };
    wedge_points(leader_p, leader_theta, &scaled)[k % 2]
}

/// Moves `goal` out of any obstacle it lies in, toward the leader, to
/// `radius + margin` from the obstacle center. Repeats up to five rounds,
/// then falls back to the nearest free point on growing rings.
pub fn project_goal_from_obstacles(goal: Vector2<f64>, field: &ObstacleField, leader_p: &Vector2<f64>, margin: f64) -> Vector2<f64> {
    let mut g = goal;
    for _ in 0..5 {
        let Some(c) = field.obstacles.iter().find(|c| (g - c.center).norm() < c.radius) else {
            return g;
        };
        let mut dir = leader_p - c.center;
        if dir.norm() < 1e-12 {
            dir = g - c.center;
        }
        if dir.norm() < 1e-12 {
            dir = Vector2::new(-1.0, 0.0);
        }
        g = c.center + dir.normalize() * (c.radius + margin);
    }
    if field.obstacles.iter().all(|c| (g - c.center).norm() >= c.radius) {
        return g;
    }
    for ring in 1..=200 {
        let rad = ring as f64 * 0.05;
        for k in 0..64 {
            let a = k as f64 * std::f64::consts::TAU / 64.0;
            let cand = goal + Vector2::new(a.cos(), a.sin()) * rad;
            if field.obstacles.iter().all(|c| (cand - c.center).norm() >= c.radius + margin) {
                return cand;
            }
        }
    }
    g
}

/// Planner-side formation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub rrt: RrtConfig,
    /// Arc length between an agent's path projection and its tracked point.
    pub lookahead: f64,
    pub formation: FormationSpec,
    /// Clearance added when a formation point is pushed out of an obstacle.
    pub goal_margin: f64,
    /// Use the leader's live heading instead of the path tangent.
    pub live_heading: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            rrt: RrtConfig::default(),
            lookahead: 2.0,
            formation: FormationSpec::default(),
            goal_margin: 0.1,
            live_heading: false,
        }
    }
}

/// Inputs shared by the formation-point methods for one interval.
pub struct FormationInput<'a> {
    pub leader_msg: &'a AgentMessage,
    pub leader_path: &'a Path,
    /// `(follower index, true position)` pairs, index 0 is the first follower.
    pub followers: &'a [(usize, Vector2<f64>)],
    pub field: &'a ObstacleField,
    pub config: &'a PlannerConfig,
    pub dynamics: &'a BicycleParams,
    /// Per-follower RRT streams, parallel to `followers`.
    pub rng_for: &'a dyn Fn(usize) -> RngStream,
}

impl FormationInput<'_> {
    /// Leader reference pose a lookahead ahead on its path.
    pub fn leader_reference(&self) -> (Vector2<f64>, f64) {
        let p = self.leader_msg.x0.position();
        let (q, tangent) = self.leader_path.lookahead(&p, self.config.lookahead);
        let theta = if self.config.live_heading { self.leader_msg.x0.theta() } else { tangent };
        (q, theta)
    }

    fn project(&self, g: Vector2<f64>) -> Vector2<f64> {
        project_goal_from_obstacles(g, self.field, &self.leader_msg.x0.position(), self.config.goal_margin)
    }
}

/// How followers derive their formation points from the leader.
pub trait FormationPointMethod: Send + Sync {
    fn name(&self) -> &'static str;

    /// Tracked goal for every follower in `input.followers`.
    fn follower_goals(&self, input: &FormationInput<'_>) -> Result<Vec<Vector2<f64>>>;
}

/// Wedge around the leader's reference pose on its RRT path.
#[derive(Clone, Copy, Debug, Default)]
pub struct LeaderRrt;

impl FormationPointMethod for LeaderRrt {
    fn name(&self) -> &'static str {
        "leader_rrt"
    }

    fn follower_goals(&self, input: &FormationInput<'_>) -> Result<Vec<Vector2<f64>>> {
        let (q, theta) = input.leader_reference();
        Ok(input
            .followers
            .iter()
            .map(|(k, _)| input.project(follower_slot(&q, theta, &input.config.formation, *k)))
            .collect())
    }
}

/// Wedge around the terminal state of the leader's broadcast mean trajectory.
#[derive(Clone, Copy, Debug, Default)]
pub struct MeanFinalState;

impl FormationPointMethod for MeanFinalState {
    fn name(&self) -> &'static str {
        "mean_final_state"
    }

    fn follower_goals(&self, input: &FormationInput<'_>) -> Result<Vec<Vector2<f64>>> {
        let msg = input.leader_msg;
        let traj = rollout_nominal(&msg.x0, &msg.policy.mean_params().inputs(), input.dynamics);
        let xn = traj.terminal();
        Ok(input
            .followers
            .iter()
            .map(|(k, _)| input.project(follower_slot(&xn.position(), xn.theta(), &input.config.formation, *k)))
            .collect())
    }
}

/// Each follower plans its own RRT to its leader-RRT slot and steers for the
/// farthest waypoint of that path it can see.
#[derive(Clone, Copy, Debug, Default)]
pub struct FollowerRrt;

impl FormationPointMethod for FollowerRrt {
    fn name(&self) -> &'static str {
        "follower_rrt"
    }

    fn follower_goals(&self, input: &FormationInput<'_>) -> Result<Vec<Vector2<f64>>> {
        let slots = LeaderRrt.follower_goals(input)?;
        let mut out = Vec::with_capacity(slots.len());
        for ((k, p), slot) in input.followers.iter().zip(slots) {
            if input.field.collides(p) {
                out.push(slot);
                continue;
            }
            let mut rng = (input.rng_for)(*k);
            let path = rrt_plan(*p, slot, input.field, &mut rng, &input.config.rrt)?;
            // Farthest waypoint in line of sight; the slot itself when visible.
            let q = path
                .waypoints
                .iter()
                .rev()
                .find(|w| input.field.segment_clear(p, w))
                .copied()
                .unwrap_or(path.waypoints[1.min(path.waypoints.len() - 1)]);
            out.push(q);
        }
        Ok(out)
    }
}
