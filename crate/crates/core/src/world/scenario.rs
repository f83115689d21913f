//! Scenario configuration loaded from JSON.

use std::path::Path;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::ObstacleField;
use crate::coordinator::CoordinationConfig;
use crate::costs::{CostParams, StateBounds};
use crate::dynamics::{AgentState, BicycleParams};
use crate::pac_optimizer::PacConfig;
use crate::planner_support::PlannerConfig;
use crate::tvlqr::LqrWeights;
use crate::{Error, Result};

/// How initial states are produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialStates {
    /// Leader uniform in `[leader_lo, leader_hi]`; followers at their wedge
    /// slots plus uniform noise in `+-follower_jitter`.
    Formation {
        leader_lo: [f64; 5],
        leader_hi: [f64; 5],
        follower_jitter: [f64; 5],
    },
    /// Evenly spaced on a circle, at rest, facing the center.
    Antipodal { radius: f64, center: [f64; 2] },
    Explicit { states: Vec<AgentState> },
}

/// Where agents are headed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Goals {
    /// Agent 0 leads to `leader_goal` along an RRT path; the rest hold the
    /// wedge around it.
    Formation { leader_goal: [f64; 2] },
    /// Each agent's goal is its start reflected through the circle center.
    Antipodal,
    Explicit { goals: Vec<[f64; 2]> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObstacleSource {
    None,
    Generate {
        count: usize,
        radius: f64,
        lo: [f64; 2],
        hi: [f64; 2],
    },
    Explicit { circles: ObstacleField },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub name: String,
    /// Registered team planner name.
    pub mode: String,
    pub agent_count: usize,
    pub initial_states: InitialStates,
    pub goals: Goals,
    pub obstacles: ObstacleSource,
    /// Registered formation-point method name.
    pub formation_method: String,
    pub static_gyro_on: bool,
    pub agent_gyro_on: bool,
    /// Diagonal measurement covariance of broadcast states.
    pub measurement_cov: [f64; 5],
    pub noise_aware: bool,
    pub max_sim_time: f64,
    pub seed: u64,
    pub dynamics: BicycleParams,
    pub lqr: LqrWeights,
    pub cost: CostParams,
    /// Terminal weight diagonal for followers; the leader uses `cost.qf`.
    pub follower_qf: [f64; 2],
    pub optimizer: PacConfig,
    pub coordination: CoordinationConfig,
    pub planner: PlannerConfig,
    pub state_bounds: StateBounds,
    /// Formation error counts as steady state once the leader passes this x.
    pub steady_state_x: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "obstacle_field".into(),
            mode: "distributed".into(),
            agent_count: 3,
            initial_states: InitialStates::Formation {
                leader_lo: [-1.0, -2.0, -std::f64::consts::FRAC_PI_8, 0.0, -0.2],
                leader_hi: [1.0, 2.0, std::f64::consts::FRAC_PI_8, 1.0, 0.2],
                follower_jitter: [0.5, 0.5, std::f64::consts::PI / 16.0, 0.5, 0.2],
            },
            goals: Goals::Formation { leader_goal: [15.0, 0.0] },
            obstacles: ObstacleSource::Generate {
                count: 10,
                radius: 0.6,
                lo: [3.0, -4.0],
                hi: [10.0, 4.0],
            },
            formation_method: "leader_rrt".into(),
            static_gyro_on: true,
            agent_gyro_on: true,
            measurement_cov: [0.0; 5],
            noise_aware: false,
            max_sim_time: 60.0,
            seed: 0,
            dynamics: BicycleParams::default(),
            lqr: LqrWeights::default(),
            cost: CostParams::default(),
            follower_qf: [1.0, 1.5],
            optimizer: PacConfig::default(),
            coordination: CoordinationConfig::default(),
            planner: PlannerConfig::default(),
            state_bounds: StateBounds::default(),
            steady_state_x: 10.0,
        }
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if self.agent_count < 1 {
            return bad("agent_count must be at least 1".into());
        }
        if self.measurement_cov.iter().any(|c| !(*c >= 0.0)) {
            return bad("measurement_cov entries must be >= 0".into());
        }
        if !(self.max_sim_time > 0.0) {
            return bad("max_sim_time must be positive".into());
        }
        self.dynamics.validate().map_err(Error::InvalidScenario)?;
        self.cost.validate().map_err(Error::InvalidScenario)?;
        self.optimizer.validate().map_err(Error::InvalidScenario)?;
        let c = &self.coordination;
        if c.horizon == 0 || c.executed_steps == 0 || c.executed_steps >= c.horizon || c.m_pred == 0 {
            return bad("need 0 < executed_steps < horizon and m_pred >= 1".into());
        }
        match (&self.initial_states, &self.goals) {
            (InitialStates::Explicit { states }, _) if states.len() != self.agent_count => {
                return bad(format!("{} explicit states for {} agents", states.len(), self.agent_count));
            }
            (_, Goals::Explicit { goals }) if goals.len() != self.agent_count => {
                return bad(format!("{} explicit goals for {} agents", goals.len(), self.agent_count));
            }
            (InitialStates::Formation { .. }, Goals::Antipodal) | (InitialStates::Explicit { .. }, Goals::Antipodal) => {
                return bad("antipodal goals need antipodal initial states".into());
            }
            _ => {}
        }
        crate::registry::team_planner(&self.mode)?;
        crate::registry::formation_method(&self.formation_method)?;
        Ok(())
    }

    pub fn is_formation(&self) -> bool {
        matches!(self.goals, Goals::Formation { .. })
    }

    /// Raises the optimizer to the sample and iteration counts of the
    /// original study: 200 iterations, 1024 samples per agent (4096 when
    /// centralized).
    pub fn paper_scale(mut self) -> Self {
        self.optimizer.iteration_count = 200;
        self.optimizer.sample_count = if self.mode == "centralized" { 4096 } else { 1024 };
        self
    }

    /// Start states on the antipodal circle.
    pub fn antipodal_starts(&self, radius: f64, center: [f64; 2]) -> Vec<AgentState> {
        let c = Vector2::from(center);
        (0..self.agent_count)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / self.agent_count as f64;
                let p = c + Vector2::new(a.cos(), a.sin()) * radius;
                let heading = (c - p).y.atan2((c - p).x);
                AgentState::new(p.x, p.y, heading, 0.0, 0.0)
            })
            .collect()
    }
}
