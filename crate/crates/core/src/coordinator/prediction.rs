//! Sampled predictions of teammates' closed-loop trajectories.

use nalgebra::Vector2;

use super::messages::{measure, AgentMessage};
use crate::dynamics::{AgentState, BicycleParams};
use crate::pac_optimizer::rollout_closed_loop;
use crate::tvlqr::LqrWeights;
use crate::world::RngStream;
use crate::Result;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PredictedPath {
    pub positions: Vec<Vector2<f64>>,
    pub velocities: Vec<Vector2<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AgentPrediction {
    pub agent_id: usize,
    pub samples: Vec<PredictedPath>,
}

impl AgentPrediction {
    /// Prediction paired with policy sample `index` (cycled).
    pub fn pick(&self, index: usize) -> Option<&PredictedPath> {
        if self.samples.is_empty() {
            None
        } else {
            Some(&self.samples[index % self.samples.len()])
        }
    }
}

/// Predictions for every teammate except the planning agent.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PredictionSet {
    pub agents: Vec<AgentPrediction>,
}

impl PredictionSet {
    /// Every predicted position sequence of every teammate.
    pub fn position_paths(&self) -> impl Iterator<Item = &[Vector2<f64>]> + Clone {
        self.agents
            .iter()
            .flat_map(|a| a.samples.iter().map(|s| s.positions.as_slice()))
    }

    pub fn sample_count(&self) -> usize {
        self.agents.iter().map(|a| a.samples.len()).sum()
    }
}

/// For each message other than `own_id`, draws `m_pred` policies and rolls
/// them out in closed loop. With `noise_aware` each sample starts from a fresh
/// draw of `N(x0_hat, state_cov)`; otherwise from `x0_hat`. The draw is made
/// in both modes so the two consume identical random streams.
pub fn sample_other_trajectories(
    messages: &[AgentMessage],
    own_id: usize,
    m_pred: usize,
    noise_aware: bool,
    dynamics: &BicycleParams,
    lqr: &LqrWeights,
    rng: &mut RngStream,
) -> Result<PredictionSet> {
    let mut agents = Vec::new();
    for msg in messages.iter().filter(|m| m.agent_id != own_id) {
        let mut samples = Vec::with_capacity(m_pred);
        for _ in 0..m_pred {
            let xi = msg.policy.sample(rng);
            let drawn = measure(&msg.x0, &msg.state_cov, rng);
            let start = if noise_aware { drawn } else { msg.x0 };
            let traj = rollout_closed_loop(&xi, &start, dynamics, lqr, rng)?;
            samples.push(PredictedPath {
                positions: traj.states.iter().map(AgentState::position).collect(),
                velocities: traj.states.iter().map(AgentState::planar_velocity).collect(),
            });
        }
        agents.push(AgentPrediction {
            agent_id: msg.agent_id,
            samples,
        });
    }
    Ok(PredictionSet { agents })
}
