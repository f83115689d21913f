//! Policy-exchange messages and measurement-noise injection.

use serde::{Deserialize, Serialize};

use crate::dynamics::{AgentState, STATE_DIM};
use crate::policy_dist::PolicyDistribution;
use crate::world::RngStream;

/// What each agent broadcasts at the start of a planning interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentMessage {
    pub agent_id: usize,
    pub plan_index: u64,
    /// Measured (possibly noisy) initial state.
    pub x0: AgentState,
    #[serde(flatten)]
    pub policy: PolicyDistribution,
    /// Diagonal measurement covariance the receiver should assume.
    pub state_cov: [f64; STATE_DIM],
}

/// Corrupts `x` with `N(0, diag(cov))`. Always consumes five normal draws.
pub fn measure(x: &AgentState, cov: &[f64; STATE_DIM], rng: &mut RngStream) -> AgentState {
    let mut out = *x;
    for k in 0..STATE_DIM {
        let z = rng.standard_normal();
        if cov[k] > 0.0 {
            out.0[k] += cov[k].sqrt() * z;
        }
    }
    out
}

/// Builds one message per agent from its true state and current policy. Each
/// agent's noise comes from its own stream (`rngs[i]`).
pub fn broadcast_states(
    agents: &[(usize, AgentState, PolicyDistribution)],
    sigma_p: &[f64; STATE_DIM],
    plan_index: u64,
    rngs: &mut [RngStream],
) -> Vec<AgentMessage> {
    agents
        .iter()
        .zip(rngs.iter_mut())
        .map(|((id, x, policy), rng)| AgentMessage {
            agent_id: *id,
            plan_index,
            x0: measure(x, sigma_p, rng),
            policy: policy.clone(),
            state_cov: *sigma_p,
        })
        .collect()
}
