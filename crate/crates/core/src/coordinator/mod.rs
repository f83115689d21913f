//! Multi-agent orchestration: message exchange, teammate prediction, the
//! distributed and centralized planners, lock-stepped execution and events.
//!
//! One planning interval runs broadcast, goal update, prediction, planning,
//! then execution of `executed_steps` inputs on the true states.

mod events;
mod messages;
mod prediction;

use nalgebra::{DVector, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use events::{detect_events, detect_outcome, EventKind, EventProbe, SimEvent};
pub use messages::{broadcast_states, measure, AgentMessage};
pub use prediction::{sample_other_trajectories, AgentPrediction, PredictedPath, PredictionSet};

use crate::costs::{CostParams, GoalSpec, StateBounds};
use crate::dynamics::{rollout_nominal, step_stochastic, AgentState, BicycleParams, ControlInput, STATE_DIM};
use crate::pac_optimizer::{
    plan, warm_start, AgentEvaluator, BoundReport, JointEvaluator, PacConfig, PlanContext, PlanOutcome,
};
use crate::policy_dist::PolicyDistribution;
use crate::tvlqr::{apply_policy, tvlqr_gains, LqrWeights};
use crate::world::{ObstacleField, Purpose, RngStream};
use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoordinationConfig {
    /// Planning horizon `N_T`.
    pub horizon: usize,
    /// Inputs executed per planning interval.
    pub executed_steps: usize,
    /// Predicted trajectories per teammate.
    pub m_pred: usize,
    pub goal_tolerance: f64,
    /// Variance broadcast by agents that have stopped.
    pub frozen_sigma2: f64,
    /// Plan-and-broadcast rounds before the first interval, executing nothing.
    pub bootstrap_rounds: usize,
}

impl Default for CoordinationConfig {
    fn default() -> Self {
        Self {
            horizon: 20,
            executed_steps: 5,
            m_pred: 8,
            goal_tolerance: 1.0,
            frozen_sigma2: 1e-8,
            bootstrap_rounds: 1,
        }
    }
}

/// Settings shared by every agent in a run.
#[derive(Clone, Debug, PartialEq)]
pub struct TeamSettings {
    pub dynamics: BicycleParams,
    pub lqr: LqrWeights,
    pub optimizer: PacConfig,
    pub coordination: CoordinationConfig,
    pub bounds: StateBounds,
    pub static_gyro: bool,
    pub agent_gyro: bool,
    pub noise_aware: bool,
    pub measurement_cov: [f64; STATE_DIM],
    pub seed: u64,
}

/// Live state of one agent.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentRuntime {
    pub id: usize,
    pub state: AgentState,
    pub policy: PolicyDistribution,
    /// Point tracked by the current plan.
    pub goal: GoalSpec,
    /// Where this agent's mission ends (goal-reached check).
    pub final_goal: Vector2<f64>,
    pub cost: CostParams,
    pub active: bool,
}

impl AgentRuntime {
    pub fn new(id: usize, state: AgentState, final_goal: Vector2<f64>, cost: CostParams, settings: &TeamSettings) -> Self {
        Self {
            id,
            state,
            policy: PolicyDistribution::isotropic(settings.coordination.horizon, settings.optimizer.sigma_init),
            goal: GoalSpec::at(final_goal),
            final_goal,
            cost,
            active: true,
        }
    }

    /// Stops the agent in place; it keeps broadcasting a stationary policy.
    pub fn freeze(&mut self, settings: &TeamSettings) {
        self.active = false;
        self.state.0[3] = 0.0;
        self.state.0[4] = 0.0;
        let n = self.policy.dim();
        self.policy = PolicyDistribution::new(DVector::zeros(n), DVector::from_element(n, settings.coordination.frozen_sigma2))
            .expect("positive frozen variance");
    }
}

/// Planning mode: produces a new policy for every active agent.
pub trait TeamPlanner: Send + Sync {
    fn name(&self) -> &'static str;

    /// Returns one outcome per agent (`None` for inactive agents).
    fn plan_team(
        &self,
        agents: &[AgentRuntime],
        messages: &[AgentMessage],
        field: &ObstacleField,
        settings: &TeamSettings,
        interval: u64,
    ) -> Result<Vec<Option<PlanOutcome>>>;
}

/// Starting distribution for this interval's optimization. `agent.policy` has
/// already been shifted to the current interval by [`run_interval`].
fn warm_policy(agent: &AgentRuntime, settings: &TeamSettings, interval: u64) -> PolicyDistribution {
    let cfg = &settings.optimizer;
    if cfg.warm_start && interval > 0 {
        agent.policy.clone()
    } else {
        PolicyDistribution::isotropic(settings.coordination.horizon, cfg.sigma_init)
    }
}

fn plan_context(agent: &AgentRuntime, predictions: PredictionSet, field: &ObstacleField, settings: &TeamSettings) -> PlanContext {
    PlanContext {
        x0: agent.state,
        goal: agent.goal.clone(),
        field: field.clone(),
        predictions,
        static_gyro: settings.static_gyro,
        agent_gyro: settings.agent_gyro,
        cost: agent.cost.clone(),
        dynamics: settings.dynamics.clone(),
        lqr: settings.lqr.clone(),
        bounds: settings.bounds.clone(),
        horizon: settings.coordination.horizon,
    }
}

/// Builds agent `agent`'s optimization context for this interval: its own
/// true state plus sampled predictions of every other broadcasting agent.
pub fn agent_context(
    agent: &AgentRuntime,
    messages: &[AgentMessage],
    field: &ObstacleField,
    settings: &TeamSettings,
    interval: u64,
) -> Result<PlanContext> {
    let mut rng = RngStream::for_purpose(settings.seed, Purpose::Prediction, agent.id, interval);
    let predictions = sample_other_trajectories(
        messages,
        agent.id,
        settings.coordination.m_pred,
        settings.noise_aware,
        &settings.dynamics,
        &settings.lqr,
        &mut rng,
    )?;
    Ok(plan_context(agent, predictions, field, settings))
}

/// Every agent optimizes its own policy against predictions of the others,
/// which are held fixed for the interval.
#[derive(Clone, Copy, Debug, Default)]
pub struct DistributedPlanner;

impl TeamPlanner for DistributedPlanner {
    fn name(&self) -> &'static str {
        "distributed"
    }

    fn plan_team(
        &self,
        agents: &[AgentRuntime],
        messages: &[AgentMessage],
        field: &ObstacleField,
        settings: &TeamSettings,
        interval: u64,
    ) -> Result<Vec<Option<PlanOutcome>>> {
        agents
            .par_iter()
            .map(|agent| {
                if !agent.active {
                    return Ok(None);
                }
                let ctx = agent_context(agent, messages, field, settings, interval)?;
                let warm = warm_policy(agent, settings, interval);
                let mut rng = RngStream::for_purpose(settings.seed, Purpose::Planning, agent.id, interval);
                plan(&warm, &AgentEvaluator::new(&ctx), &settings.optimizer, &mut rng).map(Some)
            })
            .collect()
    }
}

/// One optimizer over the stacked team policy. Stopped agents are predicted
/// from their broadcasts like in the distributed planner.
#[derive(Clone, Copy, Debug, Default)]
pub struct CentralizedPlanner;

impl TeamPlanner for CentralizedPlanner {
    fn name(&self) -> &'static str {
        "centralized"
    }

    fn plan_team(
        &self,
        agents: &[AgentRuntime],
        messages: &[AgentMessage],
        field: &ObstacleField,
        settings: &TeamSettings,
        interval: u64,
    ) -> Result<Vec<Option<PlanOutcome>>> {
        let active: Vec<&AgentRuntime> = agents.iter().filter(|a| a.active).collect();
        if active.is_empty() {
            return Ok(vec![None; agents.len()]);
        }
        let stopped: Vec<AgentMessage> = messages
            .iter()
            .filter(|m| agents.iter().any(|a| a.id == m.agent_id && !a.active))
            .cloned()
            .collect();
        let contexts = active
            .iter()
            .map(|a| agent_context(a, &stopped, field, settings, interval))
            .collect::<Result<Vec<_>>>()?;
        let warm = PolicyDistribution::stack(&active.iter().map(|a| warm_policy(a, settings, interval)).collect::<Vec<_>>());
        let lead = active[0].id;
        let mut rng = RngStream::for_purpose(settings.seed, Purpose::Planning, lead, interval);
        let outcome = plan(&warm, &JointEvaluator::new(&contexts), &settings.optimizer, &mut rng)?;
        let parts = outcome.distribution.split(active.len());
        let mut out = vec![None; agents.len()];
        let mut parts = parts.into_iter();
        for (slot, agent) in out.iter_mut().zip(agents) {
            if agent.active {
                *slot = Some(PlanOutcome {
                    distribution: parts.next().expect("one block per active agent"),
                    report: outcome.report,
                    accepted_steps: outcome.accepted_steps,
                });
            }
        }
        Ok(out)
    }
}

/// True states and applied inputs after one executed step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub time: f64,
    pub states: Vec<AgentState>,
    pub inputs: Vec<ControlInput>,
    pub active: Vec<bool>,
}

/// Everything produced by one planning interval.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalResult {
    pub messages: Vec<AgentMessage>,
    pub reports: Vec<Option<BoundReport>>,
    pub steps: Vec<StepRecord>,
    pub events: Vec<SimEvent>,
}

pub fn event_probes(agents: &[AgentRuntime]) -> Vec<EventProbe> {
    agents
        .iter()
        .map(|a| EventProbe {
            agent_id: a.id,
            position: a.state.position(),
            final_goal: a.final_goal,
            active: a.active,
        })
        .collect()
}

/// Checks events at `time` and freezes agents that received one.
pub fn apply_events(agents: &mut [AgentRuntime], field: &ObstacleField, settings: &TeamSettings, time: f64) -> Vec<SimEvent> {
    let events = detect_events(
        &event_probes(agents),
        field,
        agents.first().map_or(0.5, |a| a.cost.collision_radius),
        settings.coordination.goal_tolerance,
        time,
    );
    for e in &events {
        if let Some(a) = agents.iter_mut().find(|a| a.id == e.agent_id) {
            a.freeze(settings);
        }
    }
    events
}

/// Broadcasts the current states and policies. Stopped agents broadcast too.
pub fn broadcast(agents: &[AgentRuntime], settings: &TeamSettings, interval: u64) -> Vec<AgentMessage> {
    let snapshot: Vec<_> = agents.iter().map(|a| (a.id, a.state, a.policy.clone())).collect();
    let mut rngs: Vec<_> = agents
        .iter()
        .map(|a| RngStream::for_purpose(settings.seed, Purpose::Broadcast, a.id, interval))
        .collect();
    broadcast_states(&snapshot, &settings.measurement_cov, interval, &mut rngs)
}

/// Interval index of the random streams used by [`bootstrap`].
pub const BOOTSTRAP_INTERVAL: u64 = 0xffff_ffff;

/// A planning round before the first interval that executes nothing. It
/// replaces the untrained prior in everyone's first broadcast with a real plan.
pub fn bootstrap<F>(
    planner: &dyn TeamPlanner,
    agents: &mut [AgentRuntime],
    field: &ObstacleField,
    settings: &TeamSettings,
    mut update_goals: F,
) -> Result<()>
where
    F: FnMut(&mut [AgentRuntime], &[AgentMessage]) -> Result<()>,
{
    let messages = broadcast(agents, settings, BOOTSTRAP_INTERVAL);
    update_goals(agents, &messages)?;
    let outcomes = planner.plan_team(agents, &messages, field, settings, BOOTSTRAP_INTERVAL)?;
    for (agent, outcome) in agents.iter_mut().zip(outcomes) {
        if let Some(o) = outcome {
            agent.policy = o.distribution;
        }
    }
    Ok(())
}

/// One lock-stepped planning interval starting at `time`. `update_goals` runs
/// after the broadcast and before planning.
pub fn run_interval<F>(
    planner: &dyn TeamPlanner,
    agents: &mut [AgentRuntime],
    field: &ObstacleField,
    settings: &TeamSettings,
    interval: u64,
    time: f64,
    mut update_goals: F,
) -> Result<IntervalResult>
where
    F: FnMut(&mut [AgentRuntime], &[AgentMessage]) -> Result<()>,
{
    // Re-index last interval's policies to start now, so broadcasts and
    // predictions share the current time grid.
    if interval > 0 {
        for agent in agents.iter_mut().filter(|a| a.active) {
            agent.policy = warm_start(&agent.policy, settings.coordination.executed_steps, &settings.optimizer);
        }
    }
    let messages = broadcast(agents, settings, interval);
    update_goals(agents, &messages)?;
    let outcomes = planner.plan_team(agents, &messages, field, settings, interval)?;
    let reports = outcomes.iter().map(|o| o.as_ref().map(|o| o.report)).collect();

    // Closed-loop executors around each new mean policy.
    let dyn_params = &settings.dynamics;
    let mut executors = Vec::with_capacity(agents.len());
    for (agent, outcome) in agents.iter_mut().zip(outcomes) {
        match outcome {
            Some(o) => {
                agent.policy = o.distribution;
                let nominal = rollout_nominal(&agent.state, &agent.policy.mean_params().inputs(), dyn_params);
                let gains = tvlqr_gains(&nominal, &settings.lqr, dyn_params)?;
                executors.push(Some((nominal, gains)));
            }
            None => executors.push(None),
        }
    }

    let mut exec_rngs: Vec<_> = agents
        .iter()
        .map(|a| RngStream::for_purpose(settings.seed, Purpose::Execution, a.id, interval))
        .collect();
    let steps_to_run = settings.coordination.executed_steps.min(settings.coordination.horizon);
    let mut steps = Vec::with_capacity(steps_to_run);
    let mut events = Vec::new();
    for t in 0..steps_to_run {
        let mut inputs = vec![ControlInput::default(); agents.len()];
        for (i, agent) in agents.iter_mut().enumerate() {
            if !agent.active {
                continue;
            }
            if let Some((nominal, gains)) = &executors[i] {
                let u = apply_policy(&gains.gains[t], &nominal.states[t], &nominal.inputs[t], &agent.state, dyn_params);
                agent.state = step_stochastic(&agent.state, u, dyn_params, &mut exec_rngs[i]);
                inputs[i] = u;
            }
        }
        let now = time + (t + 1) as f64 * dyn_params.dt;
        let active = agents.iter().map(|a| a.active).collect();
        steps.push(StepRecord {
            time: now,
            states: agents.iter().map(|a| a.state).collect(),
            inputs,
            active,
        });
        events.extend(apply_events(agents, field, settings, now));
        if agents.iter().all(|a| !a.active) {
            break;
        }
    }
    Ok(IntervalResult {
        messages,
        reports,
        steps,
        events,
    })
}
