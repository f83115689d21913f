//! Closed-loop rollouts and the per-sample cost/constraint evaluators.

use nalgebra::{DVector, Vector2};

use crate::coordinator::PredictionSet;
use crate::costs::{
    constraint_violation, running_cost_sum, terminal_cost, CostParams, GoalSpec, ObstacleEntry, StateBounds,
};
use crate::dynamics::{rollout_nominal, step_stochastic, AgentState, BicycleParams, Trajectory, INPUT_DIM};
use crate::policy_dist::PolicyParams;
use crate::tvlqr::{apply_policy, tvlqr_gains, LqrWeights};
use crate::world::{ObstacleField, RngStream};
use crate::Result;

/// Rolls out the TVLQR-stabilized policy encoded by `xi` on the stochastic
/// model. The nominal starts at `x0`; so does the simulated state.
pub fn rollout_closed_loop(
    xi: &PolicyParams,
    x0: &AgentState,
    params: &BicycleParams,
    weights: &LqrWeights,
    rng: &mut RngStream,
) -> Result<Trajectory> {
    rollout_closed_loop_from(xi, x0, x0, params, weights, rng)
}

/// Like [`rollout_closed_loop`] but the simulated state starts at `x_start`
/// while the nominal is built from `x_nominal0`.
pub fn rollout_closed_loop_from(
    xi: &PolicyParams,
    x_nominal0: &AgentState,
    x_start: &AgentState,
    params: &BicycleParams,
    weights: &LqrWeights,
    rng: &mut RngStream,
) -> Result<Trajectory> {
    let nominal = rollout_nominal(x_nominal0, &xi.inputs(), params);
    let gains = tvlqr_gains(&nominal, weights, params)?;
    let n = nominal.horizon();
    let mut states = Vec::with_capacity(n + 1);
    let mut inputs = Vec::with_capacity(n);
    let mut x = *x_start;
    states.push(x);
    for t in 0..n {
        let u = apply_policy(&gains.gains[t], &nominal.states[t], &nominal.inputs[t], &x, params);
        x = step_stochastic(&x, u, params, rng);
        states.push(x);
        inputs.push(u);
    }
    Ok(Trajectory { states, inputs })
}

/// Cost and constraint indicator of one sampled policy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleOutcome {
    pub cost: f64,
    pub violated: bool,
}

/// Maps a policy sample to its cost and constraint outcome. `index` is the
/// sample's position in the batch (used to pair samples with predictions).
pub trait SampleEvaluator: Sync {
    /// Length of the stacked policy vector.
    fn dim(&self) -> usize;

    /// Divides the cost before the `b` normalization (the number of summed
    /// per-agent costs).
    fn cost_normalizer(&self) -> f64 {
        1.0
    }

    fn evaluate(&self, xi: &DVector<f64>, index: usize, rng: &mut RngStream) -> Result<SampleOutcome>;
}

/// Everything one agent needs to score its own policy samples.
#[derive(Clone, Debug)]
pub struct PlanContext {
    pub x0: AgentState,
    pub goal: GoalSpec,
    pub field: ObstacleField,
    pub predictions: PredictionSet,
    pub static_gyro: bool,
    pub agent_gyro: bool,
    pub cost: CostParams,
    pub dynamics: BicycleParams,
    pub lqr: LqrWeights,
    pub bounds: StateBounds,
    pub horizon: usize,
}

impl PlanContext {
    /// Static obstacles as seen by the terminal cost.
    pub fn static_view(&self) -> Vec<ObstacleEntry> {
        if !self.static_gyro {
            return Vec::new();
        }
        self.field
            .obstacles
            .iter()
            .map(|c| ObstacleEntry::fixed(c.center, c.radius))
            .collect()
    }
}

/// Terminal states of the teammate predictions paired with sample `index`.
fn predicted_terminals(predictions: &PredictionSet, index: usize, radius: f64) -> impl Iterator<Item = ObstacleEntry> + '_ {
    predictions.agents.iter().filter_map(move |other| {
        let s = other.pick(index)?;
        Some(ObstacleEntry::agent(*s.positions.last()?, *s.velocities.last()?, radius))
    })
}

/// Single-agent evaluator used by the distributed planner.
pub struct AgentEvaluator<'a> {
    ctx: &'a PlanContext,
    static_view: Vec<ObstacleEntry>,
}

impl<'a> AgentEvaluator<'a> {
    pub fn new(ctx: &'a PlanContext) -> Self {
        Self {
            static_view: ctx.static_view(),
            ctx,
        }
    }

    pub fn context(&self) -> &PlanContext {
        self.ctx
    }
}

impl SampleEvaluator for AgentEvaluator<'_> {
    fn dim(&self) -> usize {
        self.ctx.horizon * INPUT_DIM
    }

    fn evaluate(&self, xi: &DVector<f64>, index: usize, rng: &mut RngStream) -> Result<SampleOutcome> {
        let ctx = self.ctx;
        let traj = rollout_closed_loop(&PolicyParams(xi.clone()), &ctx.x0, &ctx.dynamics, &ctx.lqr, rng)?;
        let mut view = self.static_view.clone();
        if ctx.agent_gyro {
            view.extend(predicted_terminals(&ctx.predictions, index, ctx.cost.collision_radius));
        }
        let cost = running_cost_sum(&traj, &ctx.goal, &ctx.cost) + terminal_cost(traj.terminal(), &ctx.goal, &view, &ctx.cost);
        let violated = constraint_violation(
            &traj,
            &ctx.field,
            ctx.predictions.position_paths(),
            &ctx.bounds,
            ctx.cost.collision_radius,
        );
        Ok(SampleOutcome { cost, violated })
    }
}

/// Team evaluator for the centralized planner: one stacked policy, summed
/// cost, joint constraint including every pair of agents.
pub struct JointEvaluator<'a> {
    agents: &'a [PlanContext],
    static_views: Vec<Vec<ObstacleEntry>>,
}

impl<'a> JointEvaluator<'a> {
    pub fn new(agents: &'a [PlanContext]) -> Self {
        Self {
            static_views: agents.iter().map(PlanContext::static_view).collect(),
            agents,
        }
    }

    /// Rolls out every agent's block of `xi`, in agent order.
    pub fn rollouts(&self, xi: &DVector<f64>, rng: &mut RngStream) -> Result<Vec<Trajectory>> {
        let mut offset = 0;
        let mut out = Vec::with_capacity(self.agents.len());
        for ctx in self.agents {
            let len = ctx.horizon * INPUT_DIM;
            let block = PolicyParams(xi.rows(offset, len).into_owned());
            offset += len;
            out.push(rollout_closed_loop(&block, &ctx.x0, &ctx.dynamics, &ctx.lqr, rng)?);
        }
        Ok(out)
    }
}

impl SampleEvaluator for JointEvaluator<'_> {
    fn dim(&self) -> usize {
        self.agents.iter().map(|c| c.horizon * INPUT_DIM).sum()
    }

    fn cost_normalizer(&self) -> f64 {
        self.agents.len() as f64
    }

    fn evaluate(&self, xi: &DVector<f64>, index: usize, rng: &mut RngStream) -> Result<SampleOutcome> {
        let trajs = self.rollouts(xi, rng)?;
        let paths: Vec<Vec<Vector2<f64>>> = trajs
            .iter()
            .map(|t| t.states.iter().map(AgentState::position).collect())
            .collect();
        let mut cost = 0.0;
        let mut violated = false;
        for (i, (ctx, traj)) in self.agents.iter().zip(&trajs).enumerate() {
            let mut view = self.static_views[i].clone();
            if ctx.agent_gyro {
                for (j, other) in trajs.iter().enumerate() {
                    if j != i {
                        let xn = other.terminal();
                        view.push(ObstacleEntry::agent(xn.position(), xn.planar_velocity(), ctx.cost.collision_radius));
                    }
                }
                view.extend(predicted_terminals(&ctx.predictions, index, ctx.cost.collision_radius));
            }
            cost += running_cost_sum(traj, &ctx.goal, &ctx.cost) + terminal_cost(traj.terminal(), &ctx.goal, &view, &ctx.cost);
            if !violated {
                let others = paths
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, p)| p.as_slice())
                    .chain(ctx.predictions.position_paths());
                violated = constraint_violation(traj, &ctx.field, others, &ctx.bounds, ctx.cost.collision_radius);
            }
        }
        Ok(SampleOutcome { cost, violated })
    }
}
