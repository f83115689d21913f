use std::time::Instant;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::formation_error;
use crate::coordinator::{
    apply_events, bootstrap, detect_outcome, run_interval, AgentMessage, AgentRuntime, EventKind, SimEvent, TeamSettings,
};
use crate::costs::CostParams;
use crate::dynamics::{AgentState, ControlInput};
use crate::pac_optimizer::BoundReport;
use crate::planner_support::{follower_slot, project_goal_from_obstacles, rrt_plan, FormationInput, Path};
use crate::registry;
use crate::world::{generate_obstacle_field, Goals, InitialStates, ObstacleField, ObstacleSource, Purpose, RngStream, Scenario};
use crate::Result;

/// One row of `states.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateRow {
    pub t: f64,
    pub agent_id: usize,
    pub state: AgentState,
    pub input: ControlInput,
}

/// Bound report of one agent at one planning interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub t: f64,
    pub agent_id: usize,
    pub report: BoundReport,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormationSample {
    pub t: f64,
    pub error: f64,
    /// Counted toward the steady-state average.
    pub steady: bool,
}

/// Everything recorded during one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: usize,
    pub seed: u64,
    pub agent_count: usize,
    pub obstacles: ObstacleField,
    /// Leader RRT path (formation scenarios only).
    pub leader_path: Option<Path>,
    pub initial_states: Vec<AgentState>,
    pub states: Vec<StateRow>,
    pub messages: Vec<AgentMessage>,
    pub bounds: Vec<BoundRow>,
    pub events: Vec<SimEvent>,
    pub outcome: EventKind,
    pub formation_error: Vec<FormationSample>,
    /// Wall-clock seconds of each planning interval.
    pub plan_seconds: Vec<f64>,
    /// Planner error that ended the trial early, if any.
    pub failure: Option<String>,
}

impl TrialRecord {
    /// Mean formation error over steady-state samples.
    pub fn steady_state_formation_error(&self) -> Option<f64> {
        let v: Vec<f64> = self.formation_error.iter().filter(|s| s.steady).map(|s| s.error).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Per-agent collision events (agent collisions and obstacle crashes).
    pub fn collision_count(&self) -> usize {
        self.events.iter().filter(|e| e.kind.is_collision()).count()
    }

    /// Same record with wall-clock timings removed, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        Self {
            plan_seconds: Vec::new(),
            ..self.clone()
        }
    }
}

fn uniform_vec(rng: &mut RngStream, lo: &[f64; 5], hi: &[f64; 5]) -> [f64; 5] {
    std::array::from_fn(|k| rng.uniform(lo[k], hi[k]))
}

/// Initial true states for every agent.
pub fn initial_states(scenario: &Scenario, seed: u64) -> Vec<AgentState> {
    match &scenario.initial_states {
        InitialStates::Explicit { states } => states.clone(),
        InitialStates::Antipodal { radius, center } => scenario.antipodal_starts(*radius, *center),
        InitialStates::Formation {
            leader_lo,
            leader_hi,
            follower_jitter,
        } => {
            let mut rng = RngStream::for_purpose(seed, Purpose::InitialState, 0, 0);
            let leader = AgentState::from(uniform_vec(&mut rng, leader_lo, leader_hi));
            let mut out = vec![leader];
            for k in 0..scenario.agent_count.saturating_sub(1) {
                let mut rng = RngStream::for_purpose(seed, Purpose::InitialState, k + 1, 0);
                let slot = follower_slot(&leader.position(), leader.theta(), &scenario.planner.formation, k);
                let neg: [f64; 5] = std::array::from_fn(|i| -follower_jitter[i]);
                let j = uniform_vec(&mut rng, &neg, follower_jitter);
                let base = AgentState::new(slot.x, slot.y, leader.theta(), leader.v(), leader.delta());
                let x = AgentState(base.0 + nalgebra::Vector5::from(j));
                out.push(scenario.dynamics.clamp_state(x));
            }
            out
        }
    }
}

fn obstacle_field(scenario: &Scenario, seed: u64) -> Result<ObstacleField> {
    match &scenario.obstacles {
        ObstacleSource::None => Ok(ObstacleField::empty()),
        ObstacleSource::Explicit { circles } => Ok(circles.clone()),
        ObstacleSource::Generate { count, radius, lo, hi } => {
            let mut rng = RngStream::for_purpose(seed, Purpose::Obstacles, 0, 0);
            generate_obstacle_field(&mut rng, *count, *radius, Vector2::from(*lo), Vector2::from(*hi))
        }
    }
}

fn settings(scenario: &Scenario, seed: u64) -> TeamSettings {
    TeamSettings {
        dynamics: scenario.dynamics.clone(),
        lqr: scenario.lqr.clone(),
        optimizer: scenario.optimizer.clone(),
        coordination: scenario.coordination.clone(),
        bounds: scenario.state_bounds.clone(),
        static_gyro: scenario.static_gyro_on,
        agent_gyro: scenario.agent_gyro_on,
        noise_aware: scenario.noise_aware,
        measurement_cov: scenario.measurement_cov,
        seed,
    }
}

/// Final goals of every agent and, for formation scenarios, the leader path.
fn mission(scenario: &Scenario, starts: &[AgentState], field: &ObstacleField, seed: u64) -> Result<(Vec<Vector2<f64>>, Option<Path>)> {
    let spec = &scenario.planner.formation;
    Ok(match &scenario.goals {
        Goals::Explicit { goals } => (goals.iter().map(|g| Vector2::from(*g)).collect(), None),
        Goals::Antipodal => {
            let center = match &scenario.initial_states {
                InitialStates::Antipodal { center, .. } => Vector2::from(*center),
                _ => Vector2::zeros(),
            };
            (starts.iter().map(|x| center * 2.0 - x.position()).collect(), None)
        }
        Goals::Formation { leader_goal } => {
            let goal = Vector2::from(*leader_goal);
            let mut rng = RngStream::for_purpose(seed, Purpose::Rrt, 0, 0);
            let path = rrt_plan(starts[0].position(), goal, field, &mut rng, &scenario.planner.rrt)?;
            let (end, end_dir) = path.pose_at(path.length());
            let end_theta = end_dir.y.atan2(end_dir.x);
            let mut goals = vec![goal];
            for k in 0..scenario.agent_count - 1 {
                let slot = follower_slot(&end, end_theta, spec, k);
                goals.push(project_goal_from_obstacles(slot, field, &end, scenario.planner.goal_margin));
            }
            (goals, Some(path))
        }
    })
}

/// Runs one closed-loop trial. Planner errors end the trial and are recorded
/// in `failure`; agents still running at that point count as trapped.
pub fn run_trial(scenario: &Scenario, trial_id: usize, seed: u64) -> Result<TrialRecord> {
    scenario.validate()?;
    let planner = registry::team_planner(&scenario.mode)?;
    let method = registry::formation_method(&scenario.formation_method)?;
    let field = obstacle_field(scenario, seed)?;
    let settings = settings(scenario, seed);
    let starts = initial_states(scenario, seed);
    let spec = &scenario.planner.formation;

    let mut record = TrialRecord {
        trial_id,
        seed,
        agent_count: scenario.agent_count,
        obstacles: field.clone(),
        leader_path: None,
        initial_states: starts.clone(),
        states: starts
            .iter()
            .enumerate()
            .map(|(i, x)| StateRow {
                t: 0.0,
                agent_id: i,
                state: *x,
                input: ControlInput::default(),
            })
            .collect(),
        messages: Vec::new(),
        bounds: Vec::new(),
        events: Vec::new(),
        outcome: EventKind::Trapped,
        formation_error: Vec::new(),
        plan_seconds: Vec::new(),
        failure: None,
    };
    let (final_goals, leader_path) = match mission(scenario, &starts, &field, seed) {
        Ok(m) => m,
        Err(e) => {
            record.failure = Some(e.to_string());
            record.events = (0..scenario.agent_count)
                .map(|agent_id| SimEvent {
                    kind: EventKind::Trapped,
                    time: 0.0,
                    agent_id,
                })
                .collect();
            return Ok(record);
        }
    };
    record.leader_path = leader_path.clone();

    let mut agents: Vec<AgentRuntime> = starts
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let cost = if scenario.is_formation() && i > 0 {
                CostParams {
                    qf: scenario.follower_qf,
                    ..scenario.cost.clone()
                }
            } else {
                scenario.cost.clone()
            };
            AgentRuntime::new(i, *x, final_goals[i], cost, &settings)
        })
        .collect();

    record.events.extend(apply_events(&mut agents, &field, &settings, 0.0));

    let dt = scenario.dynamics.dt;
    let interval_len = scenario.coordination.executed_steps as f64 * dt;
    let mut time = 0.0;
    let mut interval = 0u64;
    let lookahead = scenario.planner.lookahead;
    let update_goals = |agents: &mut [AgentRuntime], messages: &[AgentMessage], rrt_index: u64| -> Result<()> {
            let Some(path) = &leader_path else {
                return Ok(());
            };
            if agents[0].active {
                let (q, _) = path.lookahead(&agents[0].state.position(), lookahead);
                agents[0].goal.p_goal = q;
            }
            let followers: Vec<(usize, Vector2<f64>)> = agents[1..]
                .iter()
                .enumerate()
                .filter(|(_, a)| a.active)
                .map(|(k, a)| (k, a.state.position()))
                .collect();
            if followers.is_empty() {
                return Ok(());
            }
            let rng_for = |k: usize| RngStream::for_purpose(seed, Purpose::Rrt, k + 1, rrt_index);
            let input = FormationInput {
                leader_msg: &messages[0],
                leader_path: path,
                followers: &followers,
                field: &field,
                config: &scenario.planner,
                dynamics: &scenario.dynamics,
                rng_for: &rng_for,
            };
            let goals = method.follower_goals(&input)?;
            for ((k, _), g) in followers.iter().zip(goals) {
                agents[k + 1].goal.p_goal = g;
            }
            Ok(())
        };
    for _ in 0..scenario.coordination.bootstrap_rounds {
        if let Err(e) = bootstrap(planner.as_ref(), &mut agents, &field, &settings, |a, m| update_goals(a, m, 0)) {
            record.failure = Some(e.to_string());
        }
    }
    while record.failure.is_none() && agents.iter().any(|a| a.active) && time + 0.5 * dt < scenario.max_sim_time {
        let goal_hook = |a: &mut [AgentRuntime], m: &[AgentMessage]| update_goals(a, m, interval + 1);
        let started = Instant::now();
        let result = run_interval(planner.as_ref(), &mut agents, &field, &settings, interval, time, goal_hook);
        record.plan_seconds.push(started.elapsed().as_secs_f64());
        let result = match result {
            Ok(r) => r,
            Err(e) => {
                record.failure = Some(e.to_string());
                break;
            }
        };
        for (agent_id, rep) in result.reports.iter().enumerate() {
            if let Some(report) = rep {
                record.bounds.push(BoundRow {
                    t: time,
                    agent_id,
                    report: *report,
                });
            }
        }
        record.messages.extend(result.messages);
        for step in &result.steps {
            for (i, (x, u)) in step.states.iter().zip(&step.inputs).enumerate() {
                record.states.push(StateRow {
                    t: step.time,
                    agent_id: i,
                    state: *x,
                    input: *u,
                });
            }
            if scenario.is_formation() && step.states.len() > 1 {
                let leader = &step.states[0];
                let error = formation_error(&step.states[1..], leader, spec);
                record.formation_error.push(FormationSample {
                    t: step.time,
                    error,
                    steady: leader.px() >= scenario.steady_state_x && step.active.iter().all(|a| *a),
                });
            }
        }
        record.events.extend(result.events);
        time += interval_len;
        interval += 1;
    }
    for a in agents.iter().filter(|a| a.active) {
        record.events.push(SimEvent {
            kind: EventKind::Trapped,
            time,
            agent_id: a.id,
        });
    }
    record.outcome = detect_outcome(&record.events, scenario.agent_count);
    Ok(record)
}
