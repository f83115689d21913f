use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use super::*;
use crate::coordinator::{EventKind, SimEvent};
use crate::dynamics::{AgentState, ControlInput};
use crate::pac_optimizer::BoundReport;
use crate::planner_support::{wedge_points, FormationSpec};
use crate::world::ObstacleField;

fn perfect_team(leader: AgentState) -> Vec<AgentState> {
    let spec = FormationSpec::default();
    wedge_points(&leader.position(), leader.theta(), &spec)
        .iter()
        .map(|p| AgentState::new(p.x, p.y, leader.theta(), 0.0, 0.0))
        .collect()
}

#[test]
fn perfect_wedge_has_zero_error() {
    let leader = AgentState::new(5.0, 2.0, 0.3, 1.0, 0.0);
    let f = perfect_team(leader);
    assert_abs_diff_eq!(formation_error(&f, &leader, &FormationSpec::default()), 0.0, epsilon = 1e-12);
}

#[test]
fn one_displaced_follower_gives_half() {
    let leader = AgentState::new(0.0, 0.0, 0.0, 0.0, 0.0);
    let mut f = perfect_team(leader);
    f[0].0[1] += 1.0;
    assert_abs_diff_eq!(formation_error(&f, &leader, &FormationSpec::default()), 0.5, epsilon = 1e-12);
}

proptest! {
    #[test]
    fn formation_error_translation_invariant(dx in -20.0..20.0f64, dy in -20.0..20.0f64,
                                             ox in -2.0..2.0f64, oy in -2.0..2.0f64, th in -3.0..3.0f64) {
        let spec = FormationSpec::default();
        let leader = AgentState::new(1.0, -1.0, th, 0.0, 0.0);
        let mut f = perfect_team(leader);
        f[1].0[0] += ox;
        f[1].0[1] += oy;
        let e0 = formation_error(&f, &leader, &spec);
        let shift = |x: &AgentState| AgentState::new(x.px() + dx, x.py() + dy, x.theta(), x.v(), x.delta());
        let f2: Vec<_> = f.iter().map(shift).collect();
        let e1 = formation_error(&f2, &shift(&leader), &spec);
        prop_assert!((e0 - e1).abs() < 1e-9);
    }
}

fn fake_record(trial_id: usize, outcome: EventKind) -> TrialRecord {
    let x = AgentState::new(1.0, 2.0, 0.1, 0.5, -0.05);
    TrialRecord {
        trial_id,
        seed: 7,
        agent_count: 2,
        obstacles: ObstacleField::empty(),
        leader_path: None,
        initial_states: vec![x, x],
        states: vec![StateRow {
            t: 0.1,
            agent_id: 1,
            state: x,
            input: ControlInput::new(0.25, -0.125),
        }],
        messages: Vec::new(),
        bounds: vec![BoundRow {
            t: 0.0,
            agent_id: 1,
            report: BoundReport {
                j_hat: 0.1,
                d_term: 0.5,
                phi_term: 0.2,
                j_plus: 0.8,
                c_hat: 0.0,
                c_plus: 0.08,
                alpha_star_cost: 1.0,
                alpha_star_constraint: 2.0,
            },
        }],
        events: vec![
            SimEvent {
                kind: outcome,
                time: 3.0,
                agent_id: 0,
            },
            SimEvent {
                kind: EventKind::GoalReached,
                time: 3.5,
                agent_id: 1,
            },
        ],
        outcome,
        formation_error: vec![FormationSample {
            t: 0.1,
            error: 0.3,
            steady: true,
        }],
        plan_seconds: vec![0.01],
        failure: None,
    }
}

#[test]
fn summary_partitions_trials() {
    let recs = vec![
        fake_record(0, EventKind::GoalReached),
        fake_record(1, EventKind::AgentCollision),
        fake_record(2, EventKind::Trapped),
    ];
    let s = SummaryStats::from_records(&recs);
    assert_eq!(s.outcomes.total(), 3);
    assert_eq!(s.agent_outcomes.total(), 6);
    assert_eq!(s.collision_count, 1);
    assert_eq!(s.trials_with_collision, 1);
    assert_abs_diff_eq!(s.mean_c_plus_follower.unwrap(), 0.08);
    assert!(s.mean_c_plus_leader.is_none());
}

#[test]
fn outputs_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let recs = vec![fake_record(0, EventKind::GoalReached), fake_record(1, EventKind::ObstacleCrash)];
    let summary = SummaryStats::from_records(&recs);
    write_outputs(dir.path(), &recs, &summary).unwrap();
    let back = read_records(dir.path()).unwrap();
    assert_eq!(back, recs);
    assert_eq!(SummaryStats::from_records(&back), read_summary(dir.path()).unwrap());
    let states = read_states(&dir.path().join("trials/0/states.csv")).unwrap();
    assert_eq!(states, recs[0].states);
    let events = read_events(&dir.path().join("trials/1/events.json")).unwrap();
    assert_eq!(events, recs[1].events);
    let header = std::fs::read_to_string(dir.path().join("trials/0/bounds.csv")).unwrap();
    assert!(header.starts_with("t,agent_id,j_hat,j_plus,c_hat,c_plus,alpha_cost,alpha_constr"));
    let header = std::fs::read_to_string(dir.path().join("trials/0/states.csv")).unwrap();
    assert!(header.starts_with("t,agent_id,px,py,theta,v,delta,u_accel,u_steer"));
}

#[test]
fn zero_trials_rejected() {
    assert!(run_monte_carlo(&crate::world::Scenario::default(), 0, 0).is_err());
}
