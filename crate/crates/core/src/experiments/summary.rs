use serde::{Deserialize, Serialize};

use super::TrialRecord;
use crate::coordinator::EventKind;

/// Trial-level outcome tallies; one outcome per trial, worst event wins.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub goal_reached: usize,
    pub trapped: usize,
    pub obstacle_crash: usize,
    pub agent_collision: usize,
}

impl OutcomeCounts {
    pub fn add(&mut self, kind: EventKind) {
        match kind {
            EventKind::GoalReached => self.goal_reached += 1,
            EventKind::Trapped => self.trapped += 1,
            EventKind::ObstacleCrash => self.obstacle_crash += 1,
            EventKind::AgentCollision => self.agent_collision += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.goal_reached + self.trapped + self.obstacle_crash + self.agent_collision
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub trials: usize,
    pub outcomes: OutcomeCounts,
    /// Per-agent terminal events over all trials.
    pub agent_outcomes: OutcomeCounts,
    /// Mean over trials of the steady-state formation error.
    pub mean_formation_error: Option<f64>,
    pub max_formation_error: Option<f64>,
    /// Agent collisions plus obstacle crashes, counted per agent.
    pub collision_count: usize,
    pub trials_with_collision: usize,
    pub mean_c_plus_leader: Option<f64>,
    pub mean_c_plus_follower: Option<f64>,
    pub mean_plan_seconds: Option<f64>,
    /// Trials that ended on a planner error.
    pub failures: usize,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl SummaryStats {
    pub fn from_records(records: &[TrialRecord]) -> Self {
        let mut s = SummaryStats {
            trials: records.len(),
            ..Default::default()
        };
        let mut steady = Vec::new();
        let mut max_err: Option<f64> = None;
        let (mut leader_c, mut follower_c, mut secs) = (Vec::new(), Vec::new(), Vec::new());
        for r in records {
            s.outcomes.add(r.outcome);
            for e in &r.events {
                s.agent_outcomes.add(e.kind);
            }
            let c = r.collision_count();
            s.collision_count += c;
            s.trials_with_collision += usize::from(c > 0);
            s.failures += usize::from(r.failure.is_some());
            if let Some(e) = r.steady_state_formation_error() {
                steady.push(e);
            }
            for f in &r.formation_error {
                max_err = Some(max_err.map_or(f.error, |m| m.max(f.error)));
            }
            for b in &r.bounds {
                if b.agent_id == 0 {
                    leader_c.push(b.report.c_plus);
                } else {
                    follower_c.push(b.report.c_plus);
                }
            }
            secs.extend_from_slice(&r.plan_seconds);
        }
        s.mean_formation_error = mean(&steady);
        s.max_formation_error = max_err;
        s.mean_c_plus_leader = mean(&leader_c);
        s.mean_c_plus_follower = mean(&follower_c);
        s.mean_plan_seconds = mean(&secs);
        s
    }

    /// Percentage of trials with at least one collision.
    pub fn collision_percentage(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            100.0 * self.trials_with_collision as f64 / self.trials as f64
        }
    }

    /// Equality ignoring wall-clock timing.
    pub fn same_outcomes(&self, other: &Self) -> bool {
        Self {
            mean_plan_seconds: None,
            ..self.clone()
        } == Self {
            mean_plan_seconds: None,
            ..other.clone()
        }
    }
}
