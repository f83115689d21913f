//! Terminal events and trial-level outcome classification.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::world::ObstacleField;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    GoalReached,
    Trapped,
    ObstacleCrash,
    AgentCollision,
}

impl EventKind {
    /// Higher is worse.
    pub fn severity(self) -> u8 {
        match self {
            EventKind::GoalReached => 0,
            EventKind::Trapped => 1,
            EventKind::ObstacleCrash => 2,
            EventKind::AgentCollision => 3,
        }
    }

    pub fn is_collision(self) -> bool {
        matches!(self, EventKind::ObstacleCrash | EventKind::AgentCollision)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub kind: EventKind,
    pub time: f64,
    pub agent_id: usize,
}

/// Per-agent view needed for event checks.
#[derive(Clone, Copy, Debug)]
pub struct EventProbe {
    pub agent_id: usize,
    pub position: Vector2<f64>,
    pub final_goal: Vector2<f64>,
    pub active: bool,
}

/// Events triggered at one instant. Only active agents receive events;
/// inactive agents still count as bodies for collisions. A collision
/// pre-empts reaching the goal at the same instant.
pub fn detect_events(
    probes: &[EventProbe],
    field: &ObstacleField,
    collision_radius: f64,
    goal_tolerance: f64,
    time: f64,
) -> Vec<SimEvent> {
    let mut out: Vec<SimEvent> = Vec::new();
    let l2 = collision_radius * collision_radius;
    for (i, a) in probes.iter().enumerate() {
        if !a.active {
            continue;
        }
        let hit_agent = probes
            .iter()
            .enumerate()
            .any(|(j, b)| j != i && (a.position - b.position).norm_squared() < l2);
        let kind = if hit_agent {
            Some(EventKind::AgentCollision)
        } else if field.collides(&a.position) {
            Some(EventKind::ObstacleCrash)
        } else if (a.position - a.final_goal).norm() <= goal_tolerance {
            Some(EventKind::GoalReached)
        } else {
            None
        };
        if let Some(kind) = kind {
            out.push(SimEvent {
                kind,
                time,
                agent_id: a.agent_id,
            });
        }
    }
    out
}

/// One outcome per trial: the worst per-agent event. Agents with no event
/// count as trapped.
pub fn detect_outcome(events: &[SimEvent], agent_count: usize) -> EventKind {
    (0..agent_count)
        .map(|id| {
            events
                .iter()
                .filter(|e| e.agent_id == id)
                .map(|e| e.kind)
                .max_by_key(|k| k.severity())
                .unwrap_or(EventKind::Trapped)
        })
        .max_by_key(|k| k.severity())
        .unwrap_or(EventKind::GoalReached)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::Circle;

    fn probe(id: usize, x: f64, y: f64, goal: (f64, f64)) -> EventProbe {
        EventProbe {
            agent_id: id,
            position: Vector2::new(x, y),
            final_goal: Vector2::new(goal.0, goal.1),
            active: true,
        }
    }

    #[test]
    fn collisions_and_goals() {
        let field = ObstacleField::from_circles(vec![Circle::new(5.0, 0.0, 0.6)]);
        let probes = [
            probe(0, 0.0, 0.0, (9.0, 9.0)),
            probe(1, 0.3, 0.0, (9.0, 9.0)),
            probe(2, 5.2, 0.0, (9.0, 9.0)),
            probe(3, 20.0, 0.0, (20.5, 0.0)),
            probe(4, 40.0, 0.0, (0.0, 0.0)),
        ];
        let ev = detect_events(&probes, &field, 0.5, 1.0, 3.2);
        let kinds: Vec<_> = ev.iter().map(|e| (e.agent_id, e.kind)).collect();
        assert_eq!(
            kinds,
            vec![
                (0, EventKind::AgentCollision),
                (1, EventKind::AgentCollision),
                (2, EventKind::ObstacleCrash),
                (3, EventKind::GoalReached)
            ]
        );
        assert!(ev.iter().all(|e| e.time == 3.2));
    }

    #[test]
    fn inactive_agents_are_bodies_only() {
        let mut probes = [probe(0, 0.0, 0.0, (0.0, 0.0)), probe(1, 0.2, 0.0, (5.0, 0.0))];
        probes[0].active = false;
        let ev = detect_events(&probes, &ObstacleField::empty(), 0.5, 1.0, 0.0);
        assert_eq!(ev.len(), 1);
        assert_eq!((ev[0].agent_id, ev[0].kind), (1, EventKind::AgentCollision));
    }

    #[test]
    fn outcome_is_worst_event() {
        let ev = |id, kind| SimEvent { kind, time: 1.0, agent_id: id };
        assert_eq!(detect_outcome(&[ev(0, EventKind::GoalReached), ev(1, EventKind::GoalReached)], 2), EventKind::GoalReached);
        assert_eq!(detect_outcome(&[ev(0, EventKind::GoalReached)], 2), EventKind::Trapped);
        assert_eq!(
            detect_outcome(&[ev(0, EventKind::ObstacleCrash), ev(1, EventKind::AgentCollision), ev(2, EventKind::Trapped)], 3),
            EventKind::AgentCollision
        );
    }
}
