//! Name-based lookup of interchangeable strategies.

use crate::coordinator::{CentralizedPlanner, DistributedPlanner, TeamPlanner};
use crate::planner_support::{FollowerRrt, FormationPointMethod, LeaderRrt, MeanFinalState};
use crate::{Error, Result};

type Factory<T> = fn() -> Box<T>;

/// Named constructors for one kind of strategy.
pub struct Registry<T: ?Sized + 'static> {
    kind: &'static str,
    entries: &'static [(&'static str, Factory<T>)],
}

impl<T: ?Sized> Registry<T> {
    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|(n, _)| *n).collect()
    }

    pub fn create(&self, name: &str) -> Result<Box<T>> {
        self.entries
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, f)| f())
            .ok_or_else(|| Error::UnknownStrategy {
                kind: self.kind,
                name: name.to_string(),
                known: self.names().join(", "),
            })
    }
}

pub static TEAM_PLANNERS: Registry<dyn TeamPlanner> = Registry {
    kind: "planning mode",
    entries: &[
        ("distributed", || Box::new(DistributedPlanner)),
        ("centralized", || Box::new(CentralizedPlanner)),
    ],
};

pub static FORMATION_METHODS: Registry<dyn FormationPointMethod> = Registry {
    kind: "formation-point method",
    entries: &[
        ("leader_rrt", || Box::new(LeaderRrt)),
        ("mean_final_state", || Box::new(MeanFinalState)),
        ("follower_rrt", || Box::new(FollowerRrt)),
    ],
};

pub fn team_planner(name: &str) -> Result<Box<dyn TeamPlanner>> {
    TEAM_PLANNERS.create(name)
}

pub fn formation_method(name: &str) -> Result<Box<dyn FormationPointMethod>> {
    FORMATION_METHODS.create(name)
}
