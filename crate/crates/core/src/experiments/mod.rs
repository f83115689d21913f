//! Trial runner, Monte Carlo harness, metrics and output files.

mod output;
mod summary;
mod trial;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use output::{read_events, read_messages, read_records, read_states, read_summary, read_trial, write_outputs, write_trial};
pub use summary::{OutcomeCounts, SummaryStats};
pub use trial::{initial_states, run_trial, BoundRow, FormationSample, StateRow, TrialRecord};

use crate::dynamics::AgentState;
use crate::planner_support::{follower_slot, FormationSpec};
use crate::world::{InitialStates, Scenario};
use crate::{Error, Result};

/// Mean distance of each follower from its wedge slot around the leader.
pub fn formation_error(followers: &[AgentState], leader: &AgentState, spec: &FormationSpec) -> f64 {
    if followers.is_empty() {
        return 0.0;
    }
    let p = leader.position();
    let sum: f64 = followers
        .iter()
        .enumerate()
        .map(|(k, f)| (f.position() - follower_slot(&p, leader.theta(), spec, k)).norm())
        .sum();
    sum / followers.len() as f64
}

/// Trial `i` uses seed `base_seed + i`. Trials run in parallel.
pub fn run_monte_carlo(scenario: &Scenario, trial_count: usize, base_seed: u64) -> Result<(SummaryStats, Vec<TrialRecord>)> {
    if trial_count == 0 {
        return Err(Error::InvalidScenario("trial_count must be at least 1".into()));
    }
    scenario.validate()?;
    let records = (0..trial_count)
        .into_par_iter()
        .map(|i| run_trial(scenario, i, base_seed.wrapping_add(i as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok((SummaryStats::from_records(&records), records))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub variance: f64,
    pub agent_gyro: bool,
    pub noise_aware: bool,
    pub collision_percentage: f64,
    pub summary: SummaryStats,
}

/// Diagonal measurement covariance with `variance` on the position entries.
pub fn position_noise(variance: f64) -> [f64; 5] {
    [variance, variance, 0.0, 0.0, 0.0]
}

/// Runs every variance for each of {gyro on, off} x {noise-aware on, off}.
pub fn sweep_noise(scenario: &Scenario, variances: &[f64], trial_count: usize, base_seed: u64) -> Result<Vec<SweepCell>> {
    if !matches!(scenario.initial_states, InitialStates::Antipodal { .. }) {
        return Err(Error::InvalidScenario("noise sweep needs an antipodal scenario".into()));
    }
    let mut cells = Vec::new();
    for agent_gyro in [true, false] {
        for noise_aware in [true, false] {
            for &variance in variances {
                let s = Scenario {
                    agent_gyro_on: agent_gyro,
                    noise_aware,
                    measurement_cov: position_noise(variance),
                    ..scenario.clone()
                };
                let (summary, _) = run_monte_carlo(&s, trial_count, base_seed)?;
                cells.push(SweepCell {
                    variance,
                    agent_gyro,
                    noise_aware,
                    collision_percentage: summary.collision_percentage(),
                    summary,
                });
            }
        }
    }
    Ok(cells)
}

/// Smallest variance whose cell saw any collision.
pub fn first_collision_variance(cells: &[SweepCell], agent_gyro: bool, noise_aware: bool) -> Option<f64> {
    cells
        .iter()
        .filter(|c| c.agent_gyro == agent_gyro && c.noise_aware == noise_aware && c.summary.trials_with_collision > 0)
        .map(|c| c.variance)
        .reduce(f64::min)
}


#[cfg(test)]
mod tests;
