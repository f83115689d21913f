//! Distributed multi-agent feedback motion planning with PAC-bounded
//! stochastic NMPC.
//!
//! Each agent optimizes a Gaussian distribution over nominal input sequences,
//! stabilized by time-varying LQR feedback, against a high-confidence upper
//! bound on expected cost and constraint-violation probability. Agents share
//! their policy distributions, predict teammates by sampling those policies,
//! and avoid each other and static obstacles through a gyroscopic terminal
//! velocity cost.
//!
//! Interchangeable pieces (team planning mode, formation-point method) sit
//! behind traits and are resolved by name through [`registry`].

pub mod coordinator;
pub mod costs;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod pac_optimizer;
pub mod planner_support;
pub mod policy_dist;
pub mod registry;
pub mod tvlqr;
pub mod world;

pub use error::{Error, Result};
