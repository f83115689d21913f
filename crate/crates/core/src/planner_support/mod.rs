//! Leader path planning (RRT), wedge geometry and formation-point methods.

mod formation;
mod path;
mod rrt;

pub use formation::{
    follower_slot, project_goal_from_obstacles, wedge_points, FollowerRrt, FormationInput, FormationPattern,
    FormationPointMethod, FormationSpec, LeaderRrt, MeanFinalState, PlannerConfig,
};
pub use path::Path;
pub use rrt::{rrt_plan, RrtConfig};
