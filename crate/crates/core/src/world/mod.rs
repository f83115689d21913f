//! Geometry, obstacle fields, scenarios and seeded random streams.

mod field;
mod rng;
pub mod scenario;

pub use field::{
    dist_to_circle, generate_obstacle_field, segment_point_distance, Circle, ObstacleField, PLACEMENT_ATTEMPTS,
};
pub use rng::{Purpose, RngStream};
pub use scenario::{Goals, InitialStates, ObstacleSource, Scenario};
