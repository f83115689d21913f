use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::Path;
use crate::world::{ObstacleField, RngStream};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RrtConfig {
    pub step: f64,
    pub goal_bias: f64,
    pub node_budget: usize,
    pub shortcut_attempts: usize,
    /// Sampling box margin around start, goal and obstacles.
    pub sample_margin: f64,
}

impl Default for RrtConfig {
    fn default() -> Self {
        Self {
            step: 0.5,
            goal_bias: 0.1,
            node_budget: 5000,
            shortcut_attempts: 100,
            sample_margin: 3.0,
        }
    }
}

/// Plain RRT with goal bias, followed by greedy random shortcutting.
pub fn rrt_plan(
    start: Vector2<f64>,
    goal: Vector2<f64>,
    field: &ObstacleField,
    rng: &mut RngStream,
    config: &RrtConfig,
) -> Result<Path> {
    for p in [start, goal] {
        if field.collides(&p) {
            return Err(Error::RrtBlockedEndpoint([p.x, p.y]));
        }
    }
    if field.segment_clear(&start, &goal) {
        return Ok(Path::new(vec![start, goal]));
    }
    let mut lo = start.inf(&goal);
    let mut hi = start.sup(&goal);
    for c in &field.obstacles {
        lo = lo.inf(&(c.center - Vector2::repeat(c.radius)));
        hi = hi.sup(&(c.center + Vector2::repeat(c.radius)));
    }
    lo -= Vector2::repeat(config.sample_margin);
    hi += Vector2::repeat(config.sample_margin);

    let mut nodes = vec![start];
    let mut parent = vec![usize::MAX];
    while nodes.len() < config.node_budget {
        let target = if rng.unit() < config.goal_bias {
            goal
        } else {
            Vector2::new(rng.uniform(lo.x, hi.x), rng.uniform(lo.y, hi.y))
        };
        let (near, _) = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (i, (n - target).norm_squared()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("tree is never empty");
        let dir = target - nodes[near];
        let len = dir.norm();
        if len < 1e-9 {
            continue;
        }
        let new = nodes[near] + dir * (config.step.min(len) / len);
        if !field.segment_clear(&nodes[near], &new) {
            continue;
        }
        nodes.push(new);
        parent.push(near);
        if (new - goal).norm() <= config.step && field.segment_clear(&new, &goal) {
            let mut pts = vec![goal];
            let mut i = nodes.len() - 1;
            while i != usize::MAX {
                pts.push(nodes[i]);
                i = parent[i];
            }
            pts.reverse();
            return Ok(shortcut(pts, field, rng, config.shortcut_attempts));
        }
    }
    Err(Error::RrtFailure {
        budget: config.node_budget,
    })
}

fn shortcut(mut pts: Vec<Vector2<f64>>, field: &ObstacleField, rng: &mut RngStream, attempts: usize) -> Path {
    for _ in 0..attempts {
        if pts.len() < 3 {
            break;
        }
        let i = rng.index(pts.len() - 2);
        let j = i + 2 + rng.index(pts.len() - i - 2);
        if field.segment_clear(&pts[i], &pts[j]) {
            pts.drain(i + 1..j);
        }
    }
    Path::new(pts)
}
