use nalgebra::Vector2;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Piecewise-linear path through `waypoints`.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub waypoints: Vec<Vector2<f64>>,
}

impl Path {
    pub fn new(waypoints: Vec<Vector2<f64>>) -> Self {
        assert!(!waypoints.is_empty(), "a path needs at least one waypoint");
        Self { waypoints }
    }

    pub fn length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    pub fn start(&self) -> Vector2<f64> {
        self.waypoints[0]
    }

    pub fn end(&self) -> Vector2<f64> {
        *self.waypoints.last().expect("non-empty")
    }

    /// Arc length of the point on the path closest to `p`.
    pub fn project(&self, p: &Vector2<f64>) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        let mut s0 = 0.0;
        for w in self.waypoints.windows(2) {
            let seg = w[1] - w[0];
            let len = seg.norm();
            let t = if len > 0.0 { ((p - w[0]).dot(&seg) / (len * len)).clamp(0.0, 1.0) } else { 0.0 };
            let d = (w[0] + seg * t - p).norm_squared();
            if d < best.0 {
                best = (d, s0 + t * len);
            }
            s0 += len;
        }
        if self.waypoints.len() == 1 {
            return 0.0;
        }
        best.1
    }

    /// Point and unit tangent at arc length `s` (clamped to the path).
    pub fn pose_at(&self, s: f64) -> (Vector2<f64>, Vector2<f64>) {
        let mut remaining = s.max(0.0);
        let mut last_dir = Vector2::new(1.0, 0.0);
        for w in self.waypoints.windows(2) {
            let seg = w[1] - w[0];
            let len = seg.norm();
            if len <= 0.0 {
                continue;
            }
            last_dir = seg / len;
            if remaining <= len {
                return (w[0] + last_dir * remaining, last_dir);
            }
            remaining -= len;
        }
        (self.end(), last_dir)
    }

    /// Pose `lookahead` metres ahead of the projection of `p`.
    pub fn lookahead(&self, p: &Vector2<f64>, lookahead: f64) -> (Vector2<f64>, f64) {
        let (q, dir) = self.pose_at(self.project(p) + lookahead);
        (q, dir.y.atan2(dir.x))
    }
}

impl Serialize for Path {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let pts: Vec<[f64; 2]> = self.waypoints.iter().map(|p| [p.x, p.y]).collect();
        pts.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Path {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let pts = Vec::<[f64; 2]>::deserialize(d)?;
        if pts.is_empty() {
            return Err(serde::de::Error::custom("empty path"));
        }
        Ok(Path::new(pts.into_iter().map(|p| Vector2::new(p[0], p[1])).collect()))
    }
}
