use nalgebra::Vector2;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::rng::RngStream;
use crate::{Error, Result};

/// Rejection-sampling cap for obstacle placement.
pub const PLACEMENT_ATTEMPTS: usize = 10_000;

/// Circular obstacle. `radius` is already inflated by the largest robot radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Circle {
    pub center: Vector2<f64>,
    pub radius: f64,
}

impl Circle {
    pub fn new(cx: f64, cy: f64, radius: f64) -> Self {
        Self {
            center: Vector2::new(cx, cy),
            radius,
        }
    }

    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        dist_to_circle(p, self) < self.radius
    }
}

/// Euclidean distance from `p` to the circle's center. Callers subtract the
/// radius themselves.
pub fn dist_to_circle(p: &Vector2<f64>, c: &Circle) -> f64 {
    (p - c.center).norm()
}

/// Distance from the segment `a`-`b` to the point `c`.
pub fn segment_point_distance(a: &Vector2<f64>, b: &Vector2<f64>, c: &Vector2<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 <= f64::EPSILON {
        return (c - a).norm();
    }
    let t = ((c - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (a + ab * t - c).norm()
}

/// Equality compares the circles only; the sampling box is not serialized.
#[derive(Clone, Debug)]
pub struct ObstacleField {
    pub obstacles: Vec<Circle>,
    pub bounds_lo: Vector2<f64>,
    pub bounds_hi: Vector2<f64>,
}

impl PartialEq for ObstacleField {
    fn eq(&self, other: &Self) -> bool {
        self.obstacles == other.obstacles
    }
}

impl ObstacleField {
    pub fn empty() -> Self {
        Self {
            obstacles: Vec::new(),
            bounds_lo: Vector2::zeros(),
            bounds_hi: Vector2::zeros(),
        }
    }

    /// Field from explicit circles; bounds become their bounding box of centers.
    pub fn from_circles(obstacles: Vec<Circle>) -> Self {
        if obstacles.is_empty() {
            return Self::empty();
        }
        let mut lo = Vector2::repeat(f64::INFINITY);
        let mut hi = Vector2::repeat(f64::NEG_INFINITY);
        for c in &obstacles {
            lo = lo.inf(&c.center);
            hi = hi.sup(&c.center);
        }
        Self {
            obstacles,
            bounds_lo: lo,
            bounds_hi: hi,
        }
    }

    pub fn len(&self) -> usize {
        self.obstacles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obstacles.is_empty()
    }

    /// True when `p` is strictly inside some inflated obstacle.
    pub fn collides(&self, p: &Vector2<f64>) -> bool {
        self.obstacles.iter().any(|c| c.contains(p))
    }

    /// True when the segment keeps strictly more than `radius` away from every
    /// obstacle center.
    pub fn segment_clear(&self, a: &Vector2<f64>, b: &Vector2<f64>) -> bool {
        self.obstacles
            .iter()
            .all(|c| segment_point_distance(a, b, &c.center) > c.radius)
    }

    /// Checks non-overlap, positive radii, and containment of centers.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        for (i, a) in self.obstacles.iter().enumerate() {
            if !(a.radius > 0.0) {
                return Err(format!("obstacle {i} has radius {}", a.radius));
            }
            let inside = (0..2).all(|k| {
                a.center[k] >= self.bounds_lo[k] - 1e-12 && a.center[k] <= self.bounds_hi[k] + 1e-12
            });
            if !inside {
                return Err(format!("obstacle {i} center {:?} outside bounds", a.center));
            }
            for (j, b) in self.obstacles.iter().enumerate().skip(i + 1) {
                if (a.center - b.center).norm() <= a.radius + b.radius {
                    return Err(format!("obstacles {i} and {j} overlap"));
                }
            }
        }
        Ok(())
    }
}

/// Places `count` non-overlapping circles with centers in the box by
/// rejection sampling. Deterministic in the stream.
pub fn generate_obstacle_field(
    rng: &mut RngStream,
    count: usize,
    radius: f64,
    bounds_lo: Vector2<f64>,
    bounds_hi: Vector2<f64>,
) -> Result<ObstacleField> {
    let mut obstacles: Vec<Circle> = Vec::with_capacity(count);
    let mut attempts = 0;
    while obstacles.len() < count {
        if attempts >= PLACEMENT_ATTEMPTS {
            return Err(Error::ObstaclePlacement {
                requested: count,
                placed: obstacles.len(),
                attempts,
            });
        }
        attempts += 1;
        let c = Circle::new(
            rng.uniform(bounds_lo.x, bounds_hi.x),
            rng.uniform(bounds_lo.y, bounds_hi.y),
            radius,
        );
        if obstacles
            .iter()
            .all(|o| (o.center - c.center).norm() > o.radius + c.radius)
        {
            obstacles.push(c);
        }
    }
    Ok(ObstacleField {
        obstacles,
        bounds_lo,
        bounds_hi,
    })
}

#[derive(Serialize, Deserialize)]
struct CircleRecord {
    cx: f64,
    cy: f64,
    r: f64,
}

impl Serialize for ObstacleField {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let records: Vec<CircleRecord> = self
            .obstacles
            .iter()
            .map(|c| CircleRecord {
                cx: c.center.x,
                cy: c.center.y,
                r: c.radius,
            })
            .collect();
        records.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ObstacleField {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let records = Vec::<CircleRecord>::deserialize(d)?;
        Ok(ObstacleField::from_circles(
            records
                .into_iter()
                .map(|r| Circle::new(r.cx, r.cy, r.r))
                .collect(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::rng::Purpose;
    use proptest::prelude::*;

    fn paper_box() -> (Vector2<f64>, Vector2<f64>) {
        (Vector2::new(3.0, -4.0), Vector2::new(10.0, 4.0))
    }

    #[test]
    fn ten_obstacles_in_the_box() {
        let (lo, hi) = paper_box();
        let mut rng = RngStream::for_purpose(1, Purpose::Obstacles, 0, 0);
        let field = generate_obstacle_field(&mut rng, 10, 0.6, lo, hi).unwrap();
        assert_eq!(field.len(), 10);
        field.check_invariants().unwrap();
    }

    #[test]
    fn zero_count_gives_empty_field() {
        let (lo, hi) = paper_box();
        let mut rng = RngStream::new(7, 0);
        assert!(generate_obstacle_field(&mut rng, 0, 0.6, lo, hi).unwrap().is_empty());
    }

    #[test]
    fn generation_is_deterministic() {
        let (lo, hi) = paper_box();
        let a = generate_obstacle_field(&mut RngStream::new(1, 0), 10, 0.6, lo, hi).unwrap();
        let b = generate_obstacle_field(&mut RngStream::new(1, 0), 10, 0.6, lo, hi).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn infeasible_density_errors() {
        let lo = Vector2::new(0.0, 0.0);
        let hi = Vector2::new(1.0, 1.0);
        let err = generate_obstacle_field(&mut RngStream::new(1, 0), 50, 0.6, lo, hi).unwrap_err();
        assert!(matches!(err, Error::ObstaclePlacement { .. }));
    }

    #[test]
    fn invariants_hold_over_many_seeds() {
        let (lo, hi) = paper_box();
        for seed in 0..120 {
            let f = generate_obstacle_field(&mut RngStream::new(seed, 0), 10, 0.6, lo, hi).unwrap();
            f.check_invariants().unwrap();
        }
    }

    #[test]
    fn distance_examples() {
        let c = Circle::new(3.0, 4.0, 1.0);
        assert_eq!(dist_to_circle(&Vector2::zeros(), &c), 5.0);
        assert_eq!(dist_to_circle(&c.center, &c), 0.0);
        let c = Circle::new(1.0, 0.0, 0.6);
        assert!((dist_to_circle(&Vector2::new(1.5, 0.0), &c) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn json_is_array_of_circles() {
        let f = ObstacleField::from_circles(vec![Circle::new(1.0, 2.0, 0.6)]);
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(s, r#"[{"cx":1.0,"cy":2.0,"r":0.6}]"#);
        let back: ObstacleField = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
    }

    proptest! {
        #[test]
        fn distance_is_a_metric(ax in -50.0..50.0f64, ay in -50.0..50.0f64,
                                bx in -50.0..50.0f64, by in -50.0..50.0f64,
                                cx in -50.0..50.0f64, cy in -50.0..50.0f64) {
            let a = Vector2::new(ax, ay);
            let b = Vector2::new(bx, by);
            let c = Vector2::new(cx, cy);
            let d = |p: &Vector2<f64>, q: &Vector2<f64>| dist_to_circle(p, &Circle { center: *q, radius: 1.0 });
            prop_assert!(d(&a, &b) >= 0.0);
            prop_assert!((d(&a, &b) - d(&b, &a)).abs() < 1e-12);
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-9);
        }
    }
}
