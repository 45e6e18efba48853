//! Planar vectors, segments, ray casting and disc collision support.

use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec2<S> {
    pub x: S,
    pub y: S,
}

impl<S: Real> Vec2<S> {
    pub fn new(x: S, y: S) -> Self {
        Vec2 { x, y }
    }

    pub fn zero() -> Self {
        Vec2 {
            x: S::zero(),
            y: S::zero(),
        }
    }

    pub fn dot(self, o: Self) -> S {
        self.x * o.x + self.y * o.y
    }

    /// 2D cross product (z component of the 3D cross).
    pub fn cross(self, o: Self) -> S {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> S {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        if n > S::zero() {
            self * (S::one() / n)
        } else {
            self
        }
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Self {
        Vec2 {
            x: -self.y,
            y: self.x,
        }
    }

    pub fn rotated(self, angle: S) -> Self {
        let (s, c) = angle.sin_cos();
        Vec2 {
            x: c * self.x - s * self.y,
            y: s * self.x + c * self.y,
        }
    }

    pub fn distance(self, o: Self) -> S {
        (self - o).norm()
    }
}

impl<S: Real> std::ops::Add for Vec2<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl<S: Real> std::ops::Sub for Vec2<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl<S: Real> std::ops::Mul<S> for Vec2<S> {
    type Output = Self;
    fn mul(self, k: S) -> Self {
        Vec2::new(self.x * k, self.y * k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSegment<S> {
    pub a: Vec2<S>,
    pub b: Vec2<S>,
}

impl<S: Real> LineSegment<S> {
    pub fn new(a: Vec2<S>, b: Vec2<S>) -> Self {
        LineSegment { a, b }
    }

    /// Closest point on the segment to `p`.
    pub fn closest_point(&self, p: Vec2<S>) -> Vec2<S> {
        let ab = self.b - self.a;
        let len2 = ab.dot(ab);
        if len2 == S::zero() {
            return self.a;
        }
        let t = ((p - self.a).dot(ab) / len2).max(S::zero()).min(S::one());
        self.a + ab * t
    }

    pub fn distance_to_point(&self, p: Vec2<S>) -> S {
        self.closest_point(p).distance(p)
    }

    /// Proper segment-segment intersection test, inclusive of endpoints.
    pub fn intersects(&self, other: &LineSegment<S>) -> bool {
        let d1 = self.b - self.a;
        let d2 = other.b - other.a;
        let denom = d1.cross(d2);
        let diff = other.a - self.a;
        if denom == S::zero() {
            // parallel: overlap only if collinear and ranges touch
            if diff.cross(d1) != S::zero() {
                return false;
            }
            let len2 = d1.dot(d1);
            if len2 == S::zero() {
                return other.distance_to_point(self.a) == S::zero();
            }
            let t0 = (other.a - self.a).dot(d1) / len2;
            let t1 = (other.b - self.a).dot(d1) / len2;
            let (lo, hi) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
            return hi >= S::zero() && lo <= S::one();
        }
        let t = diff.cross(d2) / denom;
        let u = diff.cross(d1) / denom;
        t >= S::zero() && t <= S::one() && u >= S::zero() && u <= S::one()
    }

    /// Distance along a ray `origin + s*dir` (dir unit) to this segment,
    /// if the ray hits it.
    pub fn raycast(&self, origin: Vec2<S>, dir: Vec2<S>) -> Option<S> {
        let seg = self.b - self.a;
        let denom = dir.cross(seg);
        if denom == S::zero() {
            return None; // parallel rays graze; treated as a miss
        }
        let diff = self.a - origin;
        let s = diff.cross(seg) / denom;
        let u = diff.cross(dir) / denom;
        if s >= S::zero() && u >= S::zero() && u <= S::one() {
            Some(s)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64) -> Vec2<f64> {
        Vec2::new(x, y)
    }

    #[test]
    fn rotation_and_perp() {
        let e = v(1.0, 0.0).rotated(std::f64::consts::FRAC_PI_2);
        assert!((e.x - 0.0).abs() < 1e-15 && (e.y - 1.0).abs() < 1e-15);
        assert_eq!(v(2.0, 1.0).perp(), v(-1.0, 2.0));
    }

    #[test]
    fn closest_point_clamps_to_endpoints() {
        let seg = LineSegment::new(v(0.0, 0.0), v(1.0, 0.0));
        assert_eq!(seg.closest_point(v(0.5, 1.0)), v(0.5, 0.0));
        assert_eq!(seg.closest_point(v(-2.0, 1.0)), v(0.0, 0.0));
        assert_eq!(seg.closest_point(v(9.0, -1.0)), v(1.0, 0.0));
        assert!((seg.distance_to_point(v(0.25, 0.3)) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn intersection_cases() {
        let a = LineSegment::new(v(0.0, 0.0), v(1.0, 1.0));
        let b = LineSegment::new(v(0.0, 1.0), v(1.0, 0.0));
        assert!(a.intersects(&b));
        let c = LineSegment::new(v(2.0, 0.0), v(3.0, 0.0));
        assert!(!a.intersects(&c));
        // endpoint touch counts
        let d = LineSegment::new(v(1.0, 1.0), v(2.0, 1.0));
        assert!(a.intersects(&d));
        // collinear overlap
        let e = LineSegment::new(v(0.5, 0.5), v(2.0, 2.0));
        assert!(a.intersects(&e));
        let f = LineSegment::new(v(1.5, 1.5), v(2.0, 2.0));
        assert!(!a.intersects(&f));
    }

    #[test]
    fn raycast_distance() {
        let wall = LineSegment::new(v(2.0, -1.0), v(2.0, 1.0));
        let hit = wall.raycast(v(0.0, 0.0), v(1.0, 0.0)).unwrap();
        assert!((hit - 2.0).abs() < 1e-15);
        assert!(wall.raycast(v(0.0, 0.0), v(-1.0, 0.0)).is_none());
        assert!(wall.raycast(v(0.0, 5.0), v(1.0, 0.0)).is_none());
        // diagonal hit
        let hit = wall
            .raycast(v(0.0, 0.0), v(1.0, 0.25).normalized())
            .unwrap();
        assert!((hit - (4.0f64 + 0.25).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn works_at_f32() {
        let seg = LineSegment::new(Vec2::new(0.0f32, 0.0), Vec2::new(1.0, 0.0));
        assert!((seg.distance_to_point(Vec2::new(0.5, 2.0)) - 2.0).abs() < 1e-6);
    }
}
