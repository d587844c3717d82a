//! Pixel-space geometry shared by the detectors and the guidance
//! construction. Coordinates are subpixel, x to the right, y down.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn sub(self, other: Point) -> Vec2 {
        Vec2::new(self.x - other.x, self.y - other.y)
    }

    pub fn offset(self, v: Vec2, t: f64) -> Point {
        Point::new(self.x + v.x * t, self.y + v.y * t)
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.x, self.y]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn from_degrees(deg: f64) -> Self {
        let r = deg.to_radians();
        Vec2::new(r.cos(), r.sin())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| Vec2::new(self.x / n, self.y / n))
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }
}

/// Folds an angle in degrees into (-90, 90]: a line has no orientation.
pub fn normalize_theta(deg: f64) -> f64 {
    let mut t = deg % 180.0;
    if t <= -90.0 {
        t += 180.0;
    } else if t > 90.0 {
        t -= 180.0;
    }
    t
}

/// Finite segment between two detected endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSegment {
    pub p0: Point,
    pub p1: Point,
    length: f64,
    theta: f64,
}

impl LineSegment {
    /// `None` for coincident endpoints.
    pub fn new(p0: Point, p1: Point) -> Option<Self> {
        let length = p0.distance(p1);
        if !(length > 0.0) || !length.is_finite() {
            return None;
        }
        let d = p1.sub(p0);
        let theta = normalize_theta(d.y.atan2(d.x).to_degrees());
        Some(LineSegment {
            p0,
            p1,
            length,
            theta,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Angle to the image x-axis in degrees, in (-90, 90].
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn midpoint(&self) -> Point {
        Point::new((self.p0.x + self.p1.x) / 2.0, (self.p0.y + self.p1.y) / 2.0)
    }

    pub fn direction(&self) -> Vec2 {
        Vec2::from_degrees(self.theta)
    }
}

/// Axis-aligned drawable area `[0, width-1] x [0, height-1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageRect {
    pub width: u32,
    pub height: u32,
}

impl ImageRect {
    pub fn new(width: u32, height: u32) -> Self {
        ImageRect { width, height }
    }

    pub fn max_x(&self) -> f64 {
        f64::from(self.width.max(1) - 1)
    }

    pub fn max_y(&self) -> f64 {
        f64::from(self.height.max(1) - 1)
    }

    pub fn diagonal(&self) -> f64 {
        self.max_x().hypot(self.max_y()).max(1.0)
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= self.max_x() && p.y <= self.max_y()
    }

    /// Whether `p` lies inside the rectangle grown by `frac` of its size on every side.
    pub fn contains_with_margin(&self, p: Point, frac: f64) -> bool {
        let mx = self.max_x() * frac;
        let my = self.max_y() * frac;
        p.x >= -mx && p.y >= -my && p.x <= self.max_x() + mx && p.y <= self.max_y() + my
    }
}

/// Unbounded line with a unit direction, plus its chord through the
/// image rectangle when it crosses it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfiniteLine {
    pub point: Point,
    pub direction: Vec2,
    pub clipped: Option<(Point, Point)>,
}

impl InfiniteLine {
    /// `None` when `direction` has no length.
    pub fn new(point: Point, direction: Vec2, rect: ImageRect) -> Option<Self> {
        let direction = direction.normalized()?;
        let clipped = clip_to_rect(point, direction, rect);
        Some(InfiniteLine {
            point,
            direction,
            clipped,
        })
    }

    pub fn from_segment(seg: &LineSegment, rect: ImageRect) -> Self {
        InfiniteLine::new(seg.p0, seg.p1.sub(seg.p0), rect).expect("segment has positive length")
    }

    pub fn distance_to(&self, p: Point) -> f64 {
        p.sub(self.point).cross(self.direction).abs()
    }

    pub fn theta(&self) -> f64 {
        normalize_theta(self.direction.y.atan2(self.direction.x).to_degrees())
    }
}

/// Chord of the line through `rect`, ordered along `dir`.
pub fn clip_to_rect(point: Point, dir: Vec2, rect: ImageRect) -> Option<(Point, Point)> {
    let mut t_lo = f64::NEG_INFINITY;
    let mut t_hi = f64::INFINITY;
    for (p, d, lo, hi) in [
        (point.x, dir.x, 0.0, rect.max_x()),
        (point.y, dir.y, 0.0, rect.max_y()),
    ] {
        if d.abs() < 1e-12 {
            if p < lo || p > hi {
                return None;
            }
        } else {
            let a = (lo - p) / d;
            let b = (hi - p) / d;
            t_lo = t_lo.max(a.min(b));
            t_hi = t_hi.min(a.max(b));
        }
    }
    if t_lo > t_hi || !t_lo.is_finite() || !t_hi.is_finite() {
        return None;
    }
    let snap = |q: Point| {
        Point::new(
            q.x.clamp(0.0, rect.max_x()),
            q.y.clamp(0.0, rect.max_y()),
        )
    };
    Some((snap(point.offset(dir, t_lo)), snap(point.offset(dir, t_hi))))
}

/// sin(1°): below this the crossing of two lines is numerically meaningless.
pub const MIN_CROSS: f64 = 0.017_452_406_437_283_51;

/// Unique crossing point of two lines, or `None` when they are within 1° of parallel.
pub fn intersect(a: &InfiniteLine, b: &InfiniteLine) -> Option<Point> {
    let denom = a.direction.cross(b.direction);
    if denom.abs() < MIN_CROSS {
        return None;
    }
    let t = b.point.sub(a.point).cross(b.direction) / denom;
    Some(a.point.offset(a.direction, t))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(p: (f64, f64), d: (f64, f64)) -> InfiniteLine {
        InfiniteLine::new(Point::new(p.0, p.1), Vec2::new(d.0, d.1), ImageRect::new(100, 100))
            .unwrap()
    }

    #[test]
    fn theta_is_folded() {
        assert_eq!(normalize_theta(0.0), 0.0);
        assert_eq!(normalize_theta(180.0), 0.0);
        assert_eq!(normalize_theta(-90.0), 90.0);
        assert_eq!(normalize_theta(135.0), -45.0);
        assert_eq!(normalize_theta(-135.0), 45.0);
        let s = LineSegment::new(Point::new(10.0, 0.0), Point::new(0.0, 0.0)).unwrap();
        assert_eq!(s.theta(), 0.0);
        let s = LineSegment::new(Point::new(0.0, 10.0), Point::new(0.0, 0.0)).unwrap();
        assert_eq!(s.theta(), 90.0);
        assert!(LineSegment::new(Point::new(1.0, 1.0), Point::new(1.0, 1.0)).is_none());
    }

    #[test]
    fn axes_meet_at_origin() {
        let p = intersect(&line((5.0, 0.0), (1.0, 0.0)), &line((0.0, 7.0), (0.0, 1.0))).unwrap();
        assert!(p.distance(Point::new(0.0, 0.0)) < 1e-12);
    }

    #[test]
    fn parallel_lines_do_not_meet() {
        assert!(intersect(&line((0.0, 0.0), (1.0, 0.0)), &line((0.0, 10.0), (1.0, 0.0))).is_none());
    }

    #[test]
    fn diagonals_meet_by_hand() {
        // y = x - 10 and y = -x - 10 cross at (0, -10); the mirrored pair
        // y = -(x - 10), y = x + 10 at (0, 10).
        let a = line((10.0, 0.0), (-1.0, 1.0));
        let b = line((-10.0, 0.0), (1.0, 1.0));
        let p = intersect(&a, &b).unwrap();
        assert!(p.distance(Point::new(0.0, 10.0)) < 1e-9, "{p:?}");
    }

    #[test]
    fn clipping_hits_the_border() {
        let r = ImageRect::new(200, 100);
        let (a, b) = clip_to_rect(Point::new(50.0, 50.0), Vec2::new(1.0, 0.0), r).unwrap();
        assert_eq!(a, Point::new(0.0, 50.0));
        assert_eq!(b, Point::new(199.0, 50.0));
        let (a, b) = clip_to_rect(Point::new(0.0, 0.0), Vec2::new(1.0, 1.0), r).unwrap();
        assert_eq!(a, Point::new(0.0, 0.0));
        assert!(b.distance(Point::new(99.0, 99.0)) < 1e-9);
        assert!(clip_to_rect(Point::new(-5.0, 0.0), Vec2::new(0.0, 1.0), r).is_none());
    }
}
