use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(p: [f64; 2]) -> Self {
        Vec2::new(p[0], p[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(p: Vec2) -> Self {
        [p.x, p.y]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[[f64; 2]; 2]", into = "[[f64; 2]; 2]")]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub const fn new(a: Vec2, b: Vec2) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    /// Euclidean distance from `p` to the closest point of the segment.
    pub fn distance_to(&self, p: Vec2) -> f64 {
        let e = self.b - self.a;
        let len2 = e.dot(e);
        if len2 == 0.0 {
            return p.distance(self.a);
        }
        let t = ((p - self.a).dot(e) / len2).clamp(0.0, 1.0);
        p.distance(self.a + e * t)
    }
}

impl From<[[f64; 2]; 2]> for Segment {
    fn from(s: [[f64; 2]; 2]) -> Self {
        Segment::new(s[0].into(), s[1].into())
    }
}

impl From<Segment> for [[f64; 2]; 2] {
    fn from(s: Segment) -> Self {
        [s.a.into(), s.b.into()]
    }
}

/// Where the half-line `origin + t * direction` (`t >= 0`) meets `segment`.
///
/// Parallel (including collinear) configurations report no hit.
pub fn ray_segment_intersection(origin: Vec2, direction: Vec2, segment: &Segment) -> Option<Vec2> {
    ray_segment_param(origin, direction, segment).map(|t| origin + direction * t)
}

/// Ray parameter `t` of the hit, see [`ray_segment_intersection`].
pub fn ray_segment_param(origin: Vec2, direction: Vec2, segment: &Segment) -> Option<f64> {
    let e = segment.b - segment.a;
    let denom = direction.cross(e);
    if denom.abs() <= 1e-12 * e.norm().max(f64::MIN_POSITIVE) {
        return None;
    }
    let w = segment.a - origin;
    let t = w.cross(e) / denom;
    let s = w.cross(direction) / denom;
    if t >= 0.0 && (-1e-12..=1.0 + 1e-12).contains(&s) {
        Some(t)
    } else {
        None
    }
}

/// Closed segment-segment intersection test (touching counts).
pub fn segments_intersect(p: &Segment, q: &Segment) -> bool {
    let d1 = orient(q.a, q.b, p.a);
    let d2 = orient(q.a, q.b, p.b);
    let d3 = orient(p.a, p.b, q.a);
    let d4 = orient(p.a, p.b, q.b);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q, p.a))
        || (d2 == 0.0 && on_segment(q, p.b))
        || (d3 == 0.0 && on_segment(p, q.a))
        || (d4 == 0.0 && on_segment(p, q.b))
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(s: &Segment, p: Vec2) -> bool {
    p.x >= s.a.x.min(s.b.x)
        && p.x <= s.a.x.max(s.b.x)
        && p.y >= s.a.y.min(s.b.y)
        && p.y <= s.a.y.max(s.b.y)
}
