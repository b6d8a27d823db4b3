//! Points, polygon rings and the exact primitives the clipper is built on.
//!
//! All coordinates live in image space: `x` grows rightward and `y` grows
//! downward. Under that convention a ring that runs clockwise on screen has a
//! *positive* shoelace area, and its interior lies on the side where
//! `cross(edge, p - edge.start) > 0`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dual::Scalar;
use crate::error::{PolyError, Result};

/// Relative tolerance for merging coincident vertices.
pub const MERGE_REL_EPS: f64 = 1e-7;
/// Relative tolerance for classifying a point as lying on a boundary.
pub const EDGE_REL_EPS: f64 = 1e-9;

/// Coincident-vertex tolerance for a ring of the given diameter.
pub fn merge_eps(diameter: f64) -> f64 {
    MERGE_REL_EPS * (1.0 + diameter)
}

/// On-boundary tolerance for a ring of the given diameter.
pub fn edge_eps(diameter: f64) -> f64 {
    EDGE_REL_EPS * (1.0 + diameter)
}

#[derive(Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn try_new(x: f64, y: f64) -> Result<Self> {
        if x.is_finite() && y.is_finite() {
            Ok(Point2 { x, y })
        } else {
            Err(PolyError::NonFinite)
        }
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    #[inline]
    #[allow(clippy::should_implement_trait)]
    pub fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }

    #[inline]
    #[allow(clippy::should_implement_trait)]
    pub fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }

    #[inline]
    pub fn scale(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }

    #[inline]
    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 2D cross product.
    #[inline]
    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    #[inline]
    pub fn dist(self, o: Point2) -> f64 {
        self.sub(o).norm()
    }
}

impl fmt::Debug for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(v: [f64; 2]) -> Self {
        Point2::new(v[0], v[1])
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

/// Shoelace sum over a closed ring. Positive for rings that run clockwise on
/// screen.
pub fn signed_area(ring: &[Point2]) -> Result<f64> {
    if ring.len() < 3 {
        return Err(PolyError::DegeneratePolygon(format!(
            "{} vertices, need at least 3",
            ring.len()
        )));
    }
    Ok(shoelace_canonical(ring))
}

/// Shoelace with the cross terms summed in an order that depends only on
/// their values, so reversing the ring negates the result exactly.
fn shoelace_canonical(ring: &[Point2]) -> f64 {
    let n = ring.len();
    let (mut pos, mut neg): (Vec<f64>, Vec<f64>) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        let t = a.x * b.y - b.x * a.y;
        if t >= 0.0 {
            pos.push(t);
        } else {
            neg.push(-t);
        }
    }
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);
    0.5 * (pos.iter().sum::<f64>() - neg.iter().sum::<f64>())
}

pub(crate) fn shoelace(ring: &[Point2]) -> f64 {
    let n = ring.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    0.5 * acc
}

pub fn area(ring: &[Point2]) -> Result<f64> {
    signed_area(ring).map(f64::abs)
}

/// Diagonal of the axis-aligned bounding box. Used as the ring diameter for
/// tolerance scaling.
pub fn diameter(points: &[Point2]) -> f64 {
    let Some(first) = points.first() else {
        return 0.0;
    };
    let (mut x0, mut y0, mut x1, mut y1) = (first.x, first.y, first.x, first.y);
    for p in &points[1..] {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    (x1 - x0).hypot(y1 - y0)
}

/// A closed vertex ring with at least three vertices, no coincident
/// consecutive vertices and non-negligible area.
#[derive(Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Polygon {
    vertices: Vec<Point2>,
}

impl fmt::Debug for Polygon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.vertices).finish()
    }
}

impl Polygon {
    pub fn new(vertices: Vec<Point2>) -> Result<Self> {
        if vertices.iter().any(|p| !p.is_finite()) {
            return Err(PolyError::NonFinite);
        }
        if vertices.len() < 3 {
            return Err(PolyError::DegeneratePolygon(format!(
                "{} vertices, need at least 3",
                vertices.len()
            )));
        }
        let eps = merge_eps(diameter(&vertices));
        let n = vertices.len();
        for i in 0..n {
            if vertices[i].dist(vertices[(i + 1) % n]) <= eps {
                return Err(PolyError::DegeneratePolygon(format!(
                    "vertices {} and {} coincide",
                    i,
                    (i + 1) % n
                )));
            }
        }
        let a = shoelace(&vertices).abs();
        if a < eps * eps {
            return Err(PolyError::DegeneratePolygon(format!("near-zero area {a:e}")));
        }
        Ok(Polygon { vertices })
    }

    /// Drops consecutive duplicates (including a closing vertex equal to the
    /// first one) before validating.
    pub fn from_ring_lossy(mut vertices: Vec<Point2>) -> Result<Self> {
        if vertices.iter().any(|p| !p.is_finite()) {
            return Err(PolyError::NonFinite);
        }
        let eps = merge_eps(diameter(&vertices));
        vertices.dedup_by(|b, a| a.dist(*b) <= eps);
        while vertices.len() > 1 && vertices[0].dist(vertices[vertices.len() - 1]) <= eps {
            vertices.pop();
        }
        Polygon::new(vertices)
    }

    /// Skips validation. Used for clipper output, whose pieces may carry
    /// crossings closer together than the merge tolerance.
    pub(crate) fn from_raw(vertices: Vec<Point2>) -> Self {
        Polygon { vertices }
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn into_vertices(self) -> Vec<Point2> {
        self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn signed_area(&self) -> f64 {
        shoelace_canonical(&self.vertices)
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    /// True when the ring runs clockwise on screen (positive signed area).
    pub fn is_clockwise(&self) -> bool {
        shoelace(&self.vertices) > 0.0
    }

    pub fn diameter(&self) -> f64 {
        diameter(&self.vertices)
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| a.dist(b)).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn reversed(&self) -> Polygon {
        let mut v = self.vertices.clone();
        v.reverse();
        Polygon { vertices: v }
    }

    pub fn translated(&self, d: Point2) -> Polygon {
        Polygon {
            vertices: self.vertices.iter().map(|p| p.add(d)).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Polygon {
        Polygon {
            vertices: self.vertices.iter().map(|p| p.scale(s)).collect(),
        }
    }

    /// Returns the ring in clockwise (positive-area) order.
    pub fn to_clockwise(&self) -> Polygon {
        if self.is_clockwise() {
            self.clone()
        } else {
            self.reversed()
        }
    }

    /// Vertex centroid (mean of the vertices).
    pub fn vertex_centroid(&self) -> Point2 {
        let n = self.vertices.len() as f64;
        let s = self
            .vertices
            .iter()
            .fold(Point2::default(), |acc, p| acc.add(*p));
        s.scale(1.0 / n)
    }

    pub fn contains(&self, q: Point2) -> bool {
        contains_point(self, q)
    }

    pub fn is_simple(&self) -> bool {
        is_simple(&self.vertices)
    }
}

impl<'de> Deserialize<'de> for Polygon {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<Point2>::deserialize(d)?;
        Polygon::from_ring_lossy(v).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub a: Point2,
    pub b: Point2,
}

impl Segment {
    pub fn new(a: Point2, b: Point2) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(PolyError::NonFinite);
        }
        if a.dist(b) <= merge_eps(a.dist(b)) {
            return Err(PolyError::DegeneratePolygon("zero-length segment".into()));
        }
        Ok(Segment { a, b })
    }

    pub fn length(&self) -> f64 {
        self.a.dist(self.b)
    }
}

/// How two segments meet.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SegmentContact {
    Disjoint,
    /// Interiors cross transversally at `point = a1 + t1 (b1 - a1) = a2 + t2 (b2 - a2)`.
    Proper { point: Point2, t1: f64, t2: f64 },
    /// An endpoint lies within tolerance of the other segment, or the
    /// segments overlap collinearly.
    Touching,
}

/// Axis-aligned box of a segment as `[xmin, xmax, ymin, ymax]`.
#[inline]
pub(crate) fn edge_box(a: Point2, b: Point2) -> [f64; 4] {
    [a.x.min(b.x), a.x.max(b.x), a.y.min(b.y), a.y.max(b.y)]
}

#[inline]
pub(crate) fn boxes_apart(p: &[f64; 4], q: &[f64; 4], eps: f64) -> bool {
    // Non-short-circuiting: the outcome is data dependent and branches on it
    // mispredict.
    (p[0] > q[1] + eps) | (q[0] > p[1] + eps) | (p[2] > q[3] + eps) | (q[2] > p[3] + eps)
}

/// Classifies the contact between segments `a1-b1` and `a2-b2`. Distances
/// within `eps` of a line count as on the line.
pub fn segment_contact(a1: Point2, b1: Point2, a2: Point2, b2: Point2, eps: f64) -> SegmentContact {
    if a1.x.min(b1.x) > a2.x.max(b2.x) + eps
        || a2.x.min(b2.x) > a1.x.max(b1.x) + eps
        || a1.y.min(b1.y) > a2.y.max(b2.y) + eps
        || a2.y.min(b2.y) > a1.y.max(b1.y) + eps
    {
        return SegmentContact::Disjoint;
    }
    let u = b1.sub(a1);
    let v = b2.sub(a2);
    let len1 = u.norm();
    let len2 = v.norm();
    if len1 == 0.0 || len2 == 0.0 {
        return SegmentContact::Touching;
    }
    // Signed distances of each endpoint from the other segment's line.
    let da2 = u.cross(a2.sub(a1)) / len1;
    let db2 = u.cross(b2.sub(a1)) / len1;
    let da1 = v.cross(a1.sub(a2)) / len2;
    let db1 = v.cross(b1.sub(a2)) / len2;

    let strictly_opposite = |p: f64, q: f64| (p > eps && q < -eps) || (p < -eps && q > eps);
    if strictly_opposite(da2, db2) && strictly_opposite(da1, db1) {
        let denom = u.cross(v);
        let w = a2.sub(a1);
        let t1 = w.cross(v) / denom;
        let t2 = w.cross(u) / denom;
        return SegmentContact::Proper {
            point: a1.add(u.scale(t1)),
            t1,
            t2,
        };
    }

    let on_segment = |p: Point2, a: Point2, dir: Point2, len: f64| {
        let s = p.sub(a).dot(dir) / len;
        s >= -eps && s <= len + eps
    };
    if (da2.abs() <= eps && on_segment(a2, a1, u, len1))
        || (db2.abs() <= eps && on_segment(b2, a1, u, len1))
        || (da1.abs() <= eps && on_segment(a1, a2, v, len2))
        || (db1.abs() <= eps && on_segment(b1, a2, v, len2))
    {
        return SegmentContact::Touching;
    }
    SegmentContact::Disjoint
}

/// Proper crossing of two segments, with the parametric position of the
/// crossing along each. Touching and collinear contacts yield `None`; the
/// clipper resolves those by perturbation.
pub fn segment_intersection(s1: &Segment, s2: &Segment) -> Option<(Point2, f64, f64)> {
    let eps = edge_eps(diameter(&[s1.a, s1.b, s2.a, s2.b]));
    match segment_contact(s1.a, s1.b, s2.a, s2.b, eps) {
        SegmentContact::Proper { point, t1, t2 } => Some((point, t1, t2)),
        _ => None,
    }
}

/// Deterministic unit direction for nudging vertex `index` on perturbation
/// attempt `attempt`.
pub(crate) fn perturbation_direction(index: usize, attempt: usize) -> Point2 {
    let seed = (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (attempt as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    Point2::new(phi.cos(), phi.sin())
}

fn distance_to_segment(q: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return q.dist(a);
    }
    let t = (q.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
    q.dist(a.add(ab.scale(t)))
}

fn crossing_parity(ring: &[Point2], q: Point2) -> bool {
    let n = ring.len();
    let mut inside = false;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        if (a.y > q.y) != (b.y > q.y) {
            let x = a.x + (q.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if q.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Even-odd ray-crossing test. Points within the edge tolerance of the
/// boundary are nudged along a fixed direction before testing.
pub fn contains_point(p: &Polygon, q: Point2) -> bool {
    let ring = p.vertices();
    let diam = p.diameter();
    let eps = edge_eps(diam);
    let on_boundary = p.edges().any(|(a, b)| distance_to_segment(q, a, b) <= eps);
    if on_boundary {
        let dir = perturbation_direction(0, 0);
        return crossing_parity(ring, q.add(dir.scale(4.0 * eps)));
    }
    crossing_parity(ring, q)
}

/// True iff no two non-adjacent edges touch and no adjacent edges fold back
/// onto each other. Quadratic in the vertex count.
pub fn is_simple(ring: &[Point2]) -> bool {
    let n = ring.len();
    if n < 3 {
        return false;
    }
    let eps = edge_eps(diameter(ring));
    let boxes: Vec<[f64; 4]> = (0..n).map(|i| edge_box(ring[i], ring[(i + 1) % n])).collect();
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        let c = ring[(i + 2) % n];
        if a.dist(b) <= eps {
            return false;
        }
        // Adjacent edges may only share their common vertex.
        let u = b.sub(a);
        let v = c.sub(b);
        if (u.cross(v) / (u.norm() * v.norm())).abs() <= EDGE_REL_EPS && u.dot(v) < 0.0 {
            return false;
        }
        for j in (i + 2)..n {
            if (i == 0 && j == n - 1) || boxes_apart(&boxes[i], &boxes[j], eps) {
                continue;
            }
            let p = ring[j];
            let q = ring[(j + 1) % n];
            if segment_contact(a, b, p, q, eps) != SegmentContact::Disjoint {
                return false;
            }
        }
    }
    true
}

/// A point over any [`Scalar`]; the smooth loss kernels work on these.
#[derive(Clone, Copy, Debug)]
pub struct V2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> V2<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        V2 { x, y }
    }

    #[inline]
    pub fn constant(p: Point2) -> Self {
        V2 {
            x: T::constant(p.x),
            y: T::constant(p.y),
        }
    }

    #[inline]
    pub fn offset(self, d: Point2) -> Self {
        V2 {
            x: self.x + d.x,
            y: self.y + d.y,
        }
    }

    pub fn value(self) -> Point2 {
        Point2::new(self.x.value(), self.y.value())
    }
}

/// Shoelace sum over a generic ring.
pub fn shoelace_generic<T: Scalar>(ring: &[V2<T>]) -> T {
    let n = ring.len();
    let mut acc = T::zero();
    for i in 0..n {
        let a = ring[i];
        let b = ring[if i + 1 == n { 0 } else { i + 1 }];
        acc += a.x * b.y - b.x * a.y;
    }
    acc * 0.5
}

/// Crossing of the lines through `a-b` and `c-d`.
#[inline]
pub fn line_crossing<T: Scalar>(a: V2<T>, b: V2<T>, c: V2<T>, d: V2<T>) -> V2<T> {
    let ux = b.x - a.x;
    let uy = b.y - a.y;
    let vx = d.x - c.x;
    let vy = d.y - c.y;
    let wx = c.x - a.x;
    let wy = c.y - a.y;
    let t = (wx * vy - wy * vx) / (ux * vy - uy * vx);
    V2::new(a.x + ux * t, a.y + uy * t)
}
