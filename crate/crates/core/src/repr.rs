//! Vertex codes: polygons expressed as offsets from an object center.
//!
//! Angles are measured from the +x axis toward +y, so increasing angle runs
//! clockwise on screen, and an angle-sorted ring has positive signed area.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::dual::Scalar;
use crate::error::{PolyError, Result};
use crate::geom::{Point2, Polygon, V2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordSystem {
    /// `(dx, dy)` pairs, pixels.
    #[default]
    Cartesian,
    /// `(r, theta)` pairs, pixels and radians.
    Polar,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexCode {
    pub center: Point2,
    /// `2N` entries, interleaved per vertex.
    pub coords: Vec<f64>,
    pub system: CoordSystem,
}

impl VertexCode {
    pub fn new(center: Point2, coords: Vec<f64>, system: CoordSystem) -> Result<Self> {
        if !coords.len().is_multiple_of(2) || coords.len() < 6 {
            return Err(PolyError::ShapeMismatch(format!(
                "vertex code needs an even number of at least 6 entries, got {}",
                coords.len()
            )));
        }
        if !center.is_finite() || coords.iter().any(|c| !c.is_finite()) {
            return Err(PolyError::NonFinite);
        }
        Ok(VertexCode { center, coords, system })
    }

    pub fn n_vertices(&self) -> usize {
        self.coords.len() / 2
    }

    /// Decoded vertices, without validation.
    pub fn points(&self) -> Vec<Point2> {
        decode_points(self.center, &self.coords, self.system)
            .into_iter()
            .map(V2::value)
            .collect()
    }

    /// Geometric angle of every vertex about the center, in `[0, 2π)`.
    pub fn angles(&self) -> Vec<f64> {
        self.points()
            .iter()
            .map(|p| normalized_angle(p.y - self.center.y, p.x - self.center.x))
            .collect()
    }
}

fn normalized_angle(dy: f64, dx: f64) -> f64 {
    if dx == 0.0 && dy == 0.0 {
        return 0.0;
    }
    let a = dy.atan2(dx);
    let a = if a < 0.0 { a + TAU } else { a };
    // atan2 can return values that round up to exactly 2π.
    if a >= TAU {
        0.0
    } else {
        a
    }
}

/// Vertex positions for any scalar type.
pub fn decode_points<T: Scalar>(center: Point2, coords: &[T], system: CoordSystem) -> Vec<V2<T>> {
    coords
        .chunks_exact(2)
        .map(|c| match system {
            CoordSystem::Cartesian => V2::new(c[0] + center.x, c[1] + center.y),
            CoordSystem::Polar => V2::new(c[0] * c[1].cos() + center.x, c[0] * c[1].sin() + center.y),
        })
        .collect()
}

/// Vertex positions in the given order, for any scalar type.
pub(crate) fn decode_points_permuted<T: Scalar>(
    center: Point2,
    coords: &[T],
    system: CoordSystem,
    order: &[usize],
    out: &mut Vec<V2<T>>,
) {
    out.clear();
    out.extend(order.iter().map(|&i| {
        let (a, b) = (coords[2 * i], coords[2 * i + 1]);
        match system {
            CoordSystem::Cartesian => V2::new(a + center.x, b + center.y),
            CoordSystem::Polar => V2::new(a * b.cos() + center.x, a * b.sin() + center.y),
        }
    }));
}

/// Decodes the code into a validated polygon. No reordering happens here.
pub fn decode(code: &VertexCode) -> Result<Polygon> {
    Polygon::new(code.points())
}

/// Expresses `p` relative to `center`. Polar angles land in `[0, 2π)`; a
/// vertex on the center encodes as `(0, 0)`.
pub fn encode(p: &Polygon, center: Point2, system: CoordSystem) -> VertexCode {
    encode_points(p.vertices(), center, system)
}

pub fn encode_points(points: &[Point2], center: Point2, system: CoordSystem) -> VertexCode {
    let coords = points
        .iter()
        .flat_map(|p| {
            let (dx, dy) = (p.x - center.x, p.y - center.y);
            match system {
                CoordSystem::Cartesian => [dx, dy],
                CoordSystem::Polar => [dx.hypot(dy), normalized_angle(dy, dx)],
            }
        })
        .collect();
    VertexCode { center, coords, system }
}

/// Permutation that sorts the vertices by ascending angle about the center,
/// ties broken by ascending distance. Stable for exact duplicates.
pub fn angle_order(code: &VertexCode) -> Vec<usize> {
    sorted_angle_keys(code.center, &code.coords, code.system).0
}

/// The angle-sort permutation plus `(angle, radius)` of every vertex in
/// sorted order.
pub(crate) fn sorted_angle_keys(center: Point2, coords: &[f64], system: CoordSystem) -> (Vec<usize>, Vec<(f64, f64)>) {
    let keys: Vec<(f64, f64)> = decode_points(center, coords, system)
        .into_iter()
        .map(|p| {
            let (dx, dy) = (p.x - center.x, p.y - center.y);
            (normalized_angle(dy, dx), (dx * dx + dy * dy).sqrt())
        })
        .collect();
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&i, &j| {
        keys[i]
            .0
            .total_cmp(&keys[j].0)
            .then(keys[i].1.total_cmp(&keys[j].1))
    });
    let sorted = order.iter().map(|&i| keys[i]).collect();
    (order, sorted)
}

/// Sufficient test for simplicity of an angle-sorted ring: every vertex
/// well away from the center and every angular gap, including the wrap,
/// clearly inside `(0, π)`. Each edge then stays in its own wedge.
pub(crate) fn sorted_ring_is_star(sorted: &[(f64, f64)], diameter: f64) -> bool {
    const MIN_GAP: f64 = 1e-4;
    let n = sorted.len();
    if n < 3 || sorted.iter().any(|&(_, r)| r <= 1e-3 * diameter) {
        return false;
    }
    (0..n).all(|i| {
        let a = sorted[i].0;
        let b = if i + 1 < n { sorted[i + 1].0 } else { sorted[0].0 + TAU };
        let gap = b - a;
        (MIN_GAP..=std::f64::consts::PI - MIN_GAP).contains(&gap)
    })
}

/// Reorders the vertices by angle so the decoded ring is star-shaped about
/// the center (and clockwise on screen). Coordinates keep their system and
/// raw values.
pub fn sort_by_angle(code: &VertexCode) -> VertexCode {
    let order = angle_order(code);
    let coords = order
        .iter()
        .flat_map(|&i| [code.coords[2 * i], code.coords[2 * i + 1]])
        .collect();
    VertexCode {
        center: code.center,
        coords,
        system: code.system,
    }
}
