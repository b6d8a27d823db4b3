//! Seeded random shapes for tests, benchmarks and the acceptance suite.

use std::f64::consts::TAU;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::clip::{intersection_area, IntersectionPolicy};
use crate::geom::{Point2, Polygon};
use crate::raster::BitGrid;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Jittered, strictly increasing angles starting near `phase`.
fn ray_angles<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let step = TAU / n as f64;
    let phase = rng.gen_range(0.0..TAU);
    (0..n)
        .map(|k| phase + (k as f64 + rng.gen_range(-0.3..0.3)) * step)
        .collect()
}

/// Star-shaped polygon about `center` with radii drawn from
/// `[r_min, r_max]`. Concave in general, always simple, clockwise on screen.
pub fn random_star<R: Rng>(rng: &mut R, n: usize, center: Point2, r_min: f64, r_max: f64) -> Polygon {
    assert!(n >= 3 && r_min > 0.0 && r_max >= r_min);
    loop {
        let pts = ray_angles(rng, n)
            .into_iter()
            .map(|a| {
                let r = rng.gen_range(r_min..=r_max);
                Point2::new(center.x + r * a.cos(), center.y + r * a.sin())
            })
            .collect();
        if let Ok(p) = Polygon::new(pts) {
            return p;
        }
    }
}

/// Convex polygon inscribed in a rotated ellipse.
pub fn random_convex<R: Rng>(rng: &mut R, n: usize, center: Point2, radius: f64) -> Polygon {
    assert!(n >= 3 && radius > 0.0);
    let aspect = rng.gen_range(0.5..1.0);
    let rot = rng.gen_range(0.0..TAU);
    let (s, c) = rot.sin_cos();
    loop {
        let pts = ray_angles(rng, n)
            .into_iter()
            .map(|a| {
                let (x, y) = (radius * a.cos(), aspect * radius * a.sin());
                Point2::new(center.x + c * x - s * y, center.y + s * x + c * y)
            })
            .collect();
        if let Ok(p) = Polygon::new(pts) {
            return p;
        }
    }
}

/// Convex or star polygon, each with probability 1/2.
pub fn random_polygon<R: Rng>(rng: &mut R, n: usize, center: Point2, radius: f64) -> Polygon {
    if rng.gen_bool(0.5) {
        random_convex(rng, n, center, radius)
    } else {
        random_star(rng, n, center, 0.35 * radius, radius)
    }
}

/// Two polygons of roughly `radius` around `center` with a nonempty
/// intersection. Vertex counts are drawn from `counts`.
pub fn overlapping_pair<R: Rng>(
    rng: &mut R,
    counts: std::ops::RangeInclusive<usize>,
    center: Point2,
    radius: f64,
) -> (Polygon, Polygon) {
    loop {
        let na = rng.gen_range(counts.clone());
        let nb = rng.gen_range(counts.clone());
        let a = random_polygon(rng, na, center, radius);
        let off = Point2::new(rng.gen_range(-0.6..0.6) * radius, rng.gen_range(-0.6..0.6) * radius);
        let rb = radius * rng.gen_range(0.6..1.2);
        let b = random_polygon(rng, nb, center.add(off), rb);
        if intersection_area(&a, &b, IntersectionPolicy::Strict).is_ok_and(|x| x > 1e-3 * a.area()) {
            return (a, b);
        }
    }
}

/// Star pair for the loss benchmarks: both `n`-gons about nearby centers.
/// Returns `(pred, gt, pred_center)`.
pub fn star_pair<R: Rng>(rng: &mut R, n: usize, radius: f64) -> (Polygon, Polygon, Point2) {
    let c = Point2::new(0.0, 0.0);
    let pred = random_star(rng, n, c, 0.5 * radius, radius);
    let off = Point2::new(rng.gen_range(-0.2..0.2) * radius, rng.gen_range(-0.2..0.2) * radius);
    let gt = random_star(rng, n, off, 0.5 * radius, radius);
    (pred, gt, c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaskShape {
    Disk,
    Ellipse,
    RoundedBox,
}

/// Pixels whose centers fall inside a disk.
pub fn disk_mask(w: usize, h: usize, center: Point2, r: f64) -> BitGrid {
    BitGrid::from_fn(w, h, |x, y| {
        Point2::new(x as f64 + 0.5, y as f64 + 0.5).dist(center) <= r
    })
}

/// Ellipse with semi-axes `(a, b)` rotated by `rot` radians.
pub fn ellipse_mask(w: usize, h: usize, center: Point2, a: f64, b: f64, rot: f64) -> BitGrid {
    let (s, c) = rot.sin_cos();
    BitGrid::from_fn(w, h, |x, y| {
        let (dx, dy) = (x as f64 + 0.5 - center.x, y as f64 + 0.5 - center.y);
        let (u, v) = (c * dx + s * dy, -s * dx + c * dy);
        (u / a).powi(2) + (v / b).powi(2) <= 1.0
    })
}

/// Axis-aligned box `[x0, x1] × [y0, y1]` with corners rounded by `radius`.
pub fn rounded_box_mask(w: usize, h: usize, x0: f64, y0: f64, x1: f64, y1: f64, radius: f64) -> BitGrid {
    BitGrid::from_fn(w, h, |x, y| {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        let qx = px.clamp(x0 + radius, x1 - radius);
        let qy = py.clamp(y0 + radius, y1 - radius);
        px >= x0 && px <= x1 && py >= y0 && py <= y1 && Point2::new(px, py).dist(Point2::new(qx, qy)) <= radius
    })
}

/// `count` single-object masks cycling through disks, ellipses and rounded
/// boxes, each on its own `size × size` canvas.
pub fn mask_suite(seed: u64, count: usize, size: usize) -> Vec<(MaskShape, BitGrid)> {
    let mut rng = rng(seed);
    let s = size as f64;
    (0..count)
        .map(|i| {
            let c = Point2::new(rng.gen_range(0.4..0.6) * s, rng.gen_range(0.4..0.6) * s);
            match i % 3 {
                0 => (MaskShape::Disk, disk_mask(size, size, c, rng.gen_range(0.15..0.35) * s)),
                1 => {
                    let a = rng.gen_range(0.2..0.35) * s;
                    let b = a * rng.gen_range(0.5..0.9);
                    (MaskShape::Ellipse, ellipse_mask(size, size, c, a, b, rng.gen_range(0.0..TAU)))
                }
                _ => {
                    let hw = rng.gen_range(0.15..0.35) * s;
                    let hh = rng.gen_range(0.15..0.35) * s;
                    let r = rng.gen_range(0.2..0.5) * hw.min(hh);
                    (
                        MaskShape::RoundedBox,
                        rounded_box_mask(size, size, c.x - hw, c.y - hh, c.x + hw, c.y + hh, r),
                    )
                }
            }
        })
        .collect()
}
