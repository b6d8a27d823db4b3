use proptest::prelude::*;
use proptest::test_runner::RngSeed;
use rand::Rng;

use polyloss::clip::{intersection_area, weiler_atherton, IntersectionPolicy};
use polyloss::geom::{signed_area, Point2, Polygon};
use polyloss::repr::{decode, encode, encode_points, sort_by_angle, CoordSystem};
use polyloss::synth;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        rng_seed: RngSeed::Fixed(0x5eed),
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn polygon(seed: u64, n: usize) -> Polygon {
    let mut r = synth::rng(seed);
    let c = Point2::new(r.gen_range(-50.0..50.0), r.gen_range(-50.0..50.0));
    let radius = r.gen_range(1.0..30.0);
    synth::random_polygon(&mut r, n, c, radius)
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn reversal_negates_signed_area(seed in any::<u64>(), n in 3usize..40) {
        let p = polygon(seed, n);
        let mut ring = p.vertices().to_vec();
        let fwd = signed_area(&ring).unwrap();
        ring.reverse();
        prop_assert_eq!(signed_area(&ring).unwrap(), -fwd);
        prop_assert!(fwd > 0.0);
    }

    #[test]
    fn area_is_translation_invariant(seed in any::<u64>(), n in 3usize..40, vx in -7e3f64..7e3, vy in -7e3f64..7e3) {
        let p = polygon(seed, n);
        let q = p.translated(Point2::new(vx, vy));
        prop_assert!((q.area() - p.area()).abs() <= 1e-9 * (1.0 + p.area()));
    }

    #[test]
    fn area_scales_quadratically(seed in any::<u64>(), n in 3usize..40, e in -3.0f64..3.0) {
        let s = 10f64.powf(e);
        let p = polygon(seed, n);
        prop_assert!(rel_close(p.scaled(s).area(), s * s * p.area(), 1e-9));
    }

    #[test]
    fn clipping_is_symmetric_and_bounded(seed in any::<u64>()) {
        let (a, b) = synth::overlapping_pair(&mut synth::rng(seed), 3..=32, Point2::new(0.0, 0.0), 10.0);
        for pol in [IntersectionPolicy::Paper, IntersectionPolicy::Strict] {
            let ab = intersection_area(&a, &b, pol).unwrap();
            let ba = intersection_area(&b, &a, pol).unwrap();
            prop_assert!(rel_close(ab, ba, 1e-9), "{pol:?}: {ab} vs {ba}");
        }
        let m = a.area().min(b.area());
        prop_assert!(intersection_area(&a, &b, IntersectionPolicy::Strict).unwrap() <= m + 1e-9 * m);
    }

    #[test]
    fn self_intersection_is_identity(seed in any::<u64>(), n in 3usize..33) {
        let p = polygon(seed, n);
        for pol in [IntersectionPolicy::Paper, IntersectionPolicy::Strict] {
            prop_assert!(rel_close(intersection_area(&p, &p, pol).unwrap(), p.area(), 1e-9));
        }
    }

    #[test]
    fn clip_pieces_are_simple(seed in any::<u64>()) {
        let (a, b) = synth::overlapping_pair(&mut synth::rng(seed), 3..=32, Point2::new(0.0, 0.0), 10.0);
        let r = weiler_atherton(&a, &b).unwrap();
        for piece in &r.pieces {
            prop_assert!(piece.is_simple());
        }
        let total: f64 = r.pieces.iter().map(Polygon::area).sum();
        if !r.pieces.is_empty() {
            prop_assert!(rel_close(total, r.area, 1e-9));
        }
    }

    #[test]
    fn encode_decode_round_trip(seed in any::<u64>(), n in 3usize..33, polar in any::<bool>()) {
        let p = polygon(seed, n);
        let sys = if polar { CoordSystem::Polar } else { CoordSystem::Cartesian };
        let c = p.vertex_centroid();
        let q = decode(&encode(&p, c, sys)).unwrap();
        for (a, b) in p.vertices().iter().zip(q.vertices()) {
            prop_assert!(a.dist(*b) <= 1e-9, "{a:?} vs {b:?}");
        }
        prop_assert!(rel_close(q.area(), p.area(), 1e-9));
    }

    #[test]
    fn angle_sort_yields_simple_ring(seed in any::<u64>(), n in 3usize..33) {
        let mut r = synth::rng(seed);
        let c = Point2::new(r.gen_range(-5.0..5.0), r.gen_range(-5.0..5.0));
        let angles: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..std::f64::consts::TAU)).collect();
        let mut sorted = angles.clone();
        sorted.sort_by(f64::total_cmp);
        let max_gap = sorted
            .windows(2)
            .map(|w| w[1] - w[0])
            .chain([sorted[0] + std::f64::consts::TAU - sorted[n - 1]])
            .fold(0.0, f64::max);
        // Center strictly inside the hull.
        prop_assume!(max_gap < std::f64::consts::PI - 1e-3);
        let pts: Vec<Point2> = angles
            .iter()
            .map(|&a| {
                let rad = r.gen_range(0.5..5.0);
                Point2::new(c.x + rad * a.cos(), c.y + rad * a.sin())
            })
            .collect();
        for sys in [CoordSystem::Cartesian, CoordSystem::Polar] {
            let sorted = sort_by_angle(&encode_points(&pts, c, sys));
            prop_assert!(decode(&sorted).unwrap().is_simple());
        }
    }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn area_matches_monte_carlo(seed in any::<u64>(), n in 3usize..33) {
        let p = polygon(seed, n);
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for v in p.vertices() {
            x0 = x0.min(v.x);
            x1 = x1.max(v.x);
            y0 = y0.min(v.y);
            y1 = y1.max(v.y);
        }
        let box_area = (x1 - x0) * (y1 - y0);
        let k = 20_000;
        let mut r = synth::rng(seed ^ 0xabcd);
        let hits = (0..k)
            .filter(|_| p.contains(Point2::new(r.gen_range(x0..x1), r.gen_range(y0..y1))))
            .count();
        let frac = hits as f64 / k as f64;
        let estimate = frac * box_area;
        let se = box_area * (frac * (1.0 - frac) / k as f64).sqrt();
        prop_assert!((estimate - p.area()).abs() <= 3.0 * se.max(box_area / k as f64), "{} vs {} (se {se})", estimate, p.area());
    }
}
