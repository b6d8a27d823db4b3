//! Latency of one IoU-loss value+gradient evaluation.

use std::time::Instant;

use serde::Serialize;

use crate::clip::IntersectionPolicy;
use crate::error::{PolyError, Result};
use crate::loss::iou_loss;
use crate::repr::{encode, CoordSystem, VertexCode};
use crate::synth;
use crate::geom::Polygon;

const WARMUP_ROUNDS: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub pairs: usize,
    pub n_vertices: usize,
    pub seed: u64,
    pub median_us: f64,
    pub p99_us: f64,
    pub mean_us: f64,
    /// Pairs whose clipping topology could not be resolved.
    pub failures: usize,
    /// Sum of loss values; identical across runs with the same seed.
    pub checksum: f64,
}

/// Random overlapping star pairs as `(pred code, gt polygon)`.
pub fn bench_pairs(pairs: usize, n_vertices: usize, seed: u64) -> Vec<(VertexCode, Polygon)> {
    let mut rng = synth::rng(seed);
    (0..pairs)
        .map(|_| {
            let (pred, gt, c) = synth::star_pair(&mut rng, n_vertices, 50.0);
            (encode(&pred, c, CoordSystem::Cartesian), gt)
        })
        .collect()
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let k = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[k]
}

/// Times `iou_loss` on every pair, single-threaded, after a warm-up pass.
pub fn bench(pairs: usize, n_vertices: usize, seed: u64) -> Result<BenchReport> {
    if pairs == 0 {
        return Err(PolyError::InvalidConfig("pair count must be positive".into()));
    }
    if n_vertices < 3 {
        return Err(PolyError::InvalidConfig("need at least 3 vertices".into()));
    }
    let data = bench_pairs(pairs, n_vertices, seed);
    let policy = IntersectionPolicy::Strict;
    for _ in 0..WARMUP_ROUNDS {
        for (pred, gt) in data.iter().take(256) {
            let _ = std::hint::black_box(iou_loss(pred, gt, policy));
        }
    }
    let mut times = Vec::with_capacity(pairs);
    let mut checksum = 0.0;
    let mut failures = 0;
    for (pred, gt) in &data {
        let t0 = Instant::now();
        let r = std::hint::black_box(iou_loss(std::hint::black_box(pred), gt, policy));
        times.push(t0.elapsed().as_secs_f64() * 1e6);
        match r {
            Ok(r) => checksum += r.total,
            Err(_) => failures += 1,
        }
    }
    let mean_us = times.iter().sum::<f64>() / times.len() as f64;
    times.sort_by(f64::total_cmp);
    Ok(BenchReport {
        pairs,
        n_vertices,
        seed,
        median_us: percentile(&times, 0.5),
        p99_us: percentile(&times, 0.99),
        mean_us,
        failures,
        checksum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_checksum() {
        let a = bench(50, 8, 11).unwrap();
        let b = bench(50, 8, 11).unwrap();
        assert_eq!(a.checksum, b.checksum);
        assert_eq!(a.failures, 0);
        assert!(a.median_us > 0.0 && a.p99_us >= a.median_us);
        assert!(bench(0, 8, 1).is_err());
    }
}
