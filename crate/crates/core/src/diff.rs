//! Gradients of piecewise-smooth objectives with frozen topology, and the
//! independent central-difference checker.
//!
//! An [`Objective`] is evaluated in two stages. [`Objective::freeze`] runs on
//! plain `f64` coordinates and records every discrete decision (crossing set,
//! in/out labels, containment kind, sort order, indicator pattern). The
//! smooth stage [`Objective::eval`] then replays that structure for any
//! [`Scalar`]. [`grad_of`] seeds one tangent per coordinate, [`LANES`] at a
//! time per forward pass; the checker
//! re-freezes at every probe so it shares nothing with the dual path except
//! the smooth kernel itself.

use serde::Serialize;

use crate::dual::{DualN, Scalar};
use crate::error::Result;

pub trait Objective {
    /// Discrete structure fixed at a primal point. Two probes with unequal
    /// topology straddle a branch boundary.
    type Topology: PartialEq;

    fn freeze(&self, coords: &[f64]) -> Result<Self::Topology>;

    fn eval<T: Scalar>(&self, topology: &Self::Topology, coords: &[T]) -> T;

    fn value(&self, coords: &[f64]) -> Result<f64> {
        let topo = self.freeze(coords)?;
        Ok(self.eval(&topo, coords))
    }
}

/// Value and gradient, same layout as the input coordinates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradReport {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// Tangent directions per forward pass.
pub const LANES: usize = 16;

/// Forward-mode gradient: one tangent per coordinate, all passes replaying
/// the topology frozen at `coords`.
pub fn grad_of<O: Objective>(f: &O, coords: &[f64]) -> Result<GradReport> {
    let topo = f.freeze(coords)?;
    Ok(grad_with_topology(f, &topo, coords))
}

pub(crate) fn grad_with_topology<O: Objective>(f: &O, topo: &O::Topology, coords: &[f64]) -> GradReport {
    let value = f.eval(topo, coords);
    let mut duals: Vec<DualN<LANES>> = coords.iter().map(|&c| DualN::constant(c)).collect();
    let mut grad = Vec::with_capacity(coords.len());
    for start in (0..coords.len()).step_by(LANES) {
        let end = (start + LANES).min(coords.len());
        for (lane, d) in duals[start..end].iter_mut().enumerate() {
            d.deriv[lane] = 1.0;
        }
        let out = f.eval(topo, &duals);
        grad.extend_from_slice(&out.deriv[..end - start]);
        for d in &mut duals[start..end] {
            d.deriv = [0.0; LANES];
        }
    }
    GradReport { value, grad }
}

#[derive(Clone, Debug, Serialize)]
pub struct FdEntry {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
    /// The topology differs at one of the probes, so the entry is excluded
    /// from the verdict.
    pub flagged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FdReport {
    pub value: f64,
    pub h: f64,
    pub rtol: f64,
    pub atol: f64,
    pub entries: Vec<FdEntry>,
}

impl FdReport {
    pub fn flagged_count(&self) -> usize {
        self.entries.iter().filter(|e| e.flagged).count()
    }

    pub fn max_rel_err(&self) -> f64 {
        self.entries
            .iter()
            .filter(|e| !e.flagged)
            .map(|e| e.rel_err)
            .fold(0.0, f64::max)
    }

    fn entry_ok(&self, e: &FdEntry) -> bool {
        e.flagged || e.rel_err <= self.rtol || (e.analytic - e.numeric).abs() <= self.atol
    }

    pub fn failures(&self) -> impl Iterator<Item = &FdEntry> {
        self.entries.iter().filter(|e| !self.entry_ok(e))
    }

    pub fn passed(&self) -> bool {
        self.failures().next().is_none()
    }
}

/// Absolute error floor below which a coordinate passes regardless of the
/// relative error (covers exact zeros on both sides).
pub const FD_ATOL: f64 = 1e-10;

/// Compares [`grad_of`] against `(f(x+h) - f(x-h)) / 2h`, coordinate by
/// coordinate.
pub fn finite_diff_check<O: Objective>(f: &O, coords: &[f64], h: f64, rtol: f64) -> Result<FdReport> {
    assert!(h > 0.0, "finite-difference step must be positive");
    let topo = f.freeze(coords)?;
    let report = grad_with_topology(f, &topo, coords);
    let mut probe = coords.to_vec();
    let mut entries = Vec::with_capacity(coords.len());
    for (i, &analytic) in report.grad.iter().enumerate() {
        probe[i] = coords[i] + h;
        let plus = f.freeze(&probe).map(|t| {
            let v = f.eval(&t, &probe);
            (v, t == topo)
        });
        probe[i] = coords[i] - h;
        let minus = f.freeze(&probe).map(|t| {
            let v = f.eval(&t, &probe);
            (v, t == topo)
        });
        probe[i] = coords[i];
        let entry = match (plus, minus) {
            (Ok((fp, same_p)), Ok((fm, same_m))) => {
                let numeric = (fp - fm) / (2.0 * h);
                let scale = analytic.abs().max(numeric.abs());
                let rel_err = if scale > 0.0 {
                    (analytic - numeric).abs() / scale
                } else {
                    0.0
                };
                FdEntry {
                    index: i,
                    analytic,
                    numeric,
                    rel_err,
                    flagged: !(same_p && same_m),
                }
            }
            // A probe that cannot be evaluated sits past a branch boundary.
            _ => FdEntry {
                index: i,
                analytic,
                numeric: f64::NAN,
                rel_err: f64::NAN,
                flagged: true,
            },
        };
        entries.push(entry);
    }
    Ok(FdReport {
        value: report.value,
        h,
        rtol,
        atol: FD_ATOL,
        entries,
    })
}
