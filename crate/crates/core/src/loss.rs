//! Polygon-head losses: polygonal IoU, L1 vertex regression and the
//! angle-order penalty, plus their weighted combination.
//!
//! Every loss is an [`Objective`], so gradients come from the frozen-topology
//! forward passes in [`crate::diff`] and can be checked against central
//! differences with [`crate::diff::finite_diff_check`].

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::clip::{clip_topology_unchecked, ClipTopology, IntersectionPolicy};
use crate::diff::{grad_of, GradReport, Objective};
use crate::dual::Scalar;
use crate::error::{PolyError, Result};
use crate::geom::{Polygon, V2};
use crate::repr::{decode_points_permuted, sorted_angle_keys, sorted_ring_is_star, CoordSystem, VertexCode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossTerm {
    L1,
    Iou,
    Order,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub l1: f64,
    pub iou: f64,
    pub order: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            l1: 1.0,
            iou: 1.0,
            order: 1.0,
        }
    }
}

/// Which terms make up the polygon loss. The default is L1 + IoU with equal
/// weights and the `Paper` intersection policy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub use_l1: bool,
    pub use_iou: bool,
    pub use_order: bool,
    pub intersection_policy: IntersectionPolicy,
    pub weights: LossWeights,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            use_l1: true,
            use_iou: true,
            use_order: false,
            intersection_policy: IntersectionPolicy::Paper,
            weights: LossWeights::default(),
        }
    }
}

impl LossConfig {
    pub fn iou_only() -> Self {
        LossConfig {
            use_l1: false,
            use_order: false,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.use_l1 || self.use_iou || self.use_order) {
            return Err(PolyError::InvalidConfig("no loss term enabled".into()));
        }
        let w = self.weights;
        if [w.l1, w.iou, w.order].iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(PolyError::InvalidConfig("weights must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LossReport {
    pub total: f64,
    pub per_term: BTreeMap<LossTerm, f64>,
    /// d(total)/d(pred coords), same layout as the prediction code.
    pub grad: Vec<f64>,
}

impl LossReport {
    fn single(term: LossTerm, g: GradReport) -> Self {
        LossReport {
            total: g.value,
            per_term: BTreeMap::from([(term, g.value)]),
            grad: g.grad,
        }
    }
}

/// `1 - IoU` between the angle-sorted decoded prediction and a fixed
/// ground-truth polygon, as a function of the prediction's coordinates.
pub struct IouObjective<'a> {
    center: crate::geom::Point2,
    system: CoordSystem,
    gt: &'a Polygon,
    gt_pts: Vec<V2<f64>>,
    policy: IntersectionPolicy,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IouTopology {
    /// Angle-sort permutation applied before clipping.
    pub order: Vec<usize>,
    pub clip: ClipTopology,
}

impl<'a> IouObjective<'a> {
    pub fn new(pred: &VertexCode, gt: &'a Polygon, policy: IntersectionPolicy) -> Result<Self> {
        if !gt.is_simple() {
            return Err(PolyError::NotSimple("ground truth"));
        }
        Ok(IouObjective {
            center: pred.center,
            system: pred.system,
            gt,
            gt_pts: gt.vertices().iter().map(|&p| V2::constant(p)).collect(),
            policy,
        })
    }
}

impl Objective for IouObjective<'_> {
    type Topology = IouTopology;

    fn freeze(&self, coords: &[f64]) -> Result<IouTopology> {
        let (order, keys) = sorted_angle_keys(self.center, coords, self.system);
        let mut pts = Vec::with_capacity(order.len());
        decode_points_permuted(self.center, coords, self.system, &order, &mut pts);
        let pred = Polygon::new(pts.into_iter().map(V2::value).collect())?;
        if !sorted_ring_is_star(&keys, pred.diameter()) && !pred.is_simple() {
            return Err(PolyError::NotSimple("angle-sorted prediction"));
        }
        let clip = clip_topology_unchecked(pred.vertices(), self.gt.vertices())?;
        Ok(IouTopology { order, clip })
    }

    fn eval<T: Scalar>(&self, topo: &IouTopology, coords: &[T]) -> T {
        let mut pred = Vec::with_capacity(topo.order.len());
        decode_points_permuted(self.center, coords, self.system, &topo.order, &mut pred);
        let gt: Vec<V2<T>> = self.gt_pts.iter().map(|p| V2::new(T::constant(p.x), T::constant(p.y))).collect();
        let a_pred = topo.clip.subject_area(&pred);
        let a_gt = T::constant(topo.clip.clip_area(&self.gt_pts));
        let inter = topo.clip.intersection_area_with(&pred, &gt, a_pred, a_gt, self.policy);
        let union = a_pred + a_gt - inter;
        -(inter / union) + 1.0
    }
}

/// Mean absolute difference between two codes' coordinates.
pub struct L1Objective<'a> {
    target: &'a [f64],
}

impl<'a> L1Objective<'a> {
    pub fn new(target: &'a [f64]) -> Self {
        L1Objective { target }
    }
}

impl Objective for L1Objective<'_> {
    /// Sign of each residual.
    type Topology = Vec<i8>;

    fn freeze(&self, coords: &[f64]) -> Result<Vec<i8>> {
        if coords.len() != self.target.len() {
            return Err(PolyError::ShapeMismatch(format!(
                "{} coordinates vs {} in target",
                coords.len(),
                self.target.len()
            )));
        }
        Ok(coords
            .iter()
            .zip(self.target)
            .map(|(c, t)| match (c - t).partial_cmp(&0.0) {
                Some(std::cmp::Ordering::Greater) => 1,
                Some(std::cmp::Ordering::Less) => -1,
                _ => 0,
            })
            .collect())
    }

    fn eval<T: Scalar>(&self, signs: &Vec<i8>, coords: &[T]) -> T {
        let mut acc = T::zero();
        for ((c, t), s) in coords.iter().zip(self.target).zip(signs) {
            acc += (*c - *t) * f64::from(*s);
        }
        acc * (1.0 / coords.len() as f64)
    }
}

/// Inversion plus spread penalty over the polar angles of a code, in stored
/// vertex order.
pub struct OrderObjective;

#[derive(Clone, Debug, PartialEq)]
pub struct OrderTopology {
    /// `(j, i)` pairs, `j < i`, with `theta_i < theta_j`.
    pub inversions: Vec<(usize, usize)>,
    /// `(j, i)` pairs, `j < i`, with `theta_i - theta_j > 2π`.
    pub spreads: Vec<(usize, usize)>,
}

impl Objective for OrderObjective {
    type Topology = OrderTopology;

    fn freeze(&self, coords: &[f64]) -> Result<OrderTopology> {
        let n = coords.len() / 2;
        let theta = |i: usize| coords[2 * i + 1];
        let mut topo = OrderTopology {
            inversions: Vec::new(),
            spreads: Vec::new(),
        };
        for j in 0..n {
            for i in (j + 1)..n {
                let d = theta(i) - theta(j);
                if d < 0.0 {
                    topo.inversions.push((j, i));
                } else if d > TAU {
                    topo.spreads.push((j, i));
                }
            }
        }
        Ok(topo)
    }

    fn eval<T: Scalar>(&self, topo: &OrderTopology, coords: &[T]) -> T {
        let theta = |i: usize| coords[2 * i + 1];
        let mut acc = T::zero();
        for &(j, i) in &topo.inversions {
            acc += theta(j) - theta(i);
        }
        for &(j, i) in &topo.spreads {
            acc += theta(i) - theta(j);
        }
        acc
    }
}

/// Polygonal IoU loss. The prediction is angle-sorted internally; the
/// returned gradient follows the caller's vertex order.
pub fn iou_loss(pred: &VertexCode, gt: &Polygon, policy: IntersectionPolicy) -> Result<LossReport> {
    let f = IouObjective::new(pred, gt, policy)?;
    Ok(LossReport::single(LossTerm::Iou, grad_of(&f, &pred.coords)?))
}

/// Mean absolute coordinate difference.
pub fn l1_loss(pred: &VertexCode, gt_code: &VertexCode) -> Result<LossReport> {
    check_same_shape(pred, gt_code)?;
    let f = L1Objective::new(&gt_code.coords);
    Ok(LossReport::single(LossTerm::L1, grad_of(&f, &pred.coords)?))
}

/// Angle-order loss; polar codes only. Gradient is zero on the radii.
pub fn order_loss(pred: &VertexCode) -> Result<LossReport> {
    if pred.system != CoordSystem::Polar {
        return Err(PolyError::WrongSystem);
    }
    Ok(LossReport::single(LossTerm::Order, grad_of(&OrderObjective, &pred.coords)?))
}

fn check_same_shape(a: &VertexCode, b: &VertexCode) -> Result<()> {
    if a.system != b.system {
        return Err(PolyError::ShapeMismatch(format!(
            "{:?} prediction vs {:?} target",
            a.system, b.system
        )));
    }
    if a.coords.len() != b.coords.len() {
        return Err(PolyError::ShapeMismatch(format!(
            "{} vertices vs {} in target",
            a.n_vertices(),
            b.n_vertices()
        )));
    }
    Ok(())
}

/// Weighted sum of the enabled terms; gradients add coordinate-wise.
pub fn poly_loss(pred: &VertexCode, gt: &Polygon, gt_code: &VertexCode, cfg: &LossConfig) -> Result<LossReport> {
    cfg.validate()?;
    let mut report = LossReport {
        total: 0.0,
        per_term: BTreeMap::new(),
        grad: vec![0.0; pred.coords.len()],
    };
    let mut add = |term: LossTerm, weight: f64, r: LossReport| {
        report.total += weight * r.total;
        report.per_term.insert(term, r.total);
        for (g, d) in report.grad.iter_mut().zip(&r.grad) {
            *g += weight * d;
        }
    };
    if cfg.use_l1 {
        add(LossTerm::L1, cfg.weights.l1, l1_loss(pred, gt_code)?);
    }
    if cfg.use_iou {
        add(LossTerm::Iou, cfg.weights.iou, iou_loss(pred, gt, cfg.intersection_policy)?);
    }
    if cfg.use_order {
        add(LossTerm::Order, cfg.weights.order, order_loss(pred)?);
    }
    Ok(report)
}
