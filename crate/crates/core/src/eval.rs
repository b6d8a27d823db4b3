//! COCO-style mask AP over polygon instances, and the oracle protocol that
//! pairs every ground-truth center with the polygon predicted there.
//!
//! IoU is measured on rasterized masks at image resolution, never by polygon
//! clipping.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{PolyError, Result};
use crate::geom::{Point2, Polygon};
use crate::raster::{rasterize, BitGrid};
use crate::repr::{encode, CoordSystem, VertexCode};

/// Matching radius for oracle evaluation, in pixels.
pub const ORACLE_RADIUS: f64 = 3.0;

/// Recall sample count for the interpolated PR curve.
pub const RECALL_POINTS: usize = 101;

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceRecord {
    pub image_id: String,
    pub category: String,
    pub score: f64,
    pub center: Point2,
    pub polygon: Polygon,
    pub depth: Option<f64>,
    /// Ground truth given as pixels. When present it is scored instead of
    /// the rasterized polygon and fixes the image size.
    pub mask: Option<Arc<BitGrid>>,
}

impl InstanceRecord {
    pub fn new(image_id: impl Into<String>, category: impl Into<String>, score: f64, polygon: Polygon) -> Self {
        InstanceRecord {
            image_id: image_id.into(),
            category: category.into(),
            score,
            center: polygon.vertex_centroid(),
            polygon,
            depth: None,
            mask: None,
        }
    }
}

/// `0.50, 0.55, …, 0.95`.
pub fn coco_thresholds() -> Vec<f64> {
    (0..10).map(|k| (50 + 5 * k) as f64 / 100.0).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    pub thresholds: Vec<f64>,
    /// Raster size per image id.
    pub sizes: BTreeMap<String, (usize, usize)>,
    /// Used for images missing from `sizes`. Without either, the size is the
    /// smallest grid containing every polygon of the image.
    pub default_size: Option<(usize, usize)>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            thresholds: coco_thresholds(),
            sizes: BTreeMap::new(),
            default_size: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalResult {
    pub per_category_ap: BTreeMap<String, f64>,
    pub per_category_ap50: BTreeMap<String, f64>,
    pub ap: f64,
    pub ap50: f64,
    /// Keyed by the threshold printed with two decimals.
    pub per_threshold: BTreeMap<String, f64>,
    /// Categories that only occur among predictions. They score 0.
    pub empty_categories: Vec<String>,
}

fn threshold_key(t: f64) -> String {
    format!("{t:.2}")
}

impl EvalResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("eval result serializes")
    }

    pub fn to_table(&self) -> String {
        let width = self
            .per_category_ap
            .keys()
            .map(String::len)
            .chain(["category".len(), "mean".len()])
            .max()
            .unwrap_or(8);
        let mut s = String::new();
        let _ = writeln!(s, "{:<width$}  {:>7}  {:>7}", "category", "AP", "AP50");
        for (c, ap) in &self.per_category_ap {
            let mark = if self.empty_categories.contains(c) { "  (no ground truth)" } else { "" };
            let _ = writeln!(s, "{c:<width$}  {ap:>7.4}  {:>7.4}{mark}", self.per_category_ap50[c]);
        }
        let _ = writeln!(s, "{:<width$}  {:>7.4}  {:>7.4}", "mean", self.ap, self.ap50);
        s.push('\n');
        let _ = writeln!(s, "{:<9}  {:>7}", "threshold", "AP");
        for (t, ap) in &self.per_threshold {
            let _ = writeln!(s, "{t:<9}  {ap:>7.4}");
        }
        s
    }
}

/// IoUs between same-category prediction/GT pairs of one image.
struct ImageIous {
    preds: Vec<usize>,
    gts: Vec<usize>,
    /// `iou[p][g]` over the local indices; `None` across categories.
    iou: Vec<Vec<Option<f64>>>,
}

fn image_size(image_id: &str, preds: &[&InstanceRecord], gts: &[&InstanceRecord], opts: &EvalOptions) -> Result<(usize, usize)> {
    if let Some(m) = gts.iter().find_map(|g| g.mask.as_ref()) {
        return Ok((m.width(), m.height()));
    }
    if let Some(&s) = opts.sizes.get(image_id) {
        return Ok(s);
    }
    if let Some(s) = opts.default_size {
        return Ok(s);
    }
    let (mut w, mut h) = (1.0f64, 1.0f64);
    for r in preds.iter().chain(gts) {
        for v in r.polygon.vertices() {
            w = w.max(v.x.ceil() + 1.0);
            h = h.max(v.y.ceil() + 1.0);
        }
    }
    Ok((w as usize, h as usize))
}

fn image_ious(
    image_id: &str,
    pred_idx: Vec<usize>,
    gt_idx: Vec<usize>,
    preds: &[InstanceRecord],
    gts: &[InstanceRecord],
    opts: &EvalOptions,
) -> Result<ImageIous> {
    let p: Vec<&InstanceRecord> = pred_idx.iter().map(|&i| &preds[i]).collect();
    let g: Vec<&InstanceRecord> = gt_idx.iter().map(|&i| &gts[i]).collect();
    let (w, h) = image_size(image_id, &p, &g, opts)?;
    let masks = |rs: &[&InstanceRecord]| -> Result<Vec<Arc<BitGrid>>> {
        rs.iter()
            .map(|r| match &r.mask {
                Some(m) if m.width() == w && m.height() == h => Ok(m.clone()),
                Some(m) => Err(PolyError::ShapeMismatch(format!(
                    "image {image_id}: {}x{} mask in a {w}x{h} image",
                    m.width(),
                    m.height()
                ))),
                None => Ok(Arc::new(rasterize(&r.polygon, w, h)?)),
            })
            .collect()
    };
    let pm = masks(&p)?;
    let gm = masks(&g)?;
    let gcount: Vec<u64> = gm.iter().map(|m| m.count()).collect();
    let mut iou = Vec::with_capacity(p.len());
    for (pi, pr) in p.iter().enumerate() {
        let pc = pm[pi].count();
        let row = g
            .iter()
            .enumerate()
            .map(|(gi, gr)| {
                (gr.category == pr.category).then(|| {
                    let (inter, _) = pm[pi].overlap_counts(&gm[gi]).expect("same raster size");
                    let union = pc + gcount[gi] - inter;
                    if union == 0 {
                        1.0
                    } else {
                        inter as f64 / union as f64
                    }
                })
            })
            .collect();
        iou.push(row);
    }
    Ok(ImageIous {
        preds: pred_idx,
        gts: gt_idx,
        iou,
    })
}

/// 101-point interpolated AP of one ranked detection list.
fn interpolated_ap(tp: &[bool], n_gt: usize) -> f64 {
    let mut recall = Vec::with_capacity(tp.len());
    let mut precision = Vec::with_capacity(tp.len());
    let mut hits = 0usize;
    for (k, &t) in tp.iter().enumerate() {
        hits += usize::from(t);
        recall.push(hits as f64 / n_gt as f64);
        precision.push(hits as f64 / (k + 1) as f64);
    }
    // Precision envelope: best precision at any recall at least this high.
    for k in (1..precision.len()).rev() {
        if precision[k] > precision[k - 1] {
            precision[k - 1] = precision[k];
        }
    }
    let mut sum = 0.0;
    for i in 0..RECALL_POINTS {
        let r = i as f64 / (RECALL_POINTS - 1) as f64;
        let k = recall.partition_point(|&x| x < r);
        if k < precision.len() {
            sum += precision[k];
        }
    }
    sum / RECALL_POINTS as f64
}

/// Mask AP. Predictions are ranked by descending score; equal scores keep
/// their input order. Each prediction takes the unmatched same-category GT
/// of its image with the highest IoU at or above the threshold.
pub fn average_precision(preds: &[InstanceRecord], gts: &[InstanceRecord], opts: &EvalOptions) -> Result<EvalResult> {
    if opts.thresholds.is_empty() || opts.thresholds.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
        return Err(PolyError::InvalidConfig("IoU thresholds must lie in (0, 1]".into()));
    }
    let t50 = opts
        .thresholds
        .iter()
        .position(|&t| t == 0.5)
        .ok_or_else(|| PolyError::InvalidConfig("thresholds must include 0.50".into()))?;
    for r in preds {
        if !(0.0..=1.0).contains(&r.score) {
            return Err(PolyError::InvalidConfig(format!("score {} outside [0, 1]", r.score)));
        }
    }

    let mut by_image: BTreeMap<&str, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (i, r) in preds.iter().enumerate() {
        by_image.entry(&r.image_id).or_default().0.push(i);
    }
    for (i, r) in gts.iter().enumerate() {
        by_image.entry(&r.image_id).or_default().1.push(i);
    }
    let images: Vec<ImageIous> = by_image
        .into_par_iter()
        .map(|(id, (p, g))| image_ious(id, p, g, preds, gts, opts))
        .collect::<Result<_>>()?;

    // Where each prediction lives: (image slot, local index).
    let mut pred_loc = vec![(0usize, 0usize); preds.len()];
    for (s, img) in images.iter().enumerate() {
        for (l, &p) in img.preds.iter().enumerate() {
            pred_loc[p] = (s, l);
        }
    }
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].score.total_cmp(&preds[a].score));

    let mut categories: BTreeMap<&str, usize> = BTreeMap::new();
    for r in preds {
        categories.entry(&r.category).or_insert(0);
    }
    for r in gts {
        *categories.entry(&r.category).or_insert(0) += 1;
    }

    let nt = opts.thresholds.len();
    let mut per_category_ap = BTreeMap::new();
    let mut per_category_ap50 = BTreeMap::new();
    let mut threshold_sums = vec![0.0; nt];
    let mut empty_categories = Vec::new();
    for (&cat, &n_gt) in &categories {
        let ranked: Vec<usize> = order.iter().copied().filter(|&i| preds[i].category == cat).collect();
        let mut aps = vec![0.0; nt];
        if n_gt == 0 {
            empty_categories.push(cat.to_string());
        } else {
            for (ti, &t) in opts.thresholds.iter().enumerate() {
                let mut taken: Vec<Vec<bool>> = images.iter().map(|img| vec![false; img.gts.len()]).collect();
                let tp: Vec<bool> = ranked
                    .iter()
                    .map(|&p| {
                        let (s, l) = pred_loc[p];
                        let mut best: Option<(usize, f64)> = None;
                        for (g, iou) in images[s].iou[l].iter().enumerate() {
                            let Some(iou) = *iou else { continue };
                            if taken[s][g] || iou < t {
                                continue;
                            }
                            if best.is_none_or(|(_, b)| iou > b) {
                                best = Some((g, iou));
                            }
                        }
                        match best {
                            Some((g, _)) => {
                                taken[s][g] = true;
                                true
                            }
                            None => false,
                        }
                    })
                    .collect();
                aps[ti] = interpolated_ap(&tp, n_gt);
            }
        }
        for (sum, ap) in threshold_sums.iter_mut().zip(&aps) {
            *sum += ap;
        }
        per_category_ap.insert(cat.to_string(), aps.iter().sum::<f64>() / nt as f64);
        per_category_ap50.insert(cat.to_string(), aps[t50]);
    }

    let nc = categories.len().max(1) as f64;
    let per_threshold: BTreeMap<String, f64> = opts
        .thresholds
        .iter()
        .zip(&threshold_sums)
        .map(|(&t, s)| (threshold_key(t), s / nc))
        .collect();
    let ap = per_category_ap.values().sum::<f64>() / nc;
    let ap50 = threshold_sums[t50] / nc;
    Ok(EvalResult {
        per_category_ap,
        per_category_ap50,
        ap,
        ap50,
        per_threshold,
        empty_categories,
    })
}

/// Source of polygon predictions addressed by object center.
pub trait PolygonField {
    fn code_at(&self, image_id: &str, center: Point2) -> Option<VertexCode>;
}

impl<F: Fn(&str, Point2) -> Option<VertexCode>> PolygonField for F {
    fn code_at(&self, image_id: &str, center: Point2) -> Option<VertexCode> {
        self(image_id, center)
    }
}

/// Predictions looked up by the nearest predicted center within a radius.
#[derive(Clone, Debug, Default)]
pub struct NearestCenterField {
    by_image: BTreeMap<String, Vec<VertexCode>>,
    pub radius: f64,
}

impl NearestCenterField {
    pub fn from_records(preds: &[InstanceRecord], radius: f64) -> Self {
        let mut by_image: BTreeMap<String, Vec<VertexCode>> = BTreeMap::new();
        for r in preds {
            by_image
                .entry(r.image_id.clone())
                .or_default()
                .push(encode(&r.polygon, r.center, CoordSystem::Cartesian));
        }
        NearestCenterField { by_image, radius }
    }
}

impl PolygonField for NearestCenterField {
    fn code_at(&self, image_id: &str, center: Point2) -> Option<VertexCode> {
        let codes = self.by_image.get(image_id)?;
        let mut best: Option<(&VertexCode, f64)> = None;
        for c in codes {
            let d = c.center.dist(center);
            if d <= self.radius && best.is_none_or(|(_, b)| d < b) {
                best = Some((c, d));
            }
        }
        best.map(|(c, _)| c.clone())
    }
}

/// Scores the polygon field with perfect detection: one score-1 prediction
/// per GT instance, read from the field at the GT center.
pub fn oracle_eval(gts: &[InstanceRecord], field: &impl PolygonField, opts: &EvalOptions) -> Result<EvalResult> {
    let preds = gts
        .iter()
        .map(|g| {
            let code = field.code_at(&g.image_id, g.center).ok_or(PolyError::MissingCenter {
                x: g.center.x,
                y: g.center.y,
            })?;
            Ok(InstanceRecord {
                image_id: g.image_id.clone(),
                category: g.category.clone(),
                score: 1.0,
                center: g.center,
                polygon: Polygon::from_ring_lossy(code.points())?,
                depth: None,
                mask: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    average_precision(&preds, gts, opts)
}
