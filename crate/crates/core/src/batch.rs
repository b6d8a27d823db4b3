//! Flat-buffer batch entry point for foreign callers.

use crate::error::{PolyError, Result};
use crate::geom::{Point2, Polygon};
use crate::loss::{poly_loss, LossConfig};
use crate::repr::{encode_points, CoordSystem, VertexCode};

#[derive(Clone, Debug, PartialEq)]
pub struct BatchRequest {
    pub count: usize,
    pub n_vertices: usize,
    /// `count × 2N` prediction coordinates.
    pub pred_coords: Vec<f64>,
    /// `count × 2` centers.
    pub centers: Vec<f64>,
    /// All GT vertices as `x, y` pairs, instance after instance.
    pub gt_vertices: Vec<f64>,
    /// `count + 1` vertex offsets into `gt_vertices`; instance `i` owns
    /// vertices `gt_offsets[i]..gt_offsets[i + 1]`.
    pub gt_offsets: Vec<usize>,
    pub system: CoordSystem,
    pub config: LossConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchOutput {
    pub losses: Vec<f64>,
    /// `count × 2N`.
    pub grads: Vec<f64>,
}

impl BatchRequest {
    pub fn validate(&self) -> Result<()> {
        let two_n = 2 * self.n_vertices;
        let bad = |what: &str| Err(PolyError::ShapeMismatch(what.to_string()));
        if self.n_vertices < 3 {
            return bad("n_vertices below 3");
        }
        if self.pred_coords.len() != self.count * two_n {
            return bad("pred_coords length is not count x 2N");
        }
        if self.centers.len() != 2 * self.count {
            return bad("centers length is not count x 2");
        }
        if self.gt_offsets.len() != self.count + 1 || self.gt_offsets.first() != Some(&0) {
            return bad("gt_offsets must hold count + 1 entries starting at 0");
        }
        if self.gt_offsets.windows(2).any(|w| w[1] < w[0]) {
            return bad("gt_offsets must be non-decreasing");
        }
        if self.gt_vertices.len() != 2 * self.gt_offsets[self.count] {
            return bad("gt_vertices length disagrees with gt_offsets");
        }
        self.config.validate()
    }

    /// Instance `i` as the arguments of [`poly_loss`].
    pub fn instance(&self, i: usize) -> Result<(VertexCode, Polygon, VertexCode)> {
        let two_n = 2 * self.n_vertices;
        let center = Point2::try_new(self.centers[2 * i], self.centers[2 * i + 1])?;
        let pred = VertexCode::new(center, self.pred_coords[i * two_n..(i + 1) * two_n].to_vec(), self.system)?;
        let pts: Vec<Point2> = self.gt_vertices[2 * self.gt_offsets[i]..2 * self.gt_offsets[i + 1]]
            .chunks_exact(2)
            .map(|c| Point2::new(c[0], c[1]))
            .collect();
        let gt_code = encode_points(&pts, center, self.system);
        let gt = Polygon::from_ring_lossy(pts)?;
        Ok((pred, gt, gt_code))
    }
}

/// Runs [`poly_loss`] on every instance, in order. The first failing
/// instance aborts the batch and no output is produced.
pub fn batch_poly_loss(req: &BatchRequest) -> Result<BatchOutput> {
    req.validate()?;
    let two_n = 2 * req.n_vertices;
    let mut out = BatchOutput {
        losses: Vec::with_capacity(req.count),
        grads: Vec::with_capacity(req.count * two_n),
    };
    for i in 0..req.count {
        let (pred, gt, gt_code) = req.instance(i).map_err(|e| PolyError::instance("batch", i, e))?;
        let r = poly_loss(&pred, &gt, &gt_code, &req.config).map_err(|e| PolyError::instance("batch", i, e))?;
        out.losses.push(r.total);
        out.grads.extend_from_slice(&r.grad);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_squares(count: usize) -> BatchRequest {
        // Pred square (0,0)-(2,2) about (1,1); GT square (1,1)-(3,3).
        let pred = [-1.0, -1.0, 1.0, -1.0, 1.0, 1.0, -1.0, 1.0];
        let gt = [1.0, 1.0, 3.0, 1.0, 3.0, 3.0, 1.0, 3.0];
        BatchRequest {
            count,
            n_vertices: 4,
            pred_coords: pred.repeat(count),
            centers: [1.0, 1.0].repeat(count),
            gt_vertices: gt.repeat(count),
            gt_offsets: (0..=count).map(|i| 4 * i).collect(),
            system: CoordSystem::Cartesian,
            config: LossConfig::iou_only(),
        }
    }

    #[test]
    fn replicated_fixture() {
        let out = batch_poly_loss(&two_squares(64)).unwrap();
        assert_eq!(out.losses.len(), 64);
        assert!(out.losses.iter().all(|&l| (l - 6.0 / 7.0).abs() < 1e-12));
        assert_eq!(out.grads.len(), 64 * 8);
        assert!(out.grads.chunks(8).all(|g| g == &out.grads[..8]));
    }

    #[test]
    fn identical_gives_zero() {
        let mut req = two_squares(1);
        req.gt_vertices = vec![0.0, 0.0, 2.0, 0.0, 2.0, 2.0, 0.0, 2.0];
        req.config = LossConfig::default();
        let out = batch_poly_loss(&req).unwrap();
        assert_eq!(out.losses, vec![0.0]);
    }

    #[test]
    fn matches_single_instance() {
        let req = two_squares(3);
        let out = batch_poly_loss(&req).unwrap();
        let (p, g, gc) = req.instance(1).unwrap();
        let single = poly_loss(&p, &g, &gc, &req.config).unwrap();
        assert_eq!(out.losses[1].to_bits(), single.total.to_bits());
        assert_eq!(&out.grads[8..16], single.grad.as_slice());
    }

    #[test]
    fn inconsistent_lengths() {
        let mut req = two_squares(2);
        req.pred_coords.pop();
        assert!(matches!(batch_poly_loss(&req), Err(PolyError::ShapeMismatch(_))));
        let mut req = two_squares(2);
        req.gt_offsets[2] = 9;
        assert!(batch_poly_loss(&req).is_err());
    }
}
