//! Binary masks and scanline polygon fill.

use crate::error::{PolyError, Result};
use crate::geom::Polygon;

/// Row-major bit mask. Each row starts on a fresh `u64` word.
#[derive(Clone, PartialEq, Eq)]
pub struct BitGrid {
    width: usize,
    height: usize,
    stride: usize,
    words: Vec<u64>,
}

impl std::fmt::Debug for BitGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BitGrid({}x{}, {} set)", self.width, self.height, self.count())
    }
}

impl BitGrid {
    pub fn new(width: usize, height: usize) -> Self {
        let stride = width.div_ceil(64);
        BitGrid {
            width,
            height,
            stride,
            words: vec![0; stride * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut g = BitGrid::new(width, height);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    g.set(x, y, true);
                }
            }
        }
        g
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        debug_assert!(x < self.width && y < self.height);
        self.words[y * self.stride + x / 64] >> (x % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        let w = &mut self.words[y * self.stride + x / 64];
        let bit = 1u64 << (x % 64);
        if on {
            *w |= bit;
        } else {
            *w &= !bit;
        }
    }

    /// Sets pixels `x0..x1` on row `y`.
    pub fn fill_span(&mut self, y: usize, x0: usize, x1: usize) {
        if x0 >= x1 {
            return;
        }
        let row = &mut self.words[y * self.stride..(y + 1) * self.stride];
        let (w0, w1) = (x0 / 64, (x1 - 1) / 64);
        let lo = !0u64 << (x0 % 64);
        let hi = !0u64 >> (63 - (x1 - 1) % 64);
        if w0 == w1 {
            row[w0] |= lo & hi;
        } else {
            row[w0] |= lo;
            for w in &mut row[w0 + 1..w1] {
                *w = !0;
            }
            row[w1] |= hi;
        }
    }

    pub fn count(&self) -> u64 {
        self.words.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Bounding box of the set pixels as `(x0, y0, x1, y1)`, inclusive.
    pub fn bbox(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bb: Option<(usize, usize, usize, usize)> = None;
        for y in 0..self.height {
            let row = &self.words[y * self.stride..(y + 1) * self.stride];
            let first = row.iter().position(|&w| w != 0);
            let Some(first) = first else { continue };
            let last = row.iter().rposition(|&w| w != 0).unwrap_or(first);
            let xa = first * 64 + row[first].trailing_zeros() as usize;
            let xb = last * 64 + 63 - row[last].leading_zeros() as usize;
            bb = Some(match bb {
                None => (xa, y, xb, y),
                Some((x0, y0, x1, _)) => (x0.min(xa), y0, x1.max(xb), y),
            });
        }
        bb
    }

    /// `(|a ∧ b|, |a ∨ b|)`.
    pub fn overlap_counts(&self, other: &BitGrid) -> Result<(u64, u64)> {
        if self.width != other.width || self.height != other.height {
            return Err(PolyError::ShapeMismatch(format!(
                "{}x{} vs {}x{} grid",
                self.width, self.height, other.width, other.height
            )));
        }
        let (mut inter, mut union) = (0u64, 0u64);
        for (a, b) in self.words.iter().zip(&other.words) {
            inter += u64::from((a & b).count_ones());
            union += u64::from((a | b).count_ones());
        }
        Ok((inter, union))
    }
}

/// Even-odd scanline fill. A pixel is set when its center `(x + 0.5, y + 0.5)`
/// is inside; centers exactly on a left or top edge count as inside.
pub fn rasterize(p: &Polygon, width: usize, height: usize) -> Result<BitGrid> {
    if width == 0 || height == 0 {
        return Err(PolyError::ShapeMismatch("raster dimensions must be positive".into()));
    }
    let mut grid = BitGrid::new(width, height);
    let verts = p.vertices();
    let n = verts.len();
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in verts {
        ymin = ymin.min(v.y);
        ymax = ymax.max(v.y);
    }
    let row0 = (ymin - 0.5).ceil().max(0.0) as usize;
    let row1 = ((ymax - 0.5).ceil().max(0.0) as usize).min(height);
    let mut xs = Vec::with_capacity(n);
    for y in row0..row1 {
        let yc = y as f64 + 0.5;
        xs.clear();
        for i in 0..n {
            let a = verts[i];
            let b = verts[(i + 1) % n];
            // Half-open in y so a vertex on the scanline is counted once.
            if (a.y <= yc) != (b.y <= yc) {
                xs.push(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
            }
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            // Pixel centers in [xa, xb).
            let x0 = (pair[0] - 0.5).ceil().clamp(0.0, width as f64) as usize;
            let x1 = (pair[1] - 0.5).ceil().clamp(0.0, width as f64) as usize;
            grid.fill_span(y, x0, x1);
        }
    }
    Ok(grid)
}

/// `|a ∧ b| / |a ∨ b|`; 1 when both masks are empty.
pub fn mask_iou(a: &BitGrid, b: &BitGrid) -> Result<f64> {
    let (inter, union) = a.overlap_counts(b)?;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point2;

    fn poly(v: &[(f64, f64)]) -> Polygon {
        Polygon::new(v.iter().map(|&(x, y)| Point2::new(x, y)).collect()).unwrap()
    }

    #[test]
    fn axis_aligned_square_counts_pixel_centers() {
        let sq = poly(&[(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)]);
        let g = rasterize(&sq, 20, 20).unwrap();
        assert_eq!(g.count(), 100);
        assert!(g.get(0, 0) && g.get(9, 9) && !g.get(10, 9) && !g.get(9, 10));
        assert_eq!(rasterize(&sq.reversed(), 20, 20).unwrap(), g);
    }

    #[test]
    fn sliver_between_centers_is_empty() {
        let tri = poly(&[(0.6, 0.6), (1.4, 0.6), (1.0, 1.4)]);
        assert!(rasterize(&tri, 4, 4).unwrap().is_empty());
    }

    #[test]
    fn clipped_to_grid() {
        let big = poly(&[(-5.0, -5.0), (50.0, -5.0), (50.0, 50.0), (-5.0, 50.0)]);
        assert_eq!(rasterize(&big, 7, 3).unwrap().count(), 21);
        assert!(rasterize(&big, 0, 3).is_err());
    }

    #[test]
    fn spans_across_words() {
        let mut g = BitGrid::new(200, 2);
        g.fill_span(1, 3, 190);
        assert_eq!(g.count(), 187);
        assert!(!g.get(2, 1) && g.get(3, 1) && g.get(189, 1) && !g.get(190, 1));
        g.fill_span(0, 64, 128);
        assert_eq!(g.count(), 187 + 64);
        assert_eq!(g.bbox(), Some((3, 0, 189, 1)));
    }

    #[test]
    fn iou_examples() {
        let a = rasterize(&poly(&[(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)]), 30, 30).unwrap();
        let b = rasterize(&poly(&[(5.0, 0.0), (15.0, 0.0), (15.0, 10.0), (5.0, 10.0)]), 30, 30).unwrap();
        let c = rasterize(&poly(&[(20.0, 20.0), (25.0, 20.0), (25.0, 25.0)]), 30, 30).unwrap();
        assert_eq!(mask_iou(&a, &a).unwrap(), 1.0);
        assert_eq!(mask_iou(&a, &c).unwrap(), 0.0);
        assert_eq!(mask_iou(&a, &b).unwrap(), 50.0 / 150.0);
        let e = BitGrid::new(30, 30);
        assert_eq!(mask_iou(&e, &e).unwrap(), 1.0);
        assert!(matches!(mask_iou(&a, &BitGrid::new(3, 3)), Err(PolyError::ShapeMismatch(_))));
    }

    #[test]
    fn concave_even_odd() {
        // L-shape: the notch stays empty.
        let l = poly(&[(0.0, 0.0), (4.0, 0.0), (4.0, 2.0), (2.0, 2.0), (2.0, 4.0), (0.0, 4.0)]);
        let g = rasterize(&l, 4, 4).unwrap();
        assert_eq!(g.count(), 12);
        assert!(!g.get(3, 3));
    }
}
