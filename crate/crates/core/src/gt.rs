//! Ground-truth polygons from instance masks, and the two annotation readers.
//!
//! Rays start on the perimeter of the instance's tight bounding box, spaced
//! evenly by arc length, clockwise from the top-left corner, and march toward
//! the box center in half-pixel steps. The first sample that lands on a
//! foreground pixel becomes the vertex; a ray that never hits the object
//! yields the box center.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{PolyError, Result};
use crate::geom::{Point2, Polygon};
use crate::raster::BitGrid;

/// Distance between consecutive ray samples, in pixels.
pub const RAY_STEP: f64 = 0.5;

/// The eight road-user classes kept from Cityscapes annotations.
pub const ROAD_USER_CLASSES: [&str; 8] = [
    "car",
    "bicycle",
    "rider",
    "bus",
    "person",
    "motorcycle",
    "truck",
    "train",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GtPolygonSpec {
    pub n_vertices: usize,
}

impl Default for GtPolygonSpec {
    fn default() -> Self {
        GtPolygonSpec { n_vertices: 16 }
    }
}

/// Output of [`mask_to_polygon`]: exactly `n_vertices` ray hits, in ray
/// order. Adjacent misses repeat the box center, so the raw ring may contain
/// consecutive duplicates; [`RayPolygon::polygon`] merges them.
#[derive(Clone, Debug, PartialEq)]
pub struct RayPolygon {
    pub vertices: Vec<Point2>,
    /// Mean of the vertices.
    pub center: Point2,
    pub box_center: Point2,
}

impl RayPolygon {
    pub fn polygon(&self) -> Result<Polygon> {
        Polygon::from_ring_lossy(self.vertices.clone())
    }
}

/// Point at arc length `s` along the clockwise perimeter of
/// `[x0, x1] × [y0, y1]`, starting at the top-left corner.
fn perimeter_point(x0: f64, y0: f64, x1: f64, y1: f64, s: f64) -> Point2 {
    let (w, h) = (x1 - x0, y1 - y0);
    if s < w {
        Point2::new(x0 + s, y0)
    } else if s < w + h {
        Point2::new(x1, y0 + (s - w))
    } else if s < 2.0 * w + h {
        Point2::new(x1 - (s - w - h), y1)
    } else {
        Point2::new(x0, y1 - (s - 2.0 * w - h))
    }
}

/// Casts `spec.n_vertices` rays from the instance's bounding box toward its
/// center.
pub fn mask_to_polygon(mask: &BitGrid, spec: GtPolygonSpec) -> Result<RayPolygon> {
    if spec.n_vertices < 3 {
        return Err(PolyError::InvalidConfig(format!(
            "need at least 3 vertices, got {}",
            spec.n_vertices
        )));
    }
    let (px0, py0, px1, py1) = mask
        .bbox()
        .ok_or_else(|| PolyError::EmptyMask("no foreground pixels".into()))?;
    // Box in continuous coordinates: pixel (x, y) covers [x, x+1) × [y, y+1).
    let (x0, y0, x1, y1) = (px0 as f64, py0 as f64, (px1 + 1) as f64, (py1 + 1) as f64);
    let box_center = Point2::new(0.5 * (x0 + x1), 0.5 * (y0 + y1));
    let perimeter = 2.0 * ((x1 - x0) + (y1 - y0));

    let hit = |p: Point2| {
        // Floor sampling, clamped to the box so points on its far edges read
        // the last pixel row/column.
        let x = (p.x.floor() as isize).clamp(px0 as isize, px1 as isize) as usize;
        let y = (p.y.floor() as isize).clamp(py0 as isize, py1 as isize) as usize;
        mask.get(x, y)
    };

    let n = spec.n_vertices;
    let mut vertices = Vec::with_capacity(n);
    for k in 0..n {
        let origin = perimeter_point(x0, y0, x1, y1, perimeter * k as f64 / n as f64);
        let dir = box_center.sub(origin);
        let len = dir.norm();
        let steps = (len / RAY_STEP).floor() as usize;
        let mut vertex = box_center;
        for i in 0..=steps {
            let p = if i == 0 {
                origin
            } else {
                origin.add(dir.scale((i as f64 * RAY_STEP) / len))
            };
            if hit(p) {
                vertex = p;
                break;
            }
        }
        vertices.push(vertex);
    }
    let center = vertices
        .iter()
        .fold(Point2::default(), |acc, p| acc.add(*p))
        .scale(1.0 / n as f64);
    Ok(RayPolygon {
        vertices,
        center,
        box_center,
    })
}

/// Per-pixel instance ids plus the category of every id.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceMask {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u16>,
    pub categories: BTreeMap<u16, String>,
}

impl InstanceMask {
    pub fn new(width: usize, height: usize, pixels: Vec<u16>, categories: BTreeMap<u16, String>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(PolyError::ShapeMismatch(format!(
                "{width}x{height} mask with {} pixels",
                pixels.len()
            )));
        }
        let m = InstanceMask {
            width,
            height,
            pixels,
            categories,
        };
        if let Some(id) = m.instance_ids().into_iter().find(|id| !m.categories.contains_key(id)) {
            return Err(PolyError::format("instance mask", 0, format!("instance id {id} has no category")));
        }
        Ok(m)
    }

    /// Nonzero ids present in the mask, ascending.
    pub fn instance_ids(&self) -> Vec<u16> {
        let mut seen = vec![false; 65536];
        for &p in &self.pixels {
            seen[p as usize] = true;
        }
        (1..=u16::MAX).filter(|&i| seen[i as usize]).collect()
    }

    pub fn instance_grid(&self, id: u16) -> BitGrid {
        let mut g = BitGrid::new(self.width, self.height);
        for (i, &p) in self.pixels.iter().enumerate() {
            if p == id {
                g.set(i % self.width, i / self.width, true);
            }
        }
        g
    }
}

/// `foo.pgm` → `foo.labels.json`.
pub fn sidecar_path(mask_path: &Path) -> PathBuf {
    mask_path.with_extension("labels.json")
}

/// Reads a 16-bit binary PGM (`P5`, maxval 65535) and its label sidecar.
/// A missing sidecar is read as an empty category map.
pub fn load_mask(path: &Path) -> Result<InstanceMask> {
    let bytes = fs::read(path).map_err(|e| PolyError::io(path, e))?;
    let ctx = path.display().to_string();
    let (width, height, pixels) = parse_pgm16(&bytes, &ctx)?;
    let side = sidecar_path(path);
    let categories = if side.exists() {
        let text = fs::read_to_string(&side).map_err(|e| PolyError::io(&side, e))?;
        let raw: BTreeMap<String, String> =
            serde_json::from_str(&text).map_err(|e| PolyError::from_json(side.display().to_string(), &text, &e))?;
        let mut map = BTreeMap::new();
        for (k, v) in raw {
            let id: u16 = k
                .parse()
                .map_err(|_| PolyError::format(side.display().to_string(), 0, format!("bad instance id {k:?}")))?;
            map.insert(id, v);
        }
        map
    } else {
        BTreeMap::new()
    };
    InstanceMask::new(width, height, pixels, categories).map_err(|e| match e {
        PolyError::Format { offset, message, .. } => PolyError::Format {
            context: ctx,
            offset,
            message,
        },
        e => e,
    })
}

fn parse_pgm16(bytes: &[u8], ctx: &str) -> Result<(usize, usize, Vec<u16>)> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(PolyError::format(ctx, 0, "missing P5 magic"));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // Whitespace and comments between header fields.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(PolyError::format(ctx, pos, "truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(PolyError::format(ctx, pos, "expected a decimal number"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PolyError::format(ctx, start, "number out of range"))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 65535 {
        return Err(PolyError::format(ctx, pos, format!("maxval {maxval}, expected 65535")));
    }
    if width == 0 || height == 0 {
        return Err(PolyError::format(ctx, pos, "zero image dimension"));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(PolyError::format(ctx, pos, "expected whitespace after maxval")),
    }
    let need = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(2))
        .ok_or_else(|| PolyError::format(ctx, pos, "image too large"))?;
    let data = &bytes[pos..];
    if data.len() < need {
        return Err(PolyError::format(
            ctx,
            bytes.len(),
            format!("truncated raster: {} of {need} bytes", data.len()),
        ));
    }
    let pixels = data[..need]
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    Ok((width, height, pixels))
}

/// Writes the mask as a 16-bit PGM plus its label sidecar.
pub fn save_mask(path: &Path, mask: &InstanceMask) -> Result<()> {
    let mut out = format!("P5\n{} {}\n65535\n", mask.width, mask.height).into_bytes();
    out.reserve(mask.pixels.len() * 2);
    for p in &mask.pixels {
        out.extend_from_slice(&p.to_be_bytes());
    }
    fs::write(path, out).map_err(|e| PolyError::io(path, e))?;
    let labels: BTreeMap<String, &String> = mask.categories.iter().map(|(k, v)| (k.to_string(), v)).collect();
    let side = sidecar_path(path);
    let text = serde_json::to_string_pretty(&labels).expect("label map serializes");
    fs::write(&side, text).map_err(|e| PolyError::io(&side, e))
}

#[derive(Deserialize)]
struct CityscapesFile {
    objects: Vec<CityscapesObject>,
}

#[derive(Deserialize)]
struct CityscapesObject {
    label: String,
    polygon: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnnotatedPolygon {
    pub category: String,
    pub polygon: Polygon,
    pub simple: bool,
}

/// Reads a gtFine `*_polygons.json` file, keeping road-user objects.
/// Self-intersecting outlines are kept and tagged; outlines with fewer than
/// three distinct vertices are dropped.
pub fn load_cityscapes_polygons(path: &Path) -> Result<Vec<AnnotatedPolygon>> {
    let text = fs::read_to_string(path).map_err(|e| PolyError::io(path, e))?;
    parse_cityscapes_polygons(&text, &path.display().to_string())
}

pub fn parse_cityscapes_polygons(text: &str, ctx: &str) -> Result<Vec<AnnotatedPolygon>> {
    let file: CityscapesFile = serde_json::from_str(text).map_err(|e| PolyError::from_json(ctx, text, &e))?;
    let mut out = Vec::new();
    for obj in file.objects {
        if !ROAD_USER_CLASSES.contains(&obj.label.as_str()) {
            continue;
        }
        let pts = obj.polygon.iter().map(|&p| Point2::from(p)).collect();
        let Ok(polygon) = Polygon::from_ring_lossy(pts) else {
            continue;
        };
        let simple = polygon.is_simple();
        out.push(AnnotatedPolygon {
            category: obj.label,
            polygon,
            simple,
        });
    }
    Ok(out)
}

/// Polygon of every instance in the mask, by ascending id.
pub fn mask_instances(mask: &InstanceMask, spec: GtPolygonSpec) -> Result<Vec<(u16, String, RayPolygon)>> {
    let ids = mask.instance_ids();
    if ids.is_empty() {
        return Err(PolyError::EmptyMask("mask has no instances".into()));
    }
    let names: HashMap<u16, &String> = mask.categories.iter().map(|(k, v)| (*k, v)).collect();
    ids.into_iter()
        .map(|id| {
            let poly = mask_to_polygon(&mask.instance_grid(id), spec)?;
            Ok((id, names[&id].clone(), poly))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{mask_iou, rasterize};

    fn rect_mask(w: usize, h: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> BitGrid {
        BitGrid::from_fn(w, h, |x, y| x >= x0 && x < x1 && y >= y0 && y < y1)
    }

    #[test]
    fn rectangle_gives_perimeter_samples() {
        let m = rect_mask(64, 48, 10, 8, 50, 40);
        let rp = mask_to_polygon(&m, GtPolygonSpec::default()).unwrap();
        assert_eq!(rp.vertices.len(), 16);
        // Box is [10, 50] x [8, 40], perimeter 144, spacing 9.
        assert_eq!(rp.vertices[0], Point2::new(10.0, 8.0));
        assert_eq!(rp.vertices[1], Point2::new(19.0, 8.0));
        assert_eq!(rp.vertices[5], Point2::new(50.0, 13.0));
        for (k, v) in rp.vertices.iter().enumerate() {
            assert_eq!(*v, perimeter_point(10.0, 8.0, 50.0, 40.0, 9.0 * k as f64));
        }
        let poly = rp.polygon().unwrap();
        assert!(poly.is_clockwise());
        let iou = mask_iou(&rasterize(&poly, 64, 48).unwrap(), &m).unwrap();
        // Two box corners fall between samples and get cut off.
        assert!(iou >= 0.98, "{iou}");
        assert_eq!(rp.box_center, Point2::new(30.0, 24.0));
    }

    #[test]
    fn empty_mask_is_an_error() {
        let m = BitGrid::new(8, 8);
        assert!(matches!(mask_to_polygon(&m, GtPolygonSpec::default()), Err(PolyError::EmptyMask(_))));
    }

    #[test]
    fn vertex_count_is_exact() {
        let m = rect_mask(32, 32, 4, 4, 20, 28);
        for n in [3, 7, 16, 32, 33] {
            let rp = mask_to_polygon(&m, GtPolygonSpec { n_vertices: n }).unwrap();
            assert_eq!(rp.vertices.len(), n);
        }
        assert!(mask_to_polygon(&m, GtPolygonSpec { n_vertices: 2 }).is_err());
    }

    #[test]
    fn missed_rays_fall_back_to_center() {
        // A plus sign: rays from the box corners pass through background all
        // the way to the center pixel, which is foreground.
        let m = BitGrid::from_fn(30, 30, |x, y| (12..18).contains(&x) || (12..18).contains(&y));
        let rp = mask_to_polygon(&m, GtPolygonSpec { n_vertices: 8 }).unwrap();
        // Corner rays hit the arm crossing before the center.
        assert!(rp.vertices.iter().all(|v| m.get(v.x.floor().min(29.0) as usize, v.y.floor().min(29.0) as usize)));
        // Two separate blobs: the diagonal rays miss both and stop at the
        // center, which is background.
        let m = BitGrid::from_fn(30, 30, |x, _| x < 5 || x >= 25);
        let rp = mask_to_polygon(&m, GtPolygonSpec { n_vertices: 4 }).unwrap();
        assert_eq!(rp.vertices[0], Point2::new(0.0, 0.0));
        let m = BitGrid::from_fn(30, 30, |x, y| (x < 5 || x >= 25) && y >= 10 && y < 20);
        let rp = mask_to_polygon(&m, GtPolygonSpec { n_vertices: 16 }).unwrap();
        assert!(rp.vertices.contains(&rp.box_center));
    }

    #[test]
    fn pgm_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pgm");
        let mask = InstanceMask::new(
            4,
            4,
            vec![0, 1, 1, 0, 0, 1, 1, 0, 2, 2, 0, 0, 2, 2, 0, 0],
            BTreeMap::from([(1, "car".to_string()), (2, "person".to_string())]),
        )
        .unwrap();
        save_mask(&path, &mask).unwrap();
        let back = load_mask(&path).unwrap();
        assert_eq!(back, mask);
        assert_eq!(back.instance_ids(), vec![1, 2]);

        // All-zero mask, no sidecar.
        let zero = dir.path().join("z.pgm");
        let mut bytes = b"P5\n# comment\n4 4\n65535\n".to_vec();
        bytes.extend(std::iter::repeat(0u8).take(32));
        fs::write(&zero, &bytes).unwrap();
        let z = load_mask(&zero).unwrap();
        assert!(z.instance_ids().is_empty());

        // Truncated raster.
        fs::write(&zero, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(load_mask(&zero), Err(PolyError::Format { .. })));
        // 8-bit maxval.
        fs::write(&zero, b"P5 4 4 255\n0000000000000000").unwrap();
        assert!(matches!(load_mask(&zero), Err(PolyError::Format { .. })));
        // Nonzero id without a category.
        fs::write(sidecar_path(&path), "{\"1\": \"car\"}").unwrap();
        assert!(matches!(load_mask(&path), Err(PolyError::Format { .. })));
        assert!(matches!(load_mask(&dir.path().join("nope.pgm")), Err(PolyError::Io { .. })));
    }

    #[test]
    fn cityscapes_reader() {
        let one = r#"{"imgHeight": 10, "imgWidth": 10, "objects": [
            {"label": "car", "polygon": [[0, 0], [4, 0], [0, 3]]},
            {"label": "road", "polygon": [[0, 0], [9, 0], [9, 9]]}
        ]}"#;
        let r = parse_cityscapes_polygons(one, "t").unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].category, "car");
        assert_eq!(r[0].polygon.area(), 6.0);
        assert!(r[0].simple);

        let none = r#"{"objects": [{"label": "road", "polygon": [[0,0],[1,0],[0,1]]},
                                   {"label": "sky", "polygon": [[0,0],[1,0],[0,1]]}]}"#;
        assert!(parse_cityscapes_polygons(none, "t").unwrap().is_empty());

        let messy = r#"{"objects": [
            {"label": "person", "polygon": [[0,0],[0,0],[4,4],[4,0],[0,2],[0,0]]}
        ]}"#;
        let r = parse_cityscapes_polygons(messy, "t").unwrap();
        assert_eq!(r[0].polygon.len(), 4);
        assert!(!r[0].simple);

        assert!(matches!(parse_cityscapes_polygons("{\"objects\": [", "t"), Err(PolyError::Format { .. })));
    }
}
