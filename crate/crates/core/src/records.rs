//! Per-image instance files.
//!
//! ```json
//! {"image_id": "a", "width": 64, "height": 48,
//!  "instances": [{"category": "car", "score": 1.0, "center": [20, 20],
//!                 "vertices": [[10, 10], [30, 10], [30, 30]], "depth": 0.5}]}
//! ```
//!
//! A file holds one such object or an array of them. Writers always emit an
//! array.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{PolyError, Result};
use crate::eval::InstanceRecord;
use crate::geom::{Point2, Polygon};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceJson {
    pub category: String,
    pub score: f64,
    pub center: Point2,
    pub vertices: Vec<Point2>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageJson {
    pub image_id: String,
    pub width: usize,
    pub height: usize,
    pub instances: Vec<InstanceJson>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    Many(Vec<ImageJson>),
    One(ImageJson),
}

pub fn parse_images(text: &str, context: &str) -> Result<Vec<ImageJson>> {
    let parsed: OneOrMany = serde_json::from_str(text).map_err(|e| PolyError::from_json(context, text, &e))?;
    Ok(match parsed {
        OneOrMany::Many(v) => v,
        OneOrMany::One(one) => vec![one],
    })
}

pub fn load_images(path: &Path) -> Result<Vec<ImageJson>> {
    let text = fs::read_to_string(path).map_err(|e| PolyError::io(path, e))?;
    parse_images(&text, &path.display().to_string())
}

pub fn images_to_json(images: &[ImageJson]) -> String {
    let mut s = serde_json::to_string_pretty(images).expect("image records serialize");
    s.push('\n');
    s
}

pub fn save_images(path: &Path, images: &[ImageJson]) -> Result<()> {
    fs::write(path, images_to_json(images)).map_err(|e| PolyError::io(path, e))
}

/// Validates every instance and flattens the images into records. Instance
/// indices in errors count across the whole file, in reading order.
pub fn to_records(images: &[ImageJson], context: &str) -> Result<Vec<InstanceRecord>> {
    let mut out = Vec::new();
    for img in images {
        for inst in &img.instances {
            let index = out.len();
            let rec = instance_record(&img.image_id, inst).map_err(|e| PolyError::instance(context, index, e))?;
            out.push(rec);
        }
    }
    Ok(out)
}

fn instance_record(image_id: &str, inst: &InstanceJson) -> Result<InstanceRecord> {
    if !(0.0..=1.0).contains(&inst.score) {
        return Err(PolyError::InvalidConfig(format!("score {} outside [0, 1]", inst.score)));
    }
    if !inst.center.is_finite() || inst.depth.is_some_and(|d| !d.is_finite()) {
        return Err(PolyError::NonFinite);
    }
    Ok(InstanceRecord {
        image_id: image_id.to_string(),
        category: inst.category.clone(),
        score: inst.score,
        center: inst.center,
        polygon: Polygon::from_ring_lossy(inst.vertices.clone())?,
        depth: inst.depth,
        mask: None,
    })
}

impl InstanceJson {
    pub fn from_polygon(category: impl Into<String>, score: f64, center: Point2, polygon: &Polygon) -> Self {
        InstanceJson {
            category: category.into(),
            score,
            center,
            vertices: polygon.vertices().to_vec(),
            depth: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE: &str = r#"{"image_id": "a", "width": 64, "height": 48, "instances": [
        {"category": "car", "score": 0.9, "center": [20, 20], "vertices": [[10,10],[30,10],[30,30]]},
        {"category": "bus", "score": 1.0, "center": [5, 5], "vertices": [[0,0],[9,0],[9,9],[0,9],[0,0]], "depth": 2.0}
    ]}"#;

    #[test]
    fn single_object_and_array() {
        let imgs = parse_images(ONE, "t").unwrap();
        assert_eq!(imgs.len(), 1);
        assert_eq!(imgs[0].instances[1].depth, Some(2.0));
        let arr = images_to_json(&imgs);
        assert!(arr.trim_start().starts_with('['));
        assert_eq!(parse_images(&arr, "t").unwrap(), imgs);

        let recs = to_records(&imgs, "t").unwrap();
        assert_eq!(recs.len(), 2);
        // Closing vertex dropped.
        assert_eq!(recs[1].polygon.len(), 4);
        assert_eq!(recs[0].image_id, "a");
    }

    #[test]
    fn errors_name_the_instance() {
        let bad = ONE.replace("[[10,10],[30,10],[30,30]]", "[[10,10],[30,10]]");
        let imgs = parse_images(&bad, "preds.json").unwrap();
        let err = to_records(&imgs, "preds.json").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("preds.json") && msg.contains("instance 0"), "{msg}");
        assert!(matches!(err.root(), PolyError::DegeneratePolygon(_)));

        let bad = ONE.replace("\"score\": 1.0", "\"score\": 1.5");
        let err = to_records(&parse_images(&bad, "t").unwrap(), "t").unwrap_err();
        assert!(err.to_string().contains("instance 1"));

        let err = parse_images("{\"image_id\": 3}", "x.json").unwrap_err();
        assert!(matches!(err, PolyError::Format { .. }));
    }
}
