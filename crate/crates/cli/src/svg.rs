use std::fmt::Write as _;

use polyloss::geom::{Point2, Polygon};

const PALETTE: [&str; 6] = ["#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Outline overlay of `polygons` on a `width × height` canvas. Each entry is
/// `(label, polygon, center)`.
pub fn overlay(width: f64, height: f64, polygons: &[(&str, &Polygon, Option<Point2>)]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, (label, p, center)) in polygons.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = p.vertices().iter().map(|v| format!("{:.3},{:.3}", v.x, v.y)).collect();
        let _ = writeln!(
            s,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="{color}" stroke-width="1"><title>{}</title></polygon>"#,
            pts.join(" "),
            escape(label)
        );
        if let Some(c) = center {
            let _ = writeln!(s, r#"<circle cx="{:.3}" cy="{:.3}" r="2" fill="{color}"/>"#, c.x, c.y);
        }
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Canvas big enough for every vertex, with a small margin.
pub fn extent<'a>(polygons: impl IntoIterator<Item = &'a Polygon>) -> (f64, f64) {
    let (mut w, mut h) = (1.0f64, 1.0f64);
    for p in polygons {
        for v in p.vertices() {
            w = w.max(v.x + 4.0);
            h = h.max(v.y + 4.0);
        }
    }
    (w.ceil(), h.ceil())
}
