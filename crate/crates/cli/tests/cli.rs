use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use polyloss::gt::{save_mask, InstanceMask};
use serde_json::Value;

fn polyloss(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyloss"))
        .args(args)
        .env("POLYLOSS_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn rect_instance(cat: &str, score: f64, x0: f64, y0: f64, x1: f64, y1: f64) -> String {
    format!(
        r#"{{"category":"{cat}","score":{score},"center":[{},{}],"vertices":[[{x0},{y0}],[{x1},{y0}],[{x1},{y1}],[{x0},{y1}]]}}"#,
        (x0 + x1) / 2.0,
        (y0 + y1) / 2.0
    )
}

fn image(id: &str, w: usize, h: usize, instances: &[String]) -> String {
    format!(r#"{{"image_id":"{id}","width":{w},"height":{h},"instances":[{}]}}"#, instances.join(","))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn iou_identical_and_two_squares() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.json", &image("x", 8, 8, &[rect_instance("car", 1.0, 0.0, 0.0, 2.0, 2.0)]));
    let b = write(dir.path(), "b.json", &image("x", 8, 8, &[rect_instance("car", 1.0, 1.0, 1.0, 3.0, 3.0)]));

    let out = polyloss(&["iou", s(&a), s(&a)]);
    assert!(out.status.success());
    let v = json(&out);
    assert!(v["mean_loss"].as_f64().unwrap().abs() < 1e-9);

    let svg = dir.path().join("svg");
    let out = polyloss(&["iou", s(&a), s(&b), "--dump-svg", s(&svg)]);
    assert!(out.status.success());
    let v = json(&out);
    let pair = &v["pairs"][0];
    assert!((pair["loss"].as_f64().unwrap() - 6.0 / 7.0).abs() < 1e-9);
    assert!((pair["intersection_area"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!(fs::read_to_string(svg.join("pair_0000.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn iou_count_mismatch_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let one = rect_instance("car", 1.0, 0.0, 0.0, 2.0, 2.0);
    let a = write(dir.path(), "a.json", &image("x", 8, 8, std::slice::from_ref(&one)));
    let b = write(dir.path(), "b.json", &image("x", 8, 8, &[one.clone(), one]));
    let out = polyloss(&["iou", s(&a), s(&b)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn malformed_input_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.json", "{not json");
    assert_eq!(polyloss(&["iou", s(&a), s(&a)]).status.code(), Some(2));
    assert_eq!(polyloss(&["iou", "/nonexistent.json", s(&a)]).status.code(), Some(2));
    assert_eq!(polyloss(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn gradcheck_passes_on_star_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = polyloss::synth::rng(5);
    let mut instances = Vec::new();
    for _ in 0..6 {
        let (p, g, c) = polyloss::synth::star_pair(&mut rng, 12, 20.0);
        let shift = polyloss::geom::Point2::new(40.0, 40.0);
        let p = p.translated(shift);
        let g = g.translated(shift);
        for (poly, center) in [(p, c.add(shift)), (g, shift)] {
            let inst = polyloss::records::InstanceJson::from_polygon("car", 1.0, center, &poly);
            instances.push(serde_json::to_string(&inst).unwrap());
        }
    }
    let f = write(dir.path(), "pairs.json", &image("x", 80, 80, &instances));
    let out = polyloss(&["gradcheck", s(&f)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["pairs"], 6);
    assert_eq!(v["failed_pairs"], 0);
}

#[test]
fn gradcheck_flags_topology_boundary() {
    // The prediction's bottom edge lies on the GT's bottom edge.
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "edge.json",
        &image(
            "x",
            8,
            8,
            &[
                rect_instance("car", 1.0, 0.0, 0.0, 2.0, 2.0),
                rect_instance("car", 1.0, 1.0, 1.0, 3.0, 2.0),
            ],
        ),
    );
    let out = polyloss(&["gradcheck", s(&f)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert!(v["flagged"].as_u64().unwrap() > 0);
    assert_eq!(v["failed_pairs"], 0);
}

#[test]
fn gradcheck_rejects_empty_and_odd() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "e.json", "[]");
    assert_eq!(polyloss(&["gradcheck", s(&empty)]).status.code(), Some(2));
    let odd = write(dir.path(), "o.json", &image("x", 8, 8, &[rect_instance("car", 1.0, 0.0, 0.0, 2.0, 2.0)]));
    assert_eq!(polyloss(&["gradcheck", s(&odd)]).status.code(), Some(2));
}

fn rect_mask(path: &Path, w: usize, h: usize, boxes: &[(u16, usize, usize, usize, usize, &str)]) {
    let mut pixels = vec![0u16; w * h];
    let mut cats = BTreeMap::new();
    for &(id, x0, y0, x1, y1, cat) in boxes {
        for y in y0..y1 {
            for x in x0..x1 {
                pixels[y * w + x] = id;
            }
        }
        cats.insert(id, cat.to_string());
    }
    save_mask(path, &InstanceMask::new(w, h, pixels, cats).unwrap()).unwrap();
}

#[test]
fn gtgen_rectangle_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mask = dir.path().join("frame.pgm");
    rect_mask(&mask, 64, 48, &[(1, 10, 8, 50, 40, "car"), (7, 2, 2, 6, 6, "person")]);
    let out1 = dir.path().join("a.json");
    let out2 = dir.path().join("b.json");
    let svg = dir.path().join("svg");
    for out in [&out1, &out2] {
        let r = polyloss(&["gtgen", s(&mask), "--out", s(out), "--dump-svg", s(&svg)]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    }
    assert_eq!(fs::read(&out1).unwrap(), fs::read(&out2).unwrap());
    let v: Value = serde_json::from_slice(&fs::read(&out1).unwrap()).unwrap();
    let img = &v[0];
    assert_eq!(img["image_id"], "frame");
    let inst = img["instances"].as_array().unwrap();
    assert_eq!(inst.len(), 2);
    assert_eq!(inst[0]["category"], "car");
    assert_eq!(inst[0]["vertices"].as_array().unwrap().len(), 16);
    assert!(svg.join("frame.svg").exists());

    let r = polyloss(&["gtgen", s(&mask), "--n-vertices", "32"]);
    let v = json(&r);
    assert_eq!(v[0]["instances"][0]["vertices"].as_array().unwrap().len(), 32);
}

#[test]
fn gtgen_empty_mask_is_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let mask = dir.path().join("empty.pgm");
    rect_mask(&mask, 16, 16, &[]);
    assert_eq!(polyloss(&["gtgen", s(&mask)]).status.code(), Some(3));
    let bad = write(dir.path(), "bad.pgm", "P2\n1 1\n255\n0\n");
    assert_eq!(polyloss(&["gtgen", s(&bad)]).status.code(), Some(2));
}

#[test]
fn eval_perfect_and_point_six() {
    let dir = tempfile::tempdir().unwrap();
    let gt = write(dir.path(), "gt.json", &image("a", 16, 16, &[rect_instance("car", 1.0, 0.0, 0.0, 10.0, 10.0)]));
    let pred = write(dir.path(), "p.json", &image("a", 16, 16, &[rect_instance("car", 0.8, 0.0, 0.0, 10.0, 6.0)]));

    let v = json(&polyloss(&["eval", s(&gt), s(&gt)]));
    assert_eq!(v["ap"], 1.0);

    let out = polyloss(&["eval", s(&pred), s(&gt)]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["ap50"], 1.0);
    assert!((v["ap"].as_f64().unwrap() - 0.30).abs() < 1e-12);
    assert!(String::from_utf8_lossy(&out.stderr).contains("AP50"));
}

#[test]
fn eval_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let gt = write(
        dir.path(),
        "gt.json",
        &image(
            "a",
            32,
            32,
            &[
                rect_instance("car", 1.0, 0.0, 0.0, 10.0, 10.0),
                rect_instance("car", 1.0, 15.0, 15.0, 30.0, 30.0),
            ],
        ),
    );
    let v = json(&polyloss(&["eval", "--oracle", s(&gt), s(&gt)]));
    assert_eq!(v["ap"], 1.0);

    // Only the first GT center has a prediction nearby.
    let pred = write(dir.path(), "p.json", &image("a", 32, 32, &[rect_instance("car", 1.0, 0.0, 0.0, 10.0, 10.0)]));
    assert_eq!(polyloss(&["eval", "--oracle", s(&pred), s(&gt)]).status.code(), Some(3));
}

#[test]
fn sort_reorders_vertices() {
    let dir = tempfile::tempdir().unwrap();
    let scrambled = r#"{"image_id":"a","width":8,"height":8,"instances":[{"category":"car","score":1.0,"center":[1,1],"vertices":[[0,0],[2,2],[2,0],[0,2]]}]}"#;
    let f = write(dir.path(), "s.json", scrambled);
    let out = polyloss(&["sort", s(&f)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let verts: Vec<(f64, f64)> = v[0]["instances"][0]["vertices"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| (p[0].as_f64().unwrap(), p[1].as_f64().unwrap()))
        .collect();
    let area: f64 = (0..4)
        .map(|i| {
            let (a, b) = (verts[i], verts[(i + 1) % 4]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum::<f64>()
        / 2.0;
    assert!((area.abs() - 4.0).abs() < 1e-12);
}

#[test]
fn bench_arguments_and_determinism() {
    assert_eq!(polyloss(&["bench", "--pairs", "0"]).status.code(), Some(2));
    let a = json(&polyloss(&["bench", "--pairs", "100", "--seed", "3"]));
    let b = json(&polyloss(&["bench", "--pairs", "100", "--seed", "3"]));
    assert_eq!(a["checksum"], b["checksum"]);
    assert_eq!(a["failures"], 0);
}

#[test]
fn bad_thread_count() {
    let out = Command::new(env!("CARGO_BIN_EXE_polyloss"))
        .args(["bench", "--pairs", "1"])
        .env("POLYLOSS_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
