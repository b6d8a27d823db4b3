//! `polyloss`: polygon losses, ground-truth generation, evaluation and
//! benchmarks from the command line.
//!
//! Machine-readable JSON goes to standard output; everything else goes to
//! standard error. Exit codes: 0 success, 1 gradient check failed, 2 bad
//! input, 3 domain error, 4 internal error.

mod svg;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use polyloss::clip::IntersectionPolicy;
use polyloss::diff::finite_diff_check;
use polyloss::eval::{average_precision, oracle_eval, EvalOptions, InstanceRecord, NearestCenterField, ORACLE_RADIUS};
use polyloss::geom::{diameter, Point2, Polygon};
use polyloss::gt::{load_mask, mask_instances, GtPolygonSpec};
use polyloss::loss::{iou_loss, IouObjective};
use polyloss::records::{images_to_json, load_images, to_records, ImageJson, InstanceJson};
use polyloss::repr::{decode, encode, sort_by_angle, CoordSystem, VertexCode};
use polyloss::PolyError;

#[derive(Parser)]
#[command(name = "polyloss", version, about = "Differentiable polygon losses and polygon-mask evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    /// Disjoint pairs intersect in the smaller polygon's area.
    Paper,
    /// Disjoint pairs intersect in zero area.
    Strict,
}

impl From<Policy> for IntersectionPolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::Paper => IntersectionPolicy::Paper,
            Policy::Strict => IntersectionPolicy::Strict,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// IoU and IoU loss for every prediction/ground-truth instance pair.
    Iou {
        pred: PathBuf,
        gt: PathBuf,
        #[arg(long, value_enum, default_value = "paper")]
        policy: Policy,
        /// Write one SVG overlay per pair into this directory.
        #[arg(long)]
        dump_svg: Option<PathBuf>,
    },
    /// Compares IoU-loss gradients against central differences.
    Gradcheck {
        /// Instances to check. Without --gt they pair up consecutively.
        file: PathBuf,
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Step relative to the pair's diameter.
        #[arg(long, default_value_t = 1e-6)]
        h: f64,
        #[arg(long, default_value_t = 1e-4)]
        rtol: f64,
        #[arg(long, value_enum, default_value = "paper")]
        policy: Policy,
    },
    /// Ray-cast ground-truth polygons from a 16-bit PGM instance mask.
    Gtgen {
        mask: PathBuf,
        #[arg(long, default_value_t = 16)]
        n_vertices: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        dump_svg: Option<PathBuf>,
    },
    /// Mask AP of predictions against ground truth.
    Eval {
        pred: PathBuf,
        gt: PathBuf,
        /// Pair every ground-truth center with the prediction centered
        /// within 3 px of it.
        #[arg(long)]
        oracle: bool,
        /// Raster size overriding the per-image sizes in the files.
        #[arg(long, requires = "height")]
        width: Option<usize>,
        #[arg(long, requires = "width")]
        height: Option<usize>,
        /// Print the text table on standard output instead of JSON.
        #[arg(long)]
        table: bool,
    },
    /// Reorders every instance's vertices by angle about its center.
    Sort {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Latency of IoU-loss value and gradient on random pairs.
    Bench {
        #[arg(long, default_value_t = 10_000)]
        pairs: usize,
        #[arg(long, default_value_t = 16)]
        n_vertices: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum Failure {
    Check(String),
    Input(String),
    Domain(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Check(_) => 1,
            Failure::Input(_) => 2,
            Failure::Domain(_) => 3,
        }
    }
}

impl From<PolyError> for Failure {
    fn from(e: PolyError) -> Self {
        let msg = e.to_string();
        match e.root() {
            PolyError::EmptyMask(_) | PolyError::MissingCenter { .. } | PolyError::TopologyUnresolved { .. } => {
                Failure::Domain(msg)
            }
            _ => Failure::Input(msg),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn input(msg: impl Into<String>) -> Failure {
    Failure::Input(msg.into())
}

fn emit_json<T: Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("output serializes"));
}

fn write_out(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| input(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_records(path: &Path) -> CliResult<(Vec<ImageJson>, Vec<InstanceRecord>)> {
    let images = load_images(path)?;
    let recs = to_records(&images, &path.display().to_string())?;
    Ok((images, recs))
}

fn svg_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| input(format!("{}: {e}", dir.display())))
}

#[derive(Serialize)]
struct PairIou {
    index: usize,
    image_id: String,
    iou: f64,
    loss: f64,
    pred_area: f64,
    gt_area: f64,
    intersection_area: f64,
}

#[derive(Serialize)]
struct IouOutput {
    policy: &'static str,
    mean_loss: f64,
    pairs: Vec<PairIou>,
}

fn cmd_iou(pred: &Path, gt: &Path, policy: Policy, dump_svg: Option<&Path>) -> CliResult {
    let (_, preds) = load_records(pred)?;
    let (_, gts) = load_records(gt)?;
    if preds.len() != gts.len() {
        return Err(input(format!(
            "{} has {} instances but {} has {}",
            pred.display(),
            preds.len(),
            gt.display(),
            gts.len()
        )));
    }
    let pol: IntersectionPolicy = policy.into();
    let pairs = preds
        .par_iter()
        .zip(&gts)
        .enumerate()
        .map(|(i, (p, g))| {
            let code = encode(&p.polygon, p.center, CoordSystem::Cartesian);
            let wrap = |e| PolyError::instance(pred.display().to_string(), i, e);
            let r = iou_loss(&code, &g.polygon, pol).map_err(wrap)?;
            let pred_area = decode(&sort_by_angle(&code)).map_err(wrap)?.area();
            let gt_area = g.polygon.area();
            let iou = 1.0 - r.total;
            Ok(PairIou {
                index: i,
                image_id: p.image_id.clone(),
                iou,
                loss: r.total,
                pred_area,
                gt_area,
                intersection_area: iou * (pred_area + gt_area) / (1.0 + iou),
            })
        })
        .collect::<Result<Vec<_>, PolyError>>()?;
    if let Some(dir) = dump_svg {
        svg_dir(dir)?;
        for (i, (p, g)) in preds.iter().zip(&gts).enumerate() {
            let (w, h) = svg::extent([&p.polygon, &g.polygon]);
            let doc = svg::overlay(w, h, &[("prediction", &p.polygon, Some(p.center)), ("ground truth", &g.polygon, Some(g.center))]);
            let path = dir.join(format!("pair_{i:04}.svg"));
            fs::write(&path, doc).map_err(|e| input(format!("{}: {e}", path.display())))?;
        }
    }
    let mean_loss = if pairs.is_empty() {
        0.0
    } else {
        pairs.iter().map(|p| p.loss).sum::<f64>() / pairs.len() as f64
    };
    emit_json(&IouOutput {
        policy: match policy {
            Policy::Paper => "paper",
            Policy::Strict => "strict",
        },
        mean_loss,
        pairs,
    });
    Ok(())
}

#[derive(Serialize)]
struct PairCheck {
    index: usize,
    value: f64,
    h: f64,
    max_rel_err: f64,
    flagged: usize,
    failures: Vec<usize>,
    passed: bool,
}

#[derive(Serialize)]
struct GradcheckOutput {
    rtol: f64,
    pairs: usize,
    coordinates: usize,
    flagged: usize,
    failed_pairs: usize,
    results: Vec<PairCheck>,
}

fn cmd_gradcheck(file: &Path, gt: Option<&Path>, h_rel: f64, rtol: f64, policy: Policy) -> CliResult {
    if !(h_rel > 0.0 && h_rel.is_finite()) || !(rtol > 0.0 && rtol.is_finite()) {
        return Err(input("--h and --rtol must be positive"));
    }
    let (_, recs) = load_records(file)?;
    let pairs = match gt {
        Some(g) => {
            let (_, gts) = load_records(g)?;
            if gts.len() != recs.len() {
                return Err(input(format!("{} instances vs {} in --gt", recs.len(), gts.len())));
            }
            return gradcheck_pairs(file, recs.into_iter().zip(gts).collect(), h_rel, rtol, policy);
        }
        None => {
            if recs.len() % 2 != 0 {
                return Err(input(format!("{}: odd instance count {}", file.display(), recs.len())));
            }
            let mut it = recs.into_iter();
            std::iter::from_fn(|| Some((it.next()?, it.next()?))).collect()
        }
    };
    gradcheck_pairs(file, pairs, h_rel, rtol, policy)
}

fn gradcheck_pairs(
    file: &Path,
    pairs: Vec<(InstanceRecord, InstanceRecord)>,
    h_rel: f64,
    rtol: f64,
    policy: Policy,
) -> CliResult {
    if pairs.is_empty() {
        return Err(input(format!("{}: no instances", file.display())));
    }
    let pol: IntersectionPolicy = policy.into();
    let results = pairs
        .par_iter()
        .enumerate()
        .map(|(i, (p, g))| {
            let wrap = |e| PolyError::instance(file.display().to_string(), i, e);
            let code = encode(&p.polygon, p.center, CoordSystem::Cartesian);
            let mut pts = p.polygon.vertices().to_vec();
            pts.extend_from_slice(g.polygon.vertices());
            let h = h_rel * diameter(&pts);
            let f = IouObjective::new(&code, &g.polygon, pol).map_err(wrap)?;
            let rep = finite_diff_check(&f, &code.coords, h, rtol).map_err(wrap)?;
            Ok(PairCheck {
                index: i,
                value: rep.value,
                h,
                max_rel_err: rep.max_rel_err(),
                flagged: rep.flagged_count(),
                failures: rep.failures().map(|e| e.index).collect(),
                passed: rep.passed(),
            })
        })
        .collect::<Result<Vec<_>, PolyError>>()?;
    let failed_pairs = results.iter().filter(|r| !r.passed).count();
    let out = GradcheckOutput {
        rtol,
        pairs: results.len(),
        coordinates: pairs.iter().map(|(p, _)| 2 * p.polygon.len()).sum(),
        flagged: results.iter().map(|r| r.flagged).sum(),
        failed_pairs,
        results,
    };
    emit_json(&out);
    if failed_pairs > 0 {
        return Err(Failure::Check(format!("{failed_pairs} of {} pairs failed the gradient check", out.pairs)));
    }
    Ok(())
}

fn cmd_gtgen(mask: &Path, n_vertices: usize, out: Option<&Path>, dump_svg: Option<&Path>) -> CliResult {
    let m = load_mask(mask)?;
    let instances = mask_instances(&m, GtPolygonSpec { n_vertices })?;
    let image_id = mask
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let image = ImageJson {
        image_id,
        width: m.width,
        height: m.height,
        instances: instances
            .iter()
            .map(|(_, cat, rp)| InstanceJson {
                category: cat.clone(),
                score: 1.0,
                center: rp.center,
                vertices: rp.vertices.clone(),
                depth: None,
            })
            .collect(),
    };
    if let Some(dir) = dump_svg {
        svg_dir(dir)?;
        let polys: Vec<(String, Polygon, Point2)> = instances
            .iter()
            .filter_map(|(id, cat, rp)| rp.polygon().ok().map(|p| (format!("{cat} #{id}"), p, rp.center)))
            .collect();
        let items: Vec<(&str, &Polygon, Option<Point2>)> = polys.iter().map(|(l, p, c)| (l.as_str(), p, Some(*c))).collect();
        let path = dir.join(format!("{}.svg", image.image_id));
        let doc = svg::overlay(m.width as f64, m.height as f64, &items);
        fs::write(&path, doc).map_err(|e| input(format!("{}: {e}", path.display())))?;
    }
    write_out(out, &images_to_json(&[image]))
}

fn cmd_eval(pred: &Path, gt: &Path, oracle: bool, size: Option<(usize, usize)>, table: bool) -> CliResult {
    let (pred_images, preds) = load_records(pred)?;
    let (gt_images, gts) = load_records(gt)?;
    let mut sizes = BTreeMap::new();
    for img in pred_images.iter().chain(&gt_images) {
        if img.width == 0 || img.height == 0 {
            return Err(input(format!("image {}: zero width or height", img.image_id)));
        }
        sizes.insert(img.image_id.clone(), (img.width, img.height));
    }
    let opts = EvalOptions {
        sizes: if size.is_some() { BTreeMap::new() } else { sizes },
        default_size: size,
        ..EvalOptions::default()
    };
    let result = if oracle {
        oracle_eval(&gts, &NearestCenterField::from_records(&preds, ORACLE_RADIUS), &opts)?
    } else {
        average_precision(&preds, &gts, &opts)?
    };
    if table {
        print!("{}", result.to_table());
    } else {
        println!("{}", result.to_json());
        eprint!("{}", result.to_table());
    }
    Ok(())
}

fn cmd_sort(file: &Path, out: Option<&Path>) -> CliResult {
    let mut images = load_images(file)?;
    let mut index = 0;
    for img in &mut images {
        for inst in &mut img.instances {
            // Arbitrary vertex orders are the point here, so only the code
            // itself is validated, not the polygon it currently traces.
            let coords = inst.vertices.iter().flat_map(|p| [p.x - inst.center.x, p.y - inst.center.y]).collect();
            let code = VertexCode::new(inst.center, coords, CoordSystem::Cartesian)
                .map_err(|e| PolyError::instance(file.display().to_string(), index, e))?;
            inst.vertices = sort_by_angle(&code).points();
            index += 1;
        }
    }
    write_out(out, &images_to_json(&images))
}

fn cmd_bench(pairs: usize, n_vertices: usize, seed: u64) -> CliResult {
    if pairs == 0 {
        return Err(input("--pairs must be positive"));
    }
    if n_vertices < 3 {
        return Err(input("--n-vertices must be at least 3"));
    }
    emit_json(&polyloss::bench::bench(pairs, n_vertices, seed)?);
    Ok(())
}

fn configure_threads() -> CliResult {
    let Ok(v) = std::env::var("POLYLOSS_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| input(format!("POLYLOSS_THREADS={v:?} is not a thread count")))?;
    if n > 0 {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    configure_threads()?;
    match cli.command {
        Command::Iou {
            pred,
            gt,
            policy,
            dump_svg,
        } => cmd_iou(&pred, &gt, policy, dump_svg.as_deref()),
        Command::Gradcheck {
            file,
            gt,
            h,
            rtol,
            policy,
        } => cmd_gradcheck(&file, gt.as_deref(), h, rtol, policy),
        Command::Gtgen {
            mask,
            n_vertices,
            out,
            dump_svg,
        } => cmd_gtgen(&mask, n_vertices, out.as_deref(), dump_svg.as_deref()),
        Command::Eval {
            pred,
            gt,
            oracle,
            width,
            height,
            table,
        } => cmd_eval(&pred, &gt, oracle, width.zip(height), table),
        Command::Sort { file, out } => cmd_sort(&file, out.as_deref()),
        Command::Bench {
            pairs,
            n_vertices,
            seed,
        } => cmd_bench(pairs, n_vertices, seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match std::panic::catch_unwind(move || run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            let (Failure::Check(m) | Failure::Input(m) | Failure::Domain(m)) = &f;
            eprintln!("polyloss: {m}");
            ExitCode::from(f.code())
        }
        Err(_) => {
            eprintln!("polyloss: internal error");
            ExitCode::from(4)
        }
    }
}
