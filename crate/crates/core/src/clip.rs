//! Weiler-Atherton intersection of two simple polygons.
//!
//! The clipper splits into a discrete stage and a smooth stage. The discrete
//! stage ([`clip_topology`]) finds the proper edge crossings, labels them
//! in/out, and walks the two rings to produce each intersection piece as a
//! list of [`Node`]s: subject vertices, clip vertices and crossings named by
//! the pair of edges that produce them. The smooth stage
//! ([`ClipTopology::intersection_area`]) rebuilds the piece rings from any
//! [`Scalar`] coordinates and sums their shoelace areas, which is what makes
//! the intersection area differentiable.
//!
//! Degenerate contacts (shared vertices, vertices on edges, collinear
//! overlaps) are resolved by nudging the subject vertices along fixed
//! pseudo-random directions and retrying. The offsets are kept in the
//! topology so every later evaluation sees the same nudged subject.

use serde::{Deserialize, Serialize};

use crate::dual::Scalar;
use crate::error::{PolyError, Result};
use crate::geom::{
    diameter, edge_box, edge_eps, line_crossing, merge_eps, perturbation_direction, segment_contact,
    shoelace_generic, Point2, Polygon, SegmentContact, V2,
};

/// Number of perturbed retries after the initial attempt.
pub const MAX_PERTURBATION_RETRIES: usize = 3;

/// Growth of the nudge magnitude per retry, in units of the edge tolerance.
const NUDGE_BASE: f64 = 16.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntersectionPolicy {
    /// Non-crossing pairs take the smaller of the two areas, for containment
    /// and for disjoint pairs alike.
    #[default]
    Paper,
    /// Disjoint pairs intersect in zero area.
    Strict,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntersectionKind {
    /// Boundaries cross; the intersection is the union of the pieces.
    Proper,
    SubjectInsideClip,
    ClipInsideSubject,
    /// Both rings trace the same boundary (within the merge tolerance).
    Coincident,
    Disjoint,
}

impl IntersectionKind {
    pub fn is_containment(self) -> bool {
        matches!(
            self,
            IntersectionKind::SubjectInsideClip
                | IntersectionKind::ClipInsideSubject
                | IntersectionKind::Coincident
        )
    }
}

/// A vertex of an intersection piece. Indices refer to the caller's vertex
/// order. A crossing is named by the endpoints of the subject edge and the
/// clip edge that produce it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Subject(usize),
    Clip(usize),
    Crossing {
        subject: (usize, usize),
        clip: (usize, usize),
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    /// The subject edge enters the clip polygon.
    In,
    /// The subject edge leaves the clip polygon.
    Out,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CrossingNode {
    pub point: Point2,
    pub label: Label,
    /// Edge index plus parametric position along the clockwise subject ring.
    pub pos_in_subject: f64,
    /// Edge index plus parametric position along the clockwise clip ring.
    pub pos_in_clip: f64,
}

/// Discrete outcome of clipping, replayable for any scalar type.
///
/// Equality compares only the discrete parts: crossing positions and
/// perturbation offsets move continuously with the inputs.
#[derive(Clone, Debug)]
pub struct ClipTopology {
    pub kind: IntersectionKind,
    pub pieces: Vec<Vec<Node>>,
    /// Offsets added to the subject vertices when the unperturbed pair had a
    /// degenerate contact.
    pub subject_offsets: Option<Vec<Point2>>,
    /// +1 or -1: multiplies the subject's shoelace sum into an area.
    pub subject_sign: f64,
    pub clip_sign: f64,
    /// For disjoint pairs: whether the subject is the smaller polygon.
    pub subject_is_smaller: bool,
    pub crossings: Vec<CrossingNode>,
}

impl PartialEq for ClipTopology {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.pieces == other.pieces
            && self.subject_offsets.is_some() == other.subject_offsets.is_some()
            && self.subject_sign == other.subject_sign
            && self.clip_sign == other.clip_sign
            && self.subject_is_smaller == other.subject_is_smaller
            && self.crossings.len() == other.crossings.len()
            && self.crossings.iter().zip(&other.crossings).all(|(a, b)| a.label == b.label)
    }
}

impl ClipTopology {
    /// Subject point `i` as seen by the clipper (offset applied).
    #[inline]
    fn subject_point<T: Scalar>(&self, subject: &[V2<T>], i: usize) -> V2<T> {
        match &self.subject_offsets {
            Some(off) => subject[i].offset(off[i]),
            None => subject[i],
        }
    }

    fn node_point<T: Scalar>(&self, node: Node, subject: &[V2<T>], clip: &[V2<T>]) -> V2<T> {
        match node {
            Node::Subject(i) => self.subject_point(subject, i),
            Node::Clip(j) => clip[j],
            Node::Crossing {
                subject: (a, b),
                clip: (c, d),
            } => line_crossing(
                self.subject_point(subject, a),
                self.subject_point(subject, b),
                clip[c],
                clip[d],
            ),
        }
    }

    /// Rings of every intersection piece at the given coordinates.
    pub fn piece_rings<T: Scalar>(&self, subject: &[V2<T>], clip: &[V2<T>]) -> Vec<Vec<V2<T>>> {
        self.pieces
            .iter()
            .map(|nodes| nodes.iter().map(|&n| self.node_point(n, subject, clip)).collect())
            .collect()
    }

    /// Area of the (possibly nudged) subject.
    pub fn subject_area<T: Scalar>(&self, subject: &[V2<T>]) -> T {
        match &self.subject_offsets {
            Some(off) => {
                let ring: Vec<V2<T>> = subject.iter().zip(off).map(|(p, d)| p.offset(*d)).collect();
                shoelace_generic(&ring) * self.subject_sign
            }
            None => shoelace_generic(subject) * self.subject_sign,
        }
    }

    pub fn clip_area<T: Scalar>(&self, clip: &[V2<T>]) -> T {
        shoelace_generic(clip) * self.clip_sign
    }

    /// Area of the crossing pieces (zero when the boundaries do not cross).
    pub fn pieces_area<T: Scalar>(&self, subject: &[V2<T>], clip: &[V2<T>]) -> T {
        let mut total = T::zero();
        let mut ring = Vec::new();
        for nodes in &self.pieces {
            ring.clear();
            ring.extend(nodes.iter().map(|&n| self.node_point(n, subject, clip)));
            // Pieces are walked in clockwise order, so their shoelace sum is
            // positive.
            total += shoelace_generic(&ring);
        }
        total
    }

    /// Intersection area under `policy`, given the two polygon areas.
    pub fn intersection_area_with<T: Scalar>(
        &self,
        subject: &[V2<T>],
        clip: &[V2<T>],
        subject_area: T,
        clip_area: T,
        policy: IntersectionPolicy,
    ) -> T {
        match self.kind {
            IntersectionKind::Proper => self.pieces_area(subject, clip),
            IntersectionKind::SubjectInsideClip => subject_area,
            IntersectionKind::ClipInsideSubject => clip_area,
            // Either area is exact; the mean keeps the gradient symmetric.
            IntersectionKind::Coincident => (subject_area + clip_area) * 0.5,
            IntersectionKind::Disjoint => match policy {
                IntersectionPolicy::Paper if self.subject_is_smaller => subject_area,
                IntersectionPolicy::Paper => clip_area,
                IntersectionPolicy::Strict => T::zero(),
            },
        }
    }

    pub fn intersection_area<T: Scalar>(
        &self,
        subject: &[V2<T>],
        clip: &[V2<T>],
        policy: IntersectionPolicy,
    ) -> T {
        let sa = self.subject_area(subject);
        let ca = self.clip_area(clip);
        self.intersection_area_with(subject, clip, sa, ca, policy)
    }
}

#[derive(Clone, Debug)]
pub struct IntersectionResult {
    pub pieces: Vec<Polygon>,
    pub kind: IntersectionKind,
    /// Sum of the piece areas for proper crossings; the inner area for
    /// containment; zero for disjoint pairs (see [`intersection_area`] for
    /// the policy-dependent value).
    pub area: f64,
    pub topology: ClipTopology,
}

/// Intersects `subject` with `clip`. Both must be simple; either orientation
/// is accepted.
pub fn weiler_atherton(subject: &Polygon, clip: &Polygon) -> Result<IntersectionResult> {
    let topology = clip_topology(subject, clip)?;
    let s: Vec<V2<f64>> = subject.vertices().iter().map(|&p| V2::constant(p)).collect();
    let c: Vec<V2<f64>> = clip.vertices().iter().map(|&p| V2::constant(p)).collect();
    let pieces: Vec<Polygon> = topology
        .piece_rings(&s, &c)
        .into_iter()
        .map(|r| Polygon::from_raw(r.into_iter().map(V2::value).collect()))
        .collect();
    let area = topology.intersection_area(&s, &c, IntersectionPolicy::Strict);
    Ok(IntersectionResult {
        pieces,
        kind: topology.kind,
        area,
        topology,
    })
}

/// Intersection area under the chosen convention for non-crossing pairs.
pub fn intersection_area(subject: &Polygon, clip: &Polygon, policy: IntersectionPolicy) -> Result<f64> {
    let topology = clip_topology(subject, clip)?;
    let s: Vec<V2<f64>> = subject.vertices().iter().map(|&p| V2::constant(p)).collect();
    let c: Vec<V2<f64>> = clip.vertices().iter().map(|&p| V2::constant(p)).collect();
    Ok(topology.intersection_area(&s, &c, policy))
}

/// Runs the discrete stage: simplicity checks, coincidence test, crossing
/// search with perturbed retries, and the ring walk.
pub fn clip_topology(subject: &Polygon, clip: &Polygon) -> Result<ClipTopology> {
    if !subject.is_simple() {
        return Err(PolyError::NotSimple("subject"));
    }
    if !clip.is_simple() {
        return Err(PolyError::NotSimple("clip"));
    }
    clip_topology_unchecked(subject.vertices(), clip.vertices())
}

pub(crate) fn clip_topology_unchecked(subject: &[Point2], clip: &[Point2]) -> Result<ClipTopology> {
    let mut all = Vec::with_capacity(subject.len() + clip.len());
    all.extend_from_slice(subject);
    all.extend_from_slice(clip);
    let diam = diameter(&all);
    let eps = edge_eps(diam);

    let s_sign = if shoelace_f64(subject) >= 0.0 { 1.0 } else { -1.0 };
    let c_sign = if shoelace_f64(clip) >= 0.0 { 1.0 } else { -1.0 };
    let s_order = canonical_order(subject.len(), s_sign);
    let c_order = canonical_order(clip.len(), c_sign);

    let mut topo = ClipTopology {
        kind: IntersectionKind::Coincident,
        pieces: Vec::new(),
        subject_offsets: None,
        subject_sign: s_sign,
        clip_sign: c_sign,
        subject_is_smaller: false,
        crossings: Vec::new(),
    };

    if coincident(subject, &s_order, clip, &c_order, merge_eps(diam)) {
        return Ok(topo);
    }

    let mut nudged = subject.to_vec();
    for attempt in 0..=MAX_PERTURBATION_RETRIES {
        let offsets = (attempt > 0).then(|| {
            let delta = eps * NUDGE_BASE.powi(attempt as i32);
            (0..subject.len())
                .map(|i| perturbation_direction(i, attempt).scale(delta))
                .collect::<Vec<_>>()
        });
        if let Some(off) = &offsets {
            for ((n, p), d) in nudged.iter_mut().zip(subject).zip(off) {
                *n = p.add(*d);
            }
        }
        match walk(&nudged, &s_order, clip, &c_order, eps) {
            Ok(Walk::Pieces { pieces, crossings }) => {
                topo.kind = IntersectionKind::Proper;
                topo.pieces = pieces;
                topo.crossings = crossings;
                topo.subject_offsets = offsets;
                return Ok(topo);
            }
            Ok(Walk::NoCrossings) => {
                let s_poly = Polygon::from_raw(nudged.clone());
                let c_poly = Polygon::from_raw(clip.to_vec());
                topo.kind = if c_poly.contains(nudged[0]) {
                    IntersectionKind::SubjectInsideClip
                } else if s_poly.contains(clip[0]) {
                    IntersectionKind::ClipInsideSubject
                } else {
                    IntersectionKind::Disjoint
                };
                topo.subject_is_smaller = shoelace_f64(&nudged).abs() <= shoelace_f64(clip).abs();
                topo.subject_offsets = offsets;
                return Ok(topo);
            }
            Err(Degenerate) => continue,
        }
    }
    Err(PolyError::TopologyUnresolved {
        attempts: MAX_PERTURBATION_RETRIES + 1,
    })
}

fn shoelace_f64(ring: &[Point2]) -> f64 {
    crate::geom::shoelace(ring)
}

/// Vertex indices in clockwise (positive-area) order.
fn canonical_order(n: usize, sign: f64) -> Vec<usize> {
    if sign > 0.0 {
        (0..n).collect()
    } else {
        (0..n).rev().collect()
    }
}

fn coincident(s: &[Point2], s_order: &[usize], c: &[Point2], c_order: &[usize], eps: f64) -> bool {
    let n = s.len();
    if n != c.len() {
        return false;
    }
    let first = s[s_order[0]];
    (0..n).any(|shift| {
        first.dist(c[c_order[shift]]) <= eps
            && (0..n).all(|k| s[s_order[k]].dist(c[c_order[(k + shift) % n]]) <= eps)
    })
}

/// Marker for a contact the walk cannot handle without perturbation.
struct Degenerate;

enum Walk {
    NoCrossings,
    Pieces {
        pieces: Vec<Vec<Node>>,
        crossings: Vec<CrossingNode>,
    },
}

struct Crossing {
    s_edge: usize,
    c_edge: usize,
    t_s: f64,
    t_c: f64,
    point: Point2,
    entering: bool,
}

#[derive(Clone, Copy)]
enum Item {
    Vertex(usize),
    Crossing(usize),
}

fn walk(
    subject: &[Point2],
    s_order: &[usize],
    clip: &[Point2],
    c_order: &[usize],
    eps: f64,
) -> std::result::Result<Walk, Degenerate> {
    let n = s_order.len();
    let m = c_order.len();
    let sp = |k: usize| subject[s_order[k % n]];
    let cp = |l: usize| clip[c_order[l % m]];

    // Step 1: proper crossings between every subject edge and clip edge.
    // Clip edge boxes, grown by eps, in struct-of-arrays form so the overlap
    // test over a block of 64 edges compiles to straight-line code.
    let mut cb = [Vec::with_capacity(m), Vec::with_capacity(m), Vec::with_capacity(m), Vec::with_capacity(m)];
    for l in 0..m {
        let [x0, x1, y0, y1] = edge_box(cp(l), cp(l + 1));
        cb[0].push(x0 - eps);
        cb[1].push(x1 + eps);
        cb[2].push(y0 - eps);
        cb[3].push(y1 + eps);
    }
    let mut crossings = Vec::new();
    for k in 0..n {
        let (a, b) = (sp(k), sp(k + 1));
        let [sx0, sx1, sy0, sy1] = edge_box(a, b);
        for base in (0..m).step_by(64) {
            let end = (base + 64).min(m);
            let mut mask = 0u64;
            #[allow(clippy::needless_range_loop)]
            for l in base..end {
                let near = (sx0 <= cb[1][l]) & (cb[0][l] <= sx1) & (sy0 <= cb[3][l]) & (cb[2][l] <= sy1);
                mask |= u64::from(near) << (l - base);
            }
            while mask != 0 {
                let l = base + mask.trailing_zeros() as usize;
                mask &= mask - 1;
                let (c, d) = (cp(l), cp(l + 1));
                match segment_contact(a, b, c, d, eps) {
                    SegmentContact::Disjoint => {}
                    SegmentContact::Touching => return Err(Degenerate),
                    SegmentContact::Proper { point, t1, t2 } => {
                        // Clip interior lies where cross(clip edge, p - c) > 0.
                        let entering = d.sub(c).cross(b.sub(a)) > 0.0;
                        crossings.push(Crossing {
                            s_edge: k,
                            c_edge: l,
                            t_s: t1,
                            t_c: t2,
                            point,
                            entering,
                        });
                    }
                }
            }
        }
    }
    if crossings.is_empty() {
        return Ok(Walk::NoCrossings);
    }
    if crossings.len() % 2 != 0 {
        return Err(Degenerate);
    }

    // Step 2: splice crossings into both rings.
    let mut by_s: Vec<usize> = (0..crossings.len()).collect();
    by_s.sort_by(|&i, &j| {
        let (ci, cj) = (&crossings[i], &crossings[j]);
        ci.s_edge.cmp(&cj.s_edge).then(ci.t_s.total_cmp(&cj.t_s))
    });
    let mut by_c: Vec<usize> = (0..crossings.len()).collect();
    by_c.sort_by(|&i, &j| {
        let (ci, cj) = (&crossings[i], &crossings[j]);
        ci.c_edge.cmp(&cj.c_edge).then(ci.t_c.total_cmp(&cj.t_c))
    });

    // Labels alternate along the subject ring, and crossings on one ring
    // never collapse onto each other.
    for w in 0..by_s.len() {
        let a = &crossings[by_s[w]];
        let b = &crossings[by_s[(w + 1) % by_s.len()]];
        if a.entering == b.entering || a.point.dist(b.point) <= eps {
            return Err(Degenerate);
        }
    }
    for w in 0..by_c.len() {
        let a = &crossings[by_c[w]];
        let b = &crossings[by_c[(w + 1) % by_c.len()]];
        if a.point.dist(b.point) <= eps {
            return Err(Degenerate);
        }
    }

    let (s_seq, s_pos) = splice(n, &by_s, |i| crossings[i].s_edge);
    let (c_seq, c_pos) = splice(m, &by_c, |i| crossings[i].c_edge);

    let node_of = |ci: usize| {
        let c = &crossings[ci];
        Node::Crossing {
            subject: (s_order[c.s_edge], s_order[(c.s_edge + 1) % n]),
            clip: (c_order[c.c_edge], c_order[(c.c_edge + 1) % m]),
        }
    };

    // Steps 3 and 4: walk from every unvisited "in" crossing.
    let mut visited = vec![false; crossings.len()];
    let mut pieces = Vec::new();
    let budget = 2 * (s_seq.len() + c_seq.len());
    for &start in &by_s {
        if visited[start] || !crossings[start].entering {
            continue;
        }
        let mut piece = Vec::new();
        let mut cur = start;
        let mut steps = 0;
        loop {
            visited[cur] = true;
            piece.push(node_of(cur));
            // Follow the subject until the next ("out") crossing.
            let mut pos = s_pos[cur];
            let exit = loop {
                pos = (pos + 1) % s_seq.len();
                steps += 1;
                match s_seq[pos] {
                    Item::Vertex(k) => piece.push(Node::Subject(s_order[k])),
                    Item::Crossing(ci) => break ci,
                }
            };
            if crossings[exit].entering || visited[exit] {
                return Err(Degenerate);
            }
            visited[exit] = true;
            piece.push(node_of(exit));
            // Continue on the clip until the next ("in") crossing.
            let mut pos = c_pos[exit];
            let next = loop {
                pos = (pos + 1) % c_seq.len();
                steps += 1;
                match c_seq[pos] {
                    Item::Vertex(l) => piece.push(Node::Clip(c_order[l])),
                    Item::Crossing(ci) => break ci,
                }
            };
            if next == start {
                break;
            }
            if !crossings[next].entering || visited[next] || steps > budget {
                return Err(Degenerate);
            }
            cur = next;
        }
        pieces.push(piece);
    }
    if visited.iter().any(|v| !v) {
        return Err(Degenerate);
    }

    let crossings = by_s
        .iter()
        .map(|&i| {
            let c = &crossings[i];
            CrossingNode {
                point: c.point,
                label: if c.entering { Label::In } else { Label::Out },
                pos_in_subject: c.s_edge as f64 + c.t_s,
                pos_in_clip: c.c_edge as f64 + c.t_c,
            }
        })
        .collect();
    Ok(Walk::Pieces { pieces, crossings })
}

/// Ring sequence with crossings inserted after the start vertex of their
/// edge, plus each crossing's position in that sequence.
fn splice(len: usize, sorted: &[usize], edge_of: impl Fn(usize) -> usize) -> (Vec<Item>, Vec<usize>) {
    let mut seq = Vec::with_capacity(len + sorted.len());
    let mut pos = vec![0; sorted.len()];
    let mut it = sorted.iter().peekable();
    for k in 0..len {
        seq.push(Item::Vertex(k));
        while let Some(&&ci) = it.peek() {
            if edge_of(ci) != k {
                break;
            }
            pos[ci] = seq.len();
            seq.push(Item::Crossing(ci));
            it.next();
        }
    }
    (seq, pos)
}
