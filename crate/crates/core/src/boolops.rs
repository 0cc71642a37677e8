//! Exact boundary extraction for a dual-part glyph.
//!
//! Every segment of every path is split at its intersections with all other
//! segments; a piece is kept when the glyph is occupied on exactly one side of
//! it (probed at `midpoint ± ε·normal`), oriented so the interior lies on its
//! left, and the kept pieces are stitched into closed loops.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::diff::ParamVector;
use crate::field::{GrayImage, PreparedPath, SampleGrid};
use crate::geom::solve::solve_quadratic;
use crate::geom::{BBox, DualPartGlyph, GeomError, Point, Projection, QuadBezier};
use crate::Scalar;

/// Probe offset used to classify split pieces.
pub const CLASSIFY_EPS: f64 = 1e-5;
/// Endpoint-matching tolerance while stitching.
pub const STITCH_TOL: f64 = 1e-7;
/// Parameters closer than this to 0 or 1 do not split a segment.
pub const SPLIT_TOL: f64 = 1e-9;
/// Leaf size of the box subdivision in [`seg_intersections`].
pub const SUBDIV_TOL: f64 = 1e-6;
/// Residual targeted by the Newton polish.
pub const NEWTON_RESIDUAL: f64 = 1e-10;
/// Distance under which sample points count as lying on the other curve.
pub const OVERLAP_TOL: f64 = 1e-9;
/// Largest gap bridged, or dangling chain dropped, while stitching loops.
pub const BRIDGE_TOL: f64 = 1e-4;

const MAX_LEAVES: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoolError {
    #[error("degenerate overlap: segments share a coincident stretch")]
    DegenerateOverlap,
    #[error("could not stitch {} dangling fragment(s) into closed loops", fragments.len())]
    Unstitchable {
        /// Control points of the fragments left over.
        fragments: Vec<Vec<(f64, f64)>>,
    },
    #[error("loop is not closed: gap {gap} after segment {index}")]
    OpenLoop { index: usize, gap: f64 },
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// A contour segment: straight or quadratic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Segment<S> {
    Line(Point<S>, Point<S>),
    Quad(QuadBezier<S>),
}

impl<S: Scalar> Segment<S> {
    pub fn start(&self) -> Point<S> {
        match self {
            Segment::Line(a, _) => *a,
            Segment::Quad(q) => q.a,
        }
    }

    pub fn end(&self) -> Point<S> {
        match self {
            Segment::Line(_, c) => *c,
            Segment::Quad(q) => q.c,
        }
    }

    pub fn set_start(&mut self, p: Point<S>) {
        match self {
            Segment::Line(a, _) => *a = p,
            Segment::Quad(q) => q.a = p,
        }
    }

    pub fn set_end(&mut self, p: Point<S>) {
        match self {
            Segment::Line(_, c) => *c = p,
            Segment::Quad(q) => q.c = p,
        }
    }

    pub fn is_line(&self) -> bool {
        matches!(self, Segment::Line(..))
    }

    /// The same curve as a quadratic; lines get their control at the midpoint,
    /// which keeps the parametrization uniform.
    #[inline]
    pub fn as_quad(&self) -> QuadBezier<S> {
        match self {
            Segment::Line(a, c) => QuadBezier::line(*a, *c),
            Segment::Quad(q) => *q,
        }
    }

    pub fn eval(&self, t: S) -> Point<S> {
        match self {
            Segment::Line(a, c) => a.lerp(*c, t),
            Segment::Quad(q) => q.eval(t),
        }
    }

    pub fn deriv(&self, t: S) -> Point<S> {
        match self {
            Segment::Line(a, c) => *c - *a,
            Segment::Quad(q) => q.deriv(t),
        }
    }

    pub fn reversed(&self) -> Self {
        match self {
            Segment::Line(a, c) => Segment::Line(*c, *a),
            Segment::Quad(q) => Segment::Quad(q.reversed()),
        }
    }

    pub fn subrange(&self, t0: S, t1: S) -> Self {
        match self {
            Segment::Line(..) => Segment::Line(self.eval(t0), self.eval(t1)),
            Segment::Quad(q) => Segment::Quad(q.subrange(t0, t1)),
        }
    }

    pub fn bbox(&self) -> BBox<S> {
        match self {
            Segment::Line(a, c) => BBox::of_points(&[*a, *c]),
            Segment::Quad(q) => q.hull_bbox(),
        }
    }

    pub fn closest_point(&self, p: Point<S>) -> Projection<S> {
        match self {
            Segment::Line(a, c) => {
                let d = *c - *a;
                let len_sq = d.norm_sq();
                let t = if len_sq > S::zero() { ((p - *a).dot(d) / len_sq).max(S::zero()).min(S::one()) } else { S::zero() };
                let q = a.lerp(*c, t);
                Projection { t, dist: q.dist(p), point: q }
            }
            Segment::Quad(q) => q.closest_point(p),
        }
    }

    pub fn arc_length(&self) -> S {
        match self {
            Segment::Line(a, c) => a.dist(*c),
            Segment::Quad(q) => q.arc_length(),
        }
    }

    /// Green's-theorem area contribution.
    pub fn area_term(&self) -> S {
        match self {
            Segment::Line(a, c) => a.cross(*c) * S::lit(0.5),
            Segment::Quad(q) => q.area_term(),
        }
    }

    /// Applies `f` to every defining point.
    pub fn map(&self, f: impl Fn(Point<S>) -> Point<S>) -> Self {
        match self {
            Segment::Line(a, c) => Segment::Line(f(*a), f(*c)),
            Segment::Quad(q) => Segment::Quad(QuadBezier::new(f(q.a), f(q.b), f(q.c))),
        }
    }

    fn is_degenerate(&self, tol: S) -> bool {
        match self {
            Segment::Line(a, c) => a.dist(*c) <= tol,
            Segment::Quad(q) => q.is_point(tol),
        }
    }

    fn points(&self) -> Vec<(f64, f64)> {
        let pts = match self {
            Segment::Line(a, c) => vec![*a, *c],
            Segment::Quad(q) => vec![q.a, q.b, q.c],
        };
        pts.into_iter().map(|p| (p.x.to_f64_lossy(), p.y.to_f64_lossy())).collect()
    }

    /// Unit tangent at `t`, falling back to the chord where the derivative vanishes.
    fn direction(&self, t: S) -> Point<S> {
        let d = self.deriv(t);
        let n = d.norm();
        if n > S::geom_tol(1e-14) {
            return d / n;
        }
        let chord = self.end() - self.start();
        let cn = chord.norm();
        if cn > S::zero() {
            chord / cn
        } else {
            Point::new(S::one(), S::zero())
        }
    }
}

/// Closed chain of segments; each end coincides with the next start.
#[derive(Clone, Debug, PartialEq)]
pub struct Loop<S> {
    pub segments: Vec<Segment<S>>,
}

impl<S: Scalar> Loop<S> {
    /// Validates closure within `1e-9`.
    pub fn new(segments: Vec<Segment<S>>) -> Result<Self, BoolError> {
        let lp = Loop { segments };
        lp.check_closed(S::geom_tol(1e-9))?;
        Ok(lp)
    }

    pub fn check_closed(&self, tol: S) -> Result<(), BoolError> {
        let n = self.segments.len();
        for i in 0..n {
            let gap = self.segments[i].end().dist(self.segments[(i + 1) % n].start());
            if !(gap <= tol) {
                return Err(BoolError::OpenLoop { index: i, gap: gap.to_f64_lossy() });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Signed area (positive for counter-clockwise loops in a y-up frame).
    pub fn area(&self) -> S {
        self.segments.iter().map(|s| s.area_term()).sum()
    }

    pub fn length(&self) -> S {
        self.segments.iter().map(|s| s.arc_length()).sum()
    }

    pub fn bbox(&self) -> BBox<S> {
        self.segments.iter().fold(BBox::empty(), |b, s| b.union(&s.bbox()))
    }

    pub fn reversed(&self) -> Self {
        Loop { segments: self.segments.iter().rev().map(|s| s.reversed()).collect() }
    }
}

/// The boundary of a region as closed loops; filled with the nonzero rule.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Contour<S> {
    pub loops: Vec<Loop<S>>,
}

impl<S: Scalar> Contour<S> {
    pub fn new(loops: Vec<Loop<S>>) -> Self {
        Contour { loops }
    }

    pub fn is_empty(&self) -> bool {
        self.loops.is_empty()
    }

    pub fn segment_count(&self) -> usize {
        self.loops.iter().map(|l| l.len()).sum()
    }

    pub fn segments(&self) -> impl Iterator<Item = &Segment<S>> + '_ {
        self.loops.iter().flat_map(|l| l.segments.iter())
    }

    /// Sum of signed loop areas.
    pub fn area(&self) -> S {
        self.loops.iter().map(|l| l.area()).sum()
    }

    pub fn length(&self) -> S {
        self.loops.iter().map(|l| l.length()).sum()
    }

    pub fn bbox(&self) -> BBox<S> {
        self.loops.iter().fold(BBox::empty(), |b, l| b.union(&l.bbox()))
    }

    pub fn map(&self, f: impl Fn(Point<S>) -> Point<S> + Copy) -> Self {
        Contour {
            loops: self.loops.iter().map(|l| Loop { segments: l.segments.iter().map(|s| s.map(f)).collect() }).collect(),
        }
    }

    /// From the `[-1,1]^2` y-up frame to `[0,side]^2` y-down.
    pub fn to_canvas(&self, side: S) -> Self {
        let h = side * S::lit(0.5);
        self.map(|p| Point::new((p.x + S::one()) * h, (S::one() - p.y) * h))
    }

    /// Inverse of [`Self::to_canvas`].
    pub fn from_canvas(&self, side: S) -> Self {
        let h = side * S::lit(0.5);
        self.map(|p| Point::new(p.x / h - S::one(), S::one() - p.y / h))
    }

    pub(crate) fn prepared(&self) -> PreparedPath<S> {
        PreparedPath::new(self.segments().map(|s| s.as_quad()).collect())
    }
}

/// Total winding number of all loops around `p`.
pub fn contour_winding<S: Scalar>(c: &Contour<S>, p: Point<S>) -> Result<i32, GeomError> {
    if c.is_empty() {
        return Ok(0);
    }
    c.prepared().winding(p)
}

/// Nonzero-rule membership.
pub fn contour_occupancy<S: Scalar>(c: &Contour<S>, p: Point<S>) -> Result<bool, GeomError> {
    Ok(contour_winding(c, p)? != 0)
}

/// Distance from `p` to the nearest segment (infinite for an empty contour).
pub fn contour_distance<S: Scalar>(c: &Contour<S>, p: Point<S>) -> S {
    c.segments().map(|s| s.closest_point(p).dist).fold(S::infinity(), |a, b| a.min(b))
}

/// Signed distance, positive inside.
pub fn contour_sdf<S: Scalar>(c: &Contour<S>, p: Point<S>) -> Result<S, GeomError> {
    let d = contour_distance(c, p);
    Ok(if contour_occupancy(c, p)? { d } else { -d })
}

/// Signed crossings `(x, ±1)` of the horizontal line at `y`, or `None` when the
/// line passes within `tol` of a segment endpoint.
pub(crate) fn row_crossings<S: Scalar>(segs: &[QuadBezier<S>], y: S, tol: S) -> Option<Vec<(S, i32)>> {
    let mut out = Vec::new();
    for q in segs {
        let (lo, hi) = (q.a.y.min(q.b.y).min(q.c.y), q.a.y.max(q.b.y).max(q.c.y));
        if y < lo - tol || y > hi + tol {
            continue;
        }
        if (q.a.y - y).abs() <= tol || (q.c.y - y).abs() <= tol {
            return None;
        }
        let ay = q.a.y - q.b.y * S::lit(2.0) + q.c.y;
        let by = (q.b.y - q.a.y) * S::lit(2.0);
        let (roots, n) = solve_quadratic(ay, by, q.a.y - y);
        if n == 1 && ay.abs() > (ay.abs() + by.abs()) * S::epsilon() * S::lit(16.0) {
            continue;
        }
        for &t in &roots[..n] {
            if t > S::zero() && t < S::one() {
                let dy = S::lit(2.0) * ay * t + by;
                if dy != S::zero() {
                    out.push((q.eval(t).x, if dy > S::zero() { 1 } else { -1 }));
                }
            }
        }
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Some(out)
}

/// Nonzero-rule coverage of the pixels of `grid`, each averaged over `ss × ss`
/// sub-samples; exact per sample (scanline crossings).
pub fn contour_raster<S: Scalar>(c: &Contour<S>, grid: &SampleGrid<S>, ss: usize) -> GrayImage {
    let ss = ss.max(1);
    let res = grid.resolution();
    let fine = SampleGrid::new(res * ss, grid.min(), grid.max(), grid.y_down()).expect("resolution >= 1");
    let segs: Vec<QuadBezier<S>> = c.segments().map(|s| s.as_quad()).collect();
    let xs: Vec<S> = (0..res * ss).map(|col| fine.point(col, 0).x).collect();
    let tol = S::geom_tol(1e-12);
    let nudge = S::geom_tol(1e-9);
    let rows: Vec<Vec<f64>> = (0..res)
        .into_par_iter()
        .map(|row| {
            let mut acc = vec![0.0; res];
            for sub in 0..ss {
                let y0 = fine.point(0, row * ss + sub).y;
                let crossings = (0..=4)
                    .find_map(|k| row_crossings(&segs, y0 + nudge * S::lit(k as f64), tol))
                    .unwrap_or_default();
                // winding at x = sum of directions of crossings to the right
                let mut w: i32 = crossings.iter().map(|c| c.1).sum();
                let mut next = 0;
                for (col, &x) in xs.iter().enumerate() {
                    while next < crossings.len() && crossings[next].0 <= x {
                        w -= crossings[next].1;
                        next += 1;
                    }
                    if w != 0 {
                        acc[col / ss] += 1.0;
                    }
                }
            }
            let norm = 1.0 / (ss * ss) as f64;
            acc.into_iter().map(|v| v * norm).collect()
        })
        .collect();
    GrayImage::new(res, res, rows.into_iter().flatten().collect()).expect("coverage in [0, 1]")
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Intersection<S> {
    pub ta: S,
    pub tb: S,
    /// Tangents (nearly) parallel at the contact: a double root.
    pub tangential: bool,
}

fn on_other<S: Scalar>(a: &Segment<S>, b: &Segment<S>, tol: S) -> usize {
    (1..=9)
        .filter(|&k| {
            let p = a.eval(S::lit(k as f64 / 10.0));
            b.closest_point(p).dist <= tol
        })
        .count()
}

fn polish<S: Scalar>(a: &QuadBezier<S>, b: &QuadBezier<S>, mut ta: S, mut tb: S) -> (S, S, S) {
    let target = S::geom_tol(NEWTON_RESIDUAL);
    let mut res = (a.eval(ta) - b.eval(tb)).norm();
    for _ in 0..40 {
        if res <= target {
            break;
        }
        let f = a.eval(ta) - b.eval(tb);
        let u = a.deriv(ta);
        let v = -b.deriv(tb);
        let det = u.cross(v);
        if det.abs() <= S::epsilon() * u.norm() * v.norm() {
            break;
        }
        let r = -f;
        let nta = (ta + r.cross(v) / det).max(S::zero()).min(S::one());
        let ntb = (tb + u.cross(r) / det).max(S::zero()).min(S::one());
        let nres = (a.eval(nta) - b.eval(ntb)).norm();
        if !(nres < res) {
            break;
        }
        ta = nta;
        tb = ntb;
        res = nres;
    }
    (ta, tb, res)
}

/// Intersection parameters of two segments, sorted by `ta`.
///
/// Candidates come from recursive subdivision of both curves until the hull
/// boxes are below [`SUBDIV_TOL`], then are polished with Newton's method.
/// Segments sharing a stretch of curve yield [`BoolError::DegenerateOverlap`].
pub fn seg_intersections<S: Scalar>(a: &Segment<S>, b: &Segment<S>) -> Result<Vec<Intersection<S>>, BoolError> {
    let leaf = S::geom_tol(SUBDIV_TOL);
    if !a.bbox().overlaps(&b.bbox(), leaf) {
        return Ok(Vec::new());
    }
    let overlap_tol = S::geom_tol(OVERLAP_TOL);
    if on_other(a, b, overlap_tol) >= 2 || on_other(b, a, overlap_tol) >= 2 {
        return Err(BoolError::DegenerateOverlap);
    }
    let (qa, qb) = (a.as_quad(), b.as_quad());

    let mut leaves: Vec<(S, S)> = Vec::new();
    let mut stack = vec![(S::zero(), S::one(), S::zero(), S::one())];
    let half = S::lit(0.5);
    while let Some((a0, a1, b0, b1)) = stack.pop() {
        let sa = qa.subrange(a0, a1);
        let sb = qb.subrange(b0, b1);
        let (ba, bb) = (sa.hull_bbox(), sb.hull_bbox());
        if !ba.overlaps(&bb, leaf * S::lit(0.01)) {
            continue;
        }
        let (da, db) = (ba.diagonal(), bb.diagonal());
        if (da <= leaf && db <= leaf) || a1 - a0 < S::epsilon() * S::lit(8.0) {
            leaves.push(((a0 + a1) * half, (b0 + b1) * half));
            if leaves.len() >= MAX_LEAVES {
                break;
            }
            continue;
        }
        let (am, bm) = ((a0 + a1) * half, (b0 + b1) * half);
        if da > leaf && db > leaf {
            stack.push((am, a1, bm, b1));
            stack.push((am, a1, b0, bm));
            stack.push((a0, am, bm, b1));
            stack.push((a0, am, b0, bm));
        } else if da > leaf {
            stack.push((am, a1, b0, b1));
            stack.push((a0, am, b0, b1));
        } else {
            stack.push((a0, a1, bm, b1));
            stack.push((a0, a1, b0, bm));
        }
    }
    leaves.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.partial_cmp(&y.1).unwrap()));

    // neighbouring leaves belong to the same contact
    let gap = S::lit(1e-4);
    let mut clusters: Vec<Vec<(S, S)>> = Vec::new();
    for lf in leaves {
        match clusters.iter_mut().find(|c| c.iter().any(|q| (q.0 - lf.0).abs() <= gap && (q.1 - lf.1).abs() <= gap)) {
            Some(c) => c.push(lf),
            None => clusters.push(vec![lf]),
        }
    }

    let accept = S::geom_tol(1e-8);
    let sin_tol = S::lit(1e-6);
    let mut out: Vec<Intersection<S>> = Vec::new();
    for c in clusters {
        let (mut best_ta, mut best_tb, mut best_res) = (S::zero(), S::zero(), S::infinity());
        let n = S::lit(c.len() as f64);
        let mean = c.iter().fold((S::zero(), S::zero()), |acc, q| (acc.0 + q.0, acc.1 + q.1));
        let mut starts = vec![(mean.0 / n, mean.1 / n)];
        starts.push(c[0]);
        starts.push(c[c.len() - 1]);
        for (t0, t1) in starts {
            let (ta, tb, res) = polish(&qa, &qb, t0, t1);
            if res < best_res {
                best_ta = ta;
                best_tb = tb;
                best_res = res;
            }
        }
        if best_res > accept {
            continue;
        }
        let (u, v) = (qa.deriv(best_ta), qb.deriv(best_tb));
        let denom = u.norm() * v.norm();
        let tangential = denom <= S::zero() || (u.cross(v) / denom).abs() < sin_tol;
        let dup = out.iter().any(|o| (o.ta - best_ta).abs() <= S::lit(1e-7) && (o.tb - best_tb).abs() <= S::lit(1e-7));
        if !dup {
            out.push(Intersection { ta: best_ta, tb: best_tb, tangential });
        }
    }
    out.sort_by(|x, y| x.ta.partial_cmp(&y.ta).unwrap());
    Ok(out)
}

struct VertexPool<S> {
    pts: Vec<Point<S>>,
    tol: S,
}

impl<S: Scalar> VertexPool<S> {
    fn id(&mut self, p: Point<S>) -> usize {
        if let Some(i) = self.pts.iter().position(|q| q.dist(p) <= self.tol) {
            return i;
        }
        self.pts.push(p);
        self.pts.len() - 1
    }
}

struct Piece<S> {
    seg: Segment<S>,
    from: usize,
    to: usize,
}

fn glyph_inside<S: Scalar>(paths: &[PreparedPath<S>], p: Point<S>) -> Result<bool, GeomError> {
    for pair in paths.chunks(2) {
        if pair[0].inside(p)? && !pair[1].inside(p)? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Default control-point perturbation used to retry after [`BoolError::DegenerateOverlap`].
pub const RETRY_JITTER: f64 = 1e-7;

/// Copy of `g` with every control coordinate moved by a uniform offset in
/// `[-amount, amount]`, reproducible from `seed`.
pub fn jitter_glyph<S: Scalar>(g: &DualPartGlyph<S>, amount: f64, seed: u64) -> DualPartGlyph<S> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamVector::from_glyph(g);
    for v in params.0.iter_mut() {
        *v = *v + S::lit(rng.gen_range(-amount..=amount));
    }
    let mut out = g.clone();
    params.apply_to(&mut out);
    out
}

/// Boundary loops of `∪_i (P_i − Q_i)`, interior on the left of every segment.
pub fn extract_contour<S: Scalar>(g: &DualPartGlyph<S>) -> Result<Contour<S>, BoolError> {
    let degenerate = S::geom_tol(1e-12);
    let paths: Vec<PreparedPath<S>> = g.paths().map(PreparedPath::from_path).collect();
    let segs: Vec<Segment<S>> = paths
        .iter()
        .flat_map(|p| p.segs.iter())
        .map(|q| Segment::Quad(*q))
        .filter(|s| !s.is_degenerate(degenerate))
        .collect();

    let mut cuts: Vec<Vec<S>> = vec![Vec::new(); segs.len()];
    let split_tol = S::geom_tol(SPLIT_TOL);
    let interior = |t: S| t > split_tol && t < S::one() - split_tol;
    let boxes: Vec<BBox<S>> = segs.iter().map(|s| s.bbox()).collect();
    for i in 0..segs.len() {
        for j in i + 1..segs.len() {
            if !boxes[i].overlaps(&boxes[j], S::geom_tol(SUBDIV_TOL)) {
                continue;
            }
            for x in seg_intersections(&segs[i], &segs[j])? {
                if interior(x.ta) {
                    cuts[i].push(x.ta);
                }
                if interior(x.tb) {
                    cuts[j].push(x.tb);
                }
            }
        }
    }

    let mut pool = VertexPool { pts: Vec::new(), tol: S::geom_tol(STITCH_TOL) };
    let eps = S::geom_tol(CLASSIFY_EPS);
    let mut pieces: Vec<Piece<S>> = Vec::new();
    for (seg, ts) in segs.iter().zip(cuts.iter_mut()) {
        ts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        ts.dedup_by(|x, y| (*x - *y).abs() <= split_tol);
        let mut knots = Vec::with_capacity(ts.len() + 2);
        knots.push(S::zero());
        knots.extend(ts.iter().copied());
        knots.push(S::one());
        for w in knots.windows(2) {
            let mut piece = if w[0] == S::zero() && w[1] == S::one() { *seg } else { seg.subrange(w[0], w[1]) };
            let from = pool.id(piece.start());
            let to = pool.id(piece.end());
            if from == to && piece.is_degenerate(pool.tol) {
                continue;
            }
            let mid = piece.eval(S::lit(0.5));
            let normal = piece.direction(S::lit(0.5)).perp();
            let left = glyph_inside(&paths, mid + normal * eps)?;
            let right = glyph_inside(&paths, mid - normal * eps)?;
            if left == right {
                continue;
            }
            piece.set_start(pool.pts[from]);
            piece.set_end(pool.pts[to]);
            if left {
                pieces.push(Piece { seg: piece, from, to });
            } else {
                pieces.push(Piece { seg: piece.reversed(), from: to, to: from });
            }
        }
    }
    stitch(pieces, &pool.pts)
}

fn chain_length<S: Scalar>(pieces: &[Piece<S>], chain: &[usize]) -> S {
    chain.iter().fold(S::zero(), |acc, &k| acc + pieces[k].seg.arc_length())
}

/// Boundary graph walk. Near-coincident stretches (e.g. a quadratic folding
/// back onto itself) can leave slivers thinner than the classification offset;
/// a chain that dead-ends within [`BRIDGE_TOL`] of a usable vertex is bridged,
/// and a dead-end chain shorter than `BRIDGE_TOL` is dropped.
fn stitch<S: Scalar>(mut pieces: Vec<Piece<S>>, pts: &[Point<S>]) -> Result<Contour<S>, BoolError> {
    let bridge = S::geom_tol(BRIDGE_TOL);
    let mut used = vec![false; pieces.len()];
    let mut loops = Vec::new();
    'walk: for first in 0..pieces.len() {
        if used[first] {
            continue;
        }
        used[first] = true;
        let start = pieces[first].from;
        let mut chain = vec![first];
        let mut at = pieces[first].to;
        while at != start {
            let incoming = pieces[*chain.last().unwrap()].seg.direction(S::one());
            // leftmost turn keeps regions that touch at a point in separate loops
            let next = (0..pieces.len())
                .filter(|&k| !used[k] && pieces[k].from == at)
                .map(|k| {
                    let out = pieces[k].seg.direction(S::zero());
                    (k, incoming.cross(out).atan2(incoming.dot(out)))
                })
                .fold(None, |best: Option<(usize, S)>, cand| match best {
                    Some(b) if b.1 >= cand.1 => Some(b),
                    _ => Some(cand),
                });
            let Some((k, _)) = next else {
                if pts[at].dist(pts[start]) <= bridge {
                    pieces[*chain.last().unwrap()].seg.set_end(pts[start]);
                    break;
                }
                let near = (0..pieces.len())
                    .filter(|&k| !used[k] && pts[pieces[k].from].dist(pts[at]) <= bridge)
                    .min_by(|&x, &y| pts[pieces[x].from].dist(pts[at]).partial_cmp(&pts[pieces[y].from].dist(pts[at])).unwrap());
                if let Some(k) = near {
                    used[k] = true;
                    let prev = *chain.last().unwrap();
                    let joint = pts[pieces[k].from];
                    pieces[prev].seg.set_end(joint);
                    chain.push(k);
                    at = pieces[k].to;
                    continue;
                }
                if chain_length(&pieces, &chain) <= bridge {
                    continue 'walk;
                }
                let fragments = chain.iter().map(|&k| pieces[k].seg.points()).collect();
                return Err(BoolError::Unstitchable { fragments });
            };
            used[k] = true;
            chain.push(k);
            at = pieces[k].to;
        }
        loops.push(Loop { segments: chain.into_iter().map(|k| pieces[k].seg).collect() });
    }
    Ok(Contour { loops })
}
