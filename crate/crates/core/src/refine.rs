//! Image-guided contour refinement.
//!
//! The contour is moved to a 256-unit canvas (y down) and optimized with Adam
//! on `mean |R − I| + λ_reg · Σ length`, where `R` is the pre-filtered raster
//! of the contour. Structural edits run on a fixed schedule: pruning of tiny
//! loops once before the first step, then at every `short_and_flatten_every`
//! steps collapsing of short segments and flattening of nearly straight
//! quadratics, subdivision of long quadratics before `join_after`, and joining
//! of co-linear / co-parabolic neighbours from `join_after` on.

use rayon::prelude::*;
use thiserror::Error;

use crate::boolops::{row_crossings, Contour, Loop, Segment};
use crate::field::{FieldError, GrayImage, PreFilter, SampleGrid};
use crate::geom::{gl16_on, GeomError, Point, QuadBezier};
use crate::optim::{adam_step, AdamParams, AdamState};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("invalid refine configuration: {0}")]
    Config(String),
    #[error("non-finite refinement loss at step {step}; parameters: {params:?}")]
    NonFinite { step: usize, params: Vec<f64> },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefineConfig {
    pub canvas_side: f64,
    pub steps: usize,
    pub step_size: f64,
    pub lambda_reg: f64,
    pub prune_area: f64,
    pub short_len: f64,
    pub flatten_angle_deg: f64,
    pub join_line_angle_deg: f64,
    pub join_coeff_tol: f64,
    pub subdivide_len: f64,
    pub short_and_flatten_every: usize,
    pub subdivide_after: usize,
    pub join_after: usize,
    /// Pre-filter radius in canvas units; one pixel pitch when `None`.
    pub filter_radius: Option<f64>,
    pub moment_decays: (f64, f64),
    pub moment_eps: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            canvas_side: 256.0,
            steps: 200,
            step_size: 0.5,
            lambda_reg: 1e-6,
            prune_area: 50.0,
            short_len: 3.0,
            flatten_angle_deg: 171.0,
            join_line_angle_deg: 175.0,
            join_coeff_tol: 0.02,
            subdivide_len: 25.6,
            short_and_flatten_every: 50,
            subdivide_after: 50,
            join_after: 150,
            filter_radius: None,
            moment_decays: (0.9, 0.999),
            moment_eps: 1e-8,
        }
    }
}

/// A merged quad may not bend further than this from the pieces it replaces.
pub const JOIN_MAX_DEVIATION: f64 = 0.5;
/// A merged quad's control point may lie at most this many chords away.
pub const JOIN_MAX_REACH: f64 = 10.0;

impl RefineConfig {
    pub fn validate(&self) -> Result<(), RefineError> {
        let positive = [
            ("canvas_side", self.canvas_side),
            ("step_size", self.step_size),
            ("lambda_reg", self.lambda_reg),
            ("prune_area", self.prune_area),
            ("short_len", self.short_len),
            ("flatten_angle_deg", self.flatten_angle_deg),
            ("join_line_angle_deg", self.join_line_angle_deg),
            ("join_coeff_tol", self.join_coeff_tol),
            ("subdivide_len", self.subdivide_len),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(RefineError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.short_and_flatten_every == 0 {
            return Err(RefineError::Config("short_and_flatten_every must be >= 1".into()));
        }
        if let Some(r) = self.filter_radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(RefineError::Config(format!("filter_radius must be positive, got {r}")));
            }
        }
        Ok(())
    }

    /// Raster resolution: one pixel per canvas unit.
    pub fn resolution(&self) -> usize {
        self.canvas_side.round().max(1.0) as usize
    }

    fn filter<S: Scalar>(&self) -> PreFilter<S> {
        let r = self.filter_radius.unwrap_or(self.canvas_side / self.resolution() as f64);
        PreFilter::new(S::lit(r)).expect("validated radius")
    }

    fn is_edit_step(&self, step: usize) -> bool {
        step > 0 && step % self.short_and_flatten_every == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EditKind {
    /// Loop removed for enclosing too little area (value = |area|).
    Prune,
    /// Short segment collapsed (value = its length).
    Collapse,
    /// Quad replaced by a line (value = angle at the control point, degrees).
    Flatten,
    /// Quad split in half (value = its length).
    Subdivide,
    /// Two lines merged (value = angle at the shared vertex, degrees).
    JoinLines,
    /// Two quads merged (value = distance between normalized conic coefficients).
    JoinQuads,
    /// Loop dropped after falling below three segments (value = remaining segments).
    LoopRemoved,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefineEvent {
    pub step: usize,
    pub kind: EditKind,
    pub loop_index: usize,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefineRecord {
    pub step: usize,
    pub l_ras: f64,
    pub l_reg: f64,
    pub total: f64,
    pub segments: usize,
    /// Largest coordinate change (canvas units) of the optimizer step taken
    /// after this record; 0 for the final record.
    pub max_move: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RefineTrace {
    /// Loss before each gradient step, then one record for the returned contour.
    pub records: Vec<RefineRecord>,
    pub events: Vec<RefineEvent>,
    pub warnings: Vec<String>,
    /// Step whose contour was returned; `None` when no step beat the input.
    pub best_step: Option<usize>,
    /// `L_ras` of the input contour.
    pub input_l_ras: f64,
}

impl RefineTrace {
    pub fn count(&self, kind: EditKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }
}

struct Log<'a> {
    step: usize,
    events: Option<&'a mut Vec<RefineEvent>>,
}

impl Log<'_> {
    fn push(&mut self, kind: EditKind, loop_index: usize, value: f64) {
        if let Some(ev) = self.events.as_deref_mut() {
            ev.push(RefineEvent { step: self.step, kind, loop_index, value });
        }
    }
}

fn angle_deg<S: Scalar>(a: Point<S>, v: Point<S>, c: Point<S>) -> f64 {
    let (u, w) = (a - v, c - v);
    let denom = (u.norm() * w.norm()).to_f64_lossy();
    if denom <= 0.0 {
        return 180.0;
    }
    let cos = (u.dot(w).to_f64_lossy() / denom).clamp(-1.0, 1.0);
    cos.acos().to_degrees()
}

fn prune_loops<S: Scalar>(c: &Contour<S>, cfg: &RefineConfig, log: &mut Log) -> (Contour<S>, Vec<bool>) {
    let keep: Vec<bool> = c.loops.iter().map(|l| l.area().abs().to_f64_lossy() >= cfg.prune_area).collect();
    for (i, (l, &k)) in c.loops.iter().zip(&keep).enumerate() {
        if !k {
            log.push(EditKind::Prune, i, l.area().abs().to_f64_lossy());
        }
    }
    let loops = c.loops.iter().zip(&keep).filter(|(_, &k)| k).map(|(l, _)| l.clone()).collect();
    (Contour::new(loops), keep)
}

/// Removes loops whose absolute area is below `prune_area`.
pub fn prune<S: Scalar>(c: &Contour<S>, cfg: &RefineConfig) -> Contour<S> {
    prune_loops(c, cfg, &mut Log { step: 0, events: None }).0
}

fn collapse_loop<S: Scalar>(lp: &Loop<S>, cfg: &RefineConfig, li: usize, log: &mut Log) -> Option<Loop<S>> {
    let short: Vec<bool> = lp.segments.iter().map(|s| s.arc_length().to_f64_lossy() < cfg.short_len).collect();
    if !short.contains(&true) {
        return None;
    }
    // entries carry their original index so later removals find them
    let mut segs: Vec<(usize, Segment<S>)> = lp.segments.iter().copied().enumerate().collect();
    for (orig, _) in short.iter().enumerate().filter(|(_, &s)| s) {
        let pos = segs.iter().position(|(o, _)| *o == orig).expect("each segment removed once");
        let seg = segs[pos].1;
        log.push(EditKind::Collapse, li, seg.arc_length().to_f64_lossy());
        let mid = seg.start().midpoint(seg.end());
        segs.remove(pos);
        if segs.is_empty() {
            break;
        }
        let n = segs.len();
        let prev = (pos + n - 1) % n;
        let next = pos % n;
        segs[prev].1.set_end(mid);
        segs[next].1.set_start(mid);
    }
    Some(Loop { segments: segs.into_iter().map(|(_, s)| s).collect() })
}

fn flatten_loop<S: Scalar>(lp: &Loop<S>, cfg: &RefineConfig, li: usize, log: &mut Log) -> Option<Loop<S>> {
    let mut changed = false;
    let segments = lp
        .segments
        .iter()
        .map(|s| match s {
            Segment::Quad(q) => {
                let ang = angle_deg(q.a, q.b, q.c);
                if ang > cfg.flatten_angle_deg {
                    changed = true;
                    log.push(EditKind::Flatten, li, ang);
                    Segment::Line(q.a, q.c)
                } else {
                    *s
                }
            }
            Segment::Line(..) => *s,
        })
        .collect();
    changed.then_some(Loop { segments })
}

fn subdivide_quad<S: Scalar>(q: QuadBezier<S>, max_len: f64, out: &mut Vec<Segment<S>>, li: usize, log: &mut Log, depth: usize) {
    let len = q.arc_length().to_f64_lossy();
    if len > max_len && depth < 32 {
        log.push(EditKind::Subdivide, li, len);
        let (l, r) = q.split(S::lit(0.5));
        subdivide_quad(l, max_len, out, li, log, depth + 1);
        subdivide_quad(r, max_len, out, li, log, depth + 1);
    } else {
        out.push(Segment::Quad(q));
    }
}

fn subdivide_loop<S: Scalar>(lp: &Loop<S>, cfg: &RefineConfig, li: usize, log: &mut Log) -> Option<Loop<S>> {
    let mut out = Vec::with_capacity(lp.len());
    for s in &lp.segments {
        match s {
            Segment::Quad(q) => subdivide_quad(*q, cfg.subdivide_len, &mut out, li, log, 0),
            Segment::Line(..) => out.push(*s),
        }
    }
    (out.len() != lp.len()).then_some(Loop { segments: out })
}

/// Implicit conic `λ_b² − 4 λ_a λ_c = 0` of the parabola through a quad, as
/// coefficients of `(x², xy, y², x, y, 1)` with unit norm and the first
/// nonzero coefficient positive. Coordinates are divided by `scale` first.
pub fn conic_coefficients<S: Scalar>(q: &QuadBezier<S>, scale: f64) -> [f64; 6] {
    let p = |v: Point<S>| (v.x.to_f64_lossy() / scale, v.y.to_f64_lossy() / scale);
    let (a, b, c) = (p(q.a), p(q.b), p(q.c));
    // cross(u − P, w − P) as (constant, x, y) coefficients
    let form = |u: (f64, f64), w: (f64, f64)| [u.0 * w.1 - u.1 * w.0, u.1 - w.1, w.0 - u.0];
    let (la, lb, lc) = (form(b, c), form(c, a), form(a, b));
    let mul = |f: [f64; 3], g: [f64; 3]| {
        [f[1] * g[1], f[1] * g[2] + f[2] * g[1], f[2] * g[2], f[0] * g[1] + f[1] * g[0], f[0] * g[2] + f[2] * g[0], f[0] * g[0]]
    };
    let bb = mul(lb, lb);
    let ac = mul(la, lc);
    let mut e = [0.0; 6];
    for i in 0..6 {
        e[i] = bb[i] - 4.0 * ac[i];
    }
    let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return e;
    }
    let lead = e.iter().copied().find(|v| v.abs() > 1e-12 * norm).unwrap_or(1.0);
    let s = lead.signum() / norm;
    e.map(|v| v * s)
}

fn merge_quads<S: Scalar>(q1: &QuadBezier<S>, q2: &QuadBezier<S>) -> Option<QuadBezier<S>> {
    let (a, c) = (q1.a, q2.c);
    let d0 = q1.b - q1.a;
    let d1 = q2.c - q2.b;
    let det = d0.cross(d1);
    let chord = a.dist(c);
    if det == S::zero() || chord == S::zero() {
        return None;
    }
    // a + s d0 = c − u d1
    let s = (c - a).cross(d1) / det;
    let ctrl = a + d0 * s;
    if !ctrl.is_finite() || ctrl.dist(a) > S::lit(JOIN_MAX_REACH) * chord || ctrl.dist(c) > S::lit(JOIN_MAX_REACH) * chord {
        return None;
    }
    let merged = QuadBezier::new(a, ctrl, c);
    let dev = S::lit(JOIN_MAX_DEVIATION);
    for q in [q1, q2] {
        for k in 0..=16 {
            if merged.closest_point(q.eval(S::lit(k as f64 / 16.0))).dist > dev {
                return None;
            }
        }
    }
    Some(merged)
}

fn try_join<S: Scalar>(s1: &Segment<S>, s2: &Segment<S>, cfg: &RefineConfig) -> Option<(Segment<S>, EditKind, f64)> {
    match (s1, s2) {
        (Segment::Line(a, v), Segment::Line(_, c)) => {
            let ang = angle_deg(*a, *v, *c);
            (ang > cfg.join_line_angle_deg).then_some((Segment::Line(*a, *c), EditKind::JoinLines, ang))
        }
        (Segment::Quad(q1), Segment::Quad(q2)) => {
            let e1 = conic_coefficients(q1, cfg.canvas_side);
            let e2 = conic_coefficients(q2, cfg.canvas_side);
            let diff = e1.iter().zip(&e2).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            if diff >= cfg.join_coeff_tol {
                return None;
            }
            merge_quads(q1, q2).map(|m| (Segment::Quad(m), EditKind::JoinQuads, diff))
        }
        _ => None,
    }
}

fn join_loop<S: Scalar>(lp: &Loop<S>, cfg: &RefineConfig, li: usize, log: &mut Log) -> Option<Loop<S>> {
    let mut segs = lp.segments.clone();
    let mut changed = false;
    let mut j = 0;
    while segs.len() > 3 && j < segs.len() {
        let k = (j + 1) % segs.len();
        match try_join(&segs[j], &segs[k], cfg) {
            Some((merged, kind, value)) => {
                log.push(kind, li, value);
                changed = true;
                segs[j] = merged;
                segs.remove(k);
                if k < j {
                    j -= 1;
                }
            }
            None => j += 1,
        }
    }
    changed.then_some(Loop { segments: segs })
}

fn apply_per_loop<S: Scalar>(
    c: &Contour<S>,
    log: &mut Log,
    mut op: impl FnMut(&Loop<S>, usize, &mut Log) -> Option<Loop<S>>,
) -> (Contour<S>, Vec<Option<usize>>) {
    // changed[i] = Some(new segment count) for loops rewritten by `op`
    let mut changed = Vec::with_capacity(c.loops.len());
    let loops = c
        .loops
        .iter()
        .enumerate()
        .map(|(i, l)| match op(l, i, log) {
            Some(nl) => {
                changed.push(Some(nl.len()));
                nl
            }
            None => {
                changed.push(None);
                l.clone()
            }
        })
        .collect();
    (Contour::new(loops), changed)
}

fn drop_degenerate<S: Scalar>(c: Contour<S>, before: &[usize], log: &mut Log, warnings: &mut Vec<String>) -> (Contour<S>, Vec<bool>) {
    let keep: Vec<bool> = c.loops.iter().zip(before).map(|(l, &b)| l.len() >= 3 || l.len() >= b).collect();
    for (i, (l, &k)) in c.loops.iter().zip(&keep).enumerate() {
        if !k {
            log.push(EditKind::LoopRemoved, i, l.len() as f64);
            warnings.push(format!("step {}: loop {i} fell to {} segment(s) and was removed", log.step, l.len()));
        }
    }
    let loops = c.loops.into_iter().zip(&keep).filter(|(_, &k)| k).map(|(l, _)| l).collect();
    (Contour::new(loops), keep)
}

/// Deletes segments shorter than `short_len`, reconnecting the neighbours at
/// the midpoint of the removed segment. Loops left with fewer than three
/// segments are dropped.
pub fn collapse_short<S: Scalar>(c: &Contour<S>, cfg: &RefineConfig) -> Contour<S> {
    let mut log = Log { step: 0, events: None };
    let before: Vec<usize> = c.loops.iter().map(|l| l.len()).collect();
    let (out, _) = apply_per_loop(c, &mut log, |l, i, log| collapse_loop(l, cfg, i, log));
    drop_degenerate(out, &before, &mut log, &mut Vec::new()).0
}

/// Replaces quads whose control angle exceeds `flatten_angle_deg` by lines.
pub fn flatten<S: Scalar>(c: &Contour<S>, cfg: &RefineConfig) -> Contour<S> {
    apply_per_loop(c, &mut Log { step: 0, events: None }, |l, i, log| flatten_loop(l, cfg, i, log)).0
}

/// Halves quads longer than `subdivide_len` until none is.
pub fn subdivide<S: Scalar>(c: &Contour<S>, cfg: &RefineConfig) -> Contour<S> {
    apply_per_loop(c, &mut Log { step: 0, events: None }, |l, i, log| subdivide_loop(l, cfg, i, log)).0
}

/// Merges nearly collinear neighbouring lines and co-parabolic neighbouring quads.
pub fn join_adjacent<S: Scalar>(c: &Contour<S>, cfg: &RefineConfig) -> Contour<S> {
    apply_per_loop(c, &mut Log { step: 0, events: None }, |l, i, log| join_loop(l, cfg, i, log)).0
}

/// Parameter slots of one loop: each segment's start point, then its control
/// point for quads; a segment's end is the next segment's start.
#[derive(Clone, Debug)]
struct LoopLayout {
    start: Vec<usize>,
    ctrl: Vec<Option<usize>>,
    len: usize,
}

impl LoopLayout {
    fn new<S: Scalar>(lp: &Loop<S>) -> Self {
        let mut start = Vec::with_capacity(lp.len());
        let mut ctrl = Vec::with_capacity(lp.len());
        let mut off = 0;
        for s in &lp.segments {
            start.push(off);
            off += 2;
            if s.is_line() {
                ctrl.push(None);
            } else {
                ctrl.push(Some(off));
                off += 2;
            }
        }
        LoopLayout { start, ctrl, len: off }
    }

    fn read<S: Scalar>(&self, lp: &Loop<S>) -> Vec<S> {
        let mut v = vec![S::zero(); self.len];
        for (j, s) in lp.segments.iter().enumerate() {
            let p = s.start();
            v[self.start[j]] = p.x;
            v[self.start[j] + 1] = p.y;
            if let (Some(o), Segment::Quad(q)) = (self.ctrl[j], s) {
                v[o] = q.b.x;
                v[o + 1] = q.b.y;
            }
        }
        v
    }

    fn write<S: Scalar>(&self, v: &[S], lp: &mut Loop<S>) {
        let n = lp.len();
        let pt = |o: usize| Point::new(v[o], v[o + 1]);
        for j in 0..n {
            let a = pt(self.start[j]);
            let c = pt(self.start[(j + 1) % n]);
            lp.segments[j] = match self.ctrl[j] {
                Some(o) => Segment::Quad(QuadBezier::new(a, pt(o), c)),
                None => Segment::Line(a, c),
            };
        }
    }

    /// Adds gradients with respect to a segment's `(a, b, c)` quad points.
    fn scatter<S: Scalar>(&self, j: usize, n: usize, g: [Point<S>; 3], out: &mut [S]) {
        let half = S::lit(0.5);
        let (ga, gc) = match self.ctrl[j] {
            Some(o) => {
                out[o] = out[o] + g[1].x;
                out[o + 1] = out[o + 1] + g[1].y;
                (g[0], g[2])
            }
            // a line is the quad with b = (a + c) / 2
            None => (g[0] + g[1] * half, g[2] + g[1] * half),
        };
        let (s0, s1) = (self.start[j], self.start[(j + 1) % n]);
        out[s0] = out[s0] + ga.x;
        out[s0 + 1] = out[s0 + 1] + ga.y;
        out[s1] = out[s1] + gc.x;
        out[s1 + 1] = out[s1 + 1] + gc.y;
    }
}

/// Gradient of the arc length of a quad with respect to `(a, b, c)`.
fn length_grad<S: Scalar>(q: &QuadBezier<S>) -> [Point<S>; 3] {
    let mut g = [Point::zero(); 3];
    let two = S::lit(2.0);
    for (lo, hi) in q.length_panels() {
        for (t, w) in gl16_on(lo.to_f64_lossy(), hi.to_f64_lossy()) {
            let t = S::lit(t);
            let d = q.deriv(t);
            let n = d.norm();
            if n == S::zero() {
                continue;
            }
            let u = d * (S::lit(w) / n);
            g[0] += u * (-two * (S::one() - t));
            g[1] += u * (two * (S::one() - two * t));
            g[2] += u * (two * t);
        }
    }
    g
}

struct RasterOut<S> {
    image: Vec<f64>,
    loss: S,
    /// Per-segment gradient of the loss with respect to `(a, b, c)`.
    grads: Vec<[Point<S>; 3]>,
}

/// Pre-filtered nonzero-rule raster of `segs` on `grid`; with a target also the
/// mean absolute error and its gradient.
fn raster<S: Scalar>(segs: &[QuadBezier<S>], grid: &SampleGrid<S>, filter: PreFilter<S>, target: Option<&GrayImage>) -> RasterOut<S> {
    let res = grid.resolution();
    let r = filter.radius();
    let boxes: Vec<_> = segs.iter().map(|s| s.hull_bbox()).collect();
    let tol = S::geom_tol(1e-12);
    let nudge = S::geom_tol(1e-9);
    let npix = S::lit((res * res) as f64);
    let xs: Vec<S> = (0..res).map(|c| grid.point(c, 0).x).collect();

    type Row<S> = (Vec<f64>, S, Vec<(usize, [Point<S>; 3])>);
    let rows: Vec<Row<S>> = (0..res)
        .into_par_iter()
        .map(|row| {
            let y = grid.point(0, row).y;
            let crossings = (0..=4).find_map(|k| row_crossings(segs, y + nudge * S::lit(k as f64), tol)).unwrap_or_default();
            let near: Vec<usize> = (0..segs.len()).filter(|&j| boxes[j].min.y - r < y && y < boxes[j].max.y + r).collect();
            let mut w: i32 = crossings.iter().map(|c| c.1).sum();
            let mut next = 0;
            let mut vals = Vec::with_capacity(res);
            let mut loss_terms = Vec::new();
            let mut grads = Vec::new();
            for (col, &x) in xs.iter().enumerate() {
                while next < crossings.len() && crossings[next].0 <= x {
                    w -= crossings[next].1;
                    next += 1;
                }
                let inside = w != 0;
                let p = Point::new(x, y);
                let mut best: Option<(usize, S, S, Point<S>)> = None;
                let mut bound = r;
                for &j in &near {
                    if boxes[j].distance(p) >= bound {
                        continue;
                    }
                    let pr = segs[j].closest_point(p);
                    if pr.dist < bound {
                        bound = pr.dist;
                        best = Some((j, pr.t, pr.dist, pr.point));
                    }
                }
                let sign = if inside { S::one() } else { -S::one() };
                let (val, slope) = match best {
                    Some((_, _, d, _)) => filter.alpha_with_slope(sign * d),
                    None => (if inside { S::one() } else { S::zero() }, S::zero()),
                };
                vals.push(val.to_f64_lossy());
                if let Some(img) = target {
                    let diff = val - S::lit(img.get(col, row));
                    loss_terms.push(diff.abs());
                    if let Some((j, t, d, q)) = best {
                        if slope != S::zero() && diff != S::zero() && d > S::zero() {
                            let coef = diff.signum() / npix * slope * sign;
                            let dir = (q - p) / d;
                            let wts = QuadBezier::<S>::weights(t);
                            grads.push((j, [dir * (coef * wts[0]), dir * (coef * wts[1]), dir * (coef * wts[2])]));
                        }
                    }
                }
            }
            let loss = crate::scalar::pairwise_sum(&loss_terms);
            (vals, loss, grads)
        })
        .collect();

    let mut image = Vec::with_capacity(res * res);
    let mut row_losses = Vec::with_capacity(res);
    let mut grads = vec![[Point::zero(); 3]; segs.len()];
    for (vals, loss, g) in rows {
        image.extend(vals);
        row_losses.push(loss);
        for (j, gj) in g {
            for k in 0..3 {
                grads[j][k] += gj[k];
            }
        }
    }
    RasterOut { image, loss: crate::scalar::pairwise_sum(&row_losses) / npix, grads }
}

/// Pre-filtered raster of a contour given in the `[-1,1]^2` frame.
pub fn render_contour_soft<S: Scalar>(c: &Contour<S>, res: usize, filter: PreFilter<S>) -> Result<GrayImage, FieldError> {
    if res == 0 {
        return Err(FieldError::BadResolution);
    }
    let segs: Vec<QuadBezier<S>> = c.segments().map(|s| s.as_quad()).collect();
    let out = raster(&segs, &SampleGrid::unit(res), filter, None);
    GrayImage::new(res, res, out.image)
}

struct Objective<S> {
    l_ras: S,
    l_reg: S,
    /// One gradient vector per loop, in [`LoopLayout`] order.
    grads: Vec<Vec<S>>,
}

fn objective<S: Scalar>(
    c: &Contour<S>,
    layouts: &[LoopLayout],
    target: &GrayImage,
    grid: &SampleGrid<S>,
    filter: PreFilter<S>,
    lambda_reg: S,
) -> Objective<S> {
    let segs: Vec<QuadBezier<S>> = c.segments().map(|s| s.as_quad()).collect();
    let out = raster(&segs, grid, filter, Some(target));
    let mut grads: Vec<Vec<S>> = layouts.iter().map(|l| vec![S::zero(); l.len]).collect();
    let mut l_reg = S::zero();
    let mut k = 0;
    for (li, lp) in c.loops.iter().enumerate() {
        let n = lp.len();
        for (j, s) in lp.segments.iter().enumerate() {
            l_reg = l_reg + s.arc_length();
            let lg = match s {
                Segment::Quad(q) => length_grad(q),
                Segment::Line(a, c) => {
                    let d = *c - *a;
                    let len = d.norm();
                    let u = if len > S::zero() { d / len } else { Point::zero() };
                    [-u, Point::zero(), u]
                }
            };
            let g = out.grads[k];
            let total = [g[0] + lg[0] * lambda_reg, g[1] + lg[1] * lambda_reg, g[2] + lg[2] * lambda_reg];
            layouts[li].scatter(j, n, total, &mut grads[li]);
            k += 1;
        }
    }
    Objective { l_ras: out.loss, l_reg, grads }
}

fn check_target(target: &GrayImage, cfg: &RefineConfig) -> GrayImage {
    let res = cfg.resolution();
    target.resample(res, res)
}

/// `(L_ras, L_reg)` of a `[-1,1]^2`-frame contour against `target`
/// (resampled to the canvas resolution).
pub fn refine_loss<S: Scalar>(c: &Contour<S>, target: &GrayImage, cfg: &RefineConfig) -> Result<(f64, f64), RefineError> {
    cfg.validate()?;
    let target = check_target(target, cfg);
    let canvas = c.to_canvas(S::lit(cfg.canvas_side));
    let layouts: Vec<LoopLayout> = canvas.loops.iter().map(LoopLayout::new).collect();
    let grid = SampleGrid::canvas(cfg.resolution(), S::lit(cfg.canvas_side));
    let o = objective(&canvas, &layouts, &target, &grid, cfg.filter(), S::lit(cfg.lambda_reg));
    Ok((o.l_ras.to_f64_lossy(), o.l_reg.to_f64_lossy()))
}

struct LoopState<S> {
    layout: LoopLayout,
    adam: AdamState<S>,
}

impl<S: Scalar> LoopState<S> {
    fn new(lp: &Loop<S>) -> Self {
        let layout = LoopLayout::new(lp);
        let adam = AdamState::new(layout.len);
        LoopState { layout, adam }
    }
}

/// Rebuilds optimizer state after a structural edit: loops rewritten by the
/// edit (or renumbered by a removal) start with fresh moments.
fn sync_states<S: Scalar>(c: &Contour<S>, states: Vec<LoopState<S>>, changed: &[Option<usize>], kept: &[bool]) -> Vec<LoopState<S>> {
    let mut out = Vec::with_capacity(c.loops.len());
    let mut it = c.loops.iter();
    for ((st, ch), &k) in states.into_iter().zip(changed).zip(kept) {
        if !k {
            continue;
        }
        let lp = it.next().expect("kept loop present");
        out.push(if ch.is_some() { LoopState::new(lp) } else { st });
    }
    out
}

/// Refines a `[-1,1]^2`-frame contour against `target` and returns the refined
/// contour in the same frame together with an instrumented trace.
///
/// The returned contour is the iterate with the lowest `L_ras` (latest on
/// ties), or the input itself if no iterate reaches the input's `L_ras`.
pub fn refine<S: Scalar>(c: &Contour<S>, target: &GrayImage, cfg: &RefineConfig) -> Result<(Contour<S>, RefineTrace), RefineError> {
    cfg.validate()?;
    let target = check_target(target, cfg);
    let side = S::lit(cfg.canvas_side);
    let grid = SampleGrid::canvas(cfg.resolution(), side);
    let filter: PreFilter<S> = cfg.filter();
    let lambda_reg = S::lit(cfg.lambda_reg);
    let hp = AdamParams::new(cfg.step_size, cfg.moment_decays, cfg.moment_eps);
    let mut trace = RefineTrace::default();
    let mut contour = c.to_canvas(side);
    let input_layouts: Vec<LoopLayout> = contour.loops.iter().map(LoopLayout::new).collect();
    let input_l_ras = objective(&contour, &input_layouts, &target, &grid, filter, lambda_reg).l_ras;
    trace.input_l_ras = input_l_ras.to_f64_lossy();
    if cfg.steps == 0 {
        return Ok((c.clone(), trace));
    }
    let mut best: Option<(S, Contour<S>)> = None;

    let (pruned, _) = prune_loops(&contour, cfg, &mut Log { step: 0, events: Some(&mut trace.events) });
    contour = pruned;
    let mut states: Vec<LoopState<S>> = contour.loops.iter().map(LoopState::new).collect();

    let snapshot = |c: &Contour<S>| -> Vec<f64> {
        c.segments()
            .flat_map(|s| {
                let q = s.as_quad();
                [q.a, q.b, q.c]
            })
            .flat_map(|p| [p.x.to_f64_lossy(), p.y.to_f64_lossy()])
            .collect()
    };

    for step in 0..=cfg.steps {
        if cfg.is_edit_step(step) {
            let mut log = Log { step, events: Some(&mut trace.events) };
            let passes: [&dyn Fn(&Loop<S>, usize, &mut Log) -> Option<Loop<S>>; 4] = [
                &|l, i, log| collapse_loop(l, cfg, i, log),
                &|l, i, log| flatten_loop(l, cfg, i, log),
                &|l, i, log| if step >= cfg.subdivide_after && step < cfg.join_after { subdivide_loop(l, cfg, i, log) } else { None },
                &|l, i, log| if step >= cfg.join_after { join_loop(l, cfg, i, log) } else { None },
            ];
            for pass in passes {
                let before: Vec<usize> = contour.loops.iter().map(|l| l.len()).collect();
                let (edited, changed) = apply_per_loop(&contour, &mut log, pass);
                let (kept_contour, kept) = drop_degenerate(edited, &before, &mut log, &mut trace.warnings);
                states = sync_states(&kept_contour, states, &changed, &kept);
                contour = kept_contour;
            }
        }

        let layouts: Vec<LoopLayout> = states.iter().map(|s| s.layout.clone()).collect();
        let obj = objective(&contour, &layouts, &target, &grid, filter, lambda_reg);
        let total = obj.l_ras + lambda_reg * obj.l_reg;
        if !total.is_finite() || obj.grads.iter().flatten().any(|g| !g.is_finite()) {
            return Err(RefineError::NonFinite { step, params: snapshot(&contour) });
        }
        trace.records.push(RefineRecord {
            step,
            l_ras: obj.l_ras.to_f64_lossy(),
            l_reg: obj.l_reg.to_f64_lossy(),
            total: total.to_f64_lossy(),
            segments: contour.segment_count(),
            max_move: 0.0,
        });
        let bar = best.as_ref().map_or(input_l_ras, |b| b.0);
        if obj.l_ras <= bar {
            best = Some((obj.l_ras, contour.clone()));
            trace.best_step = Some(step);
        }
        if step == cfg.steps {
            break;
        }
        let mut max_move = 0.0f64;
        for ((lp, st), g) in contour.loops.iter_mut().zip(states.iter_mut()).zip(&obj.grads) {
            let mut params = st.layout.read(lp);
            let before = params.clone();
            adam_step(&mut params, g, &mut st.adam, &hp);
            for (a, b) in params.iter().zip(&before) {
                max_move = max_move.max((*a - *b).abs().to_f64_lossy());
            }
            st.layout.write(&params, lp);
        }
        if let Some(r) = trace.records.last_mut() {
            r.max_move = max_move;
        }
    }
    match best {
        Some((_, b)) => Ok((b.from_canvas(side), trace)),
        None => Ok((c.clone(), trace)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point<f64> {
        Point::new(x, y)
    }

    fn poly(pts: &[(f64, f64)]) -> Loop<f64> {
        let n = pts.len();
        Loop::new((0..n).map(|i| Segment::Line(p(pts[i].0, pts[i].1), p(pts[(i + 1) % n].0, pts[(i + 1) % n].1))).collect()).unwrap()
    }

    fn cfg() -> RefineConfig {
        RefineConfig::default()
    }

    #[test]
    fn defaults() {
        let c = cfg();
        assert_eq!(c.steps, 200);
        assert_eq!(c.prune_area, 50.0);
        assert_eq!(c.short_len, 3.0);
        assert_eq!(c.flatten_angle_deg, 171.0);
        assert_eq!(c.join_line_angle_deg, 175.0);
        assert_eq!(c.join_coeff_tol, 0.02);
        assert_eq!(c.subdivide_len, 25.6);
        assert_eq!(c.lambda_reg, 1e-6);
        assert_eq!(c.step_size, 0.5);
        assert_eq!(c.resolution(), 256);
        assert!(c.validate().is_ok());
        assert!(RefineConfig { short_len: 0.0, ..cfg() }.validate().is_err());
    }

    #[test]
    fn prune_threshold() {
        // 7 x 7 = 49 < 50, 100 x 100 kept
        let c = Contour::new(vec![poly(&[(0.0, 0.0), (7.0, 0.0), (7.0, 7.0), (0.0, 7.0)]), poly(&[(20.0, 20.0), (120.0, 20.0), (120.0, 120.0), (20.0, 120.0)])]);
        let out = prune(&c, &cfg());
        assert_eq!(out.loops.len(), 1);
        assert_eq!(out.loops[0], c.loops[1]);
        assert_eq!(prune(&out, &cfg()), out);
        let exact = Contour::new(vec![poly(&[(0.0, 0.0), (5.0, 0.0), (5.0, 10.0), (0.0, 10.0)])]);
        assert_eq!(prune(&exact, &cfg()).loops.len(), 1);
    }

    #[test]
    fn collapse_notch() {
        let c = Contour::new(vec![poly(&[(0.0, 0.0), (50.0, 0.0), (50.0, 50.0), (2.0, 50.0), (0.0, 50.0)])]);
        let out = collapse_short(&c, &cfg());
        assert_eq!(out.loops[0].len(), 4);
        out.loops[0].check_closed(1e-9).unwrap();
        assert_eq!(out.loops[0].segments[2].end(), p(1.0, 50.0));
        let long = Contour::new(vec![poly(&[(0.0, 0.0), (50.0, 0.0), (50.0, 50.0), (3.0, 50.0), (0.0, 50.0)])]);
        assert_eq!(collapse_short(&long, &cfg()), long);
    }

    #[test]
    fn flatten_by_angle() {
        let straight = Segment::Quad(QuadBezier::new(p(0.0, 0.0), p(5.0, 0.0), p(10.0, 0.0)));
        let right = Segment::Quad(QuadBezier::new(p(10.0, 0.0), p(20.0, 0.0), p(20.0, 10.0)));
        let lp = Loop::new(vec![straight, right, Segment::Line(p(20.0, 10.0), p(0.0, 0.0))]).unwrap();
        let out = flatten(&Contour::new(vec![lp]), &cfg());
        assert!(out.loops[0].segments[0].is_line());
        assert!(!out.loops[0].segments[1].is_line());
        assert_eq!(flatten(&out, &cfg()), out);
    }

    #[test]
    fn flatten_threshold_is_strict() {
        let at = |deg: f64| {
            let half = (180.0 - deg).to_radians() / 2.0;
            QuadBezier::new(p(-10.0 * half.cos(), 0.0), p(0.0, 10.0 * half.sin()), p(10.0 * half.cos(), 0.0))
        };
        for (deg, flat) in [(171.5, true), (170.5, false)] {
            let q = at(deg);
            assert!((angle_deg(q.a, q.b, q.c) - deg).abs() < 1e-9);
            let lp = Loop { segments: vec![Segment::Quad(q), Segment::Line(q.c, p(0.0, -30.0)), Segment::Line(p(0.0, -30.0), q.a)] };
            let out = flatten(&Contour::new(vec![lp]), &cfg());
            assert_eq!(out.loops[0].segments[0].is_line(), flat, "{deg}");
        }
    }

    #[test]
    fn subdivide_long_quads() {
        let q = QuadBezier::new(p(0.0, 0.0), p(30.0, 20.0), p(60.0, 0.0));
        let lp = Loop { segments: vec![Segment::Quad(q), Segment::Line(p(60.0, 0.0), p(0.0, 0.0))] };
        let out = subdivide(&Contour::new(vec![lp]), &cfg());
        let pieces: Vec<_> = out.loops[0].segments.iter().filter(|s| !s.is_line()).collect();
        assert!(pieces.len() >= 3);
        assert!(pieces.iter().all(|s| s.arc_length() <= 25.6));
        out.loops[0].check_closed(1e-9).unwrap();
        let short = QuadBezier::new(p(0.0, 0.0), p(10.0, 5.0), p(20.0, 0.0));
        let lp = Loop { segments: vec![Segment::Quad(short), Segment::Line(p(20.0, 0.0), p(0.0, 0.0))] };
        assert_eq!(subdivide(&Contour::new(vec![lp.clone()]), &cfg()).loops[0], lp);
    }

    #[test]
    fn join_lines() {
        let c = Contour::new(vec![poly(&[(0.0, 0.0), (20.0, 0.0), (40.0, 0.0), (40.0, 40.0), (0.0, 40.0)])]);
        let out = join_adjacent(&c, &cfg());
        assert_eq!(out.loops[0].len(), 4);
        let square = Contour::new(vec![poly(&[(0.0, 0.0), (40.0, 0.0), (40.0, 40.0), (0.0, 40.0), (0.0, 20.0)])]);
        assert_eq!(join_adjacent(&square, &cfg()).loops[0].len(), 4);
    }

    #[test]
    fn join_split_halves() {
        let q = QuadBezier::new(p(0.0, 0.0), p(40.0, 60.0), p(80.0, 0.0));
        let (l, r) = q.split(0.5);
        assert!(conic_coefficients(&l, 256.0).iter().zip(conic_coefficients(&r, 256.0)).all(|(a, b)| (a - b).abs() < 1e-12));
        let lp = Loop {
            segments: vec![
                Segment::Quad(l),
                Segment::Quad(r),
                Segment::Line(p(80.0, 0.0), p(80.0, -40.0)),
                Segment::Line(p(80.0, -40.0), p(0.0, -40.0)),
                Segment::Line(p(0.0, -40.0), p(0.0, 0.0)),
            ],
        };
        let out = join_adjacent(&Contour::new(vec![lp]), &cfg());
        assert_eq!(out.loops[0].len(), 4);
        let Segment::Quad(m) = out.loops[0].segments[0] else { panic!("expected quad") };
        assert!(m.b.dist(q.b) < 1e-9);
    }

    #[test]
    fn conic_vanishes_on_curve() {
        let q = QuadBezier::new(p(10.0, 20.0), p(90.0, 150.0), p(200.0, 30.0));
        let e = conic_coefficients(&q, 1.0);
        for k in 0..=10 {
            let b = q.eval(k as f64 / 10.0);
            let v = e[0] * b.x * b.x + e[1] * b.x * b.y + e[2] * b.y * b.y + e[3] * b.x + e[4] * b.y + e[5];
            assert!(v.abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn length_gradient_matches_fd() {
        let q = QuadBezier::new(p(1.0, 2.0), p(7.0, 9.0), p(12.0, -3.0));
        let g = length_grad(&q);
        let h = 1e-6;
        for k in 0..3 {
            for axis in 0..2 {
                let bump = |d: f64| {
                    let mut pts = [q.a, q.b, q.c];
                    if axis == 0 {
                        pts[k].x += d
                    } else {
                        pts[k].y += d
                    }
                    QuadBezier::new(pts[0], pts[1], pts[2]).arc_length()
                };
                let fd = (bump(h) - bump(-h)) / (2.0 * h);
                let an = if axis == 0 { g[k].x } else { g[k].y };
                assert!((fd - an).abs() < 1e-6, "{k} {axis}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn zero_steps_is_identity() {
        let c = Contour::new(vec![poly(&[(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)])]);
        let (out, trace) = refine(&c, &GrayImage::filled(64, 64, 0.0), &RefineConfig { steps: 0, ..cfg() }).unwrap();
        assert_eq!(out, c);
        assert!(trace.records.is_empty());
    }
}
