//! Exact quadratic Bézier primitives and the closed paths built from them.
//!
//! Coordinates are dimensionless; callers pick the frame (`[-1,1]^2` with
//! y up while fitting, `[0,256]^2` with y down during refinement).

mod quadrature;
pub mod solve;

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use thiserror::Error;

use crate::Scalar;
pub use quadrature::{gl16_on, GL16_NODES, GL16_WEIGHTS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("closed path needs at least 2 segments (got {0} control points)")]
    TooFewSegments(usize),
    #[error("closed path needs an even number of control points, got {0}")]
    OddControlCount(usize),
    #[error("non-finite coordinate at control point {0}")]
    NonFinite(usize),
    #[error("winding query at ({x}, {y}) stayed degenerate after {retries} ray jitters")]
    DegenerateWinding { x: f64, y: f64, retries: usize },
    #[error("dual-part glyph needs at least one part")]
    NoParts,
    #[error("dual part {part}: path has M={found}, glyph uses M={expected}")]
    MismatchedSegments { part: usize, expected: usize, found: usize },
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point<S> {
    pub x: S,
    pub y: S,
}

impl<S: Scalar> Point<S> {
    #[inline]
    pub fn new(x: S, y: S) -> Self {
        Point { x, y }
    }

    pub fn from_f64(x: f64, y: f64) -> Self {
        Point::new(S::lit(x), S::lit(y))
    }

    #[inline]
    pub fn zero() -> Self {
        Point::new(S::zero(), S::zero())
    }

    #[inline]
    pub fn dot(self, o: Self) -> S {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    #[inline]
    pub fn cross(self, o: Self) -> S {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm_sq(self) -> S {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> S {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn dist(self, o: Self) -> S {
        (self - o).norm()
    }

    #[inline]
    pub fn lerp(self, o: Self, t: S) -> Self {
        self + (o - self) * t
    }

    #[inline]
    pub fn midpoint(self, o: Self) -> Self {
        (self + o) * S::lit(0.5)
    }

    /// Counter-clockwise perpendicular.
    #[inline]
    pub fn perp(self) -> Self {
        Point::new(-self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn cast<T: Scalar>(self) -> Point<T> {
        Point::new(T::lit(self.x.to_f64_lossy()), T::lit(self.y.to_f64_lossy()))
    }
}

impl<S: Scalar> Add for Point<S> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl<S: Scalar> AddAssign for Point<S> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        self.x = self.x + o.x;
        self.y = self.y + o.y;
    }
}

impl<S: Scalar> Sub for Point<S> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl<S: Scalar> SubAssign for Point<S> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        self.x = self.x - o.x;
        self.y = self.y - o.y;
    }
}

impl<S: Scalar> Mul<S> for Point<S> {
    type Output = Self;
    #[inline]
    fn mul(self, k: S) -> Self {
        Point::new(self.x * k, self.y * k)
    }
}

impl<S: Scalar> Div<S> for Point<S> {
    type Output = Self;
    #[inline]
    fn div(self, k: S) -> Self {
        Point::new(self.x / k, self.y / k)
    }
}

impl<S: Scalar> Neg for Point<S> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Point::new(-self.x, -self.y)
    }
}

/// Axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BBox<S> {
    pub min: Point<S>,
    pub max: Point<S>,
}

impl<S: Scalar> BBox<S> {
    pub fn empty() -> Self {
        BBox {
            min: Point::new(S::infinity(), S::infinity()),
            max: Point::new(S::neg_infinity(), S::neg_infinity()),
        }
    }

    pub fn of_points(pts: &[Point<S>]) -> Self {
        let mut b = Self::empty();
        for &p in pts {
            b.include(p);
        }
        b
    }

    #[inline]
    pub fn include(&mut self, p: Point<S>) {
        self.min.x = self.min.x.min(p.x);
        self.min.y = self.min.y.min(p.y);
        self.max.x = self.max.x.max(p.x);
        self.max.y = self.max.y.max(p.y);
    }

    pub fn union(&self, o: &Self) -> Self {
        BBox {
            min: Point::new(self.min.x.min(o.min.x), self.min.y.min(o.min.y)),
            max: Point::new(self.max.x.max(o.max.x), self.max.y.max(o.max.y)),
        }
    }

    /// Euclidean distance from `p` to the box; zero inside.
    #[inline]
    pub fn distance(&self, p: Point<S>) -> S {
        let zero = S::zero();
        let dx = (self.min.x - p.x).max(p.x - self.max.x).max(zero);
        let dy = (self.min.y - p.y).max(p.y - self.max.y).max(zero);
        dx.hypot(dy)
    }

    pub fn overlaps(&self, o: &Self, slack: S) -> bool {
        self.min.x <= o.max.x + slack
            && o.min.x <= self.max.x + slack
            && self.min.y <= o.max.y + slack
            && o.min.y <= self.max.y + slack
    }

    pub fn diagonal(&self) -> S {
        (self.max - self.min).norm()
    }
}

/// Closest-point query result.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection<S> {
    pub t: S,
    pub dist: S,
    pub point: Point<S>,
}

/// Quadratic Bézier segment with start `a`, control `b` and end `c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadBezier<S> {
    pub a: Point<S>,
    pub b: Point<S>,
    pub c: Point<S>,
}

/// Ray-casting gave an ambiguous answer (ray through an endpoint or query point on the curve).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct RayDegenerate;

impl<S: Scalar> QuadBezier<S> {
    pub fn new(a: Point<S>, b: Point<S>, c: Point<S>) -> Self {
        QuadBezier { a, b, c }
    }

    /// Straight segment written as a quadratic (control at the midpoint).
    pub fn line(a: Point<S>, c: Point<S>) -> Self {
        QuadBezier { a, b: a.midpoint(c), c }
    }

    /// Bernstein weights of `(a, b, c)` at `t`.
    #[inline]
    pub fn weights(t: S) -> [S; 3] {
        let s = S::one() - t;
        [s * s, S::lit(2.0) * s * t, t * t]
    }

    #[inline]
    pub fn eval(&self, t: S) -> Point<S> {
        let [wa, wb, wc] = Self::weights(t);
        self.a * wa + self.b * wb + self.c * wc
    }

    #[inline]
    pub fn deriv(&self, t: S) -> Point<S> {
        let two = S::lit(2.0);
        (self.b - self.a) * (two * (S::one() - t)) + (self.c - self.b) * (two * t)
    }

    pub fn reversed(&self) -> Self {
        QuadBezier::new(self.c, self.b, self.a)
    }

    /// de Casteljau split at `t`.
    pub fn split(&self, t: S) -> (Self, Self) {
        let ab = self.a.lerp(self.b, t);
        let bc = self.b.lerp(self.c, t);
        let m = ab.lerp(bc, t);
        (QuadBezier::new(self.a, ab, m), QuadBezier::new(m, bc, self.c))
    }

    /// The piece of the curve over `[t0, t1]`, reparametrized to `[0, 1]`.
    pub fn subrange(&self, t0: S, t1: S) -> Self {
        let p0 = self.eval(t0);
        let p1 = self.eval(t1);
        // control point = p0 + (t1-t0)/2 * B'(t0)
        let ctrl = p0 + self.deriv(t0) * ((t1 - t0) * S::lit(0.5));
        QuadBezier::new(p0, ctrl, p1)
    }

    /// Control-polygon bounding box (contains the curve).
    #[inline]
    pub fn hull_bbox(&self) -> BBox<S> {
        BBox {
            min: Point::new(self.a.x.min(self.b.x).min(self.c.x), self.a.y.min(self.b.y).min(self.c.y)),
            max: Point::new(self.a.x.max(self.b.x).max(self.c.x), self.a.y.max(self.b.y).max(self.c.y)),
        }
    }

    pub fn is_point(&self, tol: S) -> bool {
        self.a.dist(self.b) <= tol && self.b.dist(self.c) <= tol
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite()
    }

    /// Minimum distance from `p` to the curve over `t ∈ [0, 1]`.
    ///
    /// The stationarity condition `(B(t) - p) · B'(t) = 0` is a cubic in `t`;
    /// its sign changes from negative to positive bracket every interior minimum,
    /// which are then compared with both endpoints. Ties go to the smallest `t`.
    pub fn closest_point(&self, p: Point<S>) -> Projection<S> {
        let lin = self.b - self.a;
        let quad = self.a - self.b * S::lit(2.0) + self.c;
        let m = self.a - p;
        let coeffs = [
            m.dot(lin),
            S::lit(2.0) * lin.dot(lin) + m.dot(quad),
            S::lit(3.0) * lin.dot(quad),
            quad.dot(quad),
        ];
        let (roots, n) = solve::rising_roots_unit(&coeffs);

        let mut best = Projection { t: S::zero(), dist: S::infinity(), point: self.a };
        let mut best_sq = (self.a - p).norm_sq();
        best.dist = best_sq.sqrt();
        let mut consider = |t: S| {
            let q = self.eval(t);
            let d2 = (q - p).norm_sq();
            if d2 < best_sq {
                best_sq = d2;
                best = Projection { t, dist: d2.sqrt(), point: q };
            }
        };
        for &t in &roots[..n] {
            consider(t);
        }
        consider(S::one());
        best
    }

    /// Integral of `|B'(t)|` over `[lo, hi]` with one 16-point Gauss–Legendre panel.
    fn gl16_length(&self, lo: S, hi: S) -> S {
        gl16_on(lo.to_f64_lossy(), hi.to_f64_lossy())
            .map(|(t, w)| self.deriv(S::lit(t)).norm() * S::lit(w))
            .sum()
    }

    /// Parameter panels used by [`Self::arc_length`]; refined where a single
    /// panel does not match the sum of its halves.
    pub fn length_panels(&self) -> Vec<(S, S)> {
        let mut out = Vec::with_capacity(2);
        self.collect_panels(S::zero(), S::one(), self.gl16_length(S::zero(), S::one()), 0, &mut out);
        out
    }

    fn collect_panels(&self, lo: S, hi: S, whole: S, depth: usize, out: &mut Vec<(S, S)>) {
        let mid = (lo + hi) * S::lit(0.5);
        let left = self.gl16_length(lo, mid);
        let right = self.gl16_length(mid, hi);
        let tol = S::geom_tol(1e-14) * whole.max(S::one());
        if depth >= 8 || (whole - (left + right)).abs() <= tol {
            out.push((lo, hi));
        } else {
            self.collect_panels(lo, mid, left, depth + 1, out);
            self.collect_panels(mid, hi, right, depth + 1, out);
        }
    }

    pub fn arc_length(&self) -> S {
        self.length_panels().into_iter().map(|(lo, hi)| self.gl16_length(lo, hi)).sum()
    }

    /// `½ ∮ x dy − y dx` contribution (Green's theorem), closed form.
    pub fn area_term(&self) -> S {
        let two = S::lit(2.0);
        (two * self.a.cross(self.b) + two * self.b.cross(self.c) + self.a.cross(self.c)) / S::lit(6.0)
    }

    /// Signed crossings of the ray `{(x, p.y) : x > p.x}` (upward = +1).
    pub(crate) fn ray_crossings(&self, p: Point<S>, tol: S) -> Result<i32, RayDegenerate> {
        let (a, b, c) = (self.a, self.b, self.c);
        if p.y < a.y.min(b.y).min(c.y) - tol || p.y > a.y.max(b.y).max(c.y) + tol {
            return Ok(0);
        }
        if a.x.max(b.x).max(c.x) < p.x - tol {
            return Ok(0);
        }
        for e in [a, c] {
            if (e.y - p.y).abs() <= tol && e.x >= p.x - tol {
                return Err(RayDegenerate);
            }
        }
        let ay = a.y - b.y * S::lit(2.0) + c.y;
        let by = (b.y - a.y) * S::lit(2.0);
        let cy = a.y - p.y;
        let (roots, n) = solve::solve_quadratic(ay, by, cy);
        let is_quadratic = ay.abs() > (ay.abs() + by.abs() + cy.abs()) * S::epsilon() * S::lit(16.0);
        if n == 1 && is_quadratic {
            // double root: the curve touches the ray without crossing
            return Ok(0);
        }
        let mut w = 0;
        for &t in &roots[..n] {
            if t <= S::zero() || t >= S::one() {
                continue;
            }
            let x = self.eval(t).x;
            if (x - p.x).abs() <= tol {
                return Err(RayDegenerate);
            }
            if x > p.x {
                let dy = S::lit(2.0) * ay * t + by;
                if dy > S::zero() {
                    w += 1;
                } else if dy < S::zero() {
                    w -= 1;
                }
            }
        }
        Ok(w)
    }
}

/// Number of jittered retries before a winding query is reported degenerate.
pub const WINDING_RETRIES: usize = 3;

/// Runs a ray-casting winding query, nudging the query point by a fixed
/// deterministic offset when the ray hits an endpoint or the point sits on the boundary.
pub(crate) fn winding_with_retry<S: Scalar>(
    p: Point<S>,
    mut query: impl FnMut(Point<S>, S) -> Result<i32, RayDegenerate>,
) -> Result<i32, GeomError> {
    let tol = S::geom_tol(1e-12);
    let jitter = S::geom_tol(1e-9);
    let dir = Point::new(S::lit(0.6), S::lit(0.8));
    for k in 0..=WINDING_RETRIES {
        let q = p + dir * (jitter * S::lit(k as f64));
        if let Ok(w) = query(q, tol) {
            return Ok(w);
        }
    }
    Err(GeomError::DegenerateWinding { x: p.x.to_f64_lossy(), y: p.y.to_f64_lossy(), retries: WINDING_RETRIES })
}

/// A closed loop of `M` quadratic segments stored as `2M` control points;
/// segment `j` is `(x[2j], x[2j+1], x[2j+2])` with wraparound.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedPath<S> {
    ctrl: Vec<Point<S>>,
}

impl<S: Scalar> ClosedPath<S> {
    pub fn new(ctrl: Vec<Point<S>>) -> Result<Self, GeomError> {
        if ctrl.len() % 2 != 0 {
            return Err(GeomError::OddControlCount(ctrl.len()));
        }
        if ctrl.len() < 4 {
            return Err(GeomError::TooFewSegments(ctrl.len()));
        }
        if let Some(i) = ctrl.iter().position(|p| !p.is_finite()) {
            return Err(GeomError::NonFinite(i));
        }
        Ok(ClosedPath { ctrl })
    }

    /// All control points at one location: an empty region.
    pub fn point(p: Point<S>, m: usize) -> Self {
        ClosedPath { ctrl: vec![p; 2 * m.max(2)] }
    }

    /// Polygon with straight sides (each control point at its side's midpoint).
    pub fn polygon(corners: &[Point<S>]) -> Result<Self, GeomError> {
        let n = corners.len();
        let mut ctrl = Vec::with_capacity(2 * n);
        for i in 0..n {
            ctrl.push(corners[i]);
            ctrl.push(corners[i].midpoint(corners[(i + 1) % n]));
        }
        Self::new(ctrl)
    }

    /// Axis-aligned square centered at `center`, counter-clockwise when `ccw`.
    pub fn square(center: Point<S>, half: S, ccw: bool) -> Self {
        let (cx, cy) = (center.x, center.y);
        let mut corners = vec![
            Point::new(cx - half, cy - half),
            Point::new(cx + half, cy - half),
            Point::new(cx + half, cy + half),
            Point::new(cx - half, cy + half),
        ];
        if !ccw {
            corners.reverse();
        }
        Self::polygon(&corners).expect("square is a valid path")
    }

    /// Circle approximation with `m` quadratic segments, counter-clockwise.
    pub fn circle(center: Point<S>, radius: S, m: usize) -> Self {
        let m = m.max(2);
        let step = S::TAU() / S::lit(m as f64);
        let ctrl_r = radius / (step * S::lit(0.5)).cos();
        let mut ctrl = Vec::with_capacity(2 * m);
        for j in 0..m {
            let th = step * S::lit(j as f64);
            let tc = th + step * S::lit(0.5);
            ctrl.push(center + Point::new(th.cos(), th.sin()) * radius);
            ctrl.push(center + Point::new(tc.cos(), tc.sin()) * ctrl_r);
        }
        ClosedPath { ctrl }
    }

    pub fn ctrl(&self) -> &[Point<S>] {
        &self.ctrl
    }

    pub fn ctrl_mut(&mut self) -> &mut [Point<S>] {
        &mut self.ctrl
    }

    /// Number of segments `M`.
    pub fn m(&self) -> usize {
        self.ctrl.len() / 2
    }

    pub fn segment(&self, j: usize) -> QuadBezier<S> {
        let n = self.ctrl.len();
        QuadBezier::new(self.ctrl[2 * j], self.ctrl[2 * j + 1], self.ctrl[(2 * j + 2) % n])
    }

    pub fn segments(&self) -> impl Iterator<Item = QuadBezier<S>> + '_ {
        (0..self.m()).map(move |j| self.segment(j))
    }

    /// Reverses traversal direction (same point set).
    pub fn reversed(&self) -> Self {
        let n = self.ctrl.len();
        // segment j reversed is (x[2j+2], x[2j+1], x[2j]); start from x[0]
        let ctrl = (0..n).map(|k| self.ctrl[(n - k) % n]).collect();
        ClosedPath { ctrl }
    }

    pub fn bbox(&self) -> BBox<S> {
        BBox::of_points(&self.ctrl)
    }

    pub fn winding(&self, p: Point<S>) -> Result<i32, GeomError> {
        path_winding(self, p)
    }

    pub fn contains(&self, p: Point<S>) -> Result<bool, GeomError> {
        path_occupancy(self, p)
    }
}

/// Winding number of `path` around `p` by horizontal ray casting.
pub fn path_winding<S: Scalar>(path: &ClosedPath<S>, p: Point<S>) -> Result<i32, GeomError> {
    winding_with_retry(p, |q, tol| {
        let mut w = 0;
        for seg in path.segments() {
            w += seg.ray_crossings(q, tol)?;
        }
        Ok(w)
    })
}

/// Nonzero-rule membership.
pub fn path_occupancy<S: Scalar>(path: &ClosedPath<S>, p: Point<S>) -> Result<bool, GeomError> {
    Ok(path_winding(path, p)? != 0)
}

/// Distance from `p` to the path boundary, with the index of the nearest segment
/// (lowest index on ties) and its closest-point projection.
pub fn path_distance<S: Scalar>(path: &ClosedPath<S>, p: Point<S>) -> (usize, Projection<S>) {
    let mut best = (0, path.segment(0).closest_point(p));
    for j in 1..path.m() {
        let pr = path.segment(j).closest_point(p);
        if pr.dist < best.1.dist {
            best = (j, pr);
        }
    }
    best
}

/// Signed distance, positive inside and negative outside.
pub fn path_sdf<S: Scalar>(path: &ClosedPath<S>, p: Point<S>) -> Result<S, GeomError> {
    let inside = path_occupancy(path, p)?;
    let d = path_distance(path, p).1.dist;
    Ok(if inside { d } else { -d })
}

pub fn path_length<S: Scalar>(path: &ClosedPath<S>) -> S {
    path.segments().map(|s| s.arc_length()).sum()
}

/// Signed area, positive for counter-clockwise loops.
pub fn path_area<S: Scalar>(path: &ClosedPath<S>) -> S {
    path.segments().map(|s| s.area_term()).sum()
}

/// One (positive, negative) pair; the part covers `positive − negative`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualPart<S> {
    pub positive: ClosedPath<S>,
    pub negative: ClosedPath<S>,
}

/// Union of `N` dual parts sharing one segment count `M`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualPartGlyph<S> {
    parts: Vec<DualPart<S>>,
}

impl<S: Scalar> DualPartGlyph<S> {
    pub fn new(parts: Vec<DualPart<S>>) -> Result<Self, GeomError> {
        let first = parts.first().ok_or(GeomError::NoParts)?;
        let m = first.positive.m();
        for (i, part) in parts.iter().enumerate() {
            for path in [&part.positive, &part.negative] {
                if path.m() != m {
                    return Err(GeomError::MismatchedSegments { part: i, expected: m, found: path.m() });
                }
            }
        }
        Ok(DualPartGlyph { parts })
    }

    pub fn parts(&self) -> &[DualPart<S>] {
        &self.parts
    }

    pub fn parts_mut(&mut self) -> &mut [DualPart<S>] {
        &mut self.parts
    }

    pub fn n(&self) -> usize {
        self.parts.len()
    }

    pub fn m(&self) -> usize {
        self.parts[0].positive.m()
    }

    /// Paths in parameter order: `P_0, Q_0, P_1, Q_1, ...`.
    pub fn paths(&self) -> impl Iterator<Item = &ClosedPath<S>> + '_ {
        self.parts.iter().flat_map(|p| [&p.positive, &p.negative])
    }

    pub fn paths_mut(&mut self) -> impl Iterator<Item = &mut ClosedPath<S>> + '_ {
        self.parts.iter_mut().flat_map(|p| [&mut p.positive, &mut p.negative])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point<f64> {
        Point::new(x, y)
    }

    #[test]
    fn eval_endpoints_and_midpoint() {
        let q = QuadBezier::new(p(0.0, 0.0), p(1.0, 0.0), p(2.0, 2.0));
        assert_eq!(q.eval(0.0), p(0.0, 0.0));
        assert_eq!(q.eval(1.0), p(2.0, 2.0));
        let q = QuadBezier::new(p(0.0, 0.0), p(2.0, 0.0), p(0.0, 2.0));
        assert_eq!(q.eval(0.5), p(1.0, 0.5));
    }

    #[test]
    fn eval_in_single_precision() {
        let q: QuadBezier<f32> = QuadBezier::new(Point::new(0.0, 0.0), Point::new(2.0, 0.0), Point::new(0.0, 2.0));
        assert_eq!(q.eval(0.5), Point::new(1.0f32, 0.5));
        let pr = q.closest_point(Point::new(0.0, 0.0));
        assert!(pr.dist.abs() < 1e-6);
    }

    #[test]
    fn closest_point_simple_cases() {
        let q = QuadBezier::new(p(0.0, 0.0), p(1.0, 0.0), p(2.0, 0.0));
        assert!(q.closest_point(p(1.0, 0.0)).dist < 1e-15);
        let q = QuadBezier::new(p(0.0, 0.0), p(0.5, 0.0), p(1.0, 0.0));
        let pr = q.closest_point(p(0.5, 1.0));
        assert!((pr.dist - 1.0).abs() < 1e-15);
        assert!((pr.t - 0.5).abs() < 1e-15);
    }

    #[test]
    fn closest_point_matches_dense_grid() {
        let q = QuadBezier::new(p(0.0, 0.0), p(1.0, 2.0), p(2.0, 0.0));
        let target = p(1.0, 2.0);
        let n = 1_000_000;
        let oracle = (0..=n)
            .map(|i| q.eval(i as f64 / n as f64).dist(target))
            .fold(f64::INFINITY, f64::min);
        let got = q.closest_point(target).dist;
        assert!((got - oracle).abs() <= 1e-6, "{got} vs {oracle}");
    }

    #[test]
    fn split_and_subrange_agree() {
        let q = QuadBezier::new(p(0.0, 0.0), p(1.0, 3.0), p(4.0, -1.0));
        let (l, r) = q.split(0.3);
        let s = q.subrange(0.3, 1.0);
        assert!((r.b - s.b).norm() < 1e-14);
        assert!((l.eval(0.5) - q.eval(0.15)).norm() < 1e-14);
    }

    #[test]
    fn square_winding_and_occupancy() {
        let sq = ClosedPath::square(p(0.0, 0.0), 0.5, true);
        assert_eq!(path_winding(&sq, p(0.0, 0.0)).unwrap(), 1);
        assert_eq!(path_winding(&sq, p(3.0, 0.1)).unwrap(), 0);
        assert_eq!(path_winding(&sq.reversed(), p(0.0, 0.0)).unwrap(), -1);
        assert!(path_occupancy(&sq, p(0.1, -0.2)).unwrap());
        assert!(!path_occupancy(&sq, p(-0.7, 0.0)).unwrap());
    }

    #[test]
    fn winding_through_vertex_is_resolved_by_jitter() {
        let sq = ClosedPath::square(p(0.0, 0.0), 0.5, true);
        // ray from (-0.2, 0.5) runs along the top edge
        let w = path_winding(&sq, p(-1.0, 0.5)).unwrap();
        assert_eq!(w, 0);
        assert_eq!(path_winding(&sq, p(0.0, -0.5 + 1e-3)).unwrap(), 1);
    }

    #[test]
    fn square_sdf_length_area() {
        let sq = ClosedPath::square(p(0.0, 0.0), 0.5, true);
        assert!((path_sdf(&sq, p(0.0, 0.0)).unwrap() - 0.5).abs() < 1e-15);
        assert!((path_sdf(&sq, p(1.5, 0.0)).unwrap() + 1.0).abs() < 1e-15);
        assert!((path_length(&sq) - 4.0).abs() < 1e-9);
        assert!((path_area(&sq) - 1.0).abs() < 1e-15);
        assert!((path_area(&sq.reversed()) + 1.0).abs() < 1e-15);
        let dot = ClosedPath::point(p(0.3, 0.3), 4);
        assert_eq!(path_length(&dot), 0.0);
        assert_eq!(path_area(&dot), 0.0);
    }

    #[test]
    fn path_validation() {
        assert_eq!(ClosedPath::<f64>::new(vec![p(0.0, 0.0); 3]).unwrap_err(), GeomError::OddControlCount(3));
        assert_eq!(ClosedPath::<f64>::new(vec![p(0.0, 0.0); 2]).unwrap_err(), GeomError::TooFewSegments(2));
        let mut v = vec![p(0.0, 0.0); 4];
        v[2] = p(f64::NAN, 0.0);
        assert_eq!(ClosedPath::new(v).unwrap_err(), GeomError::NonFinite(2));
        let sq = ClosedPath::square(p(0.0, 0.0), 0.5, true);
        let tri = ClosedPath::polygon(&[p(0.0, 0.0), p(1.0, 0.0), p(0.0, 1.0)]).unwrap();
        let part = |a: &ClosedPath<f64>, b: &ClosedPath<f64>| DualPart { positive: a.clone(), negative: b.clone() };
        assert!(DualPartGlyph::new(vec![part(&sq, &tri)]).is_err());
        assert!(DualPartGlyph::<f64>::new(vec![]).is_err());
    }

    #[test]
    fn circle_is_counter_clockwise() {
        let c = ClosedPath::circle(p(0.1, -0.2), 0.3, 6);
        let area = path_area(&c);
        // six quads overestimate the disk by about 1%
        assert!((area - std::f64::consts::PI * 0.09).abs() < 0.02 * area);
        assert_eq!(path_winding(&c, p(0.1, -0.2)).unwrap(), 1);
    }
}
