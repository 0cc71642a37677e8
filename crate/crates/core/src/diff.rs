//! Reconstruction losses of a dual-part glyph and their gradients with respect
//! to every control-point coordinate.
//!
//! Gradients are hand-derived adjoints. At each sample the composite field is
//! a max/min over paths, so exactly one path (and on it one nearest segment)
//! receives gradient: lowest part index on max/min ties, positive path before
//! negative. Because the closest point is a stationary point of the distance,
//! the parameter `t*` contributes nothing at interior minima, and at clamped
//! endpoints it is constant; in both cases `∂d/∂x_k = w_k(t*) · n` with `n` the
//! unit vector from the sample to the curve.

use rayon::prelude::*;

use crate::field::{Branch, DistanceField, FieldError, GrayImage, PreFilter, PreparedGlyph, SampleGrid, Selection};
use crate::geom::{DualPartGlyph, Point, QuadBezier};
use crate::scalar::pairwise_sum;
use crate::Scalar;

/// Flat control-point coordinates: part-major, positive path before negative,
/// points in segment order, `x` before `y`. Length `8·M·N`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector<S>(pub Vec<S>);

impl<S: Scalar> ParamVector<S> {
    pub fn zeros(len: usize) -> Self {
        ParamVector(vec![S::zero(); len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Offset of control point `k` of path `path` (`2·part + negative`).
    #[inline]
    pub fn offset(m: usize, path: usize, k: usize) -> usize {
        path * 4 * m + 2 * k
    }

    pub fn from_glyph(g: &DualPartGlyph<S>) -> Self {
        ParamVector(g.paths().flat_map(|p| p.ctrl().iter().flat_map(|q| [q.x, q.y])).collect())
    }

    /// Writes these coordinates into `g` (which fixes `N` and `M`).
    pub fn apply_to(&self, g: &mut DualPartGlyph<S>) {
        assert_eq!(self.0.len(), 8 * g.n() * g.m(), "parameter count mismatch");
        let mut it = self.0.chunks_exact(2);
        for path in g.paths_mut() {
            for q in path.ctrl_mut() {
                let xy = it.next().expect("length checked");
                *q = Point::new(xy[0], xy[1]);
            }
        }
    }
}

/// Loss values and the gradient of `total`.
#[derive(Clone, Debug)]
pub struct LossReport<S> {
    pub total: S,
    pub l_p: S,
    pub l_u: S,
    /// Mean squared error between the soft raster and the target.
    pub mse: S,
    pub grad: ParamVector<S>,
}

/// Adds `coef · ∂d/∂(control points)` of segment `seg` of `path` into `grad`.
#[inline]
fn scatter_distance_grad<S: Scalar>(
    grad: &mut [S],
    m: usize,
    path: usize,
    seg: usize,
    t: S,
    foot: Point<S>,
    p: Point<S>,
    dist: S,
    coef: S,
) {
    if dist <= S::zero() || coef == S::zero() {
        return;
    }
    let n = (foot - p) / dist;
    let w = QuadBezier::<S>::weights(t);
    let ks = [2 * seg, 2 * seg + 1, (2 * seg + 2) % (2 * m)];
    for (k, wk) in ks.into_iter().zip(w) {
        let o = ParamVector::<S>::offset(m, path, k);
        grad[o] = grad[o] + coef * wk * n.x;
        grad[o + 1] = grad[o + 1] + coef * wk * n.y;
    }
}

fn scatter_selection<S: Scalar>(grad: &mut [S], m: usize, sel: &Selection<S>, p: Point<S>, coef: S) {
    if let Some((seg, pr)) = sel.near {
        let path = 2 * sel.part + usize::from(sel.branch == Branch::Negative);
        scatter_distance_grad(grad, m, path, seg, pr.t, pr.point, p, pr.dist, coef * sel.slope);
    }
}

#[inline]
fn sign_of<S: Scalar>(v: S) -> S {
    if v > S::zero() {
        S::one()
    } else if v < S::zero() {
        -S::one()
    } else {
        S::zero()
    }
}

struct RowAccum<S> {
    lp: Vec<S>,
    lu: Vec<S>,
    sq: Vec<S>,
    grad_p: Vec<S>,
    grad_u: Vec<S>,
}

/// Which terms to evaluate.
#[derive(Clone, Copy)]
struct Terms<'a> {
    occupancy: Option<&'a GrayImage>,
    udf: Option<&'a DistanceField>,
    gradient: bool,
    mask: Option<&'a [bool]>,
}

struct Totals<S> {
    l_p: S,
    l_u: S,
    mse: S,
    grad_p: Vec<S>,
    grad_u: Vec<S>,
}

fn accumulate<S: Scalar>(
    g: &DualPartGlyph<S>,
    grid: &SampleGrid<S>,
    filter: &PreFilter<S>,
    terms: Terms<'_>,
) -> Result<Totals<S>, FieldError> {
    if let Some(t) = terms.occupancy {
        grid.check_image(t)?;
    }
    let res = grid.resolution();
    if let Some(u) = terms.udf {
        if u.width != res || u.height != res {
            return Err(FieldError::GridMismatch { grid: res, width: u.width, height: u.height });
        }
    }
    let prepared = PreparedGlyph::new(g);
    let m = g.m();
    let n_params = 8 * m * g.n();
    let count = S::lit((res * res) as f64);
    let use_udf = terms.udf.filter(|u| !u.empty);

    let rows: Vec<RowAccum<S>> = (0..res)
        .into_par_iter()
        .map(|row| -> Result<RowAccum<S>, FieldError> {
            let gl = if terms.gradient { n_params } else { 0 };
            let mut acc = RowAccum {
                lp: Vec::with_capacity(res),
                lu: Vec::with_capacity(res),
                sq: Vec::with_capacity(res),
                grad_p: vec![S::zero(); gl],
                grad_u: vec![S::zero(); if use_udf.is_some() { gl } else { 0 }],
            };
            for col in 0..res {
                let idx = row * res + col;
                if terms.mask.is_some_and(|mk| mk[idx]) {
                    continue;
                }
                let p = grid.point(col, row);
                if let Some(target) = terms.occupancy {
                    let (val, sel) = prepared.soft(p, filter)?;
                    let diff = val - S::lit(target.data()[idx]);
                    acc.lp.push(diff.abs());
                    acc.sq.push(diff * diff);
                    if terms.gradient {
                        scatter_selection(&mut acc.grad_p, m, &sel, p, sign_of(diff) / count);
                    }
                }
                if let Some(udf) = use_udf {
                    let (val, sel) = prepared.udf(p)?;
                    let diff = val - S::lit(udf.values[idx]);
                    acc.lu.push(diff.abs());
                    if terms.gradient {
                        scatter_selection(&mut acc.grad_u, m, &sel, p, sign_of(diff) / count);
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<_, _>>()?;

    let row_sums = |f: &dyn Fn(&RowAccum<S>) -> &Vec<S>| -> S {
        let per_row: Vec<S> = rows.iter().map(|r| pairwise_sum(f(r))).collect();
        pairwise_sum(&per_row) / count
    };
    let l_p = row_sums(&|r| &r.lp);
    let l_u = row_sums(&|r| &r.lu);
    let mse = row_sums(&|r| &r.sq);
    let reduce = |f: &dyn Fn(&RowAccum<S>) -> &Vec<S>| -> Vec<S> {
        let mut out = vec![S::zero(); if terms.gradient { n_params } else { 0 }];
        for r in &rows {
            for (o, v) in out.iter_mut().zip(f(r)) {
                *o = *o + *v;
            }
        }
        out
    };
    let grad_p = if terms.occupancy.is_some() { reduce(&|r| &r.grad_p) } else { vec![S::zero(); n_params] };
    let grad_u = if use_udf.is_some() { reduce(&|r| &r.grad_u) } else { vec![S::zero(); n_params] };
    Ok(Totals { l_p, l_u, mse, grad_p, grad_u })
}

/// `L_P`: mean absolute difference between the soft occupancy and `target`.
pub fn loss_lp<S: Scalar>(
    g: &DualPartGlyph<S>,
    target: &GrayImage,
    grid: &SampleGrid<S>,
    filter: PreFilter<S>,
) -> Result<(S, ParamVector<S>), FieldError> {
    let t = accumulate(g, grid, &filter, Terms { occupancy: Some(target), udf: None, gradient: true, mask: None })?;
    Ok((t.l_p, ParamVector(t.grad_p)))
}

/// [`loss_lp`] with samples flagged `true` in `excluded` left out of the sum
/// (the normalization still counts every grid sample).
pub fn loss_lp_masked<S: Scalar>(
    g: &DualPartGlyph<S>,
    target: &GrayImage,
    grid: &SampleGrid<S>,
    filter: PreFilter<S>,
    excluded: &[bool],
) -> Result<(S, ParamVector<S>), FieldError> {
    let t = accumulate(g, grid, &filter, Terms { occupancy: Some(target), udf: None, gradient: true, mask: Some(excluded) })?;
    Ok((t.l_p, ParamVector(t.grad_p)))
}

/// `L_u`: mean absolute difference between the approximate glyph UDF and `target_udf`.
/// A target without ink contributes zero.
pub fn loss_lu<S: Scalar>(
    g: &DualPartGlyph<S>,
    target_udf: &DistanceField,
    grid: &SampleGrid<S>,
) -> Result<(S, ParamVector<S>), FieldError> {
    loss_lu_inner(g, target_udf, grid, None)
}

pub fn loss_lu_masked<S: Scalar>(
    g: &DualPartGlyph<S>,
    target_udf: &DistanceField,
    grid: &SampleGrid<S>,
    excluded: &[bool],
) -> Result<(S, ParamVector<S>), FieldError> {
    loss_lu_inner(g, target_udf, grid, Some(excluded))
}

fn loss_lu_inner<S: Scalar>(
    g: &DualPartGlyph<S>,
    target_udf: &DistanceField,
    grid: &SampleGrid<S>,
    mask: Option<&[bool]>,
) -> Result<(S, ParamVector<S>), FieldError> {
    // the filter is unused by the UDF term
    let filter = PreFilter::new(grid.pitch())?;
    let t = accumulate(g, grid, &filter, Terms { occupancy: None, udf: Some(target_udf), gradient: true, mask })?;
    Ok((t.l_u, ParamVector(t.grad_u)))
}

/// `λ_P·L_P + λ_u·L_u` and its gradient; the UDF term is skipped when `λ_u = 0`
/// or no target UDF is given.
pub fn fit_objective<S: Scalar>(
    g: &DualPartGlyph<S>,
    target: &GrayImage,
    target_udf: Option<&DistanceField>,
    grid: &SampleGrid<S>,
    filter: PreFilter<S>,
    lambda_p: S,
    lambda_u: S,
) -> Result<LossReport<S>, FieldError> {
    let udf = target_udf.filter(|_| lambda_u != S::zero());
    let t = accumulate(g, grid, &filter, Terms { occupancy: Some(target), udf, gradient: true, mask: None })?;
    let grad = t.grad_p.iter().zip(&t.grad_u).map(|(&a, &b)| lambda_p * a + lambda_u * b).collect();
    let l_u = if udf.is_some() { t.l_u } else { S::zero() };
    Ok(LossReport { total: lambda_p * t.l_p + lambda_u * l_u, l_p: t.l_p, l_u, mse: t.mse, grad: ParamVector(grad) })
}

/// `L_P` and MSE without the gradient.
pub fn reconstruction_error<S: Scalar>(
    g: &DualPartGlyph<S>,
    target: &GrayImage,
    grid: &SampleGrid<S>,
    filter: PreFilter<S>,
) -> Result<(S, S), FieldError> {
    let t = accumulate(g, grid, &filter, Terms { occupancy: Some(target), udf: None, gradient: false, mask: None })?;
    Ok((t.l_p, t.mse))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::rasterize_soft;
    use crate::geom::{ClosedPath, DualPart};

    fn glyph() -> DualPartGlyph<f64> {
        DualPartGlyph::new(vec![
            DualPart {
                positive: ClosedPath::circle(Point::new(0.1, 0.0), 0.5, 4),
                negative: ClosedPath::circle(Point::new(0.1, 0.05), 0.2, 4),
            },
            DualPart {
                positive: ClosedPath::square(Point::new(-0.4, -0.3), 0.25, true),
                negative: ClosedPath::point(Point::new(2.0, 2.0), 4),
            },
        ])
        .unwrap()
    }

    #[test]
    fn param_layout_round_trip() {
        let g = glyph();
        let pv = ParamVector::from_glyph(&g);
        assert_eq!(pv.len(), 8 * 4 * 2);
        // part 1 positive path, control point 2, y coordinate
        let o = ParamVector::<f64>::offset(4, 2, 2);
        assert_eq!(pv.0[o + 1], g.parts()[1].positive.ctrl()[2].y);
        let mut h = g.clone();
        let mut shifted = pv.clone();
        shifted.0.iter_mut().for_each(|v| *v += 0.25);
        shifted.apply_to(&mut h);
        assert_eq!(h.parts()[0].negative.ctrl()[1].x, g.parts()[0].negative.ctrl()[1].x + 0.25);
    }

    #[test]
    fn perfect_fit_has_zero_loss() {
        let g = glyph();
        let grid = SampleGrid::unit(24);
        let f = PreFilter::new(grid.pitch()).unwrap();
        let target = rasterize_soft(&g, &grid, f).unwrap();
        let (v, grad) = loss_lp(&g, &target, &grid, f).unwrap();
        assert!(v < 1e-12);
        assert!(grad.0.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn blank_target_loss_is_mean_coverage() {
        let g = glyph();
        let grid = SampleGrid::unit(24);
        let f = PreFilter::new(grid.pitch()).unwrap();
        let img = rasterize_soft(&g, &grid, f).unwrap();
        let blank = GrayImage::filled(24, 24, 0.0);
        let (v, _) = loss_lp(&g, &blank, &grid, f).unwrap();
        assert!((v - img.mean()).abs() < 1e-12);
    }

    #[test]
    fn deterministic_values() {
        let g = glyph();
        let grid = SampleGrid::unit(20);
        let f = PreFilter::new(grid.pitch()).unwrap();
        let target = GrayImage::filled(20, 20, 0.3);
        let a = loss_lp(&g, &target, &grid, f).unwrap();
        let b = loss_lp(&g, &target, &grid, f).unwrap();
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        assert_eq!(a.1, b.1);
    }
}
