//! Occupancy, signed and unsigned distance fields of dual-part glyphs,
//! the parabolic pre-filter, soft rasterization and image distance transforms.

use rayon::prelude::*;
use thiserror::Error;

use crate::geom::{
    path_occupancy, winding_with_retry, BBox, ClosedPath, DualPartGlyph, GeomError, Point, Projection, QuadBezier,
};
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("image data has {got} values, expected {width}x{height}")]
    BadLength { width: usize, height: usize, got: usize },
    #[error("pixel {index} = {value} is outside [0, 1]")]
    BadPixel { index: usize, value: f64 },
    #[error("image must be at least 1x1")]
    Empty,
    #[error("pre-filter radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("binarization threshold must lie in (0, 1), got {0}")]
    BadThreshold(f64),
    #[error("sample grid resolution must be at least 1")]
    BadResolution,
    #[error("grid is {grid}x{grid} but image is {width}x{height}")]
    GridMismatch { grid: usize, width: usize, height: usize },
    #[error("image sizes differ: {0}x{1} vs {2}x{3}")]
    SizeMismatch(usize, usize, usize, usize),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Row-major grayscale raster; 1 is ink, 0 is background.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, FieldError> {
        if width == 0 || height == 0 {
            return Err(FieldError::Empty);
        }
        if data.len() != width * height {
            return Err(FieldError::BadLength { width, height, got: data.len() });
        }
        if let Some(index) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(FieldError::BadPixel { index, value: data[index] });
        }
        Ok(GrayImage { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        GrayImage { width, height, data: vec![value.clamp(0.0, 1.0); width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v.clamp(0.0, 1.0);
    }

    pub fn inverted(&self) -> Self {
        GrayImage { width: self.width, height: self.height, data: self.data.iter().map(|v| 1.0 - v).collect() }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Bicubic (Catmull-Rom) resampling, clamped back into `[0, 1]`.
    pub fn resample(&self, width: usize, height: usize) -> Self {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let buf: image::ImageBuffer<image::Luma<f32>, Vec<f32>> = image::ImageBuffer::from_raw(
            self.width as u32,
            self.height as u32,
            self.data.iter().map(|&v| v as f32).collect(),
        )
        .expect("buffer length matches dimensions");
        let out = image::imageops::resize(&buf, width as u32, height as u32, image::imageops::FilterType::CatmullRom);
        GrayImage { width, height, data: out.into_raw().into_iter().map(|v| (v as f64).clamp(0.0, 1.0)).collect() }
    }

    /// Box-filter downsampling by an integer factor.
    pub fn downsample(&self, factor: usize) -> Self {
        let factor = factor.max(1);
        let (w, h) = (self.width / factor, self.height / factor);
        let norm = 1.0 / (factor * factor) as f64;
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for dy in 0..factor {
                    for dx in 0..factor {
                        acc += self.get(x * factor + dx, y * factor + dy);
                    }
                }
                data.push(acc * norm);
            }
        }
        GrayImage { width: w, height: h, data }
    }
}

/// Parabolic pixel pre-filter of half-width `radius`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PreFilter<S> {
    radius: S,
}

impl<S: Scalar> PreFilter<S> {
    pub fn new(radius: S) -> Result<Self, FieldError> {
        if !(radius > S::zero()) || !radius.is_finite() {
            return Err(FieldError::BadRadius(radius.to_f64_lossy()));
        }
        Ok(PreFilter { radius })
    }

    pub fn radius(&self) -> S {
        self.radius
    }

    /// Coverage of the positive half-space at signed distance `s`:
    /// the normalized parabola integrates to the smoothstep `u²(3 − 2u)`.
    #[inline]
    pub fn alpha(&self, s: S) -> S {
        self.alpha_with_slope(s).0
    }

    /// `α(s)` and `dα/ds`.
    #[inline]
    pub fn alpha_with_slope(&self, s: S) -> (S, S) {
        let r = self.radius;
        let u = (s + r) / (r + r);
        if u <= S::zero() {
            (S::zero(), S::zero())
        } else if u >= S::one() {
            (S::one(), S::zero())
        } else {
            let three = S::lit(3.0);
            let two = S::lit(2.0);
            (u * u * (three - two * u), S::lit(6.0) * u * (S::one() - u) / (r + r))
        }
    }
}

/// Free-function form of [`PreFilter::alpha`].
pub fn alpha<S: Scalar>(s: S, filter: PreFilter<S>) -> S {
    filter.alpha(s)
}

/// Pixel-center sampling of a square frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleGrid<S> {
    resolution: usize,
    min: Point<S>,
    max: Point<S>,
    /// Row 0 at `min.y` when set, at `max.y` otherwise.
    y_down: bool,
}

impl<S: Scalar> SampleGrid<S> {
    pub fn new(resolution: usize, min: Point<S>, max: Point<S>, y_down: bool) -> Result<Self, FieldError> {
        if resolution == 0 {
            return Err(FieldError::BadResolution);
        }
        Ok(SampleGrid { resolution, min, max, y_down })
    }

    /// `[-1, 1]^2`, y up, row 0 at the top.
    pub fn unit(resolution: usize) -> Self {
        SampleGrid { resolution: resolution.max(1), min: Point::from_f64(-1.0, -1.0), max: Point::from_f64(1.0, 1.0), y_down: false }
    }

    /// `[0, side]^2`, y down, as used by SVG canvases.
    pub fn canvas(resolution: usize, side: S) -> Self {
        SampleGrid { resolution: resolution.max(1), min: Point::zero(), max: Point::new(side, side), y_down: true }
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn min(&self) -> Point<S> {
        self.min
    }

    pub fn max(&self) -> Point<S> {
        self.max
    }

    pub fn y_down(&self) -> bool {
        self.y_down
    }

    /// Pixel pitch along x.
    pub fn pitch(&self) -> S {
        (self.max.x - self.min.x) / S::lit(self.resolution as f64)
    }

    #[inline]
    pub fn point(&self, col: usize, row: usize) -> Point<S> {
        let n = S::lit(self.resolution as f64);
        let half = S::lit(0.5);
        let fx = (S::lit(col as f64) + half) / n;
        let fy = (S::lit(row as f64) + half) / n;
        let x = self.min.x + (self.max.x - self.min.x) * fx;
        let y = if self.y_down {
            self.min.y + (self.max.y - self.min.y) * fy
        } else {
            self.max.y - (self.max.y - self.min.y) * fy
        };
        Point::new(x, y)
    }

    pub fn check_image(&self, img: &GrayImage) -> Result<(), FieldError> {
        if img.width != self.resolution || img.height != self.resolution {
            return Err(FieldError::GridMismatch { grid: self.resolution, width: img.width, height: img.height });
        }
        Ok(())
    }
}

/// Path with per-segment hull boxes for culled queries.
#[derive(Clone, Debug)]
pub(crate) struct PreparedPath<S> {
    pub segs: Vec<QuadBezier<S>>,
    boxes: Vec<BBox<S>>,
    bbox: BBox<S>,
}

impl<S: Scalar> PreparedPath<S> {
    pub fn new(segs: Vec<QuadBezier<S>>) -> Self {
        let boxes: Vec<_> = segs.iter().map(|s| s.hull_bbox()).collect();
        let bbox = boxes.iter().fold(BBox::empty(), |acc, b| acc.union(b));
        PreparedPath { segs, boxes, bbox }
    }

    pub fn from_path(path: &ClosedPath<S>) -> Self {
        Self::new(path.segments().collect())
    }

    pub fn winding(&self, p: Point<S>) -> Result<i32, GeomError> {
        let slack = S::geom_tol(1e-9) * S::lit(8.0);
        if p.x > self.bbox.max.x + slack || p.y < self.bbox.min.y - slack || p.y > self.bbox.max.y + slack {
            return Ok(0);
        }
        winding_with_retry(p, |q, tol| {
            let mut w = 0;
            for s in &self.segs {
                w += s.ray_crossings(q, tol)?;
            }
            Ok(w)
        })
    }

    pub fn inside(&self, p: Point<S>) -> Result<bool, GeomError> {
        Ok(self.winding(p)? != 0)
    }

    /// Lower bound on the boundary distance.
    #[inline]
    pub fn distance_bound(&self, p: Point<S>) -> S {
        self.bbox.distance(p)
    }

    /// Nearest segment and projection if the boundary distance is below `cutoff`
    /// (lowest segment index on ties); `None` otherwise.
    pub fn nearest(&self, p: Point<S>, cutoff: S) -> Option<(usize, Projection<S>)> {
        let mut best: Option<(usize, Projection<S>)> = None;
        let mut bound = cutoff;
        for (j, (seg, bx)) in self.segs.iter().zip(&self.boxes).enumerate() {
            if bx.distance(p) >= bound {
                continue;
            }
            let pr = seg.closest_point(p);
            if pr.dist < bound {
                bound = pr.dist;
                best = Some((j, pr));
            }
        }
        best
    }
}

/// Which path of a dual part drives a composite field value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Positive,
    Negative,
}

/// Selected path for a sample, with what the gradient needs.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Selection<S> {
    pub part: usize,
    pub branch: Branch,
    /// Nearest segment on the selected path (only when it influences the value).
    pub near: Option<(usize, Projection<S>)>,
    /// Derivative of the composite value with respect to the selected path's boundary distance.
    pub slope: S,
}

#[derive(Clone, Debug)]
pub(crate) struct PreparedGlyph<S> {
    pub paths: Vec<PreparedPath<S>>,
}

impl<S: Scalar> PreparedGlyph<S> {
    pub fn new(g: &DualPartGlyph<S>) -> Self {
        PreparedGlyph { paths: g.paths().map(PreparedPath::from_path).collect() }
    }

    pub fn n(&self) -> usize {
        self.paths.len() / 2
    }

    /// Soft occupancy `max_i min(α(s_P), 1 − α(s_Q))` with its subgradient selection.
    pub fn soft(&self, p: Point<S>, filter: &PreFilter<S>) -> Result<(S, Selection<S>), GeomError> {
        let r = filter.radius();
        let mut best: Option<(S, Selection<S>)> = None;
        for i in 0..self.n() {
            let pos = &self.paths[2 * i];
            let (a_pos, sel_pos) = self.soft_path(pos, p, r, filter)?;
            let cand = if a_pos == S::zero() {
                (a_pos, Selection { part: i, branch: Branch::Positive, ..sel_pos })
            } else {
                let neg = &self.paths[2 * i + 1];
                let (a_neg, sel_neg) = self.soft_path(neg, p, r, filter)?;
                let keep = S::one() - a_neg;
                if a_pos <= keep {
                    (a_pos, Selection { part: i, branch: Branch::Positive, ..sel_pos })
                } else {
                    (keep, Selection { part: i, branch: Branch::Negative, slope: -sel_neg.slope, ..sel_neg })
                }
            };
            match &best {
                Some((v, _)) if cand.0 <= *v => {}
                _ => best = Some(cand),
            }
        }
        Ok(best.expect("glyph has at least one part"))
    }

    fn soft_path(
        &self,
        path: &PreparedPath<S>,
        p: Point<S>,
        r: S,
        filter: &PreFilter<S>,
    ) -> Result<(S, Selection<S>), GeomError> {
        let inside = path.inside(p)?;
        let sign = if inside { S::one() } else { -S::one() };
        let near = if path.distance_bound(p) < r { path.nearest(p, r) } else { None };
        let (a, slope) = match near {
            Some((_, pr)) => {
                let (a, da) = filter.alpha_with_slope(sign * pr.dist);
                (a, da * sign)
            }
            None => (if inside { S::one() } else { S::zero() }, S::zero()),
        };
        Ok((a, Selection { part: 0, branch: Branch::Positive, near, slope }))
    }

    /// Approximate unsigned distance `min_i max(u_P, u_Q)` where `u_P` is the
    /// distance outside `P` and `u_Q` the distance inside `Q`.
    pub fn udf(&self, p: Point<S>) -> Result<(S, Selection<S>), GeomError> {
        let mut best_val = S::infinity();
        let mut best: Option<Selection<S>> = None;
        for i in 0..self.n() {
            let pos = &self.paths[2 * i];
            let neg = &self.paths[2 * i + 1];
            let (u_pos, near_pos) = if pos.inside(p)? {
                (S::zero(), None)
            } else {
                match pos.nearest(p, best_val) {
                    Some(n) => (n.1.dist, Some(n)),
                    // cannot beat the current minimum
                    None => continue,
                }
            };
            let (u_neg, near_neg) = if neg.inside(p)? {
                let n = neg.nearest(p, S::infinity()).expect("non-empty path");
                (n.1.dist, Some(n))
            } else {
                (S::zero(), None)
            };
            let (val, sel) = if u_pos >= u_neg {
                let slope = if near_pos.is_some() { S::one() } else { S::zero() };
                (u_pos, Selection { part: i, branch: Branch::Positive, near: near_pos, slope })
            } else {
                (u_neg, Selection { part: i, branch: Branch::Negative, near: near_neg, slope: S::one() })
            };
            if best.is_none() || val < best_val {
                best_val = val;
                best = Some(sel);
            }
        }
        match best {
            Some(sel) => Ok((best_val, sel)),
            // every part was skipped: only possible when all distances are infinite
            None => Ok((S::infinity(), Selection { part: 0, branch: Branch::Positive, near: None, slope: S::zero() })),
        }
    }
}

/// Exact occupancy `max_i min(O_P, 1 − O_Q)`.
pub fn glyph_occupancy_exact<S: Scalar>(g: &DualPartGlyph<S>, p: Point<S>) -> Result<bool, GeomError> {
    for part in g.parts() {
        if path_occupancy(&part.positive, p)? && !path_occupancy(&part.negative, p)? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Pre-filtered occupancy in `[0, 1]`.
pub fn glyph_occupancy_soft<S: Scalar>(g: &DualPartGlyph<S>, p: Point<S>, filter: PreFilter<S>) -> Result<S, GeomError> {
    Ok(PreparedGlyph::new(g).soft(p, &filter)?.0)
}

/// Approximate glyph UDF: zero on the represented region, positive outside.
pub fn glyph_udf_approx<S: Scalar>(g: &DualPartGlyph<S>, p: Point<S>) -> Result<S, GeomError> {
    Ok(PreparedGlyph::new(g).udf(p)?.0)
}

/// Soft occupancy sampled at the pixel centers of `grid`.
pub fn rasterize_soft<S: Scalar>(
    g: &DualPartGlyph<S>,
    grid: &SampleGrid<S>,
    filter: PreFilter<S>,
) -> Result<GrayImage, FieldError> {
    let prepared = PreparedGlyph::new(g);
    let n = grid.resolution();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|row| {
            (0..n)
                .map(|col| prepared.soft(grid.point(col, row), &filter).map(|(v, _)| v.to_f64_lossy().clamp(0.0, 1.0)))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    Ok(GrayImage { width: n, height: n, data: rows.concat() })
}

/// Exact occupancy rendered with `ss × ss` supersampling per pixel.
pub fn rasterize_exact<S: Scalar>(g: &DualPartGlyph<S>, grid: &SampleGrid<S>, ss: usize) -> Result<GrayImage, FieldError> {
    let fine = SampleGrid { resolution: grid.resolution * ss.max(1), ..*grid };
    let n = fine.resolution();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|row| {
            (0..n)
                .map(|col| glyph_occupancy_exact(g, fine.point(col, row)).map(|b| if b { 1.0 } else { 0.0 }))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    Ok(GrayImage { width: n, height: n, data: rows.concat() }.downsample(ss.max(1)))
}

/// Distance field of an image, in canvas units, zero on ink pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceField {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    /// Set when the image had no ink; every value is then `+∞`.
    pub empty: bool,
}

impl DistanceField {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// One-dimensional squared distance transform (lower envelope of parabolas)
/// with sample spacing `h`.
fn edt_1d(f: &[f64], h: f64, out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let pos = |q: usize| q as f64 * h;
    for q in 1..n {
        if f[q].is_infinite() {
            continue;
        }
        if f[v[k]].is_infinite() {
            v[k] = q;
            continue;
        }
        loop {
            let p = v[k];
            let s = ((f[q] + pos(q) * pos(q)) - (f[p] + pos(p) * pos(p))) / (2.0 * (pos(q) - pos(p)));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    if f[v[0]].is_infinite() {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < pos(q) {
            k += 1;
        }
        let d = pos(q) - pos(v[k]);
        *o = d * d + f[v[k]];
    }
}

/// Exact Euclidean distance from every pixel center to the nearest ink pixel
/// center (`value >= threshold`), with the image spanning `[-1, 1]^2`.
pub fn image_udf(img: &GrayImage, threshold: f64) -> Result<DistanceField, FieldError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(FieldError::BadThreshold(threshold));
    }
    let (w, h) = (img.width, img.height);
    let (hx, hy) = (2.0 / w as f64, 2.0 / h as f64);
    let mut grid: Vec<f64> = img.data.iter().map(|&v| if v >= threshold { 0.0 } else { f64::INFINITY }).collect();
    let empty = grid.iter().all(|v| v.is_infinite());
    if empty {
        return Ok(DistanceField { width: w, height: h, values: grid, empty: true });
    }
    let len = w.max(h);
    let mut col = vec![0.0; len];
    let mut out = vec![0.0; len];
    let mut v = vec![0usize; len];
    let mut z = vec![0.0; len + 1];
    for x in 0..w {
        for y in 0..h {
            col[y] = grid[y * w + x];
        }
        edt_1d(&col[..h], hy, &mut out[..h], &mut v, &mut z);
        for y in 0..h {
            grid[y * w + x] = out[y];
        }
    }
    for y in 0..h {
        let row = &mut grid[y * w..(y + 1) * w];
        col[..w].copy_from_slice(row);
        edt_1d(&col[..w], hx, &mut out[..w], &mut v, &mut z);
        for (r, o) in row.iter_mut().zip(&out[..w]) {
            *r = o.sqrt();
        }
    }
    Ok(DistanceField { width: w, height: h, values: grid, empty: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::DualPart;

    fn p(x: f64, y: f64) -> Point<f64> {
        Point::new(x, y)
    }

    fn annulus() -> DualPartGlyph<f64> {
        DualPartGlyph::new(vec![DualPart {
            positive: ClosedPath::square(p(0.0, 0.0), 0.6, true),
            negative: ClosedPath::square(p(0.0, 0.0), 0.3, true),
        }])
        .unwrap()
    }

    #[test]
    fn alpha_values() {
        let f = PreFilter::new(0.01f64).unwrap();
        assert_eq!(f.alpha(0.0), 0.5);
        assert_eq!(f.alpha(0.01), 1.0);
        assert_eq!(f.alpha(-0.01), 0.0);
        assert!((f.alpha(-0.005) - 0.15625).abs() < 1e-15);
        assert!(PreFilter::new(0.0).is_err());
    }

    #[test]
    fn alpha_slope_matches_difference_quotient() {
        let f = PreFilter::new(0.2f64).unwrap();
        for &s in &[-0.15, -0.05, 0.0, 0.07, 0.19] {
            let h = 1e-7;
            let fd = (f.alpha(s + h) - f.alpha(s - h)) / (2.0 * h);
            assert!((f.alpha_with_slope(s).1 - fd).abs() < 1e-7);
        }
    }

    #[test]
    fn exact_occupancy_of_annulus() {
        let g = annulus();
        assert!(!glyph_occupancy_exact(&g, p(0.0, 0.0)).unwrap());
        assert!(glyph_occupancy_exact(&g, p(0.45, 0.1)).unwrap());
        assert!(!glyph_occupancy_exact(&g, p(0.9, 0.1)).unwrap());
    }

    #[test]
    fn soft_occupancy_saturates_and_halves() {
        let g = annulus();
        let f = PreFilter::new(0.01f64).unwrap();
        assert!((glyph_occupancy_soft(&g, p(0.45, 0.0), f).unwrap() - 1.0).abs() < 1e-12);
        assert!((glyph_occupancy_soft(&g, p(0.6, 0.0), f).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn udf_zero_inside_distance_outside() {
        let g = annulus();
        assert_eq!(glyph_udf_approx(&g, p(0.45, 0.0)).unwrap(), 0.0);
        assert!((glyph_udf_approx(&g, p(0.9, 0.0)).unwrap() - 0.3).abs() < 1e-12);
        // inside the hole: distance to the hole boundary
        assert!((glyph_udf_approx(&g, p(0.0, 0.0)).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn empty_glyph_rasterizes_to_zero() {
        // the dot sits on a pixel corner, farther than the filter radius from every center
        let dot = ClosedPath::point(p(0.25, 0.25), 4);
        let g = DualPartGlyph::new(vec![DualPart { positive: dot.clone(), negative: dot }]).unwrap();
        let img = rasterize_soft(&g, &SampleGrid::unit(16), PreFilter::new(0.05).unwrap()).unwrap();
        assert!(img.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn full_canvas_square_is_ink_except_border() {
        let g = DualPartGlyph::new(vec![DualPart {
            positive: ClosedPath::square(p(0.0, 0.0), 1.0, true),
            negative: ClosedPath::point(p(5.0, 5.0), 4),
        }])
        .unwrap();
        let n = 32;
        let img = rasterize_soft(&g, &SampleGrid::unit(n), PreFilter::new(2.0 / n as f64).unwrap()).unwrap();
        for y in 0..n {
            for x in 0..n {
                let border = x < 2 || y < 2 || x >= n - 2 || y >= n - 2;
                if !border {
                    assert_eq!(img.get(x, y), 1.0);
                }
            }
        }
    }

    #[test]
    fn udf_of_all_ink_and_single_pixel() {
        let img = GrayImage::filled(4, 4, 1.0);
        assert!(image_udf(&img, 0.5).unwrap().values.iter().all(|&v| v == 0.0));
        let mut img = GrayImage::filled(3, 3, 0.0);
        img.set(1, 1, 1.0);
        let d = image_udf(&img, 0.5).unwrap();
        let pitch = 2.0 / 3.0;
        assert!((d.get(0, 0) - 2f64.sqrt() * pitch).abs() < 1e-12);
        assert!((d.get(1, 0) - pitch).abs() < 1e-12);
    }

    #[test]
    fn udf_of_blank_image_is_flagged() {
        let d = image_udf(&GrayImage::filled(5, 5, 0.0), 0.5).unwrap();
        assert!(d.empty && d.values.iter().all(|v| v.is_infinite()));
        assert!(image_udf(&GrayImage::filled(5, 5, 0.0), 1.0).is_err());
    }

    #[test]
    fn grid_orientation() {
        let up = SampleGrid::<f64>::unit(4);
        assert_eq!(up.point(0, 0), p(-0.75, 0.75));
        let down = SampleGrid::<f64>::canvas(4, 256.0);
        assert_eq!(down.point(0, 0), p(32.0, 32.0));
        assert_eq!(down.pitch(), 64.0);
    }

    #[test]
    fn image_validation() {
        assert!(GrayImage::new(2, 2, vec![0.0; 3]).is_err());
        assert!(GrayImage::new(2, 1, vec![0.0, 1.5]).is_err());
        assert!(GrayImage::new(0, 1, vec![]).is_err());
    }
}
