//! Image and vector similarity metrics, and SVG command accounting.

use crate::boolops::{Contour, Segment};
use crate::field::{FieldError, GrayImage};
use crate::geom::Point;
use crate::Scalar;

fn same_size(a: &GrayImage, b: &GrayImage) -> Result<(), FieldError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(FieldError::SizeMismatch(a.width(), a.height(), b.width(), b.height()));
    }
    Ok(())
}

/// Mean absolute pixel difference.
pub fn l1(a: &GrayImage, b: &GrayImage) -> Result<f64, FieldError> {
    same_size(a, b)?;
    let sum: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum();
    Ok(sum / a.data().len() as f64)
}

/// Soft IoU `Σ min / Σ max`; two blank images score 1.
pub fn s_iou(a: &GrayImage, b: &GrayImage) -> Result<f64, FieldError> {
    same_size(a, b)?;
    let (mut inter, mut union) = (0.0, 0.0);
    for (x, y) in a.data().iter().zip(b.data()) {
        inter += x.min(*y);
        union += x.max(*y);
    }
    Ok(if union == 0.0 { 1.0 } else { inter / union })
}

pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_WINDOW: usize = 11;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn gaussian_kernel() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as isize;
    let w: Vec<f64> = (-r..=r).map(|x| (-(x * x) as f64 / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable weighted average over every fully contained window.
fn filter_valid(data: &[f64], w: usize, h: usize, k: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = k.len();
    let (ow, oh) = (w + 1 - n, h + 1 - n);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..n).map(|i| k[i] * data[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|i| k[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    (out, ow, oh)
}

/// Mean structural similarity with an 11×11 Gaussian window (σ = 1.5),
/// population statistics, dynamic range 1, averaged over valid window positions.
pub fn ssim(a: &GrayImage, b: &GrayImage) -> Result<f64, FieldError> {
    same_size(a, b)?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(FieldError::GridMismatch { grid: SSIM_WINDOW, width: w, height: h });
    }
    let k = gaussian_kernel();
    let x = a.data();
    let y = b.data();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(p, q)| p * q).collect();
    let (mx, ow, oh) = filter_valid(x, w, h, &k);
    let (my, _, _) = filter_valid(y, w, h, &k);
    let (exx, _, _) = filter_valid(&xx, w, h, &k);
    let (eyy, _, _) = filter_valid(&yy, w, h, &k);
    let (exy, _, _) = filter_valid(&xy, w, h, &k);
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let mut total = 0.0;
    for i in 0..ow * oh {
        let (ux, uy) = (mx[i], my[i]);
        let vx = exx[i] - ux * ux;
        let vy = eyy[i] - uy * uy;
        let vxy = exy[i] - ux * uy;
        total += ((2.0 * ux * uy + c1) * (2.0 * vxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
    }
    Ok(total / (ow * oh) as f64)
}

/// Number of cumulative-length knots tabulated per loop for arc-length sampling.
pub const SAMPLE_KNOTS: usize = 1024;

/// `n` points spaced uniformly by arc length along the whole contour
/// (half-open: the start of the first loop is sampled, its closing point is not).
pub fn sample_uniform<S: Scalar>(c: &Contour<S>, n: usize) -> Vec<Point<S>> {
    struct Table<S> {
        segs: Vec<Segment<S>>,
        cum: Vec<f64>,
    }
    let tables: Vec<Table<S>> = c
        .loops
        .iter()
        .filter(|l| !l.is_empty())
        .map(|l| {
            let segs = l.segments.clone();
            let mut cum = vec![0.0];
            let span = segs.len() as f64;
            for k in 0..SAMPLE_KNOTS {
                let (t0, t1) = (span * k as f64 / SAMPLE_KNOTS as f64, span * (k + 1) as f64 / SAMPLE_KNOTS as f64);
                let len = piece_length(&segs, t0, t1);
                cum.push(cum.last().unwrap() + len);
            }
            Table { segs, cum }
        })
        .collect();
    let total: f64 = tables.iter().map(|t| *t.cum.last().unwrap()).sum();
    if n == 0 || tables.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(n);
    let mut base = 0.0;
    let mut ti = 0;
    for k in 0..n {
        let s = total * k as f64 / n as f64;
        while ti + 1 < tables.len() && s >= base + tables[ti].cum.last().unwrap() {
            base += tables[ti].cum.last().unwrap();
            ti += 1;
        }
        let tab = &tables[ti];
        let local = (s - base).max(0.0);
        let idx = match tab.cum.binary_search_by(|v| v.partial_cmp(&local).unwrap()) {
            Ok(i) => i.min(SAMPLE_KNOTS - 1),
            Err(i) => (i.max(1) - 1).min(SAMPLE_KNOTS - 1),
        };
        let (c0, c1) = (tab.cum[idx], tab.cum[idx + 1]);
        let frac = if c1 > c0 { ((local - c0) / (c1 - c0)).clamp(0.0, 1.0) } else { 0.0 };
        let tau = tab.segs.len() as f64 * (idx as f64 + frac) / SAMPLE_KNOTS as f64;
        out.push(eval_loop(&tab.segs, tau));
    }
    out
}

fn eval_loop<S: Scalar>(segs: &[Segment<S>], tau: f64) -> Point<S> {
    let j = (tau.floor() as usize).min(segs.len() - 1);
    segs[j].eval(S::lit((tau - j as f64).clamp(0.0, 1.0)))
}

/// Arc length of the loop between loop parameters `t0 < t1` (segment index + local t).
fn piece_length<S: Scalar>(segs: &[Segment<S>], t0: f64, t1: f64) -> f64 {
    let mut len = 0.0;
    let mut lo = t0;
    while lo < t1 - 1e-15 {
        let j = (lo.floor() as usize).min(segs.len() - 1);
        let hi = t1.min(j as f64 + 1.0);
        let (a, b) = (lo - j as f64, hi - j as f64);
        len += segs[j].subrange(S::lit(a), S::lit(b)).arc_length().to_f64_lossy();
        lo = hi;
    }
    len
}

fn mean_min_dist<S: Scalar>(pts: &[Point<S>], other: &Contour<S>) -> f64 {
    let segs: Vec<&Segment<S>> = other.segments().collect();
    let sum: f64 = pts
        .iter()
        .map(|&p| segs.iter().map(|s| s.closest_point(p).dist.to_f64_lossy()).fold(f64::INFINITY, f64::min))
        .sum();
    sum / pts.len() as f64
}

/// Symmetric Chamfer distance between two contours from `n` arc-length-uniform
/// samples on each, measured after mapping the `[-1,1]^2` canvas to the unit square.
pub fn d_vd<S: Scalar>(u: &Contour<S>, v: &Contour<S>, n: usize) -> f64 {
    assert!(n > 0, "need at least one sample");
    assert!(u.segment_count() > 0 && v.segment_count() > 0, "contours must be non-empty");
    let su = sample_uniform(u, n);
    let sv = sample_uniform(v, n);
    0.5 * (mean_min_dist(&su, v) + mean_min_dist(&sv, u))
}

/// Path commands needed to write a contour as SVG.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CommandCount {
    pub moves: usize,
    pub lines: usize,
    pub quads: usize,
    pub cubics: usize,
    pub total: usize,
}

impl std::ops::Add for CommandCount {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        CommandCount {
            moves: self.moves + o.moves,
            lines: self.lines + o.lines,
            quads: self.quads + o.quads,
            cubics: self.cubics + o.cubics,
            total: self.total + o.total,
        }
    }
}

pub fn command_count<S: Scalar>(c: &Contour<S>) -> CommandCount {
    let mut cc = CommandCount::default();
    for l in c.loops.iter().filter(|l| !l.is_empty()) {
        cc.moves += 1;
        for s in &l.segments {
            match s {
                Segment::Line(..) => cc.lines += 1,
                Segment::Quad(_) => cc.quads += 1,
            }
        }
    }
    cc.total = cc.moves + cc.lines + cc.quads + cc.cubics;
    cc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolops::Loop;

    fn img(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> GrayImage {
        GrayImage::new(w, h, (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect()).unwrap()
    }

    fn square(x0: f64, y0: f64, side: f64) -> Loop<f64> {
        let c = [
            Point::new(x0, y0),
            Point::new(x0 + side, y0),
            Point::new(x0 + side, y0 + side),
            Point::new(x0, y0 + side),
        ];
        Loop::new((0..4).map(|i| Segment::Line(c[i], c[(i + 1) % 4])).collect()).unwrap()
    }

    #[test]
    fn l1_cases() {
        let zero = GrayImage::filled(8, 8, 0.0);
        let one = GrayImage::filled(8, 8, 1.0);
        let half = img(8, 8, |x, _| if x < 4 { 1.0 } else { 0.0 });
        assert_eq!(l1(&zero, &zero).unwrap(), 0.0);
        assert_eq!(l1(&zero, &one).unwrap(), 1.0);
        assert_eq!(l1(&half, &zero).unwrap(), 0.5);
        assert!(l1(&zero, &GrayImage::filled(4, 8, 0.0)).is_err());
    }

    #[test]
    fn s_iou_cases() {
        let a = img(8, 8, |x, y| ((x + y) % 3) as f64 / 2.0);
        assert_eq!(s_iou(&a, &a).unwrap(), 1.0);
        let left = img(8, 8, |x, _| if x < 4 { 1.0 } else { 0.0 });
        assert_eq!(s_iou(&left, &left.inverted()).unwrap(), 0.0);
        assert!((s_iou(&GrayImage::filled(8, 8, 0.4), &GrayImage::filled(8, 8, 0.8)).unwrap() - 0.5).abs() < 1e-12);
        let z = GrayImage::filled(8, 8, 0.0);
        assert_eq!(s_iou(&z, &z).unwrap(), 1.0);
    }

    #[test]
    fn ssim_identity_and_negative() {
        let a = img(32, 32, |x, y| ((x * 7 + y * 13) % 17) as f64 / 16.0);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!(ssim(&a, &a.inverted()).unwrap() < 0.0);
    }

    #[test]
    fn ssim_matches_reference() {
        // skimage.metrics.structural_similarity(a, b, gaussian_weights=True, sigma=1.5,
        // use_sample_covariance=False, data_range=1)
        let a = img(32, 32, |x, y| ((y * 7 + x * 13) % 17) as f64 / 16.0);
        let b = img(32, 32, |x, y| ((y * 3 + x * 5) % 11) as f64 / 10.0);
        let got = ssim(&a, &b).unwrap();
        assert!((got - SSIM_REFERENCE).abs() < 1e-6, "{got}");
    }

    const SSIM_REFERENCE: f64 = -0.00826674006729866;

    #[test]
    fn command_counts() {
        let sq = Contour::new(vec![square(0.0, 0.0, 1.0)]);
        assert_eq!(command_count(&sq), CommandCount { moves: 1, lines: 4, quads: 0, cubics: 0, total: 5 });
        assert_eq!(command_count(&Contour::<f64>::default()), CommandCount::default());
    }

    #[test]
    fn d_vd_identity_and_symmetry() {
        let u = Contour::new(vec![square(-0.5, -0.5, 1.0)]);
        let v = Contour::new(vec![square(-0.4, -0.5, 1.0)]);
        assert!(d_vd(&u, &u, 100) <= 1e-9);
        assert_eq!(d_vd(&u, &v, 100), d_vd(&v, &u, 100));
        assert!(d_vd(&u, &v, 100) > 0.0);
    }

    #[test]
    fn uniform_samples_are_evenly_spaced() {
        let u = Contour::new(vec![square(0.0, 0.0, 1.0)]);
        let pts = sample_uniform(&u, 8);
        let expect = [(0.0, 0.0), (0.5, 0.0), (1.0, 0.0), (1.0, 0.5), (1.0, 1.0), (0.5, 1.0), (0.0, 1.0), (0.0, 0.5)];
        for (p, e) in pts.iter().zip(expect) {
            assert!((p.x - e.0).abs() < 1e-9 && (p.y - e.1).abs() < 1e-9, "{p:?}");
        }
    }
}
