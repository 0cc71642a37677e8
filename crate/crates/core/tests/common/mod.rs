//! Shared generators for the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use dualpart::boolops::{extract_contour, jitter_glyph, BoolError, RETRY_JITTER};
use dualpart::{ClosedPath, Contour, DualPart, DualPartGlyph, ParamVector, Point};

pub fn p(x: f64, y: f64) -> Point {
    Point::new(x, y)
}

/// Star-shaped loop: `m` quads whose control polygon winds once around `center`.
pub fn star_loop(rng: &mut ChaCha8Rng, center: Point, radius: f64, m: usize, jitter: f64, ccw: bool) -> ClosedPath {
    let step = std::f64::consts::TAU / m as f64;
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let dir = if ccw { 1.0 } else { -1.0 };
    let mut ctrl = Vec::with_capacity(2 * m);
    for j in 0..m {
        for (k, scale) in [(0.0, 1.0), (0.5, 1.0 / (0.5 * step).cos())] {
            let th = phase + dir * step * (j as f64 + k);
            let r = radius * scale * (1.0 + rng.gen_range(-jitter..=jitter));
            ctrl.push(center + p(r * th.cos(), r * th.sin()));
        }
    }
    ClosedPath::new(ctrl).unwrap()
}

pub fn random_glyph(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DualPartGlyph {
    let parts = (0..n)
        .map(|_| {
            let c = p(rng.gen_range(-0.35..0.35), rng.gen_range(-0.35..0.35));
            let r = rng.gen_range(0.3..0.6);
            let ccw = rng.gen_bool(0.85);
            let positive = star_loop(rng, c, r, m, 0.25, ccw);
            let off = p(rng.gen_range(-0.15..0.15), rng.gen_range(-0.15..0.15)) * r;
            let (rq, ccw) = (r * rng.gen_range(0.15..0.6), rng.gen_bool(0.85));
            let negative = star_loop(rng, c + off, rq, m, 0.25, ccw);
            DualPart { positive, negative }
        })
        .collect();
    let mut g = DualPartGlyph::new(parts).unwrap();
    // keep every control point, hence the whole glyph, inside the canvas
    let mut v = ParamVector::from_glyph(&g);
    let reach = v.0.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if reach > 0.95 {
        v.0.iter_mut().for_each(|x| *x *= 0.95 / reach);
        v.apply_to(&mut g);
    }
    g
}

pub fn contour_with_retry(g: &DualPartGlyph) -> Result<Contour, BoolError> {
    match extract_contour(g) {
        Err(BoolError::DegenerateOverlap) => extract_contour(&jitter_glyph(g, RETRY_JITTER, 0)),
        r => r,
    }
}
