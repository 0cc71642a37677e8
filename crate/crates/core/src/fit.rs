//! Direct per-glyph optimization of a dual-part glyph against a grayscale image.
//!
//! The first `warmup_fraction` of the iterations minimize `λ_P·L_P + λ_u·L_u`
//! (the UDF term supplies gradient far from any boundary); the rest minimize
//! `λ_P·L_P` alone. Control points are clamped to `[-1.5, 1.5]` after each step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::diff::{fit_objective, reconstruction_error, ParamVector};
use crate::field::{image_udf, FieldError, GrayImage, PreFilter, SampleGrid};
use crate::geom::{ClosedPath, DualPart, DualPartGlyph, Point};
use crate::optim::{adam_step, AdamParams, AdamState};
use crate::Scalar;

/// Bound applied to every control coordinate after each step.
pub const COORD_LIMIT: f64 = 1.5;
/// Smallest accepted target side.
pub const MIN_TARGET_SIDE: usize = 32;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("invalid fit configuration: {0}")]
    Config(String),
    #[error("target must be square and at least {MIN_TARGET_SIDE}px, got {width}x{height}")]
    TargetSize { width: usize, height: usize },
    #[error("non-finite loss at iteration {iter}; parameters: {params:?}")]
    NonFinite { iter: usize, params: Vec<f64> },
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    pub n_parts: usize,
    pub m_segments: usize,
    pub lambda_p: f64,
    pub lambda_u: f64,
    pub warmup_fraction: f64,
    pub total_iters: usize,
    pub step_size: f64,
    pub moment_decays: (f64, f64),
    pub moment_eps: f64,
    pub grid_res: usize,
    /// Pre-filter radius in canvas units; one pixel pitch when `None`.
    pub filter_radius: Option<f64>,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            n_parts: 6,
            m_segments: 4,
            lambda_p: 0.5,
            lambda_u: 1.0,
            warmup_fraction: 0.05,
            total_iters: 2000,
            step_size: 1e-2,
            moment_decays: (0.9, 0.999),
            moment_eps: 1e-8,
            grid_res: 128,
            filter_radius: None,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), FitError> {
        let bad = |msg: &str| Err(FitError::Config(msg.to_string()));
        if self.n_parts < 1 {
            return bad("n_parts must be >= 1");
        }
        if self.m_segments < 2 {
            return bad("m_segments must be >= 2");
        }
        if !(0.0..=1.0).contains(&self.warmup_fraction) {
            return bad("warmup_fraction must lie in [0, 1]");
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return bad("step_size must be positive");
        }
        if self.lambda_p < 0.0 || self.lambda_u < 0.0 {
            return bad("loss weights must be non-negative");
        }
        if self.grid_res < MIN_TARGET_SIDE {
            return bad("grid_res must be at least 32");
        }
        if let Some(r) = self.filter_radius {
            if !(r > 0.0 && r.is_finite()) {
                return bad("filter_radius must be positive");
            }
        }
        Ok(())
    }

    pub fn warmup_iters(&self) -> usize {
        (self.warmup_fraction * self.total_iters as f64).round() as usize
    }

    pub fn grid<S: Scalar>(&self) -> SampleGrid<S> {
        SampleGrid::unit(self.grid_res)
    }

    pub fn filter<S: Scalar>(&self) -> PreFilter<S> {
        let r = self.filter_radius.unwrap_or(2.0 / self.grid_res as f64);
        PreFilter::new(S::lit(r)).expect("validated radius")
    }

    fn adam<S: Scalar>(&self) -> AdamParams<S> {
        AdamParams::new(self.step_size, self.moment_decays, self.moment_eps)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitRecord {
    pub iter: usize,
    pub l_p: f64,
    pub l_u: f64,
    pub total: f64,
    pub mse: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FitTrace {
    pub records: Vec<FitRecord>,
    /// Iteration whose parameters were returned (`records.len()` = after the last step).
    pub best_iter: usize,
    pub best_l_p: f64,
    /// MSE of the returned glyph against the target.
    pub best_mse: f64,
}

impl FitTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

fn loop_around<S: Scalar, R: Rng>(rng: &mut R, center: Point<S>, radius: f64, m: usize, jitter: f64) -> ClosedPath<S> {
    let step = std::f64::consts::TAU / m as f64;
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let ctrl_r = radius / (0.5 * step).cos();
    let mut ctrl = Vec::with_capacity(2 * m);
    for j in 0..m {
        for (k, r) in [(0.0, radius), (0.5, ctrl_r)] {
            let th = phase + step * (j as f64 + k);
            let rr = r * (1.0 + rng.gen_range(-jitter..=jitter));
            ctrl.push(center + Point::from_f64(rr * th.cos(), rr * th.sin()));
        }
    }
    ClosedPath::new(ctrl).expect("m >= 2 and finite")
}

/// Random dual parts: a counter-clockwise loop of radius 0.3 around a random
/// center with a concentric loop of radius 0.08 as its negative path.
/// Centers are uniform in `[-0.6, 0.6]^2`, or uniform over the ink pixels of
/// `hint` when it has any.
pub fn init_dual_parts<S: Scalar>(config: &FitConfig, hint: Option<&GrayImage>) -> DualPartGlyph<S> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let m = config.m_segments.max(2);
    let ink: Vec<(usize, usize, usize, usize)> = hint
        .map(|img| {
            let (w, h) = (img.width(), img.height());
            (0..h).flat_map(|y| (0..w).map(move |x| (x, y, w, h))).filter(|&(x, y, _, _)| img.get(x, y) >= 0.5).collect()
        })
        .unwrap_or_default();
    let parts = (0..config.n_parts.max(1))
        .map(|_| {
            let center = if ink.is_empty() {
                Point::from_f64(rng.gen_range(-0.6..=0.6), rng.gen_range(-0.6..=0.6))
            } else {
                let (x, y, w, h) = ink[rng.gen_range(0..ink.len())];
                Point::from_f64(-1.0 + (x as f64 + 0.5) * 2.0 / w as f64, 1.0 - (y as f64 + 0.5) * 2.0 / h as f64)
            };
            DualPart { positive: loop_around(&mut rng, center, 0.3, m, 0.05), negative: loop_around(&mut rng, center, 0.08, m, 0.05) }
        })
        .collect();
    DualPartGlyph::new(parts).expect("uniform M")
}

/// Fits from a random initialization (see [`init_dual_parts`]).
pub fn fit_glyph<S: Scalar>(target: &GrayImage, config: &FitConfig) -> Result<(DualPartGlyph<S>, FitTrace), FitError> {
    let init = init_dual_parts(config, None);
    fit_from(target, config, init, |_, _| {})
}

/// Fits starting from `init`; `observer` sees the glyph after every step
/// (called with the number of completed steps).
pub fn fit_from<S: Scalar>(
    target: &GrayImage,
    config: &FitConfig,
    init: DualPartGlyph<S>,
    mut observer: impl FnMut(usize, &DualPartGlyph<S>),
) -> Result<(DualPartGlyph<S>, FitTrace), FitError> {
    config.validate()?;
    if target.width() != target.height() || target.width() < MIN_TARGET_SIDE {
        return Err(FitError::TargetSize { width: target.width(), height: target.height() });
    }
    let target = target.resample(config.grid_res, config.grid_res);
    let grid: SampleGrid<S> = config.grid();
    let filter: PreFilter<S> = config.filter();
    let udf = image_udf(&target, 0.5)?;
    let warmup = config.warmup_iters();
    let lambda_p = S::lit(config.lambda_p);
    let lambda_u = S::lit(config.lambda_u);
    let hp = config.adam::<S>();
    let limit = S::lit(COORD_LIMIT);

    let mut glyph = init;
    let mut params = ParamVector::from_glyph(&glyph);
    let mut state = AdamState::new(params.len());
    let mut trace = FitTrace { records: Vec::with_capacity(config.total_iters), ..Default::default() };
    let mut best: Option<(S, S, usize, DualPartGlyph<S>)> = None;

    let snapshot = |params: &ParamVector<S>| params.0.iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>();

    for iter in 0..config.total_iters {
        let lu_weight = if iter < warmup { lambda_u } else { S::zero() };
        let report = fit_objective(&glyph, &target, Some(&udf), &grid, filter, lambda_p, lu_weight)?;
        if !report.total.is_finite() || !report.grad.is_finite() {
            return Err(FitError::NonFinite { iter, params: snapshot(&params) });
        }
        trace.records.push(FitRecord {
            iter,
            l_p: report.l_p.to_f64_lossy(),
            l_u: report.l_u.to_f64_lossy(),
            total: report.total.to_f64_lossy(),
            mse: report.mse.to_f64_lossy(),
        });
        if best.as_ref().map_or(true, |b| report.l_p < b.0) {
            best = Some((report.l_p, report.mse, iter, glyph.clone()));
        }
        adam_step(&mut params.0, &report.grad.0, &mut state, &hp);
        for v in params.0.iter_mut() {
            *v = v.max(-limit).min(limit);
        }
        params.apply_to(&mut glyph);
        observer(iter + 1, &glyph);
    }

    let (l_p, mse) = reconstruction_error(&glyph, &target, &grid, filter)?;
    if !l_p.is_finite() {
        return Err(FitError::NonFinite { iter: config.total_iters, params: snapshot(&params) });
    }
    if best.as_ref().map_or(true, |b| l_p < b.0) {
        best = Some((l_p, mse, config.total_iters, glyph));
    }
    let (l_p, mse, iter, glyph) = best.expect("at least the final evaluation");
    trace.best_iter = iter;
    trace.best_l_p = l_p.to_f64_lossy();
    trace.best_mse = mse.to_f64_lossy();
    Ok((glyph, trace))
}

/// Iterations of the warm-up ablation.
pub const ABLATION_ITERS: usize = 200;
/// Radius of the disk around the canvas center from which ablation parts start.
pub const ABLATION_START_RADIUS: f64 = 0.05;

/// Settings of the warm-up ablation: one part of six segments, 200 iterations,
/// with the distance loss on for the whole run or off entirely.
pub fn ablation_config(warmup: bool, seed: u64) -> FitConfig {
    FitConfig {
        n_parts: 1,
        m_segments: 6,
        total_iters: ABLATION_ITERS,
        warmup_fraction: if warmup { 1.0 } else { 0.0 },
        lambda_u: if warmup { 1.0 } else { 0.0 },
        seed,
        ..FitConfig::default()
    }
}

/// Ablation start: a part centered near the canvas center, i.e. inside the
/// hole of a ring target, where the pixel loss alone has no ink to pull towards.
pub fn ablation_init<S: Scalar>(config: &FitConfig) -> DualPartGlyph<S> {
    let res = config.grid_res;
    let mut hint = GrayImage::filled(res, res, 0.0);
    let grid: SampleGrid<f64> = SampleGrid::unit(res);
    for y in 0..res {
        for x in 0..res {
            if grid.point(x, y).norm() <= ABLATION_START_RADIUS {
                hint.set(x, y, 1.0);
            }
        }
    }
    init_dual_parts(config, Some(&hint))
}

/// Iterations after which the ablation keeps a copy of the glyph.
pub const ABLATION_SNAPSHOTS: [usize; 4] = [1, 5, 50, 200];

#[derive(Clone, Debug)]
pub struct AblationRun<S> {
    pub trace: FitTrace,
    /// Image MSE of the glyph after the last iteration.
    pub final_mse: f64,
    pub snapshots: Vec<(usize, DualPartGlyph<S>)>,
}

/// One arm of the warm-up ablation on `target` (normally the ring).
pub fn run_ablation<S: Scalar>(target: &GrayImage, warmup: bool, seed: u64) -> Result<AblationRun<S>, FitError> {
    let config = ablation_config(warmup, seed);
    let init: DualPartGlyph<S> = ablation_init(&config);
    let mut snapshots = Vec::new();
    let mut last = init.clone();
    let (_, trace) = fit_from(target, &config, init, |done, g| {
        if ABLATION_SNAPSHOTS.contains(&done) {
            snapshots.push((done, g.clone()));
        }
        if done == config.total_iters {
            last = g.clone();
        }
    })?;
    let resampled = target.resample(config.grid_res, config.grid_res);
    let (_, mse) = reconstruction_error(&last, &resampled, &config.grid::<S>(), config.filter())?;
    Ok(AblationRun { trace, final_mse: mse.to_f64_lossy(), snapshots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{path_area, path_winding};

    #[test]
    fn init_is_deterministic_and_sized() {
        let cfg = FitConfig::default();
        let a: DualPartGlyph<f64> = init_dual_parts(&cfg, None);
        let b: DualPartGlyph<f64> = init_dual_parts(&cfg, None);
        assert_eq!(a, b);
        assert_eq!(ParamVector::from_glyph(&a).len(), 192);
        let c: DualPartGlyph<f64> = init_dual_parts(&FitConfig { seed: 7, ..cfg }, None);
        assert_ne!(a, c);
    }

    #[test]
    fn init_loops_are_simple_ccw_and_sized() {
        for seed in 0..20 {
            let cfg = FitConfig { seed, ..FitConfig::default() };
            let g: DualPartGlyph<f64> = init_dual_parts(&cfg, None);
            for part in g.parts() {
                let area = path_area(&part.positive);
                assert!((0.05..=0.5).contains(&area), "area {area}");
                let c = part.positive.ctrl().iter().fold(Point::zero(), |acc, &p| acc + p) / 8.0;
                assert_eq!(path_winding(&part.positive, c).unwrap(), 1);
                assert_eq!(path_winding(&part.negative, c).unwrap(), 1);
            }
        }
    }

    #[test]
    fn hint_places_centers_on_ink() {
        let mut hint = GrayImage::filled(32, 32, 0.0);
        hint.set(24, 8, 1.0);
        let cfg = FitConfig { n_parts: 3, ..FitConfig::default() };
        let g: DualPartGlyph<f64> = init_dual_parts(&cfg, Some(&hint));
        let expect = Point::new(-1.0 + 24.5 / 16.0, 1.0 - 8.5 / 16.0);
        for part in g.parts() {
            let c = part.negative.ctrl().iter().fold(Point::zero(), |acc, &p| acc + p) / 8.0;
            assert!(c.dist(expect) < 0.02);
        }
    }

    #[test]
    fn config_validation() {
        assert!(FitConfig { m_segments: 1, ..FitConfig::default() }.validate().is_err());
        assert!(FitConfig { warmup_fraction: 1.5, ..FitConfig::default() }.validate().is_err());
        assert!(FitConfig { n_parts: 0, ..FitConfig::default() }.validate().is_err());
        assert_eq!(FitConfig::default().warmup_iters(), 100);
    }

    #[test]
    fn rejects_small_targets() {
        let img = GrayImage::filled(16, 16, 0.0);
        let err = fit_glyph::<f64>(&img, &FitConfig::default()).unwrap_err();
        assert!(matches!(err, FitError::TargetSize { .. }));
    }
}
