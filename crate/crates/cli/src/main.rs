//! `dualpart`: fit, extract, refine, render and evaluate glyph outlines.

mod config;
mod report;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use dualpart::boolops::{extract_contour, jitter_glyph, BoolError, RETRY_JITTER};
use dualpart::field::{rasterize_soft, FieldError};
use dualpart::fit::{fit_glyph, run_ablation, FitError, FitTrace};
use dualpart::io::{self, IoError, SynthShape};
use dualpart::metrics::{command_count, d_vd, l1, s_iou, ssim};
use dualpart::refine::{refine, render_contour_soft, EditKind, RefineError};
use dualpart::{Contour, DualPartGlyph, FitConfig, GrayImage, PreFilter, RefineConfig, SampleGrid};

use config::Settings;
use report::Report;

const EXIT_USAGE: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    code: u8,
    msg: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, msg: msg.into() }
    }

    pub fn io(msg: impl Into<String>) -> Self {
        CliError { code: EXIT_IO, msg: msg.into() }
    }
}

fn field_code(e: &FieldError) -> u8 {
    match e {
        FieldError::BadResolution | FieldError::BadRadius(_) | FieldError::BadThreshold(_) => EXIT_USAGE,
        _ => EXIT_NUMERICAL,
    }
}

impl From<dualpart::Error> for CliError {
    fn from(e: dualpart::Error) -> Self {
        use dualpart::Error as E;
        let code = match &e {
            E::Io(IoError::UnknownShape(_)) => EXIT_USAGE,
            E::Io(IoError::Field(f)) => field_code(f),
            E::Io(IoError::Geom(_)) => EXIT_NUMERICAL,
            E::Io(_) => EXIT_IO,
            E::Fit(FitError::Config(_) | FitError::TargetSize { .. }) | E::Refine(RefineError::Config(_)) => EXIT_USAGE,
            E::Fit(FitError::Field(f)) | E::Refine(RefineError::Field(f)) | E::Field(f) => field_code(f),
            _ => EXIT_NUMERICAL,
        };
        CliError { code, msg: e.to_string() }
    }
}

macro_rules! via_pipeline_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                dualpart::Error::from(e).into()
            }
        }
    )*};
}
via_pipeline_error!(IoError, FitError, RefineError, BoolError, FieldError);

#[derive(Parser)]
#[command(name = "dualpart", version, about = "Vectorize grayscale glyph images into quadratic outlines")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a dual-part glyph to an image; writes a parameter file and a loss trace CSV.
    Fit(FitCmd),
    /// Extract the outline of a fitted glyph as SVG.
    Contour(ContourCmd),
    /// Refine and simplify an SVG outline against a guidance image.
    Refine(RefineCmd),
    /// Anti-aliased raster of an SVG outline or a parameter file.
    Render(RenderCmd),
    /// Compare two images or outlines (L1, s-IoU, SSIM; d_VD for two outlines).
    Eval(EvalCmd),
    /// Warm-up ablation on the ring target, with and without the distance loss.
    AblateUdf(AblateCmd),
    /// Render a synthetic benchmark shape.
    Synth(SynthCmd),
    /// fit, contour and refine several images, one glyph per worker.
    Pipeline(PipelineCmd),
}

#[derive(Args, Clone, Default)]
struct FitFlags {
    /// Number of dual parts.
    #[arg(long)]
    parts: Option<usize>,
    /// Quadratic segments per path.
    #[arg(long)]
    segments: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Adam step size.
    #[arg(long)]
    lr: Option<f64>,
    /// Disable the distance-field warm-up.
    #[arg(long)]
    no_warmup: bool,
    #[arg(long)]
    lambda_p: Option<f64>,
    #[arg(long)]
    lambda_u: Option<f64>,
    /// Fraction of the iterations that include the distance loss.
    #[arg(long)]
    warmup_fraction: Option<f64>,
    /// Side of the fitting grid in pixels.
    #[arg(long)]
    grid_res: Option<usize>,
}

#[derive(Args, Clone, Default)]
struct RefineFlags {
    #[arg(long)]
    steps: Option<usize>,
    /// Adam step size for refinement.
    #[arg(long)]
    refine_lr: Option<f64>,
    #[arg(long)]
    lambda_reg: Option<f64>,
    /// Loops below this area (canvas units²) are removed.
    #[arg(long)]
    prune_area: Option<f64>,
    /// Segments shorter than this (canvas units) are collapsed.
    #[arg(long)]
    short_len: Option<f64>,
    /// Quads whose control angle exceeds this (degrees) become lines.
    #[arg(long)]
    flatten_angle: Option<f64>,
    /// Adjacent lines meeting above this angle (degrees) are merged.
    #[arg(long)]
    join_angle: Option<f64>,
    /// Conic coefficient distance below which adjacent quads are merged.
    #[arg(long)]
    coeff_tol: Option<f64>,
    /// Quads longer than this (canvas units) are split.
    #[arg(long)]
    split_len: Option<f64>,
}

#[derive(Args)]
struct FitCmd {
    input: PathBuf,
    output: PathBuf,
    #[command(flatten)]
    fit: FitFlags,
    /// Input has dark ink on a light background.
    #[arg(long)]
    invert: bool,
    /// Loss trace CSV (default: OUTPUT with a .csv extension).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct ContourCmd {
    input: PathBuf,
    output: PathBuf,
}

#[derive(Args)]
struct RefineCmd {
    input: PathBuf,
    guidance: PathBuf,
    output: PathBuf,
    #[command(flatten)]
    refine: RefineFlags,
    #[arg(long)]
    invert: bool,
}

#[derive(Args)]
struct RenderCmd {
    input: PathBuf,
    output: PathBuf,
    #[arg(long, default_value_t = 256)]
    res: usize,
}

#[derive(Args)]
struct EvalCmd {
    a: PathBuf,
    b: PathBuf,
    /// Comma-separated raster resolutions.
    #[arg(long, value_delimiter = ',')]
    res: Option<Vec<usize>>,
    /// Boundary samples per outline for d_VD.
    #[arg(long)]
    samples: Option<usize>,
    /// Image inputs have dark ink on a light background.
    #[arg(long)]
    invert: bool,
}

#[derive(Args)]
struct AblateCmd {
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SynthCmd {
    /// ring, bar, ell, double_hole or wedge.
    shape: String,
    output: PathBuf,
    #[arg(long, default_value_t = 512)]
    res: usize,
    /// Also write the reference outline as SVG.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineCmd {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    fit: FitFlags,
    #[command(flatten)]
    refine: RefineFlags,
    #[arg(long)]
    invert: bool,
}

fn fit_config(f: &FitFlags, s: &Settings) -> Result<FitConfig, CliError> {
    let d = FitConfig::default();
    let mut c = FitConfig {
        n_parts: s.pick(f.parts, "parts", d.n_parts)?,
        m_segments: s.pick(f.segments, "segments", d.m_segments)?,
        total_iters: s.pick(f.iters, "iters", d.total_iters)?,
        seed: s.pick(f.seed, "seed", d.seed)?,
        step_size: s.pick(f.lr, "lr", d.step_size)?,
        lambda_p: s.pick(f.lambda_p, "lambda_p", d.lambda_p)?,
        lambda_u: s.pick(f.lambda_u, "lambda_u", d.lambda_u)?,
        warmup_fraction: s.pick(f.warmup_fraction, "warmup_fraction", d.warmup_fraction)?,
        grid_res: s.pick(f.grid_res, "grid_res", d.grid_res)?,
        ..d
    };
    if s.switch(f.no_warmup, "no_warmup")? {
        c.lambda_u = 0.0;
        c.warmup_fraction = 0.0;
    }
    c.validate()?;
    Ok(c)
}

fn refine_config(f: &RefineFlags, s: &Settings) -> Result<RefineConfig, CliError> {
    let d = RefineConfig::default();
    let c = RefineConfig {
        steps: s.pick(f.steps, "steps", d.steps)?,
        step_size: s.pick(f.refine_lr, "refine_lr", d.step_size)?,
        lambda_reg: s.pick(f.lambda_reg, "lambda_reg", d.lambda_reg)?,
        prune_area: s.pick(f.prune_area, "prune_area", d.prune_area)?,
        short_len: s.pick(f.short_len, "short_len", d.short_len)?,
        flatten_angle_deg: s.pick(f.flatten_angle, "flatten_angle", d.flatten_angle_deg)?,
        join_line_angle_deg: s.pick(f.join_angle, "join_angle", d.join_line_angle_deg)?,
        join_coeff_tol: s.pick(f.coeff_tol, "coeff_tol", d.join_coeff_tol)?,
        subdivide_len: s.pick(f.split_len, "split_len", d.subdivide_len)?,
        ..d
    };
    c.validate()?;
    Ok(c)
}

fn trace_csv(trace: &FitTrace) -> String {
    let mut s = String::from("iter,l_p,l_u,total,mse\n");
    for r in &trace.records {
        let _ = writeln!(s, "{},{},{},{},{}", r.iter, r.l_p, r.l_u, r.total, r.mse);
    }
    s
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

/// Boundary extraction, retried once on a jittered copy after a degenerate overlap.
fn contour_of(g: &DualPartGlyph) -> Result<Contour, CliError> {
    match extract_contour(g) {
        Err(BoolError::DegenerateOverlap) => {
            eprintln!("note: degenerate overlap; retrying with control points jittered by {RETRY_JITTER:e}");
            Ok(extract_contour(&jitter_glyph(g, RETRY_JITTER, 0))?)
        }
        r => Ok(r?),
    }
}

fn pixel_filter(res: usize) -> Result<PreFilter, CliError> {
    if res == 0 {
        return Err(FieldError::BadResolution.into());
    }
    Ok(PreFilter::new(2.0 / res as f64)?)
}

enum Input {
    Image(GrayImage),
    Glyph(DualPartGlyph),
    Outline(Contour),
}

impl Input {
    fn load(path: &Path, invert: bool) -> Result<Input, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        if bytes.starts_with(b"P5") || bytes.starts_with(b"\x89PNG") {
            return Ok(Input::Image(io::read_image(path, invert)?));
        }
        let text = String::from_utf8_lossy(&bytes);
        if text.starts_with("dualpart v1") {
            Ok(Input::Glyph(io::parse_params(&text)?))
        } else if text.contains("<svg") {
            Ok(Input::Outline(io::parse_svg(&text)?))
        } else {
            Err(CliError::io(format!("{}: not a PGM/PNG image, SVG outline or dualpart parameter file", path.display())))
        }
    }

    fn raster(&self, res: usize) -> Result<GrayImage, CliError> {
        let filter = pixel_filter(res)?;
        Ok(match self {
            Input::Image(img) => img.resample(res, res),
            Input::Glyph(g) => rasterize_soft(g, &SampleGrid::unit(res), filter)?,
            Input::Outline(c) => render_contour_soft(c, res, filter)?,
        })
    }

    fn outline(&self) -> Result<Option<Contour>, CliError> {
        Ok(match self {
            Input::Image(_) => None,
            Input::Glyph(g) => Some(contour_of(g)?),
            Input::Outline(c) => Some(c.clone()),
        })
    }
}

fn put_commands(r: &mut Report, prefix: &str, c: &Contour) {
    let n = command_count(c);
    r.put(format!("{prefix}_moves"), n.moves);
    r.put(format!("{prefix}_lines"), n.lines);
    r.put(format!("{prefix}_quads"), n.quads);
    r.put(format!("{prefix}_total"), n.total);
}

fn cmd_fit(a: &FitCmd, s: &Settings) -> Result<Report, CliError> {
    let cfg = fit_config(&a.fit, s)?;
    let target = io::read_image(&a.input, s.switch(a.invert, "invert")?)?;
    let t0 = Instant::now();
    let (g, trace) = fit_glyph::<f64>(&target, &cfg)?;
    let elapsed = t0.elapsed().as_secs_f64();
    io::write_params(&g, &a.output)?;
    let trace_path = a.trace.clone().unwrap_or_else(|| a.output.with_extension("csv"));
    write_text(&trace_path, &trace_csv(&trace))?;
    let mut r = Report::new();
    r.put("parts", cfg.n_parts);
    r.put("segments", cfg.m_segments);
    r.put("iters", cfg.total_iters);
    r.put("best_iter", trace.best_iter);
    r.num("l_p", trace.best_l_p);
    r.num("mse", trace.best_mse);
    r.put("trace", trace_path.display());
    r.num("seconds", elapsed);
    Ok(r)
}

fn cmd_contour(a: &ContourCmd) -> Result<Report, CliError> {
    let g = io::read_params(&a.input)?;
    let c = contour_of(&g)?;
    io::write_svg(&c, &a.output)?;
    let mut r = Report::new();
    r.put("loops", c.loops.len());
    r.put("segments", c.segment_count());
    r.num("area", c.area());
    put_commands(&mut r, "commands", &c);
    Ok(r)
}

struct Refined {
    contour: Contour,
    l1_before: f64,
    l1_after: f64,
}

fn refine_against(c: &Contour, guide: &GrayImage, cfg: &RefineConfig, r: &mut Report, prefix: &str) -> Result<Refined, CliError> {
    let res = cfg.resolution();
    let guide_res = guide.resample(res, res);
    let filter = pixel_filter(res)?;
    let l1_before = l1(&render_contour_soft(c, res, filter)?, &guide_res)?;
    let (out, trace) = refine(c, guide, cfg)?;
    let l1_after = l1(&render_contour_soft(&out, res, filter)?, &guide_res)?;
    for w in &trace.warnings {
        eprintln!("warning: {w}");
    }
    r.num(format!("{prefix}l1_before"), l1_before);
    r.num(format!("{prefix}l1_after"), l1_after);
    put_commands(r, &format!("{prefix}commands_before"), c);
    put_commands(r, &format!("{prefix}commands_after"), &out);
    r.put(format!("{prefix}best_step"), trace.best_step.map_or("input".to_string(), |s| s.to_string()));
    for (name, kind) in [
        ("pruned", EditKind::Prune),
        ("collapsed", EditKind::Collapse),
        ("flattened", EditKind::Flatten),
        ("subdivided", EditKind::Subdivide),
        ("joined_lines", EditKind::JoinLines),
        ("joined_quads", EditKind::JoinQuads),
        ("loops_removed", EditKind::LoopRemoved),
    ] {
        r.put(format!("{prefix}{name}"), trace.count(kind));
    }
    Ok(Refined { contour: out, l1_before, l1_after })
}

fn cmd_refine(a: &RefineCmd, s: &Settings) -> Result<Report, CliError> {
    let cfg = refine_config(&a.refine, s)?;
    let c = io::read_svg(&a.input)?;
    let guide = io::read_image(&a.guidance, s.switch(a.invert, "invert")?)?;
    let mut r = Report::new();
    let out = refine_against(&c, &guide, &cfg, &mut r, "")?;
    io::write_svg(&out.contour, &a.output)?;
    Ok(r)
}

fn cmd_render(a: &RenderCmd) -> Result<Report, CliError> {
    let input = Input::load(&a.input, false)?;
    let img = input.raster(a.res)?;
    io::write_image(&img, &a.output)?;
    let mut r = Report::new();
    r.put("res", a.res);
    r.num("ink", img.mean());
    Ok(r)
}

fn cmd_eval(a: &EvalCmd, s: &Settings) -> Result<Report, CliError> {
    let invert = s.switch(a.invert, "invert")?;
    let resolutions = match &a.res {
        Some(v) => v.clone(),
        None => match s.get::<String>("res")? {
            Some(list) => list
                .split(',')
                .map(|t| t.trim().parse().map_err(|_| CliError::usage(format!("bad resolution '{t}'"))))
                .collect::<Result<_, _>>()?,
            None => vec![128, 256, 512],
        },
    };
    let samples = s.pick(a.samples, "samples", 100usize)?;
    let ia = Input::load(&a.a, invert)?;
    let ib = Input::load(&a.b, invert)?;
    let mut r = Report::new();
    r.row(vec!["res".into(), "L1".into(), "s-IoU".into(), "SSIM".into()]);
    for &res in &resolutions {
        let (ra, rb) = (ia.raster(res)?, ib.raster(res)?);
        let (e, iou, ss) = (l1(&ra, &rb)?, s_iou(&ra, &rb)?, ssim(&ra, &rb)?);
        r.num(format!("l1@{res}"), e);
        r.num(format!("s_iou@{res}"), iou);
        r.num(format!("ssim@{res}"), ss);
        r.row(vec![res.to_string(), format!("{e:.6}"), format!("{iou:.6}"), format!("{ss:.6}")]);
    }
    match (ia.outline()?, ib.outline()?) {
        (Some(ca), Some(cb)) => {
            let d = d_vd(&ca, &cb, samples);
            r.num("d_vd", d);
            put_commands(&mut r, "commands_a", &ca);
            put_commands(&mut r, "commands_b", &cb);
            r.row(vec![]);
            r.row(vec!["d_VD".into(), format!("{d:.6}")]);
            r.row(vec!["commands".into(), command_count(&ca).total.to_string(), command_count(&cb).total.to_string()]);
        }
        _ => eprintln!("note: d_VD and command counts omitted (needs two vector inputs)"),
    }
    Ok(r)
}

fn cmd_ablate(a: &AblateCmd, s: &Settings) -> Result<Report, CliError> {
    let seed = s.pick(a.seed, "seed", 0u64)?;
    create_dir(&a.out_dir)?;
    let (target, _) = io::synth_target(SynthShape::Ring, 128)?;
    io::write_image(&target, a.out_dir.join("ring_target.png"))?;
    let mut r = Report::new();
    let t0 = Instant::now();
    for (name, warmup) in [("with_warmup", true), ("without_warmup", false)] {
        let run = run_ablation::<f64>(&target, warmup, seed)?;
        write_text(&a.out_dir.join(format!("{name}.csv")), &trace_csv(&run.trace))?;
        for (k, g) in &run.snapshots {
            match contour_of(g) {
                Ok(c) => io::write_svg(&c, a.out_dir.join(format!("{name}_iter{k:03}.svg")))?,
                Err(e) => eprintln!("warning: {name} snapshot at iteration {k} has no outline: {}", e.msg),
            }
        }
        r.num(format!("{name}_final_mse"), run.final_mse);
    }
    r.num("seconds", t0.elapsed().as_secs_f64());
    Ok(r)
}

fn cmd_synth(a: &SynthCmd) -> Result<Report, CliError> {
    let shape: SynthShape = a.shape.parse()?;
    let (img, c) = io::synth_target(shape, a.res)?;
    io::write_image(&img, &a.output)?;
    if let Some(svg) = &a.svg {
        io::write_svg(&c, svg)?;
    }
    let mut r = Report::new();
    r.put("shape", shape);
    r.put("res", a.res);
    r.num("ink", img.mean());
    Ok(r)
}

fn cmd_pipeline(a: &PipelineCmd, s: &Settings) -> Result<Report, CliError> {
    let fit_cfg = fit_config(&a.fit, s)?;
    let refine_cfg = refine_config(&a.refine, s)?;
    let invert = s.switch(a.invert, "invert")?;
    create_dir(&a.out_dir)?;
    let mut stems: Vec<String> = a.inputs.iter().map(|p| p.file_stem().map_or("glyph".into(), |s| s.to_string_lossy().into_owned())).collect();
    for i in 0..stems.len() {
        if stems[..i].contains(&stems[i]) {
            stems[i] = format!("{}_{i}", stems[i]);
        }
    }
    let reports: Vec<Result<Report, CliError>> = a
        .inputs
        .par_iter()
        .zip(&stems)
        .map(|(path, stem)| {
            let t0 = Instant::now();
            let target = io::read_image(path, invert)?;
            let (g, trace) = fit_glyph::<f64>(&target, &fit_cfg)?;
            io::write_params(&g, a.out_dir.join(format!("{stem}.params")))?;
            write_text(&a.out_dir.join(format!("{stem}.csv")), &trace_csv(&trace))?;
            let c = contour_of(&g)?;
            io::write_svg(&c, a.out_dir.join(format!("{stem}.contour.svg")))?;
            let mut r = Report::new();
            let prefix = format!("{stem}.");
            r.num(format!("{prefix}fit_mse"), trace.best_mse);
            let refined = refine_against(&c, &target, &refine_cfg, &mut r, &prefix)?;
            io::write_svg(&refined.contour, a.out_dir.join(format!("{stem}.svg")))?;
            r.num(format!("{prefix}seconds"), t0.elapsed().as_secs_f64());
            r.row(vec![stem.clone(), format!("{:.6}", refined.l1_before), format!("{:.6}", refined.l1_after), command_count(&refined.contour).total.to_string()]);
            Ok(r)
        })
        .collect();
    let mut all = Report::new();
    all.row(vec!["glyph".into(), "L1 before".into(), "L1 after".into(), "commands".into()]);
    for rep in reports {
        all.extend(rep?);
    }
    Ok(all)
}

fn run(cli: Cli) -> Result<Report, CliError> {
    if let Some(k) = cli.jobs {
        if k == 0 {
            return Err(CliError::usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global().map_err(|e| CliError::usage(e.to_string()))?;
    }
    let settings = Settings::from_env()?;
    match &cli.command {
        Command::Fit(a) => cmd_fit(a, &settings),
        Command::Contour(a) => cmd_contour(a),
        Command::Refine(a) => cmd_refine(a, &settings),
        Command::Render(a) => cmd_render(a),
        Command::Eval(a) => cmd_eval(a, &settings),
        Command::AblateUdf(a) => cmd_ablate(a, &settings),
        Command::Synth(a) => cmd_synth(a),
        Command::Pipeline(a) => cmd_pipeline(a, &settings),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(report) => {
            report.emit();
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}
