use std::collections::HashMap;
use std::path::Path;
use std::process::{Command, Output};

fn dualpart(args: &[&str], config: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dualpart"));
    cmd.args(args).env_remove("DUALPART_CONFIG");
    if let Some(c) = config {
        cmd.env("DUALPART_CONFIG", c);
    }
    cmd.output().expect("binary runs")
}

fn ok(args: &[&str]) -> HashMap<String, String> {
    let out = dualpart(args, None);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    parse(&out)
}

fn parse(out: &Output) -> HashMap<String, String> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .filter_map(|l| l.split_once('\t'))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("ring.pgm");
    ok(&["synth", "ring", s(&img), "--res", "32"]);
    let out = dir.path().join("g.params");

    assert_eq!(code(&dualpart(&["fit"], None)), 1);
    assert_eq!(code(&dualpart(&["synth", "blob", s(&img)], None)), 1);
    assert_eq!(code(&dualpart(&["fit", s(&img), s(&out), "--parts", "0"], None)), 1);
    assert_eq!(code(&dualpart(&["--jobs", "0", "synth", "ring", s(&img)], None)), 1);
    assert_eq!(code(&dualpart(&["fit", s(&dir.path().join("missing.pgm")), s(&out)], None)), 2);

    let junk = dir.path().join("junk.pgm");
    std::fs::write(&junk, b"not an image").unwrap();
    assert_eq!(code(&dualpart(&["eval", s(&junk), s(&img)], None)), 2);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("bar.pgm");
    ok(&["synth", "bar", s(&img), "--res", "32"]);
    let cfg = dir.path().join("dualpart.conf");
    std::fs::write(&cfg, "# small run\niters = 4\ngrid-res = 32\n").unwrap();
    let out = dir.path().join("g.params");

    let from_file = parse(&dualpart(&["fit", s(&img), s(&out)], Some(&cfg)));
    assert_eq!(from_file["iters"], "4");
    let flagged = parse(&dualpart(&["fit", s(&img), s(&out), "--iters", "6"], Some(&cfg)));
    assert_eq!(flagged["iters"], "6");

    std::fs::write(&cfg, "iterations = 4\n").unwrap();
    assert_eq!(code(&dualpart(&["fit", s(&img), s(&out)], Some(&cfg))), 1);
}

#[test]
fn fit_contour_refine_chain() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    ok(&["synth", "ring", s(&p("ring.png")), "--res", "64"]);
    let fit = ok(&["fit", s(&p("ring.png")), s(&p("g.params")), "--iters", "30", "--grid-res", "64"]);
    assert_eq!(fit["parts"], "6");
    assert_eq!(fit["segments"], "4");
    let params = std::fs::read_to_string(p("g.params")).unwrap();
    assert_eq!(params.lines().next(), Some("dualpart v1 N=6 M=4"));
    assert!(p("g.csv").exists());

    ok(&["contour", s(&p("g.params")), s(&p("g.svg"))]);
    let refined = ok(&["refine", s(&p("g.svg")), s(&p("ring.png")), s(&p("r.svg")), "--steps", "0"]);
    assert_eq!(refined["l1_before"], refined["l1_after"]);
    assert_eq!(std::fs::read(p("g.svg")).unwrap(), std::fs::read(p("r.svg")).unwrap());

    ok(&["render", s(&p("g.params")), s(&p("g.pgm")), "--res", "48"]);
    let bytes = std::fs::read(p("g.pgm")).unwrap();
    assert!(bytes.starts_with(b"P5\n48 48\n255\n"));
}

#[test]
fn eval_reports_by_input_kind() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    ok(&["synth", "ell", s(&p("ell.png")), "--res", "64", "--svg", s(&p("ell.svg"))]);

    let same = ok(&["eval", s(&p("ell.svg")), s(&p("ell.svg")), "--res", "32,64"]);
    assert_eq!(same["l1@32"], "0.000000");
    assert_eq!(same["s_iou@64"], "1.000000");
    assert_eq!(same["d_vd"], "0.000000");

    let mixed = ok(&["eval", s(&p("ell.svg")), s(&p("ell.png")), "--res", "64"]);
    assert!(!mixed.contains_key("d_vd"));
    assert!(mixed["s_iou@64"].parse::<f64>().unwrap() > 0.9);
}

#[test]
fn square_minus_square_is_two_loops() {
    let dir = tempfile::tempdir().unwrap();
    let square = |h: f64| {
        let pts = [(-h, -h), (0.0, -h), (h, -h), (h, 0.0), (h, h), (0.0, h), (-h, h), (-h, 0.0)];
        pts.iter().map(|(x, y)| format!("{x:e} {y:e}")).collect::<Vec<_>>().join(" ")
    };
    let params = dir.path().join("sq.params");
    std::fs::write(&params, format!("dualpart v1 N=1 M=4\nP 0 {}\nQ 0 {}\n", square(0.6), square(0.3))).unwrap();
    let svg = dir.path().join("sq.svg");
    let r = ok(&["contour", s(&params), s(&svg)]);
    assert_eq!(r["loops"], "2");
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches('M').count(), 2);
    let area: f64 = r["area"].parse().unwrap();
    assert!((area - (1.44 - 0.36)).abs() < 1e-6, "{area}");
}

#[test]
fn ablation_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let ra = ok(&["ablate-udf", s(&a), "--seed", "5"]);
    ok(&["--jobs", "2", "ablate-udf", s(&b), "--seed", "5"]);
    for f in ["with_warmup.csv", "without_warmup.csv", "with_warmup_iter200.svg", "ring_target.png"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let with: f64 = ra["with_warmup_final_mse"].parse().unwrap();
    let without: f64 = ra["without_warmup_final_mse"].parse().unwrap();
    assert!(with < without);
}

#[test]
fn pipeline_over_two_images() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    ok(&["synth", "bar", s(&p("bar.pgm")), "--res", "64"]);
    ok(&["synth", "wedge", s(&p("wedge.pgm")), "--res", "64"]);
    let out = p("out");
    let r = ok(&["pipeline", s(&p("bar.pgm")), s(&p("wedge.pgm")), "--out-dir", s(&out), "--iters", "20", "--grid-res", "64", "--steps", "5"]);
    for name in ["bar", "wedge"] {
        for ext in ["params", "csv", "contour.svg", "svg"] {
            assert!(out.join(format!("{name}.{ext}")).exists(), "{name}.{ext}");
        }
        let before: f64 = r[&format!("{name}.l1_before")].parse().unwrap();
        let after: f64 = r[&format!("{name}.l1_after")].parse().unwrap();
        assert!(after <= before);
    }
}
