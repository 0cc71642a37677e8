//! Image, SVG and parameter-file I/O, plus the synthetic target shapes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::boolops::{contour_raster, Contour, Loop, Segment};
use crate::field::{FieldError, GrayImage, SampleGrid};
use crate::geom::{ClosedPath, DualPart, DualPartGlyph, GeomError, Point, QuadBezier};

/// Side of the SVG canvas.
pub const CANVAS_SIDE: f64 = 256.0;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
    #[error("unsupported SVG path command '{0}' (only absolute M, L, Q, Z are accepted)")]
    UnsupportedCommand(char),
    #[error("SVG: {0}")]
    Svg(String),
    #[error("parameter file line {line}: {msg}")]
    Params { line: usize, msg: String },
    #[error("unknown synthetic shape '{0}' (expected ring, bar, ell, double_hole or wedge)")]
    UnknownShape(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, IoError> {
    fs::read(path).map_err(|source| IoError::File { path: path.display().to_string(), source })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    fs::write(path, bytes).map_err(|source| IoError::File { path: path.display().to_string(), source })
}

fn format_err(path: &Path, msg: impl Into<String>) -> IoError {
    IoError::Format { path: path.display().to_string(), msg: msg.into() }
}

/// Parses a binary PGM (P5, 8-bit).
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage, String> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err("not a binary PGM (missing P5 magic)".into());
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err("truncated header".into()),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err("malformed header: expected a decimal number".into());
        }
        *field = std::str::from_utf8(&bytes[start..pos]).unwrap().parse().map_err(|_| "header number out of range")?;
    }
    let [w, h, maxval] = fields;
    if w == 0 || h == 0 {
        return Err("image dimensions must be positive".into());
    }
    if maxval == 0 || maxval > 255 {
        return Err(format!("unsupported maxval {maxval} (8-bit only)"));
    }
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err("malformed header: missing separator before pixel data".into());
    }
    pos += 1;
    let need = w * h;
    if bytes.len() - pos < need {
        return Err(format!("truncated pixel data: {} of {need} bytes", bytes.len() - pos));
    }
    let data = bytes[pos..pos + need].iter().map(|&b| (b as f64 / maxval as f64).min(1.0)).collect();
    GrayImage::new(w, h, data).map_err(|e| e.to_string())
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.data().iter().map(|&v| quantize(v)));
    out
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Reads a PGM (P5) or 8-bit grayscale PNG into `[0, 1]`; `invert` flips
/// polarity for dark ink on a light background.
pub fn read_image(path: impl AsRef<Path>, invert: bool) -> Result<GrayImage, IoError> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let img = if bytes.starts_with(b"P5") {
        decode_pgm(&bytes).map_err(|m| format_err(path, m))?
    } else if bytes.starts_with(b"\x89PNG") {
        let dynimg = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
            .map_err(|e| format_err(path, format!("PNG decode failed: {e}")))?;
        let image::DynamicImage::ImageLuma8(buf) = dynimg else {
            return Err(format_err(path, format!("expected 8-bit grayscale PNG, found {:?}", dynimg.color())));
        };
        let (w, h) = (buf.width() as usize, buf.height() as usize);
        GrayImage::new(w, h, buf.into_raw().into_iter().map(|b| b as f64 / 255.0).collect())?
    } else {
        return Err(format_err(path, "unrecognized image format (expected PGM P5 or PNG)"));
    };
    Ok(if invert { img.inverted() } else { img })
}

/// Writes PNG for a `.png` extension and PGM otherwise.
pub fn write_image(img: &GrayImage, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let is_png = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if is_png {
        let buf: image::GrayImage =
            image::ImageBuffer::from_raw(img.width() as u32, img.height() as u32, img.data().iter().map(|&v| quantize(v)).collect())
                .expect("buffer length matches dimensions");
        let mut bytes = Vec::new();
        buf.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
            .map_err(|e| format_err(path, format!("PNG encode failed: {e}")))?;
        write_bytes(path, &bytes)
    } else {
        write_bytes(path, &encode_pgm(img))
    }
}

fn coord(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

/// SVG document for a contour given in the `[-1,1]^2` y-up frame.
pub fn svg_string(c: &Contour<f64>) -> String {
    let canvas = c.to_canvas(CANVAS_SIDE);
    let pt = |p: Point<f64>| format!("{} {}", coord(p.x), coord(p.y));
    let mut d = String::new();
    for lp in canvas.loops.iter().filter(|l| !l.is_empty()) {
        if !d.is_empty() {
            d.push(' ');
        }
        write!(d, "M {}", pt(lp.segments[0].start())).unwrap();
        for s in &lp.segments {
            match s {
                Segment::Line(_, e) => write!(d, " L {}", pt(*e)).unwrap(),
                Segment::Quad(q) => write!(d, " Q {} {}", pt(q.b), pt(q.c)).unwrap(),
            }
        }
        d.push_str(" Z");
    }
    let side = CANVAS_SIDE;
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <!-- canvas mapping: x_svg = (x + 1) * {h}, y_svg = (1 - y) * {h} -->\n\
         <svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {side} {side}\" width=\"{side}\" height=\"{side}\">\n\
         <path fill=\"black\" fill-rule=\"nonzero\" d=\"{d}\"/>\n\
         </svg>\n",
        h = side / 2.0,
    )
}

pub fn write_svg(c: &Contour<f64>, path: impl AsRef<Path>) -> Result<(), IoError> {
    write_bytes(path.as_ref(), svg_string(c).as_bytes())
}

pub fn read_svg(path: impl AsRef<Path>) -> Result<Contour<f64>, IoError> {
    let path = path.as_ref();
    let text = String::from_utf8(read_bytes(path)?).map_err(|_| format_err(path, "SVG is not UTF-8"))?;
    parse_svg(&text)
}

fn attr<'a>(tag: &'a str, name: &str) -> Option<&'a str> {
    let key = format!(" {name}=");
    let start = tag.find(&key)? + key.len();
    let quote = tag[start..].chars().next()?;
    if quote != '"' && quote != '\'' {
        return None;
    }
    let rest = &tag[start + 1..];
    Some(&rest[..rest.find(quote)?])
}

/// Parses the SVG subset written by [`write_svg`] back into the `[-1,1]^2` frame.
pub fn parse_svg(text: &str) -> Result<Contour<f64>, IoError> {
    let side = match text.find("<svg").and_then(|i| attr(&text[i..text[i..].find('>').map_or(text.len(), |j| i + j)], "viewBox")) {
        Some(vb) => {
            let v: Vec<f64> = vb.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).filter_map(|s| s.parse().ok()).collect();
            if v.len() != 4 || v[0] != 0.0 || v[1] != 0.0 || v[2] <= 0.0 || v[2] != v[3] {
                return Err(IoError::Svg(format!("viewBox must be \"0 0 S S\", got \"{vb}\"")));
            }
            v[2]
        }
        None => CANVAS_SIDE,
    };
    let mut loops = Vec::new();
    let mut rest = text;
    while let Some(i) = rest.find("<path") {
        let end = rest[i..].find('>').map(|j| i + j).ok_or_else(|| IoError::Svg("unterminated <path> element".into()))?;
        let tag = &rest[i..end];
        let d = attr(tag, "d").ok_or_else(|| IoError::Svg("<path> without d attribute".into()))?;
        loops.extend(parse_path_data(d)?);
        rest = &rest[end..];
    }
    Ok(Contour::new(loops).from_canvas(side))
}

enum Tok {
    Cmd(char),
    Num(f64),
}

fn tokenize(d: &str) -> Result<Vec<Tok>, IoError> {
    let mut toks = Vec::new();
    let chars: Vec<char> = d.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        if ch.is_whitespace() || ch == ',' {
            i += 1;
        } else if ch.is_ascii_alphabetic() && ch != 'e' && ch != 'E' {
            if !matches!(ch, 'M' | 'L' | 'Q' | 'Z') {
                return Err(IoError::UnsupportedCommand(ch));
            }
            toks.push(Tok::Cmd(ch));
            i += 1;
        } else {
            let start = i;
            i += 1;
            while i < chars.len() {
                let c = chars[i];
                let prev = chars[i - 1];
                if c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || ((c == '-' || c == '+') && (prev == 'e' || prev == 'E')) {
                    i += 1;
                } else {
                    break;
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v: f64 = s.parse().map_err(|_| IoError::Svg(format!("bad number '{s}'")))?;
            if !v.is_finite() {
                return Err(IoError::Svg(format!("non-finite coordinate '{s}'")));
            }
            toks.push(Tok::Num(v));
        }
    }
    Ok(toks)
}

fn parse_path_data(d: &str) -> Result<Vec<Loop<f64>>, IoError> {
    let toks = tokenize(d)?;
    let mut loops = Vec::new();
    let mut segs: Vec<Segment<f64>> = Vec::new();
    let mut start: Option<Point<f64>> = None;
    let mut cur = Point::zero();
    let mut cmd = None;
    let mut i = 0;
    let num = |i: usize| -> Result<f64, IoError> {
        match toks.get(i) {
            Some(Tok::Num(v)) => Ok(*v),
            _ => Err(IoError::Svg("missing coordinate".into())),
        }
    };
    let close = |segs: &mut Vec<Segment<f64>>, start: Point<f64>, cur: Point<f64>, loops: &mut Vec<Loop<f64>>| {
        if segs.is_empty() {
            return;
        }
        if cur != start {
            segs.push(Segment::Line(cur, start));
        }
        loops.push(Loop { segments: std::mem::take(segs) });
    };
    while i < toks.len() {
        if let Tok::Cmd(c) = toks[i] {
            cmd = Some(c);
            i += 1;
            if c == 'Z' {
                let s = start.ok_or_else(|| IoError::Svg("Z before M".into()))?;
                close(&mut segs, s, cur, &mut loops);
                cur = s;
                start = None;
                cmd = None;
            }
            continue;
        }
        match cmd {
            Some('M') => {
                if let Some(s) = start {
                    close(&mut segs, s, cur, &mut loops);
                }
                cur = Point::new(num(i)?, num(i + 1)?);
                start = Some(cur);
                i += 2;
                // further pairs after M are implicit line-tos
                cmd = Some('L');
            }
            Some('L') => {
                start.ok_or_else(|| IoError::Svg("L before M".into()))?;
                let p = Point::new(num(i)?, num(i + 1)?);
                segs.push(Segment::Line(cur, p));
                cur = p;
                i += 2;
            }
            Some('Q') => {
                start.ok_or_else(|| IoError::Svg("Q before M".into()))?;
                let b = Point::new(num(i)?, num(i + 1)?);
                let c = Point::new(num(i + 2)?, num(i + 3)?);
                segs.push(Segment::Quad(QuadBezier::new(cur, b, c)));
                cur = c;
                i += 4;
            }
            _ => return Err(IoError::Svg("coordinate without a command".into())),
        }
    }
    if let Some(s) = start {
        close(&mut segs, s, cur, &mut loops);
    }
    Ok(loops)
}

/// Text form of a dual-part glyph: a `dualpart v1 N=<n> M=<m>` header, then
/// one `P <i>` / `Q <i>` line per path with 2M `x y` pairs at 17 significant digits.
pub fn params_string(g: &DualPartGlyph<f64>) -> String {
    let mut out = format!("dualpart v1 N={} M={}\n", g.n(), g.m());
    for (i, part) in g.parts().iter().enumerate() {
        for (tag, path) in [('P', &part.positive), ('Q', &part.negative)] {
            write!(out, "{tag} {i}").unwrap();
            for p in path.ctrl() {
                write!(out, " {:.16e} {:.16e}", p.x, p.y).unwrap();
            }
            out.push('\n');
        }
    }
    out
}

pub fn write_params(g: &DualPartGlyph<f64>, path: impl AsRef<Path>) -> Result<(), IoError> {
    write_bytes(path.as_ref(), params_string(g).as_bytes())
}

pub fn parse_params(text: &str) -> Result<DualPartGlyph<f64>, IoError> {
    let err = |line: usize, msg: String| IoError::Params { line, msg };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 4 || h[0] != "dualpart" || h[1] != "v1" {
        return Err(err(1, format!("expected header 'dualpart v1 N=<n> M=<m>', got '{header}'")));
    }
    let field = |s: &str, key: &str| -> Result<usize, IoError> {
        s.strip_prefix(key).and_then(|v| v.parse().ok()).ok_or_else(|| err(1, format!("bad header field '{s}'")))
    };
    let n = field(h[2], "N=")?;
    let m = field(h[3], "M=")?;
    if n == 0 || m < 2 {
        return Err(err(1, format!("need N >= 1 and M >= 2, got N={n} M={m}")));
    }
    let mut paths: Vec<Option<ClosedPath<f64>>> = vec![None; 2 * n];
    for (idx, line) in lines {
        let lineno = idx + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 + 4 * m {
            return Err(err(lineno, format!("expected {} fields, got {}", 2 + 4 * m, toks.len())));
        }
        let neg = match toks[0] {
            "P" => 0,
            "Q" => 1,
            other => return Err(err(lineno, format!("expected 'P' or 'Q', got '{other}'"))),
        };
        let part: usize = toks[1].parse().map_err(|_| err(lineno, format!("bad part index '{}'", toks[1])))?;
        if part >= n {
            return Err(err(lineno, format!("part index {part} out of range for N={n}")));
        }
        let vals = toks[2..]
            .iter()
            .map(|t| t.parse::<f64>().map_err(|_| err(lineno, format!("bad number '{t}'"))))
            .collect::<Result<Vec<_>, _>>()?;
        let ctrl = vals.chunks(2).map(|c| Point::new(c[0], c[1])).collect();
        let slot = &mut paths[2 * part + neg];
        if slot.is_some() {
            return Err(err(lineno, format!("duplicate path {} {part}", toks[0])));
        }
        *slot = Some(ClosedPath::new(ctrl)?);
    }
    let mut parts = Vec::with_capacity(n);
    let mut it = paths.into_iter().enumerate();
    while let (Some((i, p)), Some((_, q))) = (it.next(), it.next()) {
        let missing = |tag: char| err(0, format!("missing path {tag} {}", i / 2));
        parts.push(DualPart { positive: p.ok_or_else(|| missing('P'))?, negative: q.ok_or_else(|| missing('Q'))? });
    }
    Ok(DualPartGlyph::new(parts)?)
}

pub fn read_params(path: impl AsRef<Path>) -> Result<DualPartGlyph<f64>, IoError> {
    let path = path.as_ref();
    let text = String::from_utf8(read_bytes(path)?).map_err(|_| format_err(path, "parameter file is not UTF-8"))?;
    parse_params(&text)
}

/// Procedural benchmark glyphs with known outlines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SynthShape {
    Ring,
    Bar,
    Ell,
    DoubleHole,
    Wedge,
}

impl SynthShape {
    pub const ALL: [SynthShape; 5] = [SynthShape::Ring, SynthShape::Bar, SynthShape::Ell, SynthShape::DoubleHole, SynthShape::Wedge];

    pub fn name(self) -> &'static str {
        match self {
            SynthShape::Ring => "ring",
            SynthShape::Bar => "bar",
            SynthShape::Ell => "ell",
            SynthShape::DoubleHole => "double_hole",
            SynthShape::Wedge => "wedge",
        }
    }

    /// Outline in the `[-1,1]^2` frame, interior on the left.
    pub fn contour(self) -> Contour<f64> {
        let p = Point::new;
        match self {
            SynthShape::Ring => Contour::new(vec![circle(p(0.0, 0.0), RING_OUTER, true), circle(p(0.0, 0.0), RING_INNER, false)]),
            SynthShape::Bar => Contour::new(vec![polygon(&[p(-0.25, -0.7), p(0.25, -0.7), p(0.25, 0.7), p(-0.25, 0.7)])]),
            SynthShape::Ell => Contour::new(vec![polygon(&[
                p(-0.55, -0.7),
                p(0.55, -0.7),
                p(0.55, -0.35),
                p(-0.2, -0.35),
                p(-0.2, 0.75),
                p(-0.55, 0.75),
            ])]),
            SynthShape::DoubleHole => Contour::new(vec![
                polygon(&[p(-0.55, -0.8), p(0.55, -0.8), p(0.55, 0.8), p(-0.55, 0.8)]),
                circle(p(0.0, 0.38), 0.25, false),
                circle(p(0.0, -0.38), 0.25, false),
            ]),
            SynthShape::Wedge => Contour::new(vec![polygon(&[p(-0.7, -0.7), p(0.7, -0.7), p(0.0, 0.75)])]),
        }
    }
}

impl FromStr for SynthShape {
    type Err = IoError;

    fn from_str(s: &str) -> Result<Self, IoError> {
        SynthShape::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| IoError::UnknownShape(s.to_string()))
    }
}

impl std::fmt::Display for SynthShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub const RING_OUTER: f64 = 0.72;
pub const RING_INNER: f64 = 0.42;
/// Sub-samples per pixel side when rendering synthetic targets.
pub const SYNTH_SUPERSAMPLE: usize = 8;

fn circle(center: Point<f64>, r: f64, ccw: bool) -> Loop<f64> {
    let path = ClosedPath::circle(center, r, 8);
    let lp = Loop { segments: path.segments().map(Segment::Quad).collect() };
    if ccw {
        lp
    } else {
        lp.reversed()
    }
}

fn polygon(corners: &[Point<f64>]) -> Loop<f64> {
    let n = corners.len();
    Loop { segments: (0..n).map(|i| Segment::Line(corners[i], corners[(i + 1) % n])).collect() }
}

/// Target image (8× supersampled coverage) and its reference outline.
pub fn synth_target(shape: SynthShape, res: usize) -> Result<(GrayImage, Contour<f64>), IoError> {
    if res == 0 {
        return Err(FieldError::BadResolution.into());
    }
    let c = shape.contour();
    let img = contour_raster(&c, &SampleGrid::unit(res), SYNTH_SUPERSAMPLE);
    Ok((img, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::command_count;

    #[test]
    fn pgm_bytes() {
        let img = decode_pgm(b"P5\n2 2\n255\n\x00\xff\xff\x00").unwrap();
        assert_eq!(img.data(), &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(encode_pgm(&img), b"P5\n2 2\n255\n\x00\xff\xff\x00");
    }

    #[test]
    fn pgm_with_comment() {
        let img = decode_pgm(b"P5 # made by hand\n1 1 # size\n255\n\x80").unwrap();
        assert!((img.data()[0] - 128.0 / 255.0).abs() < 1e-15);
    }

    #[test]
    fn pgm_errors() {
        assert!(decode_pgm(b"P5\n2 2\n255\n\x00\xff\xff").unwrap_err().contains("truncated"));
        assert!(decode_pgm(b"P6\n1 1\n255\n\x00").is_err());
        assert!(decode_pgm(b"P5\n1 1\n65535\n\x00\x00").unwrap_err().contains("maxval"));
        assert!(decode_pgm(b"P5\nx 1\n255\n\x00").is_err());
    }

    #[test]
    fn svg_square_path_data() {
        let c = SynthShape::Bar.contour();
        let svg = svg_string(&c);
        assert!(svg.contains("d=\"M 96.000000 217.600000 L 160.000000 217.600000 L 160.000000 38.400000 L 96.000000 38.400000 L 96.000000 217.600000 Z\""), "{svg}");
        let back = parse_svg(&svg).unwrap();
        assert_eq!(command_count(&back).lines, 4);
    }

    #[test]
    fn svg_rejects_other_commands() {
        let svg = "<svg viewBox=\"0 0 256 256\"><path d=\"M 0 0 C 1 1 2 2 3 3 Z\"/></svg>";
        assert!(matches!(parse_svg(svg), Err(IoError::UnsupportedCommand('C'))));
        let rel = "<svg viewBox=\"0 0 256 256\"><path d=\"M 0 0 l 1 1 Z\"/></svg>";
        assert!(matches!(parse_svg(rel), Err(IoError::UnsupportedCommand('l'))));
    }

    #[test]
    fn params_round_trip_bit_exact() {
        let g = DualPartGlyph::new(vec![DualPart {
            positive: ClosedPath::circle(Point::new(0.1, -0.2), 0.3, 3),
            negative: ClosedPath::circle(Point::new(0.1 / 3.0, 0.7), 1e-3, 3),
        }])
        .unwrap();
        let text = params_string(&g);
        assert!(text.starts_with("dualpart v1 N=1 M=3\nP 0 "));
        assert_eq!(parse_params(&text).unwrap(), g);
    }

    #[test]
    fn params_errors() {
        assert!(parse_params("dualpart v2 N=1 M=2\n").is_err());
        assert!(parse_params("dualpart v1 N=1 M=2\nP 0 0 0 1 0 1 1 0 1\n").is_err());
        assert!(parse_params("dualpart v1 N=1 M=2\nP 0 0 0 1 0 1 1\n").is_err());
    }

    #[test]
    fn synth_shapes() {
        let (ring, _) = synth_target(SynthShape::Ring, 128).unwrap();
        let ink = ring.mean();
        assert!((0.15..=0.45).contains(&ink), "{ink}");
        assert_eq!(SynthShape::DoubleHole.contour().loops.len(), 3);
        assert_eq!(command_count(&SynthShape::Bar.contour()).lines, 4);
        for s in SynthShape::ALL {
            assert!(s.contour().area() > 0.0);
            assert_eq!(s.name().parse::<SynthShape>().unwrap(), s);
        }
    }
}
