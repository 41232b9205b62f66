use std::fmt;
use std::fs;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Glyph, RHO};
use crate::seed;

/// Handwriting variation of clean glyphs. Lengths are in pixels of a
/// `RHO`-sided patch, angles in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlyphParams {
    pub stroke_width: (f64, f64),
    /// Glyph half-extent as a fraction of half the patch side.
    pub scale: (f64, f64),
    pub rotation: f64,
    pub offset: f64,
    /// Endpoint and radius wobble.
    pub jitter: f64,
    /// Probability that a nought is left open.
    pub gap_probability: f64,
    pub max_gap: f64,
    pub ink: (f64, f64),
    /// Probability that an empty square shows faint grid fragments.
    pub faint_probability: f64,
}

impl Default for GlyphParams {
    fn default() -> Self {
        GlyphParams {
            stroke_width: (2.0, 3.5),
            scale: (0.55, 0.8),
            rotation: 0.25,
            offset: 3.0,
            jitter: 1.5,
            gap_probability: 0.3,
            max_gap: 0.9,
            ink: (0.8, 1.0),
            faint_probability: 0.3,
        }
    }
}

impl GlyphParams {
    /// No variation at all: centred upright glyphs of fixed width.
    pub fn zero() -> Self {
        GlyphParams {
            stroke_width: (2.5, 2.5),
            scale: (0.7, 0.7),
            rotation: 0.0,
            offset: 0.0,
            jitter: 0.0,
            gap_probability: 0.0,
            max_gap: 0.0,
            ink: (1.0, 1.0),
            faint_probability: 0.0,
        }
    }
}

/// Disturbances of the noisy set, applied at full strength for noise level 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Probability per patch border of a partial grid line.
    pub grid_line: f64,
    pub grid_intensity: (f64, f64),
    pub blur_sigma: f64,
    /// Fraction of pixels replaced by random intensities.
    pub speckle: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            grid_line: 0.6,
            grid_intensity: (0.5, 1.0),
            blur_sigma: 1.2,
            speckle: 0.03,
        }
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

fn symmetric<R: Rng + ?Sized>(rng: &mut R, r: f64) -> f64 {
    if r > 0.0 {
        rng.gen_range(-r..r)
    } else {
        0.0
    }
}

pub(super) fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    (qx * qx + qy * qy).sqrt()
}

/// Draws an anti-aliased polyline of the given width and intensity onto a
/// square image, keeping the brighter value per pixel.
fn stroke(img: &mut [f64], side: usize, points: &[(f64, f64)], width: f64, ink: f64) {
    if points.len() < 2 {
        return;
    }
    let half = width / 2.0;
    let reach = half + 1.0;
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for &(x, y) in points {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    let clip = |v: f64| v.clamp(0.0, side as f64 - 1.0) as usize;
    for y in clip(y0 - reach)..=clip(y1 + reach) {
        for x in clip(x0 - reach)..=clip(x1 + reach) {
            let p = (x as f64, y as f64);
            let d = points
                .windows(2)
                .map(|w| segment_distance(p, w[0], w[1]))
                .fold(f64::INFINITY, f64::min);
            let v = ink * (half + 0.5 - d).clamp(0.0, 1.0);
            let px = &mut img[y * side + x];
            *px = px.max(v);
        }
    }
}

fn gaussian_blur(img: &mut [f64], side: usize, sigma: f64) {
    if sigma <= 0.05 {
        return;
    }
    let r = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let z: f64 = kernel.iter().sum();
    let mut tmp = vec![0.0; img.len()];
    let s = side as isize;
    let at = |i: isize| i.clamp(0, s - 1) as usize;
    for y in 0..side {
        for x in 0..side {
            tmp[y * side + x] = (-r..=r)
                .map(|k| kernel[(k + r) as usize] * img[y * side + at(x as isize + k)])
                .sum::<f64>()
                / z;
        }
    }
    for y in 0..side {
        for x in 0..side {
            img[y * side + x] = (-r..=r)
                .map(|k| kernel[(k + r) as usize] * tmp[at(y as isize + k) * side + x])
                .sum::<f64>()
                / z;
        }
    }
}

fn rotate(p: (f64, f64), c: (f64, f64), angle: f64) -> (f64, f64) {
    let (s, co) = angle.sin_cos();
    let (dx, dy) = (p.0 - c.0, p.1 - c.1);
    (c.0 + co * dx - s * dy, c.1 + s * dx + co * dy)
}

/// A grid-line fragment along one of the four patch borders.
fn border_line<R: Rng + ?Sized>(img: &mut [f64], side: usize, rng: &mut R, border: usize, ink: f64, width: f64) {
    let n = side as f64;
    let inset = rng.gen_range(0.0..4.0);
    let len = rng.gen_range(0.4..1.0) * n;
    let start = rng.gen_range(0.0..=(n - len));
    let tilt = symmetric(rng, 1.5);
    let (a, b) = match border {
        0 => ((start, inset), (start + len, inset + tilt)),
        1 => ((start, n - 1.0 - inset), (start + len, n - 1.0 - inset + tilt)),
        2 => ((inset, start), (inset + tilt, start + len)),
        _ => ((n - 1.0 - inset, start), (n - 1.0 - inset + tilt, start + len)),
    };
    stroke(img, side, &[a, b], width, ink);
}

/// Renders one `RHO`×`RHO` glyph image with ink 1 on background 0.
/// `noise_level` scales the disturbances of `noise`; 0 gives a clean image.
pub fn render_glyph<R: Rng + ?Sized>(
    label: Glyph,
    params: &GlyphParams,
    noise: &NoiseParams,
    noise_level: f64,
    rng: &mut R,
) -> Vec<f64> {
    let side = RHO;
    let mut img = vec![0.0; side * side];
    let mid = (side as f64 - 1.0) / 2.0;
    let centre = (mid + symmetric(rng, params.offset), mid + symmetric(rng, params.offset));
    let half = uniform(rng, params.scale) * side as f64 / 2.0;
    let angle = symmetric(rng, params.rotation);
    let width = uniform(rng, params.stroke_width);
    let ink = uniform(rng, params.ink);

    match label {
        Glyph::Nought => {
            let aspect = 1.0 + symmetric(rng, 0.15);
            let (rx, ry) = (half * aspect, half / aspect);
            let wobble = [symmetric(rng, params.jitter), symmetric(rng, params.jitter)];
            let phase = [rng.gen_range(0.0..6.3), rng.gen_range(0.0..6.3)];
            let gap = if rng.gen_bool(params.gap_probability) {
                params.max_gap * rng.gen_range(0.3..1.0)
            } else {
                0.0
            };
            let start = rng.gen_range(0.0..std::f64::consts::TAU);
            let sweep = std::f64::consts::TAU - gap;
            let steps = 40;
            let points: Vec<_> = (0..=steps)
                .map(|k| {
                    let phi = start + sweep * k as f64 / steps as f64;
                    let dr = wobble[0] * (phi + phase[0]).sin() + wobble[1] * (2.0 * phi + phase[1]).sin();
                    let p = (centre.0 + (rx + dr) * phi.cos(), centre.1 + (ry + dr) * phi.sin());
                    rotate(p, centre, angle)
                })
                .collect();
            stroke(&mut img, side, &points, width, ink);
        }
        Glyph::Cross => {
            for diag in [1.0, -1.0] {
                let mut end = |sx: f64| {
                    let p = (
                        centre.0 + sx * half + symmetric(rng, params.jitter),
                        centre.1 + sx * diag * half + symmetric(rng, params.jitter),
                    );
                    rotate(p, centre, angle)
                };
                let (a, b) = (end(-1.0), end(1.0));
                stroke(&mut img, side, &[a, b], width, ink);
            }
        }
        Glyph::Nothing => {
            if rng.gen_bool(params.faint_probability) {
                for _ in 0..rng.gen_range(1..=2) {
                    let border = rng.gen_range(0..4);
                    let faint = rng.gen_range(0.1..0.3);
                    border_line(&mut img, side, rng, border, faint, 1.5);
                }
            }
        }
    }

    if noise_level > 0.0 {
        let p = (noise.grid_line * noise_level).min(1.0);
        for border in 0..4 {
            if rng.gen_bool(p) {
                let ink = uniform(rng, noise.grid_intensity);
                let w = rng.gen_range(1.5..3.0);
                border_line(&mut img, side, rng, border, ink, w);
            }
        }
        gaussian_blur(&mut img, side, noise.blur_sigma * noise_level * rng.gen_range(0.3..1.0));
        let speckle = noise.speckle * noise_level;
        for px in img.iter_mut() {
            if rng.gen_bool(speckle.min(1.0)) {
                *px = rng.gen_range(0.0..1.0);
            }
        }
    }
    img.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    img
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Clean,
    Noisy,
}

impl Split {
    pub const fn name(self) -> &'static str {
        match self {
            Split::Clean => "clean",
            Split::Noisy => "noisy",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "clean" => Ok(Split::Clean),
            "noisy" => Ok(Split::Noisy),
            _ => Err(format!("unknown split {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlyphDatasetSpec {
    pub clean: usize,
    pub noisy: usize,
    pub glyph: GlyphParams,
    pub noise: NoiseParams,
    pub seed: u64,
}

impl Default for GlyphDatasetSpec {
    fn default() -> Self {
        GlyphDatasetSpec {
            clean: 109,
            noisy: 201,
            glyph: GlyphParams::default(),
            noise: NoiseParams::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlyphExample {
    pub pixels: Vec<f64>,
    pub label: Glyph,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GlyphDataset {
    pub examples: Vec<GlyphExample>,
}

impl GlyphDataset {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &GlyphExample> {
        self.examples.iter().filter(move |e| e.split == split)
    }

    pub fn count(&self, split: Split) -> usize {
        self.split(split).count()
    }

    pub fn label_counts(&self, split: Split) -> [usize; 3] {
        let mut c = [0; 3];
        self.split(split).for_each(|e| c[e.label.index()] += 1);
        c
    }
}

/// Labels cycle through nought, cross, nothing. Image `i` of each split
/// draws from its own named stream, so images do not depend on each other.
pub fn generate_glyphs(spec: &GlyphDatasetSpec) -> GlyphDataset {
    let mut examples = Vec::with_capacity(spec.clean + spec.noisy);
    for (split, count, level) in [(Split::Clean, spec.clean, 0.0), (Split::Noisy, spec.noisy, 1.0)] {
        for i in 0..count {
            let label = Glyph::ALL[i % 3];
            let mut rng = seed::stream(spec.seed, &format!("glyphs/{split}/{i}"));
            let pixels = render_glyph(label, &spec.glyph, &spec.noise, level, &mut rng);
            examples.push(GlyphExample { pixels, label, split });
        }
    }
    GlyphDataset { examples }
}

/// Writes a binary 8-bit greymap.
pub fn write_pgm(path: &Path, side: usize, pixels: &[f64]) -> io::Result<()> {
    let mut out = Vec::with_capacity(pixels.len() + 16);
    write!(out, "P5\n{side} {side}\n255\n")?;
    out.extend(pixels.iter().map(|p| (p.clamp(0.0, 1.0) * 255.0).round() as u8));
    fs::write(path, out)
}

fn pgm_token<R: BufRead>(r: &mut R) -> io::Result<String> {
    let mut tok = String::new();
    let mut byte = [0u8];
    loop {
        if r.read(&mut byte)? == 0 {
            break;
        }
        match byte[0] {
            b'#' if tok.is_empty() => {
                let mut skip = String::new();
                r.read_line(&mut skip)?;
            }
            c if c.is_ascii_whitespace() => {
                if !tok.is_empty() {
                    break;
                }
            }
            c => tok.push(c as char),
        }
    }
    Ok(tok)
}

/// Reads a binary 8-bit greymap; returns `(width, height, pixels in [0, 1])`.
pub fn read_pgm(path: &Path) -> io::Result<(usize, usize, Vec<f64>)> {
    let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {m}", path.display()));
    let mut r = BufReader::new(fs::File::open(path)?);
    if pgm_token(&mut r)? != "P5" {
        return Err(bad("not a binary greymap"));
    }
    let mut num = || -> io::Result<usize> { pgm_token(&mut r)?.parse().map_err(|_| bad("bad header")) };
    let (w, h, max) = (num()?, num()?, num()?);
    if max == 0 || max > 255 {
        return Err(bad("unsupported maximum value"));
    }
    let mut raw = vec![0u8; w * h];
    r.read_exact(&mut raw)?;
    Ok((w, h, raw.iter().map(|&b| b as f64 / max as f64).collect()))
}

/// One directory per label plus `manifest.csv` (`filename,label,split`).
pub fn write_dataset(dir: &Path, dataset: &GlyphDataset) -> io::Result<()> {
    for g in Glyph::ALL {
        fs::create_dir_all(dir.join(g.name()))?;
    }
    let mut manifest = String::from("filename,label,split\n");
    let mut seen = [0usize; 2];
    for e in &dataset.examples {
        let k = &mut seen[e.split as usize];
        let name = format!("{}/{}_{:04}.pgm", e.label, e.split, *k);
        *k += 1;
        write_pgm(&dir.join(&name), RHO, &e.pixels)?;
        manifest.push_str(&format!("{name},{},{}\n", e.label, e.split));
    }
    fs::write(dir.join("manifest.csv"), manifest)
}

/// Reads a dataset written by [`write_dataset`]. Pixels come back quantised
/// to 8 bits.
pub fn read_dataset(dir: &Path) -> io::Result<GlyphDataset> {
    let bad = |m: String| io::Error::new(io::ErrorKind::InvalidData, m);
    let text = fs::read_to_string(dir.join("manifest.csv"))?;
    let mut lines = text.lines();
    if lines.next() != Some("filename,label,split") {
        return Err(bad("manifest header must be filename,label,split".into()));
    }
    let mut examples = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        let [file, label, split] = f[..] else {
            return Err(bad(format!("manifest line {}: expected 3 fields", n + 2)));
        };
        let (w, h, pixels) = read_pgm(&dir.join(file))?;
        if (w, h) != (RHO, RHO) {
            return Err(bad(format!("{file}: expected {RHO}x{RHO}, found {w}x{h}")));
        }
        examples.push(GlyphExample {
            pixels,
            label: label.parse().map_err(bad)?,
            split: split.parse().map_err(bad)?,
        });
    }
    Ok(GlyphDataset { examples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ink(img: &[f64]) -> f64 {
        img.iter().sum()
    }

    #[test]
    fn default_counts_and_balance() {
        let d = generate_glyphs(&GlyphDatasetSpec::default());
        assert_eq!(d.count(Split::Clean), 109);
        assert_eq!(d.count(Split::Noisy), 201);
        assert_eq!(d.label_counts(Split::Clean), [37, 36, 36]);
        assert!(d.examples.iter().all(|e| e.pixels.len() == RHO * RHO));
    }

    #[test]
    fn clean_blank_is_uniform_background() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let img = render_glyph(Glyph::Nothing, &GlyphParams::zero(), &NoiseParams::default(), 0.0, &mut rng);
        assert!(img.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn glyphs_have_ink_where_expected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = GlyphParams::zero();
        let n = NoiseParams::default();
        let o = render_glyph(Glyph::Nought, &p, &n, 0.0, &mut rng);
        let x = render_glyph(Glyph::Cross, &p, &n, 0.0, &mut rng);
        assert!(ink(&o) > 100.0 && ink(&x) > 80.0);
        let c = 20 * RHO + 20;
        // A cross covers the centre, a nought leaves it empty.
        assert!(x[c] > 0.9);
        assert_eq!(o[c], 0.0);
    }

    #[test]
    fn same_seed_same_dataset() {
        let spec = GlyphDatasetSpec {
            clean: 12,
            noisy: 12,
            ..Default::default()
        };
        assert_eq!(generate_glyphs(&spec), generate_glyphs(&spec));
        let other = GlyphDatasetSpec { seed: 1, ..spec.clone() };
        assert_ne!(generate_glyphs(&spec), generate_glyphs(&other));
    }

    #[test]
    fn disk_round_trip() {
        let spec = GlyphDatasetSpec {
            clean: 6,
            noisy: 3,
            ..Default::default()
        };
        let d = generate_glyphs(&spec);
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &d).unwrap();
        assert!(dir.path().join("cross/clean_0001.pgm").exists());
        let back = read_dataset(dir.path()).unwrap();
        assert_eq!(back.examples.len(), 9);
        for (a, b) in d.examples.iter().zip(&back.examples) {
            assert_eq!((a.label, a.split), (b.label, b.split));
            let err = a.pixels.iter().zip(&b.pixels).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(err <= 0.5 / 255.0 + 1e-12);
        }
    }
}
