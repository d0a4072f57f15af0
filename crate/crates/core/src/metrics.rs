//! Image quality metrics: PSNR, SSIM, Otsu binarization and Dice overlap.
//!
//! Images are flat row-major slices with explicit `nx × ny` where a window
//! is involved. Intensities are expected in `[0, 1]`.

use std::fmt::Write as _;

use crate::error::{dim_err, Error, Result};
use crate::volume::ImageSequence;

/// PSNR reported for a perfect match.
pub const PSNR_CAP_DB: f64 = 100.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const OTSU_BINS: usize = 256;

pub fn mse(reference: &[f64], test: &[f64]) -> Result<f64> {
    if reference.len() != test.len() {
        return dim_err(format!("image sizes differ: {} vs {}", reference.len(), test.len()));
    }
    if reference.is_empty() {
        return dim_err("empty image");
    }
    let s: f64 = reference.iter().zip(test).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(s / reference.len() as f64)
}

/// Peak signal-to-noise ratio for unit peak, capped at [`PSNR_CAP_DB`].
pub fn psnr(reference: &[f64], test: &[f64]) -> Result<f64> {
    let m = mse(reference, test)?;
    if m == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / m).log10()).min(PSNR_CAP_DB))
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let r = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - r;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Reflects an out-of-range index back into `0..n` (edge sample repeated).
fn symmetric(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - i - 1;
        } else {
            return i as usize;
        }
    }
}

fn blur(img: &[f64], nx: usize, ny: usize, w: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as isize;
    let mut tmp = vec![0.0; nx * ny];
    for y in 0..ny {
        for x in 0..nx {
            let mut acc = 0.0;
            for (k, &wk) in w.iter().enumerate() {
                acc += wk * img[y * nx + symmetric(x as isize + k as isize - r, nx)];
            }
            tmp[y * nx + x] = acc;
        }
    }
    let mut out = vec![0.0; nx * ny];
    for y in 0..ny {
        for x in 0..nx {
            let mut acc = 0.0;
            for (k, &wk) in w.iter().enumerate() {
                acc += wk * tmp[symmetric(y as isize + k as isize - r, ny) * nx + x];
            }
            out[y * nx + x] = acc;
        }
    }
    out
}

/// Mean structural similarity with an 11×11 Gaussian window (σ = 1.5) and
/// dynamic range 1.
pub fn ssim(reference: &[f64], test: &[f64], nx: usize, ny: usize) -> Result<f64> {
    if reference.len() != nx * ny || test.len() != nx * ny {
        return dim_err(format!("SSIM inputs must both be {nx}x{ny}"));
    }
    if nx < SSIM_WINDOW || ny < SSIM_WINDOW {
        return dim_err(format!("image {nx}x{ny} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"));
    }
    let w = gaussian_window();
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let mx = blur(reference, nx, ny, &w);
    let my = blur(test, nx, ny, &w);
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).collect::<Vec<_>>();
    let mxx = blur(&sq(reference, reference), nx, ny, &w);
    let myy = blur(&sq(test, test), nx, ny, &w);
    let mxy = blur(&sq(reference, test), nx, ny, &w);
    let mut acc = 0.0;
    for i in 0..nx * ny {
        let (ux, uy) = (mx[i], my[i]);
        let vx = mxx[i] - ux * ux;
        let vy = myy[i] - uy * uy;
        let cxy = mxy[i] - ux * uy;
        acc += ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
    }
    Ok(acc / (nx * ny) as f64)
}

struct OtsuSplit {
    lo: f64,
    width: f64,
    /// Last bin of the background class.
    cut: usize,
}

impl OtsuSplit {
    fn bin(&self, v: f64) -> usize {
        (((v - self.lo) / self.width).floor().max(0.0) as usize).min(OTSU_BINS - 1)
    }

    fn threshold(&self) -> f64 {
        self.lo + (self.cut + 1) as f64 * self.width
    }
}

fn otsu_split(image: &[f64]) -> Result<OtsuSplit> {
    if image.is_empty() {
        return dim_err("empty image");
    }
    let lo = image.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = image.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Numerical("non-finite pixel in Otsu input".into()));
    }
    if hi <= lo {
        return Err(Error::ConstantImage(format!("all pixels equal {lo}")));
    }
    let mut split = OtsuSplit { lo, width: (hi - lo) / OTSU_BINS as f64, cut: 0 };
    let mut hist = [0usize; OTSU_BINS];
    for &v in image {
        hist[split.bin(v)] += 1;
    }
    let total = image.len() as f64;
    let center = |b: usize| lo + (b as f64 + 0.5) * split.width;
    let sum_all: f64 = hist.iter().enumerate().map(|(b, &c)| c as f64 * center(b)).sum();
    let (mut w0, mut s0) = (0.0, 0.0);
    let mut best = f64::NEG_INFINITY;
    for (b, &c) in hist.iter().enumerate().take(OTSU_BINS - 1) {
        w0 += c as f64;
        s0 += c as f64 * center(b);
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let d = s0 / w0 - (sum_all - s0) / w1;
        let between = w0 * w1 * d * d;
        if between > best {
            best = between;
            split.cut = b;
        }
    }
    Ok(split)
}

/// Otsu threshold over a 256-bin histogram spanning `[min, max]`.
///
/// The returned value is the upper edge of the last background bin, ties
/// going to the lowest such bin.
pub fn otsu_threshold(image: &[f64]) -> Result<f64> {
    Ok(otsu_split(image)?.threshold())
}

/// Foreground mask (1.0 / 0.0) from Otsu's split.
pub fn otsu_binarize(image: &[f64]) -> Result<Vec<f64>> {
    let split = otsu_split(image)?;
    Ok(image.iter().map(|&v| if split.bin(v) > split.cut { 1.0 } else { 0.0 }).collect())
}

/// Dice overlap of two masks (nonzero = foreground). Two empty masks score 1.
pub fn dice(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return dim_err(format!("mask sizes differ: {} vs {}", a.len(), b.len()));
    }
    let (mut na, mut nb, mut both) = (0usize, 0usize, 0usize);
    for (&p, &q) in a.iter().zip(b) {
        let (p, q) = (p != 0.0, q != 0.0);
        na += p as usize;
        nb += q as usize;
        both += (p && q) as usize;
    }
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * both as f64 / (na + nb) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameMetrics {
    pub psnr: f64,
    pub ssim: f64,
    pub dice: f64,
    /// Set when the frame could not be binarized by Otsu.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub frames: Vec<FrameMetrics>,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
    pub mean_dice: f64,
}

impl MetricReport {
    /// `frame,psnr_db,ssim,dice` with a trailing `mean` row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("frame,psnr_db,ssim,dice\n");
        for (t, f) in self.frames.iter().enumerate() {
            let _ = writeln!(s, "{t},{:.6},{:.6},{:.6}", f.psnr, f.ssim, f.dice);
        }
        let _ = writeln!(s, "mean,{:.6},{:.6},{:.6}", self.mean_psnr, self.mean_ssim, self.mean_dice);
        s
    }
}

/// Per-frame PSNR and SSIM on intensities, Dice on the Otsu mask of the
/// reconstruction against the binary ground truth.
///
/// A constant reconstruction frame cannot be split by Otsu; it is then
/// binarized at 0.5 and the failure is recorded in the frame's `note`.
pub fn report(gt: &ImageSequence, recon: &ImageSequence) -> Result<MetricReport> {
    if !gt.same_shape(recon) {
        return dim_err(format!(
            "ground truth {}x{}x{} vs reconstruction {}x{}x{}",
            gt.nx(),
            gt.ny(),
            gt.frames(),
            recon.nx(),
            recon.ny(),
            recon.frames()
        ));
    }
    let (nx, ny) = (gt.nx(), gt.ny());
    let mut frames = Vec::with_capacity(gt.frames());
    for t in 0..gt.frames() {
        let (g, r) = (gt.frame(t), recon.frame(t));
        let (mask, note) = match otsu_binarize(r) {
            Ok(m) => (m, None),
            Err(e) => (r.iter().map(|&v| if v >= 0.5 { 1.0 } else { 0.0 }).collect(), Some(e.to_string())),
        };
        frames.push(FrameMetrics { psnr: psnr(g, r)?, ssim: ssim(g, r, nx, ny)?, dice: dice(g, &mask)?, note });
    }
    let n = frames.len() as f64;
    let mean = |f: fn(&FrameMetrics) -> f64| frames.iter().map(f).sum::<f64>() / n;
    Ok(MetricReport { mean_psnr: mean(|f| f.psnr), mean_ssim: mean(|f| f.ssim), mean_dice: mean(|f| f.dice), frames })
}
