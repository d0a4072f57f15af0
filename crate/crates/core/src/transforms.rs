//! Orthonormal separable DCT-II / DCT-III on `(x, y, t)` volumes, with
//! low-pass truncation.
//!
//! Coefficient arrays use the same layout as [`ImageSequence`]: frequency
//! `(u, v, w)` of a `ku × kv × kw` block lives at `(w * kv + v) * ku + u`.
//! Truncated synthesis zero-fills everything outside the kept block, so it
//! is the exact adjoint (and, without truncation, the inverse) of analysis.

use std::f64::consts::PI;

use crate::error::{dim_err, param_err, Result};
use crate::levelset::heaviside;
use crate::metrics;
use crate::volume::ImageSequence;

/// Full transform dimensions: spatial sizes and temporal length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DctDims {
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
}

impl DctDims {
    pub fn new(nx: usize, ny: usize, nt: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || nt == 0 {
            return param_err(format!("DCT dims must be positive, got {nx}x{ny}x{nt}"));
        }
        Ok(Self { nx, ny, nt })
    }

    pub fn of(seq: &ImageSequence) -> Self {
        Self { nx: seq.nx(), ny: seq.ny(), nt: seq.frames() }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nt
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Lowest `kx × ky × kt` frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruncationMask {
    pub kx: usize,
    pub ky: usize,
    pub kt: usize,
}

impl TruncationMask {
    pub fn full(dims: &DctDims) -> Self {
        Self { kx: dims.nx, ky: dims.ny, kt: dims.nt }
    }

    pub fn len(&self) -> usize {
        self.kx * self.ky * self.kt
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self, dims: &DctDims) -> Result<()> {
        if self.kx == 0 || self.ky == 0 || self.kt == 0 {
            return param_err("truncation mask must be non-empty");
        }
        if self.kx > dims.nx || self.ky > dims.ny || self.kt > dims.nt {
            return dim_err(format!(
                "mask {}x{}x{} exceeds dims {}x{}x{}",
                self.kx, self.ky, self.kt, dims.nx, dims.ny, dims.nt
            ));
        }
        Ok(())
    }
}

fn kept_count(fraction: f64, n: usize) -> usize {
    // Guard against products like 0.07 * 100 = 7.000000000000001.
    let k = (fraction * n as f64 - 1e-9).ceil() as usize;
    k.clamp(1, n)
}

/// Keeps `⌈fraction · n⌉` lowest frequencies along every axis, time included.
pub fn make_mask(dims: &DctDims, fraction: f64) -> Result<TruncationMask> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return param_err(format!("kept fraction must lie in (0, 1], got {fraction}"));
    }
    Ok(TruncationMask {
        kx: kept_count(fraction, dims.nx),
        ky: kept_count(fraction, dims.ny),
        kt: kept_count(fraction, dims.nt),
    })
}

/// Spatial-only variant: the temporal axis keeps a single (DC) frequency.
pub fn make_spatial_mask(dims: &DctDims, fraction: f64) -> Result<TruncationMask> {
    let mut m = make_mask(dims, fraction)?;
    m.kt = 1;
    Ok(m)
}

/// Low-pass cube holding roughly `fraction` of all coefficients: each axis
/// keeps `⌈fraction^(1/3) · n⌉` frequencies.
pub fn make_volume_mask(dims: &DctDims, fraction: f64) -> Result<TruncationMask> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return param_err(format!("kept fraction must lie in (0, 1], got {fraction}"));
    }
    make_mask(dims, fraction.cbrt())
}

/// Truncated DCT coefficients of a volume.
#[derive(Debug, Clone, PartialEq)]
pub struct DctCoeffs {
    pub dims: DctDims,
    pub mask: TruncationMask,
    pub values: Vec<f64>,
}

impl DctCoeffs {
    pub fn new(dims: DctDims, mask: TruncationMask, values: Vec<f64>) -> Result<Self> {
        mask.validate(&dims)?;
        if values.len() != mask.len() {
            return dim_err(format!("coefficient vector has {} entries, mask holds {}", values.len(), mask.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return param_err("coefficients must be finite");
        }
        Ok(Self { dims, mask, values })
    }

    pub fn zeros(dims: DctDims, mask: TruncationMask) -> Self {
        Self { dims, mask, values: vec![0.0; mask.len()] }
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }
}

/// Rows of the orthonormal DCT-II matrix for one axis, first `k` frequencies.
#[derive(Debug, Clone)]
struct AxisBasis {
    n: usize,
    k: usize,
    /// `k × n`, row `f` is frequency `f`.
    m: Vec<f64>,
}

impl AxisBasis {
    fn new(n: usize, k: usize) -> Self {
        let mut m = Vec::with_capacity(k * n);
        let s0 = (1.0 / n as f64).sqrt();
        let s = (2.0 / n as f64).sqrt();
        for f in 0..k {
            let scale = if f == 0 { s0 } else { s };
            for i in 0..n {
                m.push(scale * (PI * (2 * i + 1) as f64 * f as f64 / (2 * n) as f64).cos());
            }
        }
        Self { n, k, m }
    }
}

/// Applies a 1-D linear map along one axis of a `(a, b, c)` array
/// (`a` fastest). `map[o * len_in + i]` weights input `i` into output `o`.
fn apply_axis(
    input: &[f64],
    shape: [usize; 3],
    axis: usize,
    map: &[f64],
    len_out: usize,
    transpose: bool,
) -> (Vec<f64>, [usize; 3]) {
    let len_in = shape[axis];
    let mut out_shape = shape;
    out_shape[axis] = len_out;
    let mut out = vec![0.0; out_shape[0] * out_shape[1] * out_shape[2]];
    let weight = |o: usize, i: usize| {
        if transpose {
            map[i * len_out + o]
        } else {
            map[o * len_in + i]
        }
    };
    let [a, b, c] = shape;
    let [oa, ob, _] = out_shape;
    match axis {
        0 => {
            for z in 0..c {
                for y in 0..b {
                    let src = &input[(z * b + y) * a..(z * b + y + 1) * a];
                    let dst = &mut out[(z * ob + y) * oa..(z * ob + y + 1) * oa];
                    for (o, d) in dst.iter_mut().enumerate() {
                        let mut acc = 0.0;
                        for (i, &v) in src.iter().enumerate() {
                            acc += weight(o, i) * v;
                        }
                        *d = acc;
                    }
                }
            }
        }
        1 => {
            for z in 0..c {
                for o in 0..ob {
                    let dst = &mut out[(z * ob + o) * a..(z * ob + o + 1) * a];
                    for i in 0..b {
                        let w = weight(o, i);
                        let src = &input[(z * b + i) * a..(z * b + i + 1) * a];
                        for (d, &v) in dst.iter_mut().zip(src) {
                            *d += w * v;
                        }
                    }
                }
            }
        }
        _ => {
            let plane = a * b;
            for o in 0..out_shape[2] {
                let dst = &mut out[o * plane..(o + 1) * plane];
                for i in 0..c {
                    let w = weight(o, i);
                    let src = &input[i * plane..(i + 1) * plane];
                    for (d, &v) in dst.iter_mut().zip(src) {
                        *d += w * v;
                    }
                }
            }
        }
    }
    (out, out_shape)
}

/// Precomputed separable basis `Ψ` restricted to a truncation mask.
#[derive(Debug, Clone)]
pub struct DctBasis {
    dims: DctDims,
    mask: TruncationMask,
    axes: [AxisBasis; 3],
}

impl DctBasis {
    pub fn new(dims: DctDims, mask: TruncationMask) -> Result<Self> {
        mask.validate(&dims)?;
        Ok(Self {
            dims,
            mask,
            axes: [
                AxisBasis::new(dims.nx, mask.kx),
                AxisBasis::new(dims.ny, mask.ky),
                AxisBasis::new(dims.nt, mask.kt),
            ],
        })
    }

    pub fn full(dims: DctDims) -> Result<Self> {
        Self::new(dims, TruncationMask::full(&dims))
    }

    pub fn dims(&self) -> &DctDims {
        &self.dims
    }

    pub fn mask(&self) -> &TruncationMask {
        &self.mask
    }

    /// `Ψᴴ`: kept DCT-II coefficients of a volume.
    pub fn analyze(&self, volume: &[f64]) -> Result<Vec<f64>> {
        if volume.len() != self.dims.len() {
            return dim_err(format!("volume has {} voxels, basis expects {}", volume.len(), self.dims.len()));
        }
        let shape = [self.dims.nx, self.dims.ny, self.dims.nt];
        let (v, s) = apply_axis(volume, shape, 2, &self.axes[2].m, self.axes[2].k, false);
        let (v, s) = apply_axis(&v, s, 1, &self.axes[1].m, self.axes[1].k, false);
        let (v, _) = apply_axis(&v, s, 0, &self.axes[0].m, self.axes[0].k, false);
        Ok(v)
    }

    /// `Ψ`: volume from kept coefficients (DCT-III with zero fill).
    pub fn synthesize(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.mask.len() {
            return dim_err(format!("coefficient vector has {} entries, mask holds {}", values.len(), self.mask.len()));
        }
        let shape = [self.mask.kx, self.mask.ky, self.mask.kt];
        let (v, s) = apply_axis(values, shape, 0, &self.axes[0].m, self.axes[0].n, true);
        let (v, s) = apply_axis(&v, s, 1, &self.axes[1].m, self.axes[1].n, true);
        let (v, _) = apply_axis(&v, s, 2, &self.axes[2].m, self.axes[2].n, true);
        Ok(v)
    }

    pub fn analyze_coeffs(&self, volume: &ImageSequence) -> Result<DctCoeffs> {
        if DctDims::of(volume) != self.dims {
            return dim_err("volume shape does not match basis dims");
        }
        let values = self.analyze(volume.as_slice())?;
        Ok(DctCoeffs { dims: self.dims, mask: self.mask, values })
    }

    pub fn synthesize_coeffs(&self, coeffs: &DctCoeffs) -> Result<ImageSequence> {
        if coeffs.dims != self.dims || coeffs.mask != self.mask {
            return dim_err("coefficients do not match basis dims/mask");
        }
        let v = self.synthesize(&coeffs.values)?;
        ImageSequence::from_vec(self.dims.nx, self.dims.ny, self.dims.nt, v)
    }
}

/// Full orthonormal DCT-II of a volume.
pub fn dct_analyze(volume: &ImageSequence) -> Result<DctCoeffs> {
    if volume.as_slice().iter().any(|v| !v.is_finite()) {
        return param_err("volume contains non-finite values");
    }
    DctBasis::full(DctDims::of(volume))?.analyze_coeffs(volume)
}

/// Inverse transform of full or truncated coefficients.
pub fn dct_synthesize(coeffs: &DctCoeffs) -> Result<ImageSequence> {
    DctBasis::new(coeffs.dims, coeffs.mask)?.synthesize_coeffs(coeffs)
}

/// Low-pass part of a full coefficient array.
pub fn truncate(full: &DctCoeffs, mask: TruncationMask) -> Result<DctCoeffs> {
    if full.mask != TruncationMask::full(&full.dims) {
        return param_err("truncate expects a full coefficient array");
    }
    mask.validate(&full.dims)?;
    let d = full.dims;
    let mut values = Vec::with_capacity(mask.len());
    for w in 0..mask.kt {
        for v in 0..mask.ky {
            let row = (w * d.ny + v) * d.nx;
            values.extend_from_slice(&full.values[row..row + mask.kx]);
        }
    }
    Ok(DctCoeffs { dims: d, mask, values })
}

/// Result of compressing one volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompressionScore {
    pub mse: f64,
    pub ssim: f64,
}

/// Compresses a `[0, 1]` volume by keeping a low-pass cube with roughly
/// `fraction` of all DCT coefficients and measures the damage.
///
/// Level-set mode compresses the signed field `2v − 1` and maps the
/// synthesis back through the smooth Heaviside of width `heaviside_width`;
/// direct mode compresses the intensities and clamps to `[0, 1]`.
pub fn compression_error(
    volume: &ImageSequence,
    fraction: f64,
    use_levelset: bool,
    heaviside_width: f64,
) -> Result<CompressionScore> {
    if use_levelset && heaviside_width <= 0.0 {
        return param_err("Heaviside width must be positive");
    }
    let dims = DctDims::of(volume);
    let mask = make_volume_mask(&dims, fraction)?;
    let basis = DctBasis::new(dims, mask)?;
    let approx = if use_levelset {
        let signed: Vec<f64> = volume.as_slice().iter().map(|v| 2.0 * v - 1.0).collect();
        let phi = basis.synthesize(&basis.analyze(&signed)?)?;
        phi.iter().map(|&p| heaviside(p, heaviside_width)).collect::<Result<Vec<_>>>()?
    } else {
        let c = basis.analyze(volume.as_slice())?;
        basis.synthesize(&c)?.into_iter().map(|v| v.clamp(0.0, 1.0)).collect()
    };
    let approx = ImageSequence::from_vec(dims.nx, dims.ny, dims.nt, approx)?;
    let n = volume.as_slice().len() as f64;
    let mse = volume.as_slice().iter().zip(approx.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n;
    let mut ssim = 0.0;
    for t in 0..dims.nt {
        ssim += metrics::ssim(volume.frame(t), approx.frame(t), dims.nx, dims.ny)?;
    }
    Ok(CompressionScore { mse, ssim: ssim / dims.nt as f64 })
}
