//! Parallel-beam Radon transform with exact ray/pixel intersection lengths.
//!
//! The image grid is centred on the origin. For a projection angle `θ` the
//! detector axis is `n = (cos θ, sin θ)` and detector bin `k` collects the
//! line integral along `{ s_k n + λ (−sin θ, cos θ) }` where `s_k` is the bin
//! centre. At 0° every bin therefore integrates one image column.
//!
//! The forward map is stored as a sparse matrix (one row per detector bin),
//! so the adjoint is its literal transpose.

use rayon::prelude::*;

use crate::error::{dim_err, param_err, Result};
use crate::volume::ImageSequence;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageGrid {
    pub nx: usize,
    pub ny: usize,
    pub pixel_size: f64,
}

impl ImageGrid {
    pub fn new(nx: usize, ny: usize, pixel_size: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return param_err(format!("grid must be non-empty, got {nx}x{ny}"));
        }
        if !(pixel_size > 0.0 && pixel_size.is_finite()) {
            return param_err(format!("pixel size must be positive, got {pixel_size}"));
        }
        Ok(Self { nx, ny, pixel_size })
    }

    /// Square grid with unit pixels.
    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n, 1.0)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn x_min(&self) -> f64 {
        -0.5 * self.nx as f64 * self.pixel_size
    }

    fn y_min(&self) -> f64 {
        -0.5 * self.ny as f64 * self.pixel_size
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorArray {
    pub n_det: usize,
    pub det_spacing: f64,
}

impl DetectorArray {
    pub fn new(n_det: usize, det_spacing: f64) -> Result<Self> {
        if n_det == 0 {
            return param_err("detector needs at least one bin");
        }
        if !(det_spacing > 0.0 && det_spacing.is_finite()) {
            return param_err(format!("detector spacing must be positive, got {det_spacing}"));
        }
        Ok(Self { n_det, det_spacing })
    }

    /// `max(nx, ny)` bins at pixel pitch.
    pub fn default_for(grid: &ImageGrid) -> Self {
        Self { n_det: grid.nx.max(grid.ny), det_spacing: grid.pixel_size }
    }

    /// Signed distance of bin `k`'s centre from the rotation axis.
    pub fn bin_center(&self, k: usize) -> f64 {
        (k as f64 - 0.5 * (self.n_det as f64 - 1.0)) * self.det_spacing
    }
}

/// One projection angle per frame: `theta1 + t * delta_theta` (degrees, `t` from 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleSchedule {
    pub theta1: f64,
    pub delta_theta: f64,
    pub frames: usize,
}

impl AngleSchedule {
    pub fn new(theta1: f64, delta_theta: f64, frames: usize) -> Result<Self> {
        if frames == 0 {
            return param_err("angle schedule needs at least one frame");
        }
        if !theta1.is_finite() || !delta_theta.is_finite() {
            return param_err("angles must be finite");
        }
        Ok(Self { theta1, delta_theta, frames })
    }

    pub fn angle(&self, t: usize) -> f64 {
        self.theta1 + t as f64 * self.delta_theta
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.frames).map(|t| self.angle(t)).collect()
    }
}

/// Per-frame projection data, `frames × n_det` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    pub schedule: AngleSchedule,
    pub detector: DetectorArray,
    data: Vec<f64>,
}

impl Sinogram {
    pub fn new(schedule: AngleSchedule, detector: DetectorArray, data: Vec<f64>) -> Result<Self> {
        if data.len() != schedule.frames * detector.n_det {
            return dim_err(format!(
                "sinogram data has {} values, geometry needs {}x{}",
                data.len(),
                schedule.frames,
                detector.n_det
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return param_err("sinogram contains non-finite values");
        }
        Ok(Self { schedule, detector, data })
    }

    pub fn zeros(schedule: AngleSchedule, detector: DetectorArray) -> Self {
        Self { schedule, detector, data: vec![0.0; schedule.frames * detector.n_det] }
    }

    pub fn frames(&self) -> usize {
        self.schedule.frames
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let n = self.detector.n_det;
        &self.data[t * n..(t + 1) * n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Rows `start..start + len`, with the schedule shifted accordingly.
    pub fn slice_frames(&self, start: usize, len: usize) -> Result<Sinogram> {
        if len == 0 || start + len > self.frames() {
            return dim_err(format!("frame range {start}..{} out of bounds", start + len));
        }
        let n = self.detector.n_det;
        let schedule =
            AngleSchedule { theta1: self.schedule.angle(start), delta_theta: self.schedule.delta_theta, frames: len };
        Ok(Sinogram { schedule, detector: self.detector, data: self.data[start * n..(start + len) * n].to_vec() })
    }
}

/// `(cos θ, sin θ)` for an angle in degrees, exact on multiples of 90°.
fn direction(angle_deg: f64) -> (f64, f64) {
    let a = angle_deg.rem_euclid(360.0);
    if a == 0.0 {
        (1.0, 0.0)
    } else if a == 90.0 {
        (0.0, 1.0)
    } else if a == 180.0 {
        (-1.0, 0.0)
    } else if a == 270.0 {
        (0.0, -1.0)
    } else {
        let r = a.to_radians();
        (r.cos(), r.sin())
    }
}

/// Sparse system matrix of a single projection angle (CSR, one row per bin).
#[derive(Debug, Clone)]
pub struct ProjectionMatrix {
    grid: ImageGrid,
    n_det: usize,
    offsets: Vec<usize>,
    pixels: Vec<u32>,
    lengths: Vec<f64>,
}

impl ProjectionMatrix {
    pub fn new(grid: &ImageGrid, detector: &DetectorArray, angle_deg: f64) -> Self {
        let (c, s) = direction(angle_deg);
        let mut offsets = Vec::with_capacity(detector.n_det + 1);
        let mut pixels = Vec::new();
        let mut lengths = Vec::new();
        offsets.push(0);
        let mut scratch = Vec::new();
        for k in 0..detector.n_det {
            let sk = detector.bin_center(k);
            trace_ray(grid, (sk * c, sk * s), (-s, c), &mut scratch);
            for &(p, w) in &scratch {
                pixels.push(p);
                lengths.push(w);
            }
            offsets.push(pixels.len());
        }
        Self { grid: *grid, n_det: detector.n_det, offsets, pixels, lengths }
    }

    pub fn n_det(&self) -> usize {
        self.n_det
    }

    pub fn grid(&self) -> &ImageGrid {
        &self.grid
    }

    /// `(pixel index, intersection length)` pairs of bin `k`.
    pub fn ray(&self, k: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[k]..self.offsets[k + 1];
        self.pixels[r.clone()].iter().zip(&self.lengths[r]).map(|(&p, &w)| (p as usize, w))
    }

    pub fn forward_into(&self, image: &[f64], out: &mut [f64]) {
        debug_assert_eq!(image.len(), self.grid.len());
        debug_assert_eq!(out.len(), self.n_det);
        for (k, o) in out.iter_mut().enumerate() {
            let r = self.offsets[k]..self.offsets[k + 1];
            *o = self.pixels[r.clone()].iter().zip(&self.lengths[r]).map(|(&p, &w)| image[p as usize] * w).sum();
        }
    }

    /// Adds the backprojection of `proj` into `out`.
    pub fn adjoint_add(&self, proj: &[f64], out: &mut [f64]) {
        debug_assert_eq!(proj.len(), self.n_det);
        debug_assert_eq!(out.len(), self.grid.len());
        for (k, &v) in proj.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let r = self.offsets[k]..self.offsets[k + 1];
            for (&p, &w) in self.pixels[r.clone()].iter().zip(&self.lengths[r]) {
                out[p as usize] += v * w;
            }
        }
    }

    pub fn forward(&self, image: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_det];
        self.forward_into(image, &mut out);
        out
    }

    pub fn adjoint(&self, proj: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        self.adjoint_add(proj, &mut out);
        out
    }
}

/// Siddon-style traversal: pixels crossed by the line `origin + λ dir`
/// (`dir` unit length) and the length of each crossing.
fn trace_ray(grid: &ImageGrid, origin: (f64, f64), dir: (f64, f64), out: &mut Vec<(u32, f64)>) {
    out.clear();
    let ps = grid.pixel_size;
    let (x0, y0) = (grid.x_min(), grid.y_min());
    let (x1, y1) = (-x0, -y0);

    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (o, d, a, b) in [(origin.0, dir.0, x0, x1), (origin.1, dir.1, y0, y1)] {
        if d == 0.0 {
            if o < a || o >= b {
                return;
            }
        } else {
            let (ta, tb) = ((a - o) / d, (b - o) / d);
            lo = lo.max(ta.min(tb));
            hi = hi.min(ta.max(tb));
        }
    }
    if hi <= lo {
        return;
    }

    let mut cuts = vec![lo, hi];
    for (o, d, start, count) in [(origin.0, dir.0, x0, grid.nx), (origin.1, dir.1, y0, grid.ny)] {
        if d == 0.0 {
            continue;
        }
        for i in 1..count {
            let lam = (start + i as f64 * ps - o) / d;
            if lam > lo && lam < hi {
                cuts.push(lam);
            }
        }
    }
    cuts.sort_by(|a, b| a.total_cmp(b));

    let min_len = 1e-12 * ps;
    for w in cuts.windows(2) {
        let len = w[1] - w[0];
        if len <= min_len {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        let ix = ((origin.0 + mid * dir.0 - x0) / ps).floor();
        let iy = ((origin.1 + mid * dir.1 - y0) / ps).floor();
        if ix < 0.0 || iy < 0.0 || ix >= grid.nx as f64 || iy >= grid.ny as f64 {
            continue;
        }
        out.push(((iy as usize * grid.nx + ix as usize) as u32, len));
    }
}

/// Projects one image at one angle.
pub fn radon_forward(image: &[f64], grid: &ImageGrid, angle_deg: f64, detector: &DetectorArray) -> Result<Vec<f64>> {
    if image.len() != grid.len() {
        return dim_err(format!("image has {} pixels, grid has {}", image.len(), grid.len()));
    }
    if image.iter().any(|v| !v.is_finite()) {
        return param_err("image contains non-finite values");
    }
    Ok(ProjectionMatrix::new(grid, detector, angle_deg).forward(image))
}

/// Backprojects one detector row; the exact transpose of [`radon_forward`].
pub fn radon_adjoint(
    projection: &[f64],
    angle_deg: f64,
    grid: &ImageGrid,
    detector: &DetectorArray,
) -> Result<Vec<f64>> {
    if projection.len() != detector.n_det {
        return dim_err(format!("projection has {} bins, detector has {}", projection.len(), detector.n_det));
    }
    if projection.iter().any(|v| !v.is_finite()) {
        return param_err("projection contains non-finite values");
    }
    Ok(ProjectionMatrix::new(grid, detector, angle_deg).adjoint(projection))
}

/// Precomputed system matrices for a list of per-row angles.
#[derive(Debug, Clone)]
pub struct SequenceProjector {
    grid: ImageGrid,
    detector: DetectorArray,
    rows: Vec<ProjectionMatrix>,
}

impl SequenceProjector {
    pub fn new(grid: ImageGrid, detector: DetectorArray, angles: &[f64]) -> Self {
        let rows = angles.par_iter().map(|&a| ProjectionMatrix::new(&grid, &detector, a)).collect();
        Self { grid, detector, rows }
    }

    pub fn for_schedule(grid: ImageGrid, detector: DetectorArray, schedule: &AngleSchedule) -> Self {
        Self::new(grid, detector, &schedule.angles())
    }

    pub fn grid(&self) -> &ImageGrid {
        &self.grid
    }

    pub fn detector(&self) -> &DetectorArray {
        &self.detector
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    pub fn matrix(&self, row: usize) -> &ProjectionMatrix {
        &self.rows[row]
    }

    /// Row `t` of the result is the projection of frame `t` at angle `t`.
    pub fn forward(&self, seq: &ImageSequence) -> Result<Vec<f64>> {
        self.check_sequence(seq)?;
        let n = self.detector.n_det;
        let mut out = vec![0.0; self.rows.len() * n];
        out.par_chunks_mut(n).zip(&self.rows).enumerate().for_each(|(t, (o, m))| m.forward_into(seq.frame(t), o));
        Ok(out)
    }

    /// Frame `t` of the result is the backprojection of row `t`.
    pub fn adjoint(&self, data: &[f64]) -> Result<ImageSequence> {
        let n = self.detector.n_det;
        if data.len() != self.rows.len() * n {
            return dim_err(format!("data has {} values, projector expects {}x{n}", data.len(), self.rows.len()));
        }
        let mut out = ImageSequence::zeros(self.grid.nx, self.grid.ny, self.rows.len());
        let fl = self.grid.len();
        out.as_mut_slice()
            .par_chunks_mut(fl)
            .zip(&self.rows)
            .enumerate()
            .for_each(|(t, (o, m))| m.adjoint_add(&data[t * n..(t + 1) * n], o));
        Ok(out)
    }

    fn check_sequence(&self, seq: &ImageSequence) -> Result<()> {
        if seq.frames() != self.rows.len() {
            return dim_err(format!("sequence has {} frames, schedule has {}", seq.frames(), self.rows.len()));
        }
        if seq.nx() != self.grid.nx || seq.ny() != self.grid.ny {
            return dim_err(format!(
                "sequence frames are {}x{}, grid is {}x{}",
                seq.nx(),
                seq.ny(),
                self.grid.nx,
                self.grid.ny
            ));
        }
        Ok(())
    }
}

/// Single-shot acquisition of a whole sequence: one angle per frame.
pub fn forward_sequence(
    seq: &ImageSequence,
    grid: &ImageGrid,
    schedule: &AngleSchedule,
    detector: &DetectorArray,
) -> Result<Sinogram> {
    if seq.frames() != schedule.frames {
        return dim_err(format!("sequence has {} frames, schedule has {}", seq.frames(), schedule.frames));
    }
    if seq.as_slice().iter().any(|v| !v.is_finite()) {
        return param_err("sequence contains non-finite values");
    }
    let proj = SequenceProjector::for_schedule(*grid, *detector, schedule);
    let data = proj.forward(seq)?;
    Sinogram::new(*schedule, *detector, data)
}

/// Transpose of [`forward_sequence`].
pub fn adjoint_sequence(sino: &Sinogram, grid: &ImageGrid) -> Result<ImageSequence> {
    let proj = SequenceProjector::for_schedule(*grid, sino.detector, &sino.schedule);
    proj.adjoint(sino.as_slice())
}
