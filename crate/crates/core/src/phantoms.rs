//! Synthetic binary phantoms and measurement noise.

use std::collections::VecDeque;
use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{dim_err, param_err, Error, Result};
use crate::projector::Sinogram;
use crate::volume::ImageSequence;

/// A disc moving at constant velocity (pixels per frame).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ball {
    pub radius: f64,
    pub position: [f64; 2],
    pub velocity: [f64; 2],
}

/// Rigid balls bouncing off the walls of the square `[0, n]²` and off
/// each other.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidBallSpec {
    pub n: usize,
    pub frames: usize,
    pub balls: Vec<Ball>,
}

impl RigidBallSpec {
    /// Two balls at `(0.3n, 0.5n)` and `(0.7n, 0.4n)` with radius `0.08n` and
    /// velocities `(1.2, 0.7)` and `(−0.9, 1.1)` scaled by `n / 512`.
    pub fn default_for(n: usize, frames: usize) -> Self {
        let s = n as f64 / 512.0;
        let nf = n as f64;
        let radius = 0.08 * nf;
        Self {
            n,
            frames,
            balls: vec![
                Ball { radius, position: [0.3 * nf, 0.5 * nf], velocity: [1.2 * s, 0.7 * s] },
                Ball { radius, position: [0.7 * nf, 0.4 * nf], velocity: [-0.9 * s, 1.1 * s] },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.frames == 0 {
            return param_err("phantom size and frame count must be at least 1");
        }
        let n = self.n as f64;
        for (i, b) in self.balls.iter().enumerate() {
            if !(b.radius > 0.0) || !b.radius.is_finite() {
                return param_err(format!("ball {i}: radius must be positive"));
            }
            if 2.0 * b.radius >= n {
                return param_err(format!("ball {i}: diameter {} does not fit in {n}", 2.0 * b.radius));
            }
            if b.position.iter().any(|&p| p - b.radius < 0.0 || p + b.radius > n) {
                return param_err(format!("ball {i}: must start inside the domain"));
            }
            if b.velocity.iter().any(|v| !v.is_finite()) {
                return param_err(format!("ball {i}: velocity must be finite"));
            }
        }
        Ok(())
    }
}

/// Advances one coordinate by `v` and mirrors it back into `[lo, hi]`.
fn bounce(p: &mut f64, v: &mut f64, lo: f64, hi: f64) {
    *p += *v;
    loop {
        if *p < lo {
            *p = 2.0 * lo - *p;
            *v = -*v;
        } else if *p > hi {
            *p = 2.0 * hi - *p;
            *v = -*v;
        } else {
            break;
        }
    }
}

/// Ball centres per frame. Frame 0 is the starting position.
pub fn ball_trajectories(spec: &RigidBallSpec) -> Result<Vec<Vec<[f64; 2]>>> {
    spec.validate()?;
    let n = spec.n as f64;
    let mut balls = spec.balls.clone();
    let mut out = Vec::with_capacity(spec.frames);
    for _ in 0..spec.frames {
        out.push(balls.iter().map(|b| b.position).collect());
        for b in &mut balls {
            for k in 0..2 {
                bounce(&mut b.position[k], &mut b.velocity[k], b.radius, n - b.radius);
            }
        }
        for i in 0..balls.len() {
            for j in i + 1..balls.len() {
                let (head, tail) = balls.split_at_mut(j);
                collide(&mut head[i], &mut tail[0], n);
            }
        }
    }
    Ok(out)
}

/// Elastic collision of two overlapping, approaching balls with mass
/// proportional to area. The overlap is removed along the line of centres.
fn collide(a: &mut Ball, b: &mut Ball, n: f64) {
    let d = [b.position[0] - a.position[0], b.position[1] - a.position[1]];
    let dist = d[0].hypot(d[1]);
    let reach = a.radius + b.radius;
    if dist >= reach || dist == 0.0 {
        return;
    }
    let nrm = [d[0] / dist, d[1] / dist];
    let (ma, mb) = (a.radius * a.radius, b.radius * b.radius);
    let (wa, wb) = (mb / (ma + mb), ma / (ma + mb));
    let rel = (b.velocity[0] - a.velocity[0]) * nrm[0] + (b.velocity[1] - a.velocity[1]) * nrm[1];
    if rel < 0.0 {
        for k in 0..2 {
            a.velocity[k] += 2.0 * wa * rel * nrm[k];
            b.velocity[k] -= 2.0 * wb * rel * nrm[k];
        }
    }
    let overlap = reach - dist;
    for k in 0..2 {
        a.position[k] = (a.position[k] - wa * overlap * nrm[k]).clamp(a.radius, n - a.radius);
        b.position[k] = (b.position[k] + wb * overlap * nrm[k]).clamp(b.radius, n - b.radius);
    }
}

fn rasterize_discs(n: usize, discs: &[([f64; 2], f64)], out: &mut [f64]) {
    for y in 0..n {
        for x in 0..n {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let inside = discs.iter().any(|(c, r)| (px - c[0]).powi(2) + (py - c[1]).powi(2) <= r * r);
            out[y * n + x] = if inside { 1.0 } else { 0.0 };
        }
    }
}

/// Binary sequence of the bouncing balls. Pixel `(x, y)` has centre
/// `(x + ½, y + ½)` and is set when it lies within any ball.
pub fn rigid_balls(spec: &RigidBallSpec) -> Result<ImageSequence> {
    let traj = ball_trajectories(spec)?;
    let mut out = ImageSequence::zeros(spec.n, spec.n, spec.frames);
    for (t, centres) in traj.iter().enumerate() {
        let discs: Vec<([f64; 2], f64)> = centres.iter().zip(&spec.balls).map(|(c, b)| (*c, b.radius)).collect();
        rasterize_discs(spec.n, &discs, out.frame_mut(t));
    }
    Ok(out)
}

/// Static disc of the given radius centred in an `n × n` grid, repeated
/// over `frames` frames.
pub fn disk(n: usize, radius: f64, frames: usize) -> Result<ImageSequence> {
    if n == 0 || frames == 0 || !(radius > 0.0) {
        return param_err("disk needs n, frames ≥ 1 and a positive radius");
    }
    let mut img = vec![0.0; n * n];
    let c = n as f64 / 2.0;
    rasterize_discs(n, &[([c, c], radius)], &mut img);
    ImageSequence::from_frames(n, n, &vec![img; frames])
}

/// Bell silhouette on an `n × n` grid: a dome on top of a flaring body.
pub fn bell_shape(n: usize) -> Vec<f64> {
    let nf = n as f64;
    let mut img = vec![0.0; n * n];
    for y in 0..n {
        for x in 0..n {
            let u = (x as f64 + 0.5) / nf - 0.5;
            let v = (y as f64 + 0.5) / nf - 0.5;
            let body = (-0.2..=0.25).contains(&v) && {
                let s = (v + 0.2) / 0.45;
                u.abs() <= 0.12 + 0.16 * s * s
            };
            let dome = u * u + (v + 0.2).powi(2) <= 0.12 * 0.12;
            if body || dome {
                img[y * n + x] = 1.0;
            }
        }
    }
    img
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonRigidSpec {
    pub n: usize,
    /// Binary `n × n` base image.
    pub base: Vec<f64>,
    pub frames: usize,
    pub frequency: f64,
    /// Warp amplitude in pixels.
    pub amplitude: f64,
}

impl NonRigidSpec {
    pub fn bell(n: usize, frames: usize, frequency: f64, amplitude: f64) -> Self {
        Self { n, base: bell_shape(n), frames, frequency, amplitude }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.frames == 0 {
            return param_err("phantom size and frame count must be at least 1");
        }
        if self.base.len() != self.n * self.n {
            return dim_err(format!("base image has {} pixels, expected {}", self.base.len(), self.n * self.n));
        }
        if !self.base.iter().any(|&v| v != 0.0) {
            return param_err("base shape is empty");
        }
        if !(self.frequency > 0.0 && self.frequency.is_finite()) {
            return param_err(format!("frequency must be positive, got {}", self.frequency));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return param_err(format!("amplitude must be non-negative, got {}", self.amplitude));
        }
        Ok(())
    }
}

/// 3×3 dilation (`any`) or erosion (`all`) over in-grid neighbours.
fn morph(img: &[f64], n: usize, dilate: bool) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for y in 0..n {
        for x in 0..n {
            let mut hit = !dilate;
            for yy in y.saturating_sub(1)..(y + 2).min(n) {
                for xx in x.saturating_sub(1)..(x + 2).min(n) {
                    let fg = img[yy * n + xx] != 0.0;
                    if dilate && fg {
                        hit = true;
                    } else if !dilate && !fg {
                        hit = false;
                    }
                }
            }
            out[y * n + x] = if hit { 1.0 } else { 0.0 };
        }
    }
    out
}

/// 3×3 closing; pixels outside the grid are ignored.
pub fn close3(img: &[f64], n: usize) -> Vec<f64> {
    morph(&morph(img, n, true), n, false)
}

/// Sets every background pixel not 4-connected to the border.
pub fn fill_holes(img: &[f64], n: usize) -> Vec<f64> {
    let mut outside = vec![false; n * n];
    let mut queue = VecDeque::new();
    for i in 0..n {
        for &(x, y) in &[(i, 0), (i, n - 1), (0, i), (n - 1, i)] {
            let k = y * n + x;
            if img[k] == 0.0 && !outside[k] {
                outside[k] = true;
                queue.push_back((x, y));
            }
        }
    }
    while let Some((x, y)) = queue.pop_front() {
        let mut visit = |xx: usize, yy: usize| {
            let k = yy * n + xx;
            if img[k] == 0.0 && !outside[k] {
                outside[k] = true;
                queue.push_back((xx, yy));
            }
        };
        if x > 0 {
            visit(x - 1, y);
        }
        if x + 1 < n {
            visit(x + 1, y);
        }
        if y > 0 {
            visit(x, y - 1);
        }
        if y + 1 < n {
            visit(x, y + 1);
        }
    }
    outside.iter().map(|&o| if o { 0.0 } else { 1.0 }).collect()
}

/// Frame `t` (0-based, any integer) of the warped sequence.
pub fn nonrigid_frame(spec: &NonRigidSpec, t: usize) -> Vec<f64> {
    let n = spec.n;
    let nf = n as f64;
    let phase = 2.0 * PI * (t % spec.frames) as f64 / spec.frames as f64;
    let w = 2.0 * PI * spec.frequency / nf;
    let mut warped = vec![0.0; n * n];
    for y in 0..n {
        for x in 0..n {
            let (rx, ry) = (x as f64, y as f64);
            let sx = rx + spec.amplitude * (w * ry + phase).sin();
            let sy = ry + spec.amplitude * (w * rx + phase).sin();
            let (ix, iy) = (sx.round(), sy.round());
            if ix >= 0.0 && iy >= 0.0 && ix < nf && iy < nf {
                warped[y * n + x] = spec.base[iy as usize * n + ix as usize];
            }
        }
    }
    fill_holes(&close3(&warped, n), n)
}

/// Binary sequence of the base shape under a travelling sinusoidal warp.
pub fn nonrigid_bell(spec: &NonRigidSpec) -> Result<ImageSequence> {
    spec.validate()?;
    let frames: Vec<Vec<f64>> = (0..spec.frames).into_par_iter().map(|t| nonrigid_frame(spec, t)).collect();
    ImageSequence::from_frames(spec.n, spec.n, &frames)
}

/// Adds white Gaussian noise at `snr_db` relative to the mean squared
/// sinogram value. An infinite SNR returns the input unchanged.
pub fn add_awgn(sino: &Sinogram, snr_db: f64, seed: u64) -> Result<Sinogram> {
    if snr_db == f64::INFINITY {
        return Ok(sino.clone());
    }
    if !snr_db.is_finite() {
        return param_err(format!("SNR must be finite or +inf, got {snr_db}"));
    }
    let data = sino.as_slice();
    let power = data.iter().map(|v| v * v).sum::<f64>() / data.len() as f64;
    if power == 0.0 {
        return Err(Error::InvalidParameter("cannot add noise at a finite SNR to a zero signal".into()));
    }
    let sigma = (power * 10f64.powf(-snr_db / 10.0)).sqrt();
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let noisy = data.iter().map(|v| v + normal.sample(&mut rng)).collect();
    Sinogram::new(sino.schedule, sino.detector, noisy)
}
