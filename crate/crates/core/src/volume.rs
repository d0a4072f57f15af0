//! Spatiotemporal image volumes.
//!
//! Frames are stored frame-major; within a frame pixels are row-major with
//! `x` fastest, so voxel `(x, y, t)` lives at `(t * ny + y) * nx + x`.

use crate::error::{dim_err, Result};

/// A sequence of `frames` images on an `nx × ny` pixel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSequence {
    nx: usize,
    ny: usize,
    frames: usize,
    data: Vec<f64>,
}

impl ImageSequence {
    pub fn zeros(nx: usize, ny: usize, frames: usize) -> Self {
        Self { nx, ny, frames, data: vec![0.0; nx * ny * frames] }
    }

    pub fn filled(nx: usize, ny: usize, frames: usize, value: f64) -> Self {
        Self { nx, ny, frames, data: vec![value; nx * ny * frames] }
    }

    pub fn from_vec(nx: usize, ny: usize, frames: usize, data: Vec<f64>) -> Result<Self> {
        if nx == 0 || ny == 0 || frames == 0 {
            return dim_err(format!("empty volume {nx}x{ny}x{frames}"));
        }
        if data.len() != nx * ny * frames {
            return dim_err(format!("volume {nx}x{ny}x{frames} needs {} values, got {}", nx * ny * frames, data.len()));
        }
        Ok(Self { nx, ny, frames, data })
    }

    /// Builds a sequence by stacking equally sized frames.
    pub fn from_frames(nx: usize, ny: usize, frames: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(nx * ny * frames.len());
        for (t, f) in frames.iter().enumerate() {
            if f.len() != nx * ny {
                return dim_err(format!("frame {t} has {} pixels, expected {}", f.len(), nx * ny));
            }
            data.extend_from_slice(f);
        }
        Self::from_vec(nx, ny, frames.len(), data)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn frame_len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        let n = self.frame_len();
        &self.data[t * n..(t + 1) * n]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [f64] {
        let n = self.frame_len();
        &mut self.data[t * n..(t + 1) * n]
    }

    pub fn frames_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.frame_len())
    }

    pub fn get(&self, x: usize, y: usize, t: usize) -> f64 {
        self.data[(t * self.ny + y) * self.nx + x]
    }

    pub fn set(&mut self, x: usize, y: usize, t: usize, v: f64) {
        let (nx, ny) = (self.nx, self.ny);
        self.data[(t * ny + y) * nx + x] = v;
    }

    pub fn same_shape(&self, other: &ImageSequence) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.frames == other.frames
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { data: self.data.iter().map(|&v| f(v)).collect(), ..*self }
    }

    /// Copy with frames reordered: frame `i` of the result is frame `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.frames {
            return dim_err("permutation length differs from frame count");
        }
        let mut out = Vec::with_capacity(self.data.len());
        for &t in order {
            if t >= self.frames {
                return dim_err(format!("frame index {t} out of range"));
            }
            out.extend_from_slice(self.frame(t));
        }
        Self::from_vec(self.nx, self.ny, self.frames, out)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}
