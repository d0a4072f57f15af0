//! Smooth Heaviside / Dirac pair and the Heaviside-width heuristic.

use std::f64::consts::PI;

use crate::error::{param_err, Error, Result};
use crate::volume::ImageSequence;

fn check_width(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        param_err(format!("Heaviside width must be positive and finite, got {epsilon}"))
    }
}

/// Smooth step with transition half-width `epsilon`.
pub fn heaviside(s: f64, epsilon: f64) -> Result<f64> {
    check_width(epsilon)?;
    Ok(heaviside_unchecked(s, epsilon))
}

/// Derivative of [`heaviside`]: a raised-cosine bump of unit mass.
pub fn dirac(s: f64, epsilon: f64) -> Result<f64> {
    check_width(epsilon)?;
    Ok(dirac_unchecked(s, epsilon))
}

/// Derivative of [`dirac`].
pub fn dirac_prime(s: f64, epsilon: f64) -> Result<f64> {
    check_width(epsilon)?;
    Ok(dirac_prime_unchecked(s, epsilon))
}

#[inline]
pub(crate) fn heaviside_unchecked(s: f64, eps: f64) -> f64 {
    if s <= -eps {
        0.0
    } else if s >= eps {
        1.0
    } else {
        0.5 * (1.0 + s / eps + (PI * s / eps).sin() / PI)
    }
}

#[inline]
pub(crate) fn dirac_unchecked(s: f64, eps: f64) -> f64 {
    if s.abs() <= eps {
        (1.0 + (PI * s / eps).cos()) / (2.0 * eps)
    } else {
        0.0
    }
}

#[inline]
pub(crate) fn dirac_prime_unchecked(s: f64, eps: f64) -> f64 {
    if s.abs() <= eps {
        -PI / (2.0 * eps * eps) * (PI * s / eps).sin()
    } else {
        0.0
    }
}

/// Exact step used for the final binarization: `φ ≥ 0` is inside.
#[inline]
pub fn sharp_step(s: f64) -> f64 {
    if s >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Largest gradient magnitude of a spatiotemporal field.
///
/// Central differences with unit spacing along x, y and t; one-sided at the
/// boundaries, zero along axes of length 1.
pub fn max_gradient_norm(phi: &ImageSequence) -> f64 {
    let (nx, ny, nt) = (phi.nx(), phi.ny(), phi.frames());
    let d = phi.as_slice();
    let idx = |x: usize, y: usize, t: usize| (t * ny + y) * nx + x;
    let diff = |i: usize, n: usize, at: &dyn Fn(usize) -> f64| -> f64 {
        if n == 1 {
            0.0
        } else if i == 0 {
            at(1) - at(0)
        } else if i == n - 1 {
            at(n - 1) - at(n - 2)
        } else {
            0.5 * (at(i + 1) - at(i - 1))
        }
    };
    let mut best: f64 = 0.0;
    for t in 0..nt {
        for y in 0..ny {
            for x in 0..nx {
                let gx = diff(x, nx, &|k| d[idx(k, y, t)]);
                let gy = diff(y, ny, &|k| d[idx(x, k, t)]);
                let gt = diff(t, nt, &|k| d[idx(x, y, k)]);
                best = best.max((gx * gx + gy * gy + gt * gt).sqrt());
            }
        }
    }
    best
}

/// `ε = κ · max |∇φ|`.
pub fn epsilon_from_phi(phi: &ImageSequence, kappa: f64) -> Result<f64> {
    if !(kappa > 0.0 && kappa <= 1.0) {
        return param_err(format!("kappa must lie in (0, 1], got {kappa}"));
    }
    let g = max_gradient_norm(phi);
    if g <= 0.0 || !g.is_finite() {
        return Err(Error::FlatLevelSet);
    }
    Ok(kappa * g)
}

/// Level-set function with its current Heaviside width and annealing factor.
#[derive(Debug, Clone)]
pub struct LevelSetState {
    pub phi: ImageSequence,
    pub epsilon: f64,
    pub kappa: f64,
}

impl LevelSetState {
    pub fn new(phi: ImageSequence, kappa: f64) -> Result<Self> {
        let epsilon = epsilon_from_phi(&phi, kappa)?;
        Ok(Self { phi, epsilon, kappa })
    }

    /// Multiplies `κ` by `decay` and re-derives `ε` from the current field.
    pub fn anneal(&mut self, decay: f64) -> Result<()> {
        if !(decay > 0.0 && decay < 1.0) {
            return param_err(format!("decay must lie in (0, 1), got {decay}"));
        }
        self.kappa *= decay;
        self.epsilon = epsilon_from_phi(&self.phi, self.kappa)?;
        Ok(())
    }

    /// Binary image by the exact step.
    pub fn binarize(&self) -> ImageSequence {
        self.phi.map(sharp_step)
    }
}
