//! Smoothed isotropic total variation `Σ √(|∇x|² + μ²)` with forward
//! differences and Neumann boundary (the difference past the last row or
//! column is zero).

/// Value of the smoothed TV of an `nx × ny` image.
pub fn tv_value(img: &[f64], nx: usize, ny: usize, mu: f64) -> f64 {
    let mut acc = 0.0;
    for y in 0..ny {
        for x in 0..nx {
            let i = y * nx + x;
            let dx = if x + 1 < nx { img[i + 1] - img[i] } else { 0.0 };
            let dy = if y + 1 < ny { img[i + nx] - img[i] } else { 0.0 };
            acc += (dx * dx + dy * dy + mu * mu).sqrt();
        }
    }
    acc
}

/// Adds `weight · ∇TV_μ(img)` into `grad` and returns the TV value.
pub fn tv_add_gradient(img: &[f64], nx: usize, ny: usize, mu: f64, weight: f64, grad: &mut [f64]) -> f64 {
    let mut acc = 0.0;
    for y in 0..ny {
        for x in 0..nx {
            let i = y * nx + x;
            let dx = if x + 1 < nx { img[i + 1] - img[i] } else { 0.0 };
            let dy = if y + 1 < ny { img[i + nx] - img[i] } else { 0.0 };
            let n = (dx * dx + dy * dy + mu * mu).sqrt();
            acc += n;
            let (qx, qy) = (weight * dx / n, weight * dy / n);
            if x + 1 < nx {
                grad[i + 1] += qx;
                grad[i] -= qx;
            }
            if y + 1 < ny {
                grad[i + nx] += qy;
                grad[i] -= qy;
            }
        }
    }
    acc
}
