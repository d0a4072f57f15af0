//! Euclidean projection onto the ℓ1 ball, via Condat's simplex projection.

use crate::error::{param_err, Result};

/// Soft-threshold level `θ` such that `Σ max(|v_i| − θ, 0) = radius`,
/// computed with Condat's linear-time simplex projection on `|v|`.
/// Assumes `Σ |v_i| > radius > 0`.
fn simplex_threshold(abs: &[f64], radius: f64) -> f64 {
    let mut active: Vec<f64> = Vec::with_capacity(abs.len());
    let mut waiting: Vec<f64> = Vec::new();
    active.push(abs[0]);
    let mut rho = abs[0] - radius;
    for &y in &abs[1..] {
        if y > rho {
            rho += (y - rho) / (active.len() + 1) as f64;
            if rho > y - radius {
                active.push(y);
            } else {
                waiting.append(&mut active);
                active.push(y);
                rho = y - radius;
            }
        }
    }
    for y in waiting {
        if y > rho {
            active.push(y);
            rho += (y - rho) / active.len() as f64;
        }
    }
    loop {
        let before = active.len();
        let mut i = 0;
        while i < active.len() {
            let y = active[i];
            if y <= rho {
                active.swap_remove(i);
                rho += (rho - y) / active.len() as f64;
            } else {
                i += 1;
            }
        }
        if active.len() == before {
            break;
        }
    }
    rho.max(0.0)
}

/// Projects `v` onto `{ w : ‖w‖₁ ≤ tau }`.
pub fn project_l1_ball(v: &[f64], tau: f64) -> Result<Vec<f64>> {
    let mut out = v.to_vec();
    project_l1_ball_in_place(&mut out, tau)?;
    Ok(out)
}

pub fn project_l1_ball_in_place(v: &mut [f64], tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return param_err(format!("l1 radius must be positive, got {tau}"));
    }
    let norm: f64 = v.iter().map(|x| x.abs()).sum();
    if norm <= tau {
        return Ok(());
    }
    let abs: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    let theta = simplex_threshold(&abs, tau);
    for x in v.iter_mut() {
        let m = (x.abs() - theta).max(0.0);
        *x = m.copysign(*x);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_point_unchanged() {
        assert_eq!(project_l1_ball(&[0.3, -0.2], 1.0).unwrap(), vec![0.3, -0.2]);
    }

    #[test]
    fn single_coordinate_shrinks() {
        assert_eq!(project_l1_ball(&[3.0, 0.0], 1.0).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn two_one_goes_to_vertex() {
        let p = project_l1_ball(&[2.0, 1.0], 1.0).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1].abs() < 1e-15);
    }

    #[test]
    fn signs_are_kept() {
        let p = project_l1_ball(&[-2.0, 3.0, 0.5], 2.0).unwrap();
        assert!((p[0] + 0.5).abs() < 1e-12);
        assert!((p[1] - 1.5).abs() < 1e-12);
        assert_eq!(p[2], 0.0);
    }

    #[test]
    fn rejects_bad_radius() {
        assert!(project_l1_ball(&[1.0], 0.0).is_err());
        assert!(project_l1_ball(&[1.0], -1.0).is_err());
    }
}
