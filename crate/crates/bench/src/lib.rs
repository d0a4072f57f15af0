//! Fixtures shared by the kernel benchmarks.

use dynshape::phantoms::{rigid_balls, RigidBallSpec};
use dynshape::projector::forward_sequence;
use dynshape::recon::dss::ShapeProblem;
use dynshape::{AngleSchedule, DetectorArray, ImageGrid, ImageSequence, Sinogram};

/// Noiseless single-shot measurement of the default rigid phantom.
pub fn rigid_measurement(n: usize, frames: usize) -> (ImageGrid, ImageSequence, Sinogram) {
    let grid = ImageGrid::square(n).unwrap();
    let gt = rigid_balls(&RigidBallSpec::default_for(n, frames)).unwrap();
    let sched = AngleSchedule::new(0.0, 5.0, frames).unwrap();
    let sino = forward_sequence(&gt, &grid, &sched, &DetectorArray::default_for(&grid)).unwrap();
    (grid, gt, sino)
}

/// Shape problem on the rigid measurement with its starting coefficients
/// (the analysis of `2 gt − 1`).
pub fn shape_problem(n: usize, frames: usize, fraction: f64) -> (ShapeProblem, Vec<f64>) {
    let (grid, gt, sino) = rigid_measurement(n, frames);
    let p = ShapeProblem::dynamic(&sino, &grid, fraction).unwrap();
    let signed: Vec<f64> = gt.as_slice().iter().map(|v| 2.0 * v - 1.0).collect();
    let alpha = p.basis().analyze(&signed).unwrap();
    (p, alpha)
}
