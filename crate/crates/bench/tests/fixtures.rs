use dynshape_bench::{rigid_measurement, shape_problem};

#[test]
fn measurement_has_one_row_per_frame() {
    let (grid, gt, sino) = rigid_measurement(16, 6);
    assert_eq!(gt.frames(), 6);
    assert_eq!(sino.frames(), 6);
    assert_eq!(sino.detector.n_det, grid.nx);
    assert!(sino.as_slice().iter().any(|&v| v > 0.0));
}

#[test]
fn shape_fixture_gradient_is_finite() {
    let (p, alpha) = shape_problem(16, 6, 0.5);
    assert_eq!(alpha.len(), p.n_coeffs());
    let (v, g) = p.objective_and_gradient(&alpha, 0.1).unwrap();
    assert!(v.is_finite());
    assert!(g.iter().all(|x| x.is_finite()));
}
