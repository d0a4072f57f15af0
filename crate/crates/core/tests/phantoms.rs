use dynshape::phantoms::{
    add_awgn, ball_trajectories, bell_shape, nonrigid_bell, nonrigid_frame, rigid_balls, Ball, NonRigidSpec,
    RigidBallSpec,
};
use dynshape::projector::{AngleSchedule, DetectorArray, Sinogram};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Position of a point bouncing between `lo` and `hi`, by unfolding the
/// motion onto a line and folding it back with period `2 (hi − lo)`.
fn folded(x0: f64, v: f64, k: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    let m = (x0 - lo + v * k).rem_euclid(2.0 * span);
    lo + if m <= span { m } else { 2.0 * span - m }
}

#[test]
fn ball_follows_bounce_kinematics() {
    let spec = RigidBallSpec {
        n: 64,
        frames: 200,
        balls: vec![Ball { radius: 4.0, position: [32.0, 32.0], velocity: [1.0, 0.0] }],
    };
    let traj = ball_trajectories(&spec).unwrap();
    for (k, p) in traj.iter().enumerate() {
        let expect = folded(32.0, 1.0, k as f64, 4.0, 60.0);
        assert!((p[0][0] - expect).abs() < 1e-9, "frame {k}: {} vs {expect}", p[0][0]);
        assert_eq!(p[0][1], 32.0);
        if k <= 28 {
            assert_eq!(p[0][0], 32.0 + k as f64);
        }
    }
}

#[test]
fn oblique_ball_stays_inside_and_matches_oracle() {
    let spec = RigidBallSpec {
        n: 50,
        frames: 500,
        balls: vec![Ball { radius: 3.5, position: [10.0, 20.0], velocity: [1.3, -0.7] }],
    };
    for (k, p) in ball_trajectories(&spec).unwrap().iter().enumerate() {
        let (x, y) = (p[0][0], p[0][1]);
        assert!((x - folded(10.0, 1.3, k as f64, 3.5, 46.5)).abs() < 1e-9);
        assert!((y - folded(20.0, -0.7, k as f64, 3.5, 46.5)).abs() < 1e-9);
    }
}

#[test]
fn rigid_area_is_stable_and_binary() {
    for (n, t) in [(128, 300), (256, 100)] {
        let seq = rigid_balls(&RigidBallSpec::default_for(n, t)).unwrap();
        assert!(seq.as_slice().iter().all(|&v| v == 0.0 || v == 1.0));
        let areas: Vec<f64> = seq.frames_iter().map(|f| f.iter().sum()).collect();
        let mean = areas.iter().sum::<f64>() / t as f64;
        for a in &areas {
            assert!((a - mean).abs() <= 0.02 * mean, "n {n}: area {a} vs mean {mean}");
        }
    }
}

#[test]
fn zero_amplitude_reproduces_base_shape() {
    let spec = NonRigidSpec::bell(48, 6, 10.0, 0.0);
    let seq = nonrigid_bell(&spec).unwrap();
    for f in seq.frames_iter() {
        assert_eq!(f, bell_shape(48).as_slice());
    }
}

#[test]
fn warp_is_periodic_in_frames() {
    let spec = NonRigidSpec::bell(40, 12, 3.0, 2.0);
    for t in 0..12 {
        assert_eq!(nonrigid_frame(&spec, t), nonrigid_frame(&spec, t + 12));
    }
}

#[test]
fn area_changes_smoothly_at_full_scale() {
    let spec = NonRigidSpec::bell(512, 360, 10.0, 2.0);
    let seq = nonrigid_bell(&spec).unwrap();
    assert!(seq.as_slice().iter().all(|&v| v == 0.0 || v == 1.0));
    let areas: Vec<f64> = seq.frames_iter().map(|f| f.iter().sum()).collect();
    for t in 0..360 {
        let (a, b) = (areas[t], areas[(t + 1) % 360]);
        assert!((a - b).abs() <= 0.05 * a, "frames {t}->{}: {a} vs {b}", t + 1);
    }
}

fn random_sino(rows: usize, n_det: usize, seed: u64) -> Sinogram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * n_det).map(|_| rng.random::<f64>() * 10.0).collect();
    Sinogram::new(AngleSchedule::new(0.0, 1.0, rows).unwrap(), DetectorArray::new(n_det, 1.0).unwrap(), data).unwrap()
}

#[test]
fn awgn_hits_target_snr() {
    let clean = random_sino(400, 300, 1);
    let power: f64 = clean.as_slice().iter().map(|v| v * v).sum::<f64>() / 120_000.0;
    for snr in [0.0, 20.0, 40.0] {
        let noisy = add_awgn(&clean, snr, 9).unwrap();
        let noise: f64 =
            noisy.as_slice().iter().zip(clean.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / 120_000.0;
        let measured = 10.0 * (power / noise).log10();
        assert!((measured - snr).abs() <= 0.5, "target {snr}, measured {measured}");
    }
}

#[test]
fn awgn_determinism_and_edge_cases() {
    let clean = random_sino(20, 10, 2);
    assert_eq!(add_awgn(&clean, 30.0, 5).unwrap(), add_awgn(&clean, 30.0, 5).unwrap());
    assert_ne!(add_awgn(&clean, 30.0, 5).unwrap(), add_awgn(&clean, 30.0, 6).unwrap());
    assert_eq!(add_awgn(&clean, f64::INFINITY, 5).unwrap(), clean);
    let zero = Sinogram::zeros(clean.schedule, clean.detector);
    assert!(add_awgn(&zero, 30.0, 1).is_err());
    assert_eq!(add_awgn(&zero, f64::INFINITY, 1).unwrap(), zero);
}

#[test]
fn equal_balls_exchange_velocities_head_on() {
    let spec = RigidBallSpec {
        n: 100,
        frames: 40,
        balls: vec![
            Ball { radius: 5.0, position: [30.0, 50.0], velocity: [1.0, 0.0] },
            Ball { radius: 5.0, position: [70.0, 50.0], velocity: [-1.0, 0.0] },
        ],
    };
    let traj = ball_trajectories(&spec).unwrap();
    for p in &traj {
        assert!(p[1][0] - p[0][0] >= 10.0 - 1e-9);
    }
    let last = traj.last().unwrap();
    assert!(last[0][0] < 30.0 && last[1][0] > 70.0);
}
