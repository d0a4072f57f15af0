use dynshape::levelset::{dirac, heaviside};
use dynshape::recon::l1ball::project_l1_ball;
use dynshape::transforms::{make_mask, DctBasis, DctDims};
use proptest::prelude::*;

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Bisection on `θ ↦ Σ max(|v_i| − θ, 0) − τ`, refined to the exact
/// breakpoint formula on the bracketing interval.
fn threshold_oracle(v: &[f64], tau: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, v.iter().fold(0.0f64, |m, x| m.max(x.abs())));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let s: f64 = v.iter().map(|x| (x.abs() - mid).max(0.0)).sum();
        if s > tau {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let active: Vec<f64> = v.iter().map(|x| x.abs()).filter(|&a| a > lo).collect();
    (active.iter().sum::<f64>() - tau) / active.len() as f64
}

fn vec_strategy() -> impl Strategy<Value = Vec<f64>> {
    (2usize..=100).prop_flat_map(|n| prop::collection::vec(-10.0f64..10.0, n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn l1_projection_contracts(v in vec_strategy(), w in vec_strategy(), frac in 0.01f64..1.5) {
        let tau = frac * l1(&v).max(1e-3);
        let p = project_l1_ball(&v, tau).unwrap();
        prop_assert!(l1(&p) <= tau * (1.0 + 1e-12));
        let pp = project_l1_ball(&p, tau).unwrap();
        prop_assert!(dist(&p, &pp) <= 1e-12 * tau.max(1.0));
        if l1(&v) > tau {
            let theta = threshold_oracle(&v, tau);
            for (pi, vi) in p.iter().zip(&v) {
                let expect = (vi.abs() - theta).max(0.0).copysign(*vi);
                prop_assert!((pi - expect).abs() <= 1e-10, "{pi} vs {expect}");
            }
        } else {
            prop_assert_eq!(&p, &v);
        }
        let n = v.len().min(w.len());
        let (a, b) = (&v[..n], &w[..n]);
        let (pa, pb) = (project_l1_ball(a, tau).unwrap(), project_l1_ball(b, tau).unwrap());
        prop_assert!(dist(&pa, &pb) <= dist(a, b) * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn dct_round_trip_and_parseval(nx in 1usize..9, ny in 1usize..9, nt in 1usize..6, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let dims = DctDims::new(nx, ny, nt).unwrap();
        let v: Vec<f64> = (0..dims.len()).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let basis = DctBasis::full(dims).unwrap();
        let c = basis.analyze(&v).unwrap();
        let back = basis.synthesize(&c).unwrap();
        let err = v.iter().zip(&back).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        prop_assert!(err <= 1e-10);
        let (nv, nc) = (v.iter().map(|x| x * x).sum::<f64>().sqrt(), c.iter().map(|x| x * x).sum::<f64>().sqrt());
        prop_assert!((nv - nc).abs() <= 1e-10 * nv.max(1.0));
    }

    #[test]
    fn truncated_dct_is_adjoint_pair(nx in 1usize..9, ny in 1usize..9, nt in 1usize..6, frac in 0.1f64..1.0, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let dims = DctDims::new(nx, ny, nt).unwrap();
        let basis = DctBasis::new(dims, make_mask(&dims, frac).unwrap()).unwrap();
        let a: Vec<f64> = (0..basis.mask().len()).map(|_| rng.random::<f64>() - 0.5).collect();
        let phi: Vec<f64> = (0..dims.len()).map(|_| rng.random::<f64>() - 0.5).collect();
        let lhs: f64 = basis.synthesize(&a).unwrap().iter().zip(&phi).map(|(x, y)| x * y).sum();
        let rhs: f64 = basis.analyze(&phi).unwrap().iter().zip(&a).map(|(x, y)| x * y).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()).max(1e-3));
    }

    #[test]
    fn heaviside_symmetry_and_monotonicity(s in -2.0f64..2.0, d in 0.0f64..1.0, eps in 0.01f64..1.0) {
        let h = heaviside(s, eps).unwrap();
        prop_assert!((0.0..=1.0).contains(&h));
        prop_assert!((heaviside(-s, eps).unwrap() - (1.0 - h)).abs() <= 1e-15);
        prop_assert!(heaviside(s + d, eps).unwrap() >= h);
    }

    #[test]
    fn dirac_is_heaviside_derivative(u in -0.99f64..0.99, eps in 0.05f64..2.0) {
        let s = u * eps;
        let h = 1e-6 * eps;
        let fd = (heaviside(s + h, eps).unwrap() - heaviside(s - h, eps).unwrap()) / (2.0 * h);
        prop_assert!((fd - dirac(s, eps).unwrap()).abs() <= 1e-6 * (1.0 + 1.0 / eps));
    }
}

#[test]
fn heaviside_sharpens_to_step() {
    for s in [-0.3, -0.01, 0.02, 0.5] {
        let h = heaviside(s, 1e-4).unwrap();
        assert_eq!(h, if s > 0.0 { 1.0 } else { 0.0 });
    }
}
