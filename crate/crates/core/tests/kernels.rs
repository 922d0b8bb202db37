use proptest::prelude::*;
use tmflow::kernels::{gate_phi, psi_correct, r_floor, sigma, sigma_iter, theta, xi, Kernels};
use tmflow::numerics::{quad_adaptive, Interval, Real};

const P: u32 = 256;

fn r(v: f64) -> Real {
    Real::with_prec(v, P)
}

#[test]
fn normalizers_are_positive_and_lambda_is_a_contraction() {
    let k = Kernels::at(P);
    assert!(k.c_bar > 0 && k.c_xi > 0);
    assert!(k.lambda_quarter > 0 && k.lambda_quarter < 1);
    let lam = Real::pi(P) * 2 / 5 - 1;
    assert!((&k.lambda_quarter - lam).abs() < r(1e-70));
}

#[test]
fn psi_fixes_integers_and_contracts_point_two() {
    for n in [-40, -1, 0, 3, 1000] {
        assert_eq!(psi_correct(&r(n as f64), &r(2.5)), n as f64);
    }
    let v = psi_correct(&Real::parse("0.2", P).unwrap(), &r(0.0));
    assert!(v.abs() < Real::parse("0.2", P).unwrap());
}

#[test]
fn psi_near_point_two_is_tiny_and_enclosed() {
    let k = Kernels::at(P);
    let y = r(10.0);
    let bound = r(-10.0).exp() * Real::parse("0.21", P).unwrap();
    for i in 0..=20 {
        let x = Real::ratio(19, 100, P) + Real::ratio(i, 1000, P);
        let v = k.psi(&x, &y);
        assert!(v.abs() < bound);
        let lo = Interval::new(Real::parse("0.19", P).unwrap(), Real::parse("0.21", P).unwrap());
        assert!(k.psi_interval(&lo, &Interval::point(&y)).unwrap().contains(&v));
    }
}

#[test]
fn sigma_values() {
    assert_eq!(sigma(&r(7.0)), 7.0);
    assert!((sigma(&r(0.25)) - Real::parse("0.05", P).unwrap()).abs() < r(1e-70));
    let k = Kernels::at(P);
    assert_eq!(sigma_iter(&r(0.1), 3), k.sigma(&k.sigma(&k.sigma(&r(0.1)))));
}

#[test]
fn theta_values_and_range() {
    assert_eq!(theta(&r(-3.0)), 0.0);
    assert_eq!(theta(&r(0.0)), 0.0);
    assert!((theta(&r(1.0)) - Real::e(P).recip()).abs() < r(1e-70));
    for i in 1..=1000 {
        let v = theta(&r(i as f64 * 0.05));
        assert!(v > 0 && v < 1);
    }
}

#[test]
fn r_plateaus_and_midpoints() {
    assert_eq!(r_floor(&r(3.2)), 3.0);
    assert_eq!(r_floor(&r(3.25)), 3.0);
    assert_eq!(r_floor(&r(0.0)), 0.0);
    for n in -5..=5 {
        let v = r_floor(&r(n as f64 + 0.5));
        assert!(v > n && v < n + 1);
    }
}

#[test]
fn xi_plateaus() {
    assert_eq!(xi(&r(0.0)), 0.0);
    assert_eq!(xi(&r(1.0)), 1.0);
    let mid = xi(&r(0.5));
    assert!(mid > 0 && mid < 1);
}

#[test]
fn gate_at_origin_and_on_both_halves() {
    assert_eq!(gate_phi(&r(0.0), &r(10.0)), 0.0);
    let y = r(8.0);
    let q = quad_adaptive(&|t: &Real| gate_phi(t, &y), &r(0.0), &r(0.5), &r(1e-30)).unwrap();
    assert!(q > 0.128);
    let bound = r(-8.0).exp() / 8;
    for i in 0..=400 {
        let t = r(0.5) + Real::ratio(i, 800, P);
        assert!(gate_phi(&t, &y).abs() < bound);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn psi_strict_contraction(k in -1000i64..=1000, d in -0.2f64..0.2, y in 0f64..60.0) {
        prop_assume!(d != 0.0);
        let x = Real::from_i64(k, P) + r(d);
        let out = psi_correct(&x, &r(y));
        prop_assert!((out - Real::from_i64(k, P)).abs() < r(-y).exp() * r(d.abs()));
    }

    #[test]
    fn sigma_contraction_factor(n in -50i64..=50, d in -0.25f64..=0.25) {
        let k = Kernels::at(P);
        let x = Real::from_i64(n, P) + r(d);
        prop_assert!((k.sigma(&x) - Real::from_i64(n, P)).abs() <= &k.lambda_quarter * &r(d.abs()));
    }

    #[test]
    fn r_is_exact_on_plateaus(n in -100i64..=100, d in -0.25f64..=0.25) {
        prop_assert_eq!(r_floor(&(Real::from_i64(n, P) + r(d))), Real::from_i64(n, P));
    }

    #[test]
    fn gate_is_one_periodic(t in -20f64..20.0, y in 0f64..30.0) {
        let a = gate_phi(&r(t), &r(y));
        let b = gate_phi(&(r(t) + 1), &r(y));
        prop_assert!((a - b).abs() <= r(1e-60));
    }

    #[test]
    fn interval_evaluation_encloses_points(x in -50f64..50.0, y in 0f64..40.0) {
        let k = Kernels::at(P);
        let (px, py) = (r(x), r(y));
        let (ix, iy) = (Interval::point(&px), Interval::point(&py));
        prop_assert!(k.psi_interval(&ix, &iy).unwrap().contains(&k.psi(&px, &py)));
        prop_assert!(k.sigma_interval(&ix).contains(&k.sigma(&px)));
        prop_assert!(k.sigma_iter_interval(&ix, 3).contains(&k.sigma_iter(&px, 3)));
        prop_assert!(k.theta_interval(&ix).contains(&k.theta(&px)));
        prop_assert!(k.r_interval(&ix).contains(&k.r(&px)));
        prop_assert!(k.xi_interval(&ix).contains(&k.xi(&px)));
        prop_assert!(k.s_interval(&ix).contains(&k.s(&px)));
        prop_assert!(k.gate_phi_interval(&ix, &iy).unwrap().contains(&k.gate_phi(&px, &py)));
    }
}

#[test]
fn interval_soundness_on_a_hundred_thousand_inputs() {
    use rand::{Rng, SeedableRng};
    let k = Kernels::at(P);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100_000 {
        let (x, y) = (r(rng.gen_range(-50.0..50.0)), r(rng.gen_range(0.0..40.0)));
        let (ix, iy) = (Interval::point(&x), Interval::point(&y));
        assert!(k.psi_interval(&ix, &iy).unwrap().contains(&k.psi(&x, &y)), "psi at {x}, {y}");
        assert!(k.sigma_interval(&ix).contains(&k.sigma(&x)), "sigma at {x}");
        assert!(k.sigma_iter_interval(&ix, 2).contains(&k.sigma_iter(&x, 2)), "sigma_iter at {x}");
        assert!(k.theta_interval(&ix).contains(&k.theta(&x)), "theta at {x}");
        assert!(k.v_interval(&ix).contains(&k.v(&x)), "v at {x}");
        assert!(k.r_interval(&ix).contains(&k.r(&x)), "r at {x}");
        assert!(k.xi_interval(&ix).contains(&k.xi(&x)), "xi at {x}");
        assert!(k.s_interval(&ix).contains(&k.s(&x)), "s at {x}");
        assert!(k.gate_phi_interval(&ix, &iy).unwrap().contains(&k.gate_phi(&x, &y)), "phi at {x}, {y}");
    }
}
