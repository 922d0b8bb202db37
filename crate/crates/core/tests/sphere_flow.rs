use std::sync::Arc;

use proptest::prelude::*;
use tmflow::numerics::Real;
use tmflow::ode_sim::SolverSettings;
use tmflow::sphere::*;

const P: u32 = 256;

fn r(v: f64) -> Real {
    Real::with_prec(v, P)
}

fn norm(y: &[Real]) -> Real {
    y.iter().fold(Real::zero(P), |a, v| a + v.square()).sqrt()
}

fn dot(a: &[Real], b: &[Real]) -> Real {
    a.iter().zip(b).fold(Real::zero(P), |acc, (x, y)| acc + x * y)
}

fn rotation() -> PlanarField {
    Arc::new(|_t: &Real, x: &[Real]| vec![-x[1].clone(), x[0].clone()])
}

fn settings() -> SolverSettings {
    SolverSettings { abs_tol: 1e-14, rel_tol: 1e-14, max_step: 0.01 }
}

#[test]
fn origin_maps_to_the_south_pole() {
    assert_eq!(stereo(&[r(0.0), r(0.0)]), vec![r(-1.0), r(0.0), r(0.0)]);
    assert_eq!(stereo_inv(&[r(-1.0), r(0.0), r(0.0)]).unwrap(), vec![r(0.0), r(0.0)]);
    assert_eq!(stereo_inv(&[r(1.0), r(0.0), r(0.0)]), Err(SphereError::NorthPole));
}

#[test]
fn pushforward_at_the_south_pole_and_of_zero() {
    let south = [r(-1.0), r(0.0), r(0.0)];
    assert_eq!(pushforward_vector(&[r(1.0), r(0.0)], &south), vec![r(0.0), r(2.0), r(0.0)]);
    let zero: PlanarField = Arc::new(|_t: &Real, x: &[Real]| vec![Real::zero(P); x.len()]);
    let y = stereo(&[r(0.3), r(-2.0)]);
    assert!(pushforward(&zero, &r(0.0), &y).unwrap().iter().all(Real::is_zero));
}

#[test]
fn reparametrizations_at_the_origin_and_the_pole() {
    assert_eq!(Reparam::Printed.at(&[r(0.0), r(0.0)]), r(-2.0).exp());
    assert_eq!(Reparam::Decaying.at(&[r(0.0), r(0.0)]), r(-1.0).exp());
    let big = Reparam::Decaying.from_r2(&r(1e6));
    assert!(big < r(-999.0).exp());
    for k in [Reparam::Decaying, Reparam::Printed] {
        let f = SphereField::new(rotation(), 2).with_reparam(k);
        assert!(f.sphere_field(&r(0.0), &[r(1.0), r(0.0), r(0.0)]).iter().all(Real::is_zero));
    }
}

#[test]
fn inverse_clock_starts_at_zero_and_increases() {
    let field = SphereField::new(rotation(), 2);
    let x0 = [r(1.5), r(0.0)];
    assert!(tau_inv(&field, &x0, &r(0.0), &settings()).unwrap().is_zero());
    let run = planar_with_inverse_clock(&field, &x0, &r(2.0), &settings()).unwrap();
    let mut last = Real::zero(P);
    for i in 1..=100 {
        let s = run.tau_inv(&(r(2.0) * Real::ratio(i, 100, P))).unwrap();
        assert!(s > last);
        last = s;
    }
    // the rotation keeps |x| fixed, so K is constant along the orbit
    let want = r(2.0) / Reparam::Decaying.at(&x0);
    assert!((last - &want).abs() < want * r(1e-10));
}

#[test]
fn zero_field_gives_a_still_chart_orbit() {
    let zero: PlanarField = Arc::new(|_t: &Real, x: &[Real]| vec![Real::zero(P); x.len()]);
    let field = SphereField::new(zero, 2);
    let x0 = [r(0.7), r(-0.2)];
    let tr = integrate_chart(&field, &x0, &r(3.0), &settings()).unwrap();
    for z in tr.states() {
        assert_eq!(&z[1..], &x0[..]);
    }
}

#[test]
fn chart_and_ambient_orbits_agree_for_a_rotation() {
    let field = SphereField::new(rotation(), 2).with_reparam(Reparam::Printed);
    let x0 = [r(0.8), r(0.1)];
    let run = run_on_sphere(&field, &x0, &r(1.5), 4, &settings()).unwrap();
    for i in 0..=20 {
        let t = &run.t_end * &Real::ratio(i, 20, P);
        let chart = run.chart.eval(&t).unwrap();
        let y = run.point(&t).unwrap();
        assert!((norm(&y) - 1).abs() < r(1e-10));
        let dist = norm(&stereo(&chart[1..]).iter().zip(&y).map(|(a, b)| a - b).collect::<Vec<_>>());
        assert!(dist < r(1e-9), "t = {}", t.to_short(6));
    }
    let back = run.decode_at(&r(1.5)).unwrap();
    let want = run.planar.x(&r(1.5)).unwrap();
    assert!(norm(&[&back[0] - &want[0], &back[1] - &want[1]]) < r(1e-9));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn stereographic_roundtrip(a in -1e6f64..1e6, b in -1e6f64..1e6) {
        let x = [r(a), r(b)];
        let y = stereo(&x);
        prop_assert!((norm(&y) - 1).abs() < r(1e-60));
        let back = stereo_inv(&y).unwrap();
        let scale = norm(&x) + 1;
        prop_assert!(norm(&[&back[0] - &x[0], &back[1] - &x[1]]) <= scale * r(1e-50));
    }

    #[test]
    fn transported_field_is_tangent(a in -50f64..50.0, b in -50f64..50.0, t in 0f64..5.0) {
        let field = SphereField::new(rotation(), 2).with_reparam(Reparam::Printed);
        let y = stereo(&[r(a), r(b)]);
        let v = field.sphere_field(&r(t), &y);
        prop_assert!(dot(&v, &y).abs() <= (norm(&v) + 1) * r(1e-60));
    }
}
