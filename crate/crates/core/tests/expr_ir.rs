use proptest::prelude::*;
use tmflow::expr::{build_kernel, build_kernel_named, compose, int, ExprError, Function, KernelId};
use tmflow::kernels::Kernels;
use tmflow::numerics::{Interval, Real};
use tmflow::robust_map::{upsilon_k, Variant};

const P: u32 = 256;

fn r(v: f64) -> Real {
    Real::with_prec(v, P)
}

/// One rounding of `2^-(P-4)` per node, relative to `max(1, |want|)`.
fn agrees(f: &Function, got: &Real, want: &Real) -> bool {
    let slack = Real::one(P).max(&want.abs()) * Real::from_i64(f.body.size() as i64, P) / Real::from_i64(2, P).powi(P as i32 - 4);
    (got - want).abs() <= slack
}

fn kernel_agrees(id: KernelId, args: &[Real], want: &Real) -> bool {
    let f = build_kernel(id);
    agrees(&f, &f.eval(args).unwrap(), want)
}

#[test]
fn printed_forms() {
    assert_eq!(build_kernel(KernelId::Sigma).to_infix(), "x - 0.2*sin(2*pi*x)");
    let phi = build_kernel(KernelId::GatePhi).to_infix();
    assert!(phi.contains("arcsin(sin(2*pi*"), "{phi}");
    assert!(phi.contains("*(1 - exp(-y - 2)))"), "{phi}");
}

#[test]
fn constants_and_fixed_points() {
    assert_eq!(build_kernel(KernelId::Sigma).eval(&[r(7.0)]).unwrap(), 7.0);
    assert_eq!(Function::new(&["x"], int(5)).eval(&[r(-3.0)]).unwrap(), 5.0);
    assert_eq!(build_kernel(KernelId::Pair2).eval(&[r(0.0), r(1.0)]).unwrap(), 1.0);
}

#[test]
fn names_resolve_and_unknown_names_fail() {
    assert_eq!(build_kernel_named("sigma_iter(4)").unwrap(), build_kernel(KernelId::SigmaIter(4)));
    assert_eq!(build_kernel_named("upsilon_k(3)").unwrap().arity(), 3);
    assert!(matches!(build_kernel_named("gamma"), Err(ExprError::UnknownKernel(_))));
    assert!(matches!(build_kernel_named("upsilon_k(1)"), Err(ExprError::UnknownKernel(_))));
}

#[test]
fn composition_semantics() {
    let sigma = build_kernel(KernelId::Sigma);
    let same = compose(&Function::identity(), std::slice::from_ref(&sigma)).unwrap();
    let thrice = compose(&sigma, &[compose(&sigma, std::slice::from_ref(&sigma)).unwrap()]).unwrap();
    let k = Kernels::at(P);
    for i in 0..1000 {
        let x = r(-5.0 + i as f64 * 0.0101);
        assert_eq!(same.eval(std::slice::from_ref(&x)).unwrap(), sigma.eval(std::slice::from_ref(&x)).unwrap());
        assert!(agrees(&thrice, &thrice.eval(std::slice::from_ref(&x)).unwrap(), &k.sigma_iter(&x, 3)));
    }
    assert!(matches!(compose(&sigma, &[sigma.clone(), sigma.clone()]), Err(ExprError::ArityMismatch { .. })));
    assert!(matches!(sigma.eval(&[]), Err(ExprError::ArityMismatch { .. })));
}

#[test]
fn pipeline_stage_evaluates_like_the_map() {
    let k = Kernels::at(P);
    let stage = compose(&build_kernel(KernelId::SigmaIter(2)), &[build_kernel(KernelId::UpsilonK(3))]).unwrap();
    let xs = [r(1.1), r(0.05), r(2.93)];
    let want = k.sigma_iter(&upsilon_k(&k, &xs, Variant::Analytic), 2);
    assert!(agrees(&stage, &stage.eval(&xs).unwrap(), &want));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn kernels_agree_with_direct_evaluation(x in -30f64..30.0, y in 0f64..40.0, z in -3f64..3.0) {
        let k = Kernels::at(P);
        let (x, y, z) = (r(x), r(y), r(z));
        prop_assert!(kernel_agrees(KernelId::PsiCorrect, &[x.clone(), y.clone()], &k.psi(&x, &y)));
        prop_assert!(kernel_agrees(KernelId::Sigma, std::slice::from_ref(&x), &k.sigma(&x)));
        prop_assert!(kernel_agrees(KernelId::SigmaIter(3), std::slice::from_ref(&x), &k.sigma_iter(&x, 3)));
        prop_assert!(kernel_agrees(KernelId::S, std::slice::from_ref(&x), &k.s(&x)));
        prop_assert!(kernel_agrees(KernelId::GatePhi, &[x.clone(), y.clone()], &k.gate_phi(&x, &y)));
        let xs = [x.clone() / 10, y.clone() / 10, z.clone()];
        prop_assert!(kernel_agrees(KernelId::UpsilonK(3), &xs, &upsilon_k(&k, &xs, Variant::Analytic)));
    }

    #[test]
    fn interval_evaluation_encloses_points(x in -30f64..30.0, y in 0f64..40.0) {
        let (x, y) = (r(x), r(y));
        for id in [KernelId::PsiCorrect, KernelId::GatePhi, KernelId::Pair2] {
            let f = build_kernel(id);
            let b = [Interval::point(&x), Interval::point(&y)];
            prop_assert!(f.eval_interval(&b).unwrap().contains(&f.eval(&[x.clone(), y.clone()]).unwrap()));
        }
        let s3 = build_kernel(KernelId::SigmaIter(3));
        prop_assert!(s3.eval_interval(&[Interval::point(&x)]).unwrap().contains(&s3.eval(std::slice::from_ref(&x)).unwrap()));
    }
}

#[test]
fn print_parse_print_is_a_fixed_point() {
    for id in [KernelId::PsiCorrect, KernelId::Sigma, KernelId::SigmaIter(2), KernelId::S, KernelId::GatePhi, KernelId::Pair2, KernelId::UpsilonK(3)] {
        let f = build_kernel(id);
        let vars: Vec<&str> = f.vars.iter().map(String::as_str).collect();
        let once = f.to_infix();
        let again = Function::parse(&once, &vars).unwrap();
        assert_eq!(again.to_infix(), once);
    }
}

#[test]
fn ten_thousand_point_agreement_and_enclosure() {
    use rand::{Rng, SeedableRng};
    let k = Kernels::at(P);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let psi = build_kernel(KernelId::PsiCorrect);
    let sigma = build_kernel(KernelId::Sigma);
    let iter3 = build_kernel(KernelId::SigmaIter(3));
    let s = build_kernel(KernelId::S);
    let phi = build_kernel(KernelId::GatePhi);
    let pair = build_kernel(KernelId::Pair2);
    let ups = build_kernel(KernelId::UpsilonK(3));
    for _ in 0..10_000 {
        let (x, y, z) = (r(rng.gen_range(-30.0..30.0)), r(rng.gen_range(0.0..40.0)), r(rng.gen_range(0.0..5.0)));
        let xy = [x.clone(), y.clone()];
        let bx = [Interval::point(&x), Interval::point(&y)];
        let checks: [(&Function, Vec<Real>, Real); 5] = [
            (&psi, xy.to_vec(), k.psi(&x, &y)),
            (&sigma, vec![x.clone()], k.sigma(&x)),
            (&iter3, vec![x.clone()], k.sigma_iter(&x, 3)),
            (&s, vec![x.clone()], k.s(&x)),
            (&phi, xy.to_vec(), k.gate_phi(&x, &y)),
        ];
        for (f, args, want) in checks {
            let got = f.eval(&args).unwrap();
            assert!(agrees(f, &got, &want), "{} at {args:?}", f.to_infix());
            let boxes: Vec<Interval> = args.iter().map(Interval::point).collect();
            assert!(f.eval_interval(&boxes).unwrap().contains(&got));
        }
        let p = pair.eval(&xy).unwrap();
        assert!(pair.eval_interval(&bx).unwrap().contains(&p));
        let xs = [y.clone() / 4, z.clone(), x.abs() / 3];
        let want = upsilon_k(&k, &xs, Variant::Analytic);
        let got = ups.eval(&xs).unwrap();
        assert!(agrees(&ups, &got, &want), "{xs:?}");
    }
}
