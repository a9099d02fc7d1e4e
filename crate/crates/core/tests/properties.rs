use proptest::prelude::*;
use supergeo::connection::ChristoffelField;
use supergeo::geometry::{expand_coefficients, reassemble, Bundle, CoordinateChange, SuperPoint, TangentVector};
use supergeo::sampling::Sampler;
use supergeo::{CoordinateSystem, GrassmannNumber, Parity, SuperExpr};

const L: usize = 4;

fn coords() -> CoordinateSystem {
    CoordinateSystem::new(&["x1", "x2"], &["xi1", "xi2"]).unwrap()
}

fn grassmann(parity: Parity) -> impl Strategy<Value = GrassmannNumber> {
    prop::collection::vec(-2.0f64..2.0, 1 << L).prop_map(move |coefs| {
        let terms = coefs
            .into_iter()
            .enumerate()
            .map(|(m, c)| (m as u32, c))
            .filter(|(m, _)| match parity {
                Parity::Even => m.count_ones() % 2 == 0,
                Parity::Odd => m.count_ones() % 2 == 1,
                Parity::Inhomogeneous => true,
            });
        GrassmannNumber::from_terms(L, terms).unwrap()
    })
}

fn parity() -> impl Strategy<Value = Parity> {
    prop_oneof![Just(Parity::Even), Just(Parity::Odd)]
}

/// Source text of a random expression of the given parity.
fn expr_src(odd: bool, depth: u32) -> BoxedStrategy<String> {
    let leaf = if odd {
        prop_oneof![Just("xi1".to_string()), Just("xi2".to_string())].boxed()
    } else {
        prop_oneof![
            (-3i32..=3).prop_map(|c| format!("{c}")),
            (1i32..=9).prop_map(|c| format!("0.{c}")),
            Just("x1".to_string()),
            Just("x2".to_string()),
        ]
        .boxed()
    };
    if depth == 0 {
        return leaf;
    }
    let e = || expr_src(false, depth - 1);
    let o = || expr_src(true, depth - 1);
    if odd {
        prop_oneof![
            2 => leaf,
            1 => (o(), o()).prop_map(|(a, b)| format!("({a}) + ({b})")),
            1 => (o(), o()).prop_map(|(a, b)| format!("({a}) - ({b})")),
            1 => (e(), o()).prop_map(|(a, b)| format!("({a})*({b})")),
            1 => (o(), e()).prop_map(|(a, b)| format!("({a})*({b})")),
            1 => (o(), e()).prop_map(|(a, b)| format!("({a})/(2 + ({b})^2)")),
        ]
        .boxed()
    } else {
        prop_oneof![
            2 => leaf,
            1 => (e(), e()).prop_map(|(a, b)| format!("({a}) + ({b})")),
            1 => (e(), e()).prop_map(|(a, b)| format!("({a})*({b})")),
            1 => (o(), o()).prop_map(|(a, b)| format!("({a})*({b})")),
            1 => e().prop_map(|a| format!("sin({a})")),
            1 => e().prop_map(|a| format!("exp(0.3*({a}))")),
            1 => (e(), 1u32..=3).prop_map(|(a, n)| format!("({a})^{n}")),
            1 => e().prop_map(|a| format!("-({a})")),
        ]
        .boxed()
    }
}

fn any_expr() -> impl Strategy<Value = (bool, String)> {
    any::<bool>().prop_flat_map(|odd| expr_src(odd, 3).prop_map(move |s| (odd, s)))
}

fn point(seed: u64) -> Vec<GrassmannNumber> {
    Sampler::new(seed, L).point(&coords())
}

fn close(a: &GrassmannNumber, b: &GrassmannNumber, tol: f64) -> bool {
    a.distance(b) <= tol * (1.0 + a.norm_max().max(b.norm_max()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn grassmann_ring_laws(pa in parity(), pb in parity(),
                           a in grassmann(Parity::Inhomogeneous), b in grassmann(Parity::Inhomogeneous),
                           c in grassmann(Parity::Inhomogeneous)) {
        let a_h = if pa == Parity::Even { a.even_part() } else { a.odd_part() };
        let b_h = if pb == Parity::Even { b.even_part() } else { b.odd_part() };
        let sign = if pa == Parity::Odd && pb == Parity::Odd { -1.0 } else { 1.0 };
        prop_assert!(close(&(&a_h * &b_h), &(&b_h * &a_h).scale(sign), 1e-12));
        prop_assert!(close(&(&(&a * &b) * &c), &(&a * &(&b * &c)), 1e-12));
        prop_assert!(close(&(&a * &(&b + &c)), &(&(&a * &b) + &(&a * &c)), 1e-12));
        prop_assert!(close(&(&a * &b).conjugate(), &(&a.conjugate() * &b.conjugate()), 1e-12));
        prop_assert!(((&a * &b).body() - a.body() * b.body()).abs() <= 1e-12 * (1.0 + a.body().abs() * b.body().abs()));
    }

    #[test]
    fn grassmann_inverse(a in grassmann(Parity::Even), body in prop_oneof![0.5f64..3.0, -3.0f64..-0.5]) {
        let a = &a.soul() + &GrassmannNumber::scalar(L, body);
        let inv = a.inverse().unwrap();
        prop_assert!(close(&(&a * &inv), &GrassmannNumber::one(L), 1e-12));
        prop_assert!(close(&(&inv * &a), &GrassmannNumber::one(L), 1e-12));
    }

    #[test]
    fn odd_elements_square_to_zero(a in grassmann(Parity::Odd)) {
        prop_assert!((&a * &a).norm_max() <= 1e-12);
    }

    #[test]
    fn grassmann_display_parse_round_trip(a in grassmann(Parity::Inhomogeneous)) {
        let back = GrassmannNumber::parse(&a.to_string(), L).unwrap();
        prop_assert!(close(&a, &back, 1e-14));
    }

    #[test]
    fn expression_print_parse_round_trip((_, src) in any_expr(), seed in any::<u64>()) {
        let c = coords();
        let e = SuperExpr::parse(&src, &c).unwrap();
        let printed = e.to_string();
        let back = SuperExpr::parse(&printed, &c).unwrap();
        let x = point(seed);
        prop_assert!(close(&e.evaluate(&x).unwrap(), &back.evaluate(&x).unwrap(), 1e-12), "{src} -> {printed}");
        prop_assert_eq!(back.to_string(), printed);
    }

    #[test]
    fn parity_inference_matches_values((odd, src) in any_expr(), seed in any::<u64>()) {
        let c = coords();
        let e = SuperExpr::parse(&src, &c).unwrap();
        let expected = if odd { Parity::Odd } else { Parity::Even };
        prop_assert!(e.fits_parity(expected));
        prop_assert!(e.evaluate(&point(seed)).unwrap().has_parity(expected));
    }

    #[test]
    fn tape_matches_tree_evaluation((_, src) in any_expr(), seed in any::<u64>()) {
        let c = coords();
        let e = SuperExpr::parse(&src, &c).unwrap();
        let d = e.partial(0, Parity::Even).unwrap();
        let x = point(seed);
        let tape = supergeo::Tape::compile(&[e.clone(), d.clone()]);
        let vals = tape.eval(&x).unwrap();
        prop_assert!(close(&vals[0], &e.evaluate(&x).unwrap(), 1e-12));
        prop_assert!(close(&vals[1], &d.evaluate(&x).unwrap(), 1e-12));
    }

    #[test]
    fn even_derivative_matches_central_difference((_, src) in any_expr(), seed in any::<u64>(), var in 0usize..2) {
        let c = coords();
        let e = SuperExpr::parse(&src, &c).unwrap();
        let d = e.partial(var, Parity::Even).unwrap();
        let x = point(seed);
        let h = 1e-5;
        let shifted = |s: f64| {
            let mut y = x.clone();
            y[var] = &y[var] + &GrassmannNumber::scalar(L, s);
            e.evaluate(&y).unwrap()
        };
        let fd = (&shifted(h) - &shifted(-h)).scale(0.5 / h);
        let exact = d.evaluate(&x).unwrap();
        prop_assert!(fd.distance(&exact) <= 1e-5 * (1.0 + exact.norm_max()), "{src}: {fd} vs {exact}");
    }

    #[test]
    fn odd_derivatives_anticommute_and_square_to_zero((_, src) in any_expr(), seed in any::<u64>()) {
        let c = coords();
        let e = SuperExpr::parse(&src, &c).unwrap();
        let x = point(seed);
        let d1 = e.partial(2, Parity::Odd).unwrap();
        let d11 = d1.partial(2, Parity::Odd).unwrap();
        prop_assert!(d11.evaluate(&x).unwrap().norm_max() <= 1e-12);
        let d12 = d1.partial(3, Parity::Odd).unwrap();
        let d21 = e.partial(3, Parity::Odd).unwrap().partial(2, Parity::Odd).unwrap();
        prop_assert!(close(&d12.evaluate(&x).unwrap(), &d21.evaluate(&x).unwrap().scale(-1.0), 1e-12));
    }

    #[test]
    fn graded_leibniz((fo, fs) in any_expr(), (_, gs) in any_expr(), seed in any::<u64>(), var in 0usize..4) {
        let c = coords();
        let f = SuperExpr::parse(&fs, &c).unwrap();
        let g = SuperExpr::parse(&gs, &c).unwrap();
        let p = c.parity(var);
        let lhs = f.mul(&g).partial(var, p).unwrap();
        let sign = if fo && p == Parity::Odd { -1.0 } else { 1.0 };
        let rhs = f.partial(var, p).unwrap().mul(&g).add(&f.mul(&g.partial(var, p).unwrap()).scale(sign));
        let x = point(seed);
        prop_assert!(close(&lhs.evaluate(&x).unwrap(), &rhs.evaluate(&x).unwrap(), 1e-10));
    }

    #[test]
    fn coefficient_expansion_is_a_bijection((_, src) in any_expr(), seed in any::<u64>()) {
        let c = coords();
        let e = SuperExpr::parse(&src, &c).unwrap();
        let coeffs = expand_coefficients(&e, &c, &[2, 3]).unwrap();
        for f in coeffs.values() {
            prop_assert!(!f.depends_on(2) && !f.depends_on(3));
        }
        let back = reassemble(&coeffs, &c, &[2, 3]);
        let x = point(seed);
        prop_assert!(close(&e.evaluate(&x).unwrap(), &back.evaluate(&x).unwrap(), 1e-10));
    }

    #[test]
    fn pushforward_is_functorial(a in 0.1f64..0.5, b in -0.5f64..0.5, seed in any::<u64>()) {
        let c = coords();
        let mid = CoordinateSystem::new(&["u1", "u2"], &["eta1", "eta2"]).unwrap();
        let end = CoordinateSystem::new(&["y1", "y2"], &["zeta1", "zeta2"]).unwrap();
        let first = CoordinateChange::new(&c, &mid, vec![
            SuperExpr::parse(&format!("x1 + {a}*x2^2 + xi1*xi2"), &c).unwrap(),
            SuperExpr::parse(&format!("x2 + {b}*x1"), &c).unwrap(),
            SuperExpr::parse("xi1 + x1*xi2", &c).unwrap(),
            SuperExpr::parse(&format!("({a} + 1)*xi2"), &c).unwrap(),
        ]).unwrap();
        let second = CoordinateChange::new(&mid, &end, vec![
            SuperExpr::parse("exp(0.2*u1) + eta1*eta2", &mid).unwrap(),
            SuperExpr::parse(&format!("u2 + {b}*u1^2"), &mid).unwrap(),
            SuperExpr::parse("eta1 + u2*eta2", &mid).unwrap(),
            SuperExpr::parse("eta2 - u1*eta1", &mid).unwrap(),
        ]).unwrap();
        let composed = first.then(&second).unwrap();
        let mut s = Sampler::new(seed, L).with_soul_scale(0.2);
        let x = s.point(&c);
        let v = s.components(&c, 0);
        let t = TangentVector::new(SuperPoint::new(&c, x).unwrap(), v, Bundle::Even).unwrap();
        let two_step = second.pushforward(&first.pushforward(&t).unwrap()).unwrap();
        let direct = composed.pushforward(&t).unwrap();
        for (p, q) in two_step.components().iter().zip(direct.components()) {
            prop_assert!(close(p, q, 1e-10));
        }
        for (p, q) in two_step.base().values().iter().zip(direct.base().values()) {
            prop_assert!(close(p, q, 1e-10));
        }
    }

    #[test]
    fn difference_of_torsion_free_connections_is_graded_symmetric(
        (_, e1) in expr_src(false, 2).prop_map(|s| (false, s)),
        (_, e2) in expr_src(false, 2).prop_map(|s| (false, s)),
        (_, o1) in expr_src(true, 2).prop_map(|s| (true, s)),
        seed in any::<u64>(),
    ) {
        let c = coords();
        let parse = |s: &str| SuperExpr::parse(s, &c).unwrap();
        // symmetric pairs: Γ^1_{12} = Γ^1_{21}, Γ^3_{13} = Γ^3_{31}, Γ^1_{34} = −Γ^1_{43}
        let a = ChristoffelField::from_entries(&c, [
            ((0, 0, 1), parse(&e1)), ((0, 1, 0), parse(&e1)),
            ((2, 0, 2), parse(&e2)), ((2, 2, 0), parse(&e2)),
        ]).unwrap();
        let b = ChristoffelField::from_entries(&c, [
            ((0, 2, 3), parse(&e2)), ((0, 3, 2), parse(&e2).neg()),
            ((2, 0, 0), parse(&o1)),
        ]).unwrap();
        let samples = vec![point(seed), point(seed.wrapping_add(1))];
        prop_assert!(a.is_torsion_free(&samples, 1e-10).unwrap().0);
        prop_assert!(b.is_torsion_free(&samples, 1e-10).unwrap().0);
        let s = a.difference_tensor(&b).unwrap();
        prop_assert!(s.graded_symmetry_residual(&samples).unwrap() <= 1e-10);
    }
}
