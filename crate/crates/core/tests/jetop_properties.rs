use proptest::prelude::*;
use weingarten_core::jetop::{
    curvatures, discriminant_poly, operator_derivs, operator_derivs_fd, operator_value, GraphJet, Sym2,
};
use weingarten_core::relation::RelationSpec;

fn builtins() -> Vec<RelationSpec> {
    vec![
        RelationSpec::minimal(),
        RelationSpec::linear(-0.25).unwrap(),
        RelationSpec::linear(-0.5).unwrap(),
        RelationSpec::linear(-2.0).unwrap(),
        RelationSpec::linear(-4.0).unwrap(),
        RelationSpec::exp_blend(0.25).unwrap(),
        RelationSpec::exp_blend(0.6).unwrap(),
    ]
}

fn jet() -> impl Strategy<Value = GraphJet> {
    (-2.0..2.0f64, -2.0..2.0f64, -3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64)
        .prop_map(|(p1, p2, a, b, c)| GraphJet::new([p1, p2], Sym2::new(a, b, c)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn discriminant_routes_agree(j in jet()) {
        let w = 1.0 + j.p[0] * j.p[0] + j.p[1] * j.p[1];
        let g = discriminant_poly(&j).value;
        let d = 4.0 * w.powi(3) * curvatures(&j).disc;
        prop_assert!(g >= -1e-10 * (1.0 + g.abs()));
        prop_assert!((g - d).abs() <= 1e-9 * (1.0 + g.abs()));
    }

    #[test]
    fn curvatures_are_rotation_invariant(j in jet(), angle in 0.0..6.3f64) {
        let (a, b) = (curvatures(&j), curvatures(&j.rotated(angle)));
        prop_assert!((a.kappa1 - b.kappa1).abs() <= 1e-12 * (1.0 + a.kappa1.abs()));
        prop_assert!((a.kappa2 - b.kappa2).abs() <= 1e-12 * (1.0 + a.kappa2.abs()));
    }

    #[test]
    fn operator_is_rotation_invariant(j in jet(), angle in 0.0..6.3f64, which in 0usize..7) {
        let spec = &builtins()[which];
        let f0 = operator_value(spec, &j, 1e-8).unwrap();
        let f1 = operator_value(spec, &j.rotated(angle), 1e-8).unwrap();
        prop_assert!((f0 - f1).abs() <= 1e-12 * f0.abs().max(1.0));
    }

    #[test]
    fn analytic_derivatives_match_differences(j in jet(), which in 0usize..7) {
        let cd = curvatures(&j);
        prop_assume!(cd.disc > 1e-2 && cd.kappa1.abs() > 1e-3);
        let spec = &builtins()[which];
        let a = operator_derivs(spec, &j, 1e-8).unwrap().gradient();
        let f = operator_derivs_fd(spec, &j, 1e-8, 1e-6).unwrap().gradient();
        let scale = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for i in 0..5 {
            prop_assert!((a[i] - f[i]).abs() <= 1e-5 * scale, "component {i}: {} vs {}", a[i], f[i]);
        }
    }

    #[test]
    fn operator_is_elliptic(j in jet(), which in 0usize..7) {
        let spec = &builtins()[which];
        prop_assume!(curvatures(&j).disc > 1e-4);
        let (hi, lo) = operator_derivs(spec, &j, 1e-8).unwrap().df_dm.eigenvalues();
        prop_assert!(lo > 0.0 && hi >= lo);
    }

    #[test]
    fn relation_jets_solve_the_unregularized_operator(
        k1 in 0.01..3.0f64, neg in any::<bool>(), p1 in -2.0..2.0f64, p2 in -2.0..2.0f64,
        angle in 0.0..6.3f64, which in 0usize..7,
    ) {
        let spec = &builtins()[which];
        let k1 = if neg { -k1 } else { k1 };
        let k2 = spec.eval_f(k1).unwrap();
        let j = GraphJet::with_curvatures([p1, p2], k1, k2, angle);
        let f = operator_value(spec, &j, 0.0).unwrap();
        prop_assert!(f.abs() <= 1e-9 * (1.0 + k1.abs()), "F = {f}");
    }

    #[test]
    fn planes_are_exact_zeros(p1 in -5.0..5.0f64, p2 in -5.0..5.0f64, which in 0usize..7) {
        let spec = &builtins()[which];
        let j = GraphJet::new([p1, p2], Sym2::ZERO);
        prop_assert_eq!(operator_value(spec, &j, 1e-8).unwrap(), 0.0);
    }

    #[test]
    fn relations_are_involutions_in_the_slope_band(t in -5.0..5.0f64, which in 0usize..7) {
        let spec = &builtins()[which];
        let ft = spec.eval_f(t).unwrap();
        prop_assert!((spec.eval_f(ft).unwrap() - t).abs() <= 1e-10 * (1.0 + t.abs()));
        let d = spec.eval_fprime(t).unwrap();
        prop_assert!(d <= -spec.lambda * (1.0 - 1e-12) && d >= -(1.0 + 1e-12) / spec.lambda);
    }
}

#[test]
fn discriminant_gradient_is_bounded_by_its_square_root() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let mut counted = 0;
    while counted < 10_000 {
        let mut v = [0.0f64; 5];
        for x in &mut v {
            *x = rng.random_range(-1.0..1.0);
        }
        let norm: f64 = v.iter().map(|x| x.abs()).sum();
        let scale = rng.random_range(0.0..1.0) / norm;
        v.iter_mut().for_each(|x| *x *= scale);
        let g = discriminant_poly(&GraphJet::from_array(v)).value;
        if g < 1e-8 {
            continue;
        }
        let h = 1e-6;
        let grad2: f64 = (0..5)
            .map(|i| {
                let (mut a, mut b) = (v, v);
                a[i] += h;
                b[i] -= h;
                let d = (discriminant_poly(&GraphJet::from_array(a)).value - discriminant_poly(&GraphJet::from_array(b)).value)
                    / (2.0 * h);
                d * d
            })
            .sum();
        worst = worst.max(grad2.sqrt() / g.sqrt());
        counted += 1;
    }
    assert!(worst.is_finite() && worst < 50.0, "sup |∇G|/√G = {worst}");
}
