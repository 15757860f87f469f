//! Property tests for the exact kernel: ring laws, the time-shift
//! homomorphism, Jacobian chain rules, factorization round trips and
//! classifier invariance under linear conjugation.

use proptest::prelude::*;

use cremona3::arith::{rat, CoeffPoly, Expo, Rat};
use cremona3::forms::{
    extract_linear_factors, jacobian_det, HForm, LinMap,
};
use cremona3::maps::{classify, normal_form, PrvType, QuadMap};

fn small_poly() -> impl Strategy<Value = CoeffPoly> {
    // up to 4 terms in t and two generator pairs, small coefficients
    prop::collection::vec(
        (
            -6i64..7,
            0u16..3,
            0u16..2,
            0u16..2,
            0u16..2,
            0u16..2,
            0u16..2,
        ),
        0..4,
    )
    .prop_map(|terms| {
        let mut acc = CoeffPoly::zero();
        for (c, et, es, u0, v0, u1, v1) in terms {
            let e = Expo::new(vec![et, es, u0, v0, u1, v1]);
            acc = acc.add(&CoeffPoly::monomial(e, rat(c)));
        }
        acc
    })
}

fn t_only_poly() -> impl Strategy<Value = CoeffPoly> {
    prop::collection::vec((-6i64..7, 0u16..3, 0u16..2, 0u16..2), 0..4).prop_map(|terms| {
        let mut acc = CoeffPoly::zero();
        for (c, et, u0, u1) in terms {
            let e = Expo::new(vec![et, 0, u0, 0, u1, 0]);
            acc = acc.add(&CoeffPoly::monomial(e, rat(c)));
        }
        acc
    })
}

proptest! {
    #[test]
    fn ring_laws(a in small_poly(), b in small_poly(), c in small_poly()) {
        prop_assert_eq!(a.add(&b), b.add(&a));
        prop_assert_eq!(a.mul(&b), b.mul(&a));
        prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
        prop_assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
        prop_assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
    }

    #[test]
    fn time_shift_is_a_ring_homomorphism(a in t_only_poly(), b in t_only_poly()) {
        let lhs = a.mul(&b).substitute_time_shift().unwrap();
        let rhs = a
            .substitute_time_shift()
            .unwrap()
            .mul(&b.substitute_time_shift().unwrap());
        prop_assert_eq!(lhs, rhs);
        let sum = a.add(&b).substitute_time_shift().unwrap();
        let sum2 = a
            .substitute_time_shift()
            .unwrap()
            .add(&b.substitute_time_shift().unwrap());
        prop_assert_eq!(sum, sum2);
    }

    #[test]
    fn eval_commutes_with_arithmetic(
        a in small_poly(),
        b in small_poly(),
        tv in -4i64..5,
        sv in -4i64..5,
        g in prop::array::uniform4(-3i64..4),
    ) {
        let gt = [rat(g[0]), rat(g[1])];
        let gs = [rat(g[2]), rat(g[3])];
        let ev = |p: &CoeffPoly| p.eval_rat(&rat(tv), &rat(sv), &gt, &gs);
        prop_assert_eq!(ev(&a.mul(&b)), ev(&a) * ev(&b));
        prop_assert_eq!(ev(&a.add(&b)), ev(&a) + ev(&b));
    }
}

fn small_linear() -> impl Strategy<Value = HForm<Rat>> {
    prop::array::uniform4(-3i64..4)
        .prop_filter("nonzero", |v| v.iter().any(|&c| c != 0))
        .prop_map(|v| {
            HForm::linear(&[rat(v[0]), rat(v[1]), rat(v[2]), rat(v[3])])
        })
}

fn invertible_linmap() -> impl Strategy<Value = LinMap> {
    prop::array::uniform16(-3i64..4)
        .prop_map(|v| {
            LinMap::from_i64([
                [v[0], v[1], v[2], v[3]],
                [v[4], v[5], v[6], v[7]],
                [v[8], v[9], v[10], v[11]],
                [v[12], v[13], v[14], v[15]],
            ])
        })
        .prop_filter("invertible", |m| !num_traits::Zero::is_zero(&m.det()))
}

fn quad_components() -> impl Strategy<Value = [HForm<Rat>; 4]> {
    prop::sample::select(vec![
        PrvType::GenO,
        PrvType::GenX,
        PrvType::GenP,
        PrvType::TangO,
        PrvType::TangX,
        PrvType::TangP,
        PrvType::Osc2X,
    ])
    .prop_map(normal_form)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn jacobian_chain_rules(a in invertible_linmap(), b in invertible_linmap(), phi in quad_components()) {
        let base = QuadMap::new(phi, "base");
        // Jac(A . phi) = det(A) * Jac(phi)
        let left = base.apply_left(&a);
        prop_assert_eq!(
            jacobian_det(&left.components),
            jacobian_det(&base.components).scale(&a.det())
        );
        // Jac(phi . B)(x) = Jac(phi)(Bx) * det(B)
        let right = base.apply_right(&b);
        let jac_at_bx = jacobian_det(&base.components).substitute_linear(&b.rows_as_forms());
        prop_assert_eq!(
            jacobian_det(&right.components),
            jac_at_bx.scale(&b.det())
        );
    }

    #[test]
    fn factor_extraction_round_trip(
        l1 in small_linear(),
        l2 in small_linear(),
        m1 in 1u32..3,
        with_conic in any::<bool>(),
    ) {
        // product of linear factors and an irreducible quadratic
        let conic = HForm::from_terms(2, [
            ([2, 0, 0, 0], rat(1)),
            ([0, 2, 0, 0], rat(1)),
            ([0, 0, 2, 0], rat(1)),
            ([0, 0, 0, 2], rat(1)),
        ]);
        let mut input = l1.pow(m1).mul(&l2);
        if input.degree() > 4 {
            return Ok(());
        }
        if with_conic && input.degree() + 2 <= 4 {
            input = input.mul(&conic);
        }
        let fz = extract_linear_factors(&input).unwrap();
        prop_assert_eq!(fz.reassemble(), input.clone());
        if with_conic && input.degree() >= 2 {
            // the definite quadratic never splits off linear factors
            prop_assert!(fz.residual.degree() >= 2);
        }
    }

    #[test]
    fn quad_rank_congruence_invariant(b in invertible_linmap(), phi in quad_components()) {
        // the fourth component of each normal form is a quadratic form
        let q = phi[3].clone();
        let qb = q.substitute_linear(&b.rows_as_forms());
        prop_assert_eq!(q.quad_rank(), qb.quad_rank());
    }

    #[test]
    fn cross_minors_common_factor_invariant(phi in quad_components(), l in small_linear()) {
        let scaled = [
            phi[0].mul(&l),
            phi[1].mul(&l),
            phi[2].mul(&l),
            phi[3].mul(&l),
        ];
        prop_assert!(HForm::cross_minors_zero(&phi, &scaled));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn classify_is_conjugation_invariant(
        a in invertible_linmap(),
        b in invertible_linmap(),
        t in prop::sample::select(vec![
            PrvType::GenO, PrvType::GenX, PrvType::GenP,
            PrvType::TangO, PrvType::TangX, PrvType::TangP, PrvType::Osc2X,
        ]),
    ) {
        let m = QuadMap::from_type(t).apply_left(&a).apply_right(&b);
        let rep = classify(&m).unwrap();
        prop_assert_eq!(rep.prv_type, t);
    }
}
