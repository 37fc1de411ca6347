use num_traits::{Signed, Zero};
use proptest::prelude::*;

use rkpos::adversary::{first_step_counterexample, vertex_assignment};
use rkpos::gamma::{condition_at, gamma_of, Condition};
use rkpos::multilinear::DEFAULT_VAR_LIMIT;
use rkpos::polygen::{generate, generate_alt, StencilSpec};
use rkpos::rational::{q, Q};
use rkpos::tableau::ButcherTableau;

fn small_q() -> impl Strategy<Value = Q> {
    (-6i64..=12, 1i64..=6).prop_map(|(n, d)| q(n, d))
}

fn tableau(m: usize) -> impl Strategy<Value = ButcherTableau> {
    (proptest::collection::vec(small_q(), m * (m - 1) / 2), proptest::collection::vec(small_q(), m)).prop_map(
        move |(lower, b)| {
            let mut a = vec![vec![Q::zero(); m]; m];
            let mut it = lower.into_iter();
            for i in 0..m {
                for j in 0..i {
                    a[i][j] = it.next().unwrap();
                }
            }
            ButcherTableau::new(a, b).unwrap()
        },
    )
}

fn stencil() -> impl Strategy<Value = StencilSpec> {
    prop_oneof![Just(StencilSpec::upwind()), Just(StencilSpec::centered()), Just(StencilSpec::heat())]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generators_agree(t in (2usize..=3).prop_flat_map(tableau), s in stencil()) {
        let ps = generate(&t, &s).unwrap();
        prop_assert!(ps.same_polys(&generate_alt(&t, &s).unwrap()));
        // Constant data is a steady state of every consistent stencil.
        prop_assert!(ps.sums_to_one());
    }

    #[test]
    fn certificates_are_sound(t in (2usize..=3).prop_flat_map(tableau)) {
        let ps = generate(&t, &StencilSpec::upwind()).unwrap();
        let c = gamma_of(&ps, &q(1, 1 << 20)).unwrap();
        if let Some(lo) = c.lower.as_ref().filter(|x| x.is_positive()) {
            prop_assert!(condition_at(&ps, lo).unwrap().passed());
        }
        if let Some(w) = &c.witness {
            prop_assert!(w.value.is_negative());
            prop_assert!(matches!(condition_at(&ps, &w.delta).unwrap(), Condition::Fail(_)));
            // Each witness turns into an exactly replayable counterexample
            // whenever the stage times can carry the assignment.
            if !t.is_confluent() {
                let r = first_step_counterexample(&t, &StencilSpec::upwind(), w.poly, &vertex_assignment(&w.vertex, &w.delta)).unwrap();
                prop_assert_eq!(&r.negative_locus.as_ref().unwrap().value, &w.value);
                prop_assert_eq!(r.replay(&t).unwrap(), r.u1.clone());
            }
        }
        prop_assert!(ps.vars().len() <= DEFAULT_VAR_LIMIT);
    }
}
