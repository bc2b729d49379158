use flagmirror::combinatorics::{precedes, row_dominates, DegreeMatrix, Perm};
use flagmirror::numerics::{sample_params, ParamSet, Real, Scalar};
use proptest::prelude::*;

/// Hall's condition checked over every subset of the lower row.
fn dominates_by_subsets(upper: &[u32], lower: &[u32]) -> bool {
    // an injection exists iff every set of upper entries has enough
    // lower entries it can reach
    (0u32..1 << upper.len()).all(|mask| {
        let chosen: Vec<u32> = (0..upper.len()).filter(|k| mask >> k & 1 == 1).map(|k| upper[k]).collect();
        let reach = lower.iter().filter(|&&l| chosen.iter().any(|&u| u >= l)).count();
        reach >= chosen.len()
    })
}

fn perm_strategy(n: usize) -> impl Strategy<Value = Perm> {
    Just((1..=n).collect::<Vec<_>>())
        .prop_shuffle()
        .prop_map(|v| Perm::new(v).unwrap())
}

proptest! {
    #[test]
    fn row_domination_matches_hall(upper in prop::collection::vec(0u32..5, 1..5), extra in prop::collection::vec(0u32..5, 1..2)) {
        let mut lower = upper.iter().map(|u| (u * 7 + 3) % 5).collect::<Vec<_>>();
        lower.extend(extra);
        prop_assert_eq!(row_dominates(&upper, &lower), dominates_by_subsets(&upper, &lower));
    }

    #[test]
    fn admissibility_is_rowwise(r1 in prop::collection::vec(0u32..4, 1), r2 in prop::collection::vec(0u32..4, 2),
                                r3 in prop::collection::vec(0u32..4, 3), r4 in prop::collection::vec(0u32..4, 4)) {
        let rows = vec![r1, r2, r3, r4];
        let expect = (1..4).all(|i| dominates_by_subsets(&rows[i - 1], &rows[i]));
        prop_assert_eq!(DegreeMatrix::new(rows).unwrap().is_admissible(), expect);
    }

    #[test]
    fn compose_with_inverse_is_identity(i in perm_strategy(5)) {
        prop_assert_eq!(i.compose(&i.inverse()), Perm::identity(5));
        prop_assert_eq!(i.inverse().inverse(), i.clone());
    }

    #[test]
    fn precedes_is_irreflexive_and_antisymmetric(i in perm_strategy(4), j in perm_strategy(4)) {
        prop_assert!(!precedes(&i, &i));
        prop_assert!(!(precedes(&i, &j) && precedes(&j, &i)));
    }

    #[test]
    fn tolerance_has_floor(seed in 0u64..50, n in 2usize..4) {
        let p = ParamSet::<Real>::from_spec(&sample_params(n, seed, 40, 2).unwrap()).unwrap();
        let q: f64 = p.q.to_f64().abs();
        let expect = (100.0 * q.powi(39)).max(1e-90);
        prop_assert!((p.tolerance() / expect - 1.0).abs() < 1e-6);
    }
}
