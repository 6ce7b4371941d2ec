//! Recursive constructions against brute-force simulation.

use proptest::prelude::*;
use qtree::rng::RandomStream;
use qtree::su2::{enumerate_trajectories, node_table, statevector_trajectories};
use qtree::u1::reference::{monolithic_conditional, sample_recursive};
use qtree::u1::SiteState;

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn u1_recursion_matches_full_hilbert_space(
        seed in any::<u64>(),
        d in 1usize..=2,
        depth in 1usize..=3,
        p in 0.0f64..=1.0,
        mixed in any::<bool>(),
    ) {
        // d = 2 at depth 3 has a 4^8-dimensional leaf space; keep it pure.
        let mixed = mixed && !(d == 2 && depth == 3);
        let leaf = if mixed { SiteState::maximally_mixed(d) } else { SiteState::charge_superposition(d) }.unwrap();
        let (rec, top, prob) = sample_recursive(vec![leaf; 1 << depth], p, &mut RandomStream::new(seed).at(0, 0)).unwrap();
        let (rho, mono) = monolithic_conditional(&rec).unwrap();
        prop_assert!((top.density_matrix() - rho).camax() < 1e-9);
        prop_assert!((prob - mono).abs() <= 1e-9 * prob.max(1e-300));
    }

    #[test]
    fn su2_enumeration_matches_statevector(
        theta1 in 0.0f64..std::f64::consts::PI,
        theta2 in 0.0f64..std::f64::consts::PI,
        p in prop_oneof![Just(1.0), Just(0.0), 0.0f64..1.0],
        k in 1usize..=2,
    ) {
        let table = node_table(theta1, theta2, p).unwrap();
        let rec = enumerate_trajectories(&table, k);
        let sv = statevector_trajectories(theta1, theta2, p, k).unwrap();
        prop_assert_eq!(rec.len(), sv.len());
        for (r, (o, st)) in rec.iter().zip(&sv) {
            prop_assert_eq!(&r.outcomes, o);
            prop_assert!((r.weights.sigma - st.sigma).abs() < 1e-9);
            prop_assert!((r.weights.tau - st.tau).abs() < 1e-9);
        }
    }
}
