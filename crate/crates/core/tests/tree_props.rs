use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zazou::design::{ou_covariance, phylo_design};
use zazou::tree::{parse_newick, random_coalescent};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn newick_round_trip_keeps_geometry(seed in 0u64..100_000, m in 2usize..40) {
        let tree = random_coalescent(m, &mut ChaCha8Rng::seed_from_u64(seed));
        let again = parse_newick(&tree.to_newick()).unwrap();
        prop_assert_eq!(again.leaf_labels().collect::<Vec<_>>(), tree.leaf_labels().collect::<Vec<_>>());
        let (a, b) = (tree.geometry(), again.geometry());
        prop_assert!((&a.distance - &b.distance).amax() < 1e-9);
    }

    #[test]
    fn distances_are_a_tree_metric(seed in 0u64..100_000, m in 4usize..20) {
        let tree = random_coalescent(m, &mut ChaCha8Rng::seed_from_u64(seed));
        let g = tree.geometry();
        let d = &g.distance;
        prop_assert!((d - d.transpose()).amax() == 0.0);
        prop_assert!(d.diagonal().iter().all(|&v| v == 0.0));
        for (i, j, k, l) in [(0, 1, 2, 3), (0, 2, 1, 3), (1, m - 1, 0, m - 2)] {
            let mut s = [d[(i, j)] + d[(k, l)], d[(i, k)] + d[(j, l)], d[(i, l)] + d[(j, k)]];
            s.sort_by(f64::total_cmp);
            prop_assert!(s[2] - s[1] <= 1e-9 * g.height.max(1.0));
        }
        prop_assert!(g.mrca.iter().all(|&t| (-1e-12..=g.height + 1e-12).contains(&t)));
    }

    #[test]
    fn incidence_rows_count_ancestors(seed in 0u64..100_000, m in 2usize..30) {
        let tree = random_coalescent(m, &mut ChaCha8Rng::seed_from_u64(seed));
        let u = tree.incidence();
        for i in 0..m {
            let mut node = tree.leaf_node(i);
            let mut depth = 1.0;
            while let Some(p) = tree.parent(node) {
                depth += 1.0;
                node = p;
            }
            prop_assert_eq!(u.row(i).sum(), depth);
        }
        prop_assert!(u.column(tree.root()).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn covariance_is_a_correlation_matrix(seed in 0u64..100_000, m in 2usize..30, log_alpha in -2.0f64..2.0) {
        let tree = random_coalescent(m, &mut ChaCha8Rng::seed_from_u64(seed));
        let s = ou_covariance(&tree.geometry(), 10f64.powf(log_alpha)).unwrap();
        prop_assert!(s.diagonal().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        prop_assert!(s.clone().symmetric_eigenvalues().min() > -1e-10);
        let t = phylo_design(&tree, 1.0);
        prop_assert_eq!(t.shape(), (m, tree.n_nodes()));
        prop_assert!(t.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}

#[test]
fn figure_one_shape() {
    let tree = parse_newick("(((T1:1,T2:1):1,T3:2):1,(T4:2,T5:2):1);").unwrap();
    assert_eq!((tree.n_leaves(), tree.n_internal(), tree.height()), (5, 4, 3.0));
    let expected = DMatrix::from_row_slice(
        5,
        9,
        &[
            1., 0., 1., 1., 1., 0., 0., 0., 0., //
            1., 0., 1., 1., 0., 1., 0., 0., 0., //
            1., 0., 1., 0., 0., 0., 1., 0., 0., //
            1., 1., 0., 0., 0., 0., 0., 1., 0., //
            1., 1., 0., 0., 0., 0., 0., 0., 1.,
        ],
    );
    assert_eq!(tree.incidence(), expected);
}
