use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zazou::simbench::{
    evaluate, generate_base, wilcoxon_test, BaseDataConfig, SimScenario, Simulator, Variant, ROC_POINTS,
};
use zazou::tree::{random_coalescent, UltrametricTree};

#[test]
fn wilcoxon_hand_computed_value() {
    let values = [1.0, 2.0, 3.0, 10.0, 11.0, 12.0];
    let in_b = [false, false, false, true, true, true];
    let p = wilcoxon_test(&values, &in_b).unwrap();
    assert!((p - 0.080_856).abs() < 1e-5, "{p}");
}

fn mean_pairwise(d: &nalgebra::DMatrix<f64>, set: &[usize]) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0.0;
    for (a, &i) in set.iter().enumerate() {
        for &j in &set[a + 1..] {
            total += d[(i, j)];
            pairs += 1.0;
        }
    }
    total / pairs
}

/// Mean cophenetic spread of simulated DA sets and of uniform draws of the
/// same size.
fn spreads(tree: &UltrametricTree, variant: Variant) -> (f64, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let taxa = tree.leaf_labels().map(str::to_string).collect();
    let base = generate_base(taxa, &BaseDataConfig { n_samples: 10, ..Default::default() }, &mut rng).unwrap();
    let d = tree.geometry().distance;
    let mut sim = Simulator::new(tree, &base).unwrap();
    let scenario = SimScenario { fold_change: 5.0, variant, prop_da: 0.2, clusters: None };
    let (mut sim_spread, mut uni_spread) = (Vec::new(), Vec::new());
    for _ in 0..300 {
        let rep = sim.simulate(&scenario, &mut rng).unwrap();
        // Base rows follow the tree's leaf order here.
        let set: Vec<usize> = (0..rep.truth.len()).filter(|&i| rep.truth[i]).collect();
        if set.len() < 2 {
            continue;
        }
        sim_spread.push(mean_pairwise(&d, &set));
        let draw = rand::seq::index::sample(&mut rng, rep.truth.len(), set.len()).into_vec();
        uni_spread.push(mean_pairwise(&d, &draw));
    }
    let n = sim_spread.len() as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let diff: Vec<f64> = sim_spread.iter().zip(&uni_spread).map(|(a, b)| a - b).collect();
    let md = mean(&diff);
    let sd = (diff.iter().map(|x| (x - md).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    (mean(&sim_spread), mean(&uni_spread), md / (sd / n.sqrt()))
}

#[test]
fn positive_sets_are_clustered_negative_sets_are_not() {
    let tree = random_coalescent(40, &mut ChaCha8Rng::seed_from_u64(1));
    let (pos, uni, z) = spreads(&tree, Variant::Positive);
    assert!(pos < uni && z < -5.0, "positive {pos} vs uniform {uni} (z {z})");
    let (neg, uni, z) = spreads(&tree, Variant::Negative);
    assert!(z.abs() < 3.5, "negative {neg} vs uniform {uni} (z {z})");
}

#[test]
fn metrics_are_consistent() {
    let truth = [true, true, false, false, true, false, false, false];
    let rejected = [true, false, true, false, true, false, false, false];
    let keys: Vec<(f64, f64)> = [0.01, 0.2, 0.03, 0.5, 0.02, 0.9, 0.4, 0.04].iter().map(|&p| (p, p)).collect();
    let m = evaluate(&rejected, &keys, &truth);
    assert_eq!(m.rejections, m.true_positives + m.false_positives);
    assert_eq!(m.roc.len(), ROC_POINTS);
    assert_eq!((m.roc[0], m.roc[ROC_POINTS - 1]), (0.0, 1.0));
    assert!(m.roc.windows(2).all(|w| w[0] <= w[1]));
    assert!((m.tpr - 2.0 / 3.0).abs() < 1e-15 && (m.fdr - 1.0 / 3.0).abs() < 1e-15);
}
