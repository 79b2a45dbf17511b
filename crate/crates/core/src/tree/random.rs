use rand::Rng;
use rand_distr::{Distribution, Exp};

use super::{ArenaNode, UltrametricTree, DEFAULT_ULTRAMETRIC_TOL};

/// Draws a binary ultrametric tree from Kingman's coalescent, rescaled to
/// height 1. Leaves are labelled `T1..Tm` in creation order.
pub fn random_coalescent<R: Rng + ?Sized>(m: usize, rng: &mut R) -> UltrametricTree {
    assert!(m >= 2, "a coalescent tree needs at least two leaves");
    let mut arena: Vec<ArenaNode> = (1..=m)
        .map(|i| ArenaNode {
            label: Some(format!("T{i}")),
            ..Default::default()
        })
        .collect();
    // Heights measured backwards from the present (leaves at 0).
    let mut heights = vec![0.0; m];
    let mut lineages: Vec<usize> = (0..m).collect();
    let mut now = 0.0;
    while lineages.len() > 1 {
        let k = lineages.len() as f64;
        let rate = k * (k - 1.0) / 2.0;
        now += Exp::new(rate).expect("positive rate").sample(rng);
        let a = lineages.swap_remove(rng.random_range(0..lineages.len()));
        let b = lineages.swap_remove(rng.random_range(0..lineages.len()));
        arena.push(ArenaNode {
            children: vec![a, b],
            ..Default::default()
        });
        heights.push(now);
        lineages.push(arena.len() - 1);
    }
    let root = lineages[0];
    let total = heights[root];
    for v in 0..arena.len() {
        let kids = arena[v].children.clone();
        for c in kids {
            arena[c].length = Some((heights[v] - heights[c]) / total);
        }
    }
    UltrametricTree::from_arena(&arena, root, DEFAULT_ULTRAMETRIC_TOL)
        .expect("coalescent trees are ultrametric by construction")
}
