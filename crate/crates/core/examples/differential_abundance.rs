//! Simulate one differential-abundance replicate, test every taxon, and show
//! the PAM clusters the positive variant draws from.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zazou::simbench::{generate_base, pam_cluster, BaseDataConfig, SimScenario, Simulator, Variant};
use zazou::tree::random_coalescent;

fn main() -> zazou::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let tree = random_coalescent(40, &mut rng);
    let taxa: Vec<String> = tree.leaf_labels().map(str::to_string).collect();
    let base = generate_base(taxa, &BaseDataConfig::default(), &mut rng)?;

    let pam = pam_cluster(tree.geometry().cophenetic(), 4)?;
    println!("PAM cost by swap: {:?}", pam.history.iter().map(|c| format!("{c:.3}")).collect::<Vec<_>>());
    for (k, c) in pam.clusters().iter().enumerate() {
        let names: Vec<&str> = c.iter().filter_map(|&l| tree.label(tree.leaf_node(l))).collect();
        println!("  cluster {k}: {}", names.join(" "));
    }

    let scenario = SimScenario {
        fold_change: 5.0,
        variant: Variant::Positive,
        prop_da: 0.15,
        clusters: Some(4),
    };
    let mut sim = Simulator::new(&tree, &base)?;
    let rep = sim.simulate(&scenario, &mut rng)?;
    let p = rep.data.wilcoxon_pvalues()?;
    let b = rep.data.in_b.as_ref().map_or(0, |g| g.iter().filter(|&&x| x).count());
    println!("\n{} samples in group B of {}", b, rep.data.n_samples());
    println!("{:>5} {:>4} {:>10}", "taxon", "DA", "p");
    for (i, taxon) in rep.data.taxa.iter().enumerate() {
        if rep.truth[i] || p[i] < 0.01 {
            println!("{taxon:>5} {:>4} {:>10.2e}", rep.truth[i], p[i]);
        }
    }
    Ok(())
}
