//! A small positive/negative campaign comparing the corrections by TPR,
//! FDR and AUC.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zazou::simbench::{
    generate_base, run_campaign, summarize, BaseDataConfig, CampaignConfig, Method, SimScenario, Variant,
};
use zazou::tree::random_coalescent;

fn main() -> zazou::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let tree = random_coalescent(30, &mut rng);
    let taxa = tree.leaf_labels().map(str::to_string).collect();
    let base = generate_base(taxa, &BaseDataConfig::default(), &mut rng)?;

    let scenarios = [Variant::Positive, Variant::Negative]
        .map(|variant| SimScenario {
            fold_change: 10.0,
            variant,
            prop_da: 0.15,
            clusters: None,
        })
        .to_vec();
    let config = CampaignConfig {
        methods: vec![Method::Raw, Method::Bh, Method::By, Method::ZazouSs],
        ..CampaignConfig::new(scenarios.clone(), 4, 100)
    };
    let rows = run_campaign(&tree, &base, &config)?;

    println!("{:>9} {:>9} {:>6} {:>6} {:>6}", "variant", "method", "TPR", "FDR", "AUC");
    for s in summarize(&rows) {
        println!(
            "{:>9} {:>9} {:>6.3} {:>6.3} {:>6.3}",
            scenarios[s.scenario].variant.name(),
            s.method,
            s.mean_tpr,
            s.mean_fdr,
            s.mean_auc
        );
    }
    Ok(())
}
