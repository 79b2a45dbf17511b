//! Full correction on simulated p-values: a clade with signal on a random
//! tree, compared with Benjamini-Hochberg.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use zazou::design::ou_covariance;
use zazou::inference::{bh_adjust, correct, normal_cdf, CorrectionConfig};
use zazou::tree::random_coalescent;

fn main() -> zazou::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = 50;
    let tree = random_coalescent(m, &mut rng);
    let geom = tree.geometry();

    // Null z-scores correlated along the tree, shifted down on one clade.
    let sigma = ou_covariance(&geom, 1.0)?;
    let noise = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
    let mut z = sigma.cholesky().expect("positive definite").l() * noise;
    let clade = &tree.clades()[1];
    for &leaf in clade {
        z[leaf] -= 6.0;
    }
    let labels: Vec<String> = tree.leaf_labels().map(str::to_string).collect();
    let p: Vec<f64> = z.iter().map(|&v| normal_cdf(v)).collect();

    let config = CorrectionConfig {
        fdr: 0.05,
        ..CorrectionConfig::default()
    };
    let result = correct(&tree, &labels, &p, &config)?;
    let bh = bh_adjust(&p);

    println!(
        "alpha {:.3}, lambda {:.4}, sigma {:.3}, t* {:.3} (fallback {})",
        result.alpha_hat, result.lambda_hat, result.sigma_hat, result.threshold.t_star, result.threshold.fallback
    );
    println!("{:>5} {:>6} {:>10} {:>10} {:>10} {:>7}", "leaf", "signal", "p", "q(BH)", "q(tree)", "t");
    for i in 0..m {
        let signal = clade.contains(&i);
        if signal || result.rejected[i] || bh[i] <= 0.05 {
            println!("{:>5} {:>6} {:>10.2e} {:>10.2e} {:>10.2e} {:>7.3}", labels[i], signal, p[i], bh[i], result.q_ss[i], result.t_scores[i]);
        }
    }
    println!(
        "\n{} true, {} rejected by BH, {} by the tree correction",
        clade.len(),
        bh.iter().filter(|&&q| q <= 0.05).count(),
        result.n_rejected()
    );
    for w in &result.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
