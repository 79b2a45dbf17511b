//! Recover negative shifts on a tree with the sign-constrained lasso and its
//! scaled variant.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use zazou::design::{build_design, phylo_design};
use zazou::solver::{default_lambda0, scaled_lasso, constrained_lasso, ConstrainedLassoProblem, SolverOptions};
use zazou::tree::random_coalescent;

fn main() -> zazou::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let tree = random_coalescent(30, &mut rng);
    let geom = tree.geometry();
    let alpha = 2.0;

    // Two clades shift down.
    let t = phylo_design(&tree, alpha);
    let mut delta = DVector::zeros(tree.n_nodes());
    delta[1] = -3.0;
    delta[tree.n_internal() + 4] = -2.5;
    let sigma = zazou::design::ou_covariance(&geom, alpha)?;
    let noise: DVector<f64> = DVector::from_fn(30, |_, _| StandardNormal.sample(&mut rng));
    let z = &t * &delta + sigma.cholesky().expect("positive definite").l() * noise;

    let d = build_design(&tree, &geom, &z, alpha)?;
    let opts = SolverOptions::default();
    let lambda = 0.1 * ConstrainedLassoProblem::lambda_max(&d.x, &d.y);
    let problem = ConstrainedLassoProblem::new(&d.x, &d.y, &d.t, lambda)?;
    let fit = constrained_lasso(&problem, None, &opts);
    println!(
        "lambda {lambda:.4}: objective {:.6}, {} sweeps, max T*delta {:.2e}",
        fit.objective,
        fit.iterations,
        problem.max_violation(&fit.delta)
    );
    for (j, v) in fit.delta.iter().enumerate().filter(|(_, v)| v.abs() > 1e-8) {
        println!("  {:>4} {v:>8.4}  (true {:.1})", tree.node_name(j), delta[j]);
    }

    let lambda0 = default_lambda0(tree.n_nodes(), tree.n_leaves());
    let scaled = scaled_lasso(&d.x, &d.y, &d.t, lambda0, None, &opts)?;
    let sigma_hat = scaled.sigma.expect("scaled fit carries sigma");
    let resid = (&d.y - &d.x * &scaled.delta).norm() / 30f64.sqrt();
    println!("\nscaled lasso: sigma {sigma_hat:.6}, residual scale {resid:.6}, lambda {:.4}", scaled.lambda);
    println!("support {}", scaled.support_size(1e-10));
    Ok(())
}
