//! Build the whitened regression for a random tree and check that the
//! whitening factor undoes the OU covariance.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zazou::design::build_design;
use zazou::inference::default_alpha_grid;
use zazou::tree::random_coalescent;

fn main() -> zazou::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let tree = random_coalescent(40, &mut rng);
    let geom = tree.geometry();
    let z = DVector::from_fn(tree.n_leaves(), |i, _| if i < 5 { -2.0 } else { 0.3 });

    println!("{:>10} {:>12} {:>12} {:>10}", "alpha", "|RSR'-I|", "log|S|", "jittered");
    for alpha in default_alpha_grid(tree.height()) {
        let d = build_design(&tree, &geom, &z, alpha)?;
        let r = d.r();
        let err = (r * &d.sigma * r.transpose() - DMatrix::identity(40, 40)).amax();
        println!("{alpha:>10.4} {err:>12.2e} {:>12.4} {:>10}", d.log_det(), d.whitening.jittered);
    }

    let d = build_design(&tree, &geom, &z, 1.0)?;
    println!("\nX is {}x{}; y = Rz has norm {:.4}", d.x.nrows(), d.x.ncols(), d.y.norm());
    Ok(())
}
