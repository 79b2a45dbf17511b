//! Debias a scaled-lasso fit with both constructions and report intervals
//! and leaf-level p-values.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use zazou::debias::{confidence_intervals, debias, score_system_ci, score_system_ss, DEFAULT_GAMMA};
use zazou::solver::{default_lambda0, scaled_lasso, SolverOptions};

fn main() -> zazou::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (m, n) = (100, 20);
    let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };
    let x = DMatrix::from_fn(m, n, |_, _| gauss());
    let mut truth = DVector::zeros(n);
    truth[0] = 1.5;
    truth[1] = -1.0;
    let y = &x * &truth + DVector::from_fn(m, |_, _| gauss());
    // No sign constraints and identity mean map.
    let t = DMatrix::zeros(0, n);

    let fit = scaled_lasso(&x, &y, &t, default_lambda0(n, m), None, &SolverOptions::default())?;
    println!("sigma {:.4}, lasso support {}", fit.sigma.unwrap_or(f64::NAN), fit.support_size(1e-10));

    let id = DMatrix::identity(n, n);
    for system in [score_system_ss(&x, None)?, score_system_ci(&x, DEFAULT_GAMMA)?] {
        let d = debias(&fit, &system, &x, &y, &id)?;
        let ci = confidence_intervals(&d, 0.05)?;
        println!("\n{} (gamma {:?}, flagged {})", system.method.tag(), system.gamma, system.n_flagged());
        for j in 0..4 {
            let (lo, hi) = ci.shifts[j];
            println!(
                "  coef {j}: lasso {:>7.4} debiased {:>7.4}  95% [{lo:>7.4}, {hi:>7.4}]  truth {:>4.1}",
                fit.delta[j], d.delta[j], truth[j]
            );
        }
    }
    Ok(())
}
